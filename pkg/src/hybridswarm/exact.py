"""Correctly rounded sum of three doubles.

``sum3(a, b, c)`` returns the float nearest to the exact real a + b + c
(ties to even), so the result does not depend on argument order. The
algorithm is TwoSum-based with a round-to-odd middle step.
"""

from __future__ import annotations

import numpy as np


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _add_round_odd(x, y):
    s, e = two_sum(x, y)
    s = np.asarray(s, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    even = (s.view(np.int64) & 1) == 0
    fix = (e != 0) & even
    if np.any(fix):
        s = np.where(fix, np.nextafter(s, np.where(e > 0, np.inf, -np.inf)), s)
    return s


def sum3(a, b, c):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    uh, ul = two_sum(b, c)
    th, tl = two_sum(a, uh)
    v = _add_round_odd(tl, ul)
    return th + v
