"""Deterministic seeding and counter-based random streams.

Every (agent, replication) pair owns a 64-bit stream key derived from the
master seed with SplitMix64.  Values are addressed by counter, so the n-th
draw of a stream can be computed for thousands of lanes at once without
keeping per-lane generator objects, and results never depend on how many
other lanes are simulated alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SUBSTREAM_MULT = 0xD1B54A32D192ED03

AGENT_BITS = 20
# Wiener components reserved per step in the noise counter space.
NOISE_STRIDE = 64

NOISE = 1
RESET = 2
AUX = 3

_G = np.uint64(GOLDEN_GAMMA)
_M1 = np.uint64(_MIX1)
_M2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0**-53


def _mix(x: int) -> int:
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def splitmix64(x: int) -> int:
    """First output of a SplitMix64 generator seeded with ``x``."""
    return _mix((x + GOLDEN_GAMMA) & MASK64)


def stream_key(master: int, agent: int, replication: int) -> int:
    """Stream key for ``(agent, replication)`` under ``master``.

    Distinct pairs give distinct keys while ``agent < 2**20``.
    """
    if agent < 0 or replication < 0:
        raise ValueError("agent and replication must be non-negative")
    counter = (agent << AGENT_BITS) + replication + 1
    return splitmix64((master & MASK64) ^ ((GOLDEN_GAMMA * counter) & MASK64))


def substream(key: int, purpose: int) -> int:
    return splitmix64(key ^ ((purpose * _SUBSTREAM_MULT) & MASK64))


def _u64_to_unit(x):
    # (k + 0.5) / 2**53 lies strictly inside (0, 1) and is exact in float64.
    return ((x >> 11) + 0.5) * _INV53


@dataclass(frozen=True)
class SeedPolicy:
    master: int

    def stream(self, agent: int, replication: int = 0) -> int:
        return stream_key(self.master, agent, replication)

    def generator(self, agent: int = 0, replication: int = 0) -> np.random.Generator:
        """A numpy Generator keyed by the same stream, for scalar helpers."""
        return np.random.default_rng([self.stream(agent, replication), 0x5EED])


class CounterStream:
    """Sequential view of one counter-addressed stream.

    Duck-types the parts of :class:`numpy.random.Generator` used by the
    kernel catalog (``random`` and ``standard_normal``).
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    def next_u64(self) -> int:
        self.counter += 1
        return _mix((self.key + self.counter * GOLDEN_GAMMA) & MASK64)

    def _uniforms(self, n: int) -> list[float]:
        return [((self.next_u64() >> 11) + 0.5) * _INV53 for _ in range(n)]

    def random(self, size=None):
        if size is None:
            return self._uniforms(1)[0]
        n = size if isinstance(size, int) else math.prod(size)
        return np.array(self._uniforms(n)).reshape(size)

    def standard_normal(self, size=None):
        if size is None:
            return float(ndtri(np.array(self._uniforms(1)))[0])
        n = size if isinstance(size, int) else math.prod(size)
        return ndtri(np.array(self._uniforms(n))).reshape(size)

    def exponential(self, scale=1.0, size=None):
        u = self.random(size)
        return -np.log(u) * scale if size is not None else -float(np.log(u)) * scale


def lane_keys(keys) -> np.ndarray:
    return np.asarray([k & MASK64 for k in keys], dtype=np.uint64)


def lane_u64(keys: np.ndarray, index) -> np.ndarray:
    """``index``-th (0-based) value of each lane's stream.

    ``index`` may be an int or an array broadcastable against ``keys``.
    """
    if np.isscalar(index):
        offset = np.uint64(((int(index) + 1) * GOLDEN_GAMMA) & MASK64)
    else:
        offset = (np.asarray(index, dtype=np.uint64) + np.uint64(1)) * _G
    x = keys + offset
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def lane_uniforms(keys: np.ndarray, index) -> np.ndarray:
    x = lane_u64(keys, index)
    return ((x >> _S11).astype(np.float64) + 0.5) * _INV53


def lane_normals(keys: np.ndarray, step: int, m: int) -> np.ndarray:
    """Standard normals for one step: shape ``(len(keys), m)``.

    Component ``c`` of step ``n`` sits at counter ``n * NOISE_STRIDE + c``,
    independent of how many components other lanes use.
    """
    if m > NOISE_STRIDE:
        raise ValueError(f"at most {NOISE_STRIDE} Wiener components supported")
    base = step * NOISE_STRIDE
    idx = np.arange(base, base + m, dtype=np.uint64)
    u = lane_uniforms(keys[:, None], idx[None, :])
    return ndtri(u)
