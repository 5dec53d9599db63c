"""Piecewise deterministic Markov process simulation.

Between jumps the continuous state follows the mode's flow. Jumps happen at
a rate lambda(x), realized by thinning against the declared bound, or when
the flow leaves the mode's box domain. Post-jump states come from the reset
kernel.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import KernelSamplingError, RateBoundError, ZenoSuspected
from .flow import _check_finite, rk4_step
from .specs import (
    FORCED,
    SPONTANEOUS,
    ConstantField,
    HybridState,
    JumpRecord,
    ModeSpec,
    PointMass,
    Trajectory,
)

_BISECT_ITERS = 60
_RATE_SLACK = 1e-12


def _exit_step(field, y, h):
    if isinstance(field, ConstantField):
        return y + field.c * h
    return rk4_step(field, y, h)


class FlowCursor:
    """Walks a flow forward in steps of at most ``dt``.

    When a box is supplied, ``advance`` stops at the first exit, located by
    bisection on the step length of the step that left the box.
    """

    def __init__(self, mode_spec: ModeSpec, t: float, y, dt: float):
        self.ms = mode_spec
        self.t = float(t)
        self.y = np.array(y, dtype=float)
        self.dt = dt

    def advance(self, target: float, watch_boundary: bool = False) -> bool:
        """Move to ``target``; return True if stopped early on the boundary."""
        field = self.ms.field
        while self.t < target:
            h = min(self.dt, target - self.t)
            y1 = _exit_step(field, self.y, h)
            _check_finite(y1)
            if watch_boundary and not self.ms.inside(y1):
                lo_h, hi_h = 0.0, h
                for _ in range(_BISECT_ITERS):
                    mid = 0.5 * (lo_h + hi_h)
                    if mid <= lo_h or mid >= hi_h:
                        break
                    if self.ms.inside(_exit_step(field, self.y, mid)):
                        lo_h = mid
                    else:
                        hi_h = mid
                self.y = _exit_step(field, self.y, hi_h)
                self.t = self.t + hi_h
                return True
            self.y = y1
            # land exactly on the target to keep grid times clean
            self.t = target if h == target - self.t else self.t + h
        return False


def _rate_ratio(rate, y) -> float:
    lam = rate(y)
    bound = rate.bound
    if lam > bound * (1 + _RATE_SLACK) + _RATE_SLACK:
        raise RateBoundError(f"rate {lam} exceeds declared bound {bound}")
    return lam / bound


def sample_sojourn(spec, start: HybridState, rng, horizon: float, dt: float = 1e-3):
    """Draw a sojourn time by thinning; None if no jump before ``horizon``.

    Proposals are Exp(bound) increments along the flow, each accepted with
    probability lambda(y)/bound. With a constant rate equal to its bound the
    first proposal is returned without drawing an acceptance variate.
    """
    rate = spec.rate
    bound = rate.bound
    if not bound > 0:
        raise ValueError("thinning needs a positive rate bound")
    cursor = FlowCursor(spec.modes[start.mode], 0.0, start.position, dt)
    s = 0.0
    while True:
        s += float(rng.exponential(1.0 / bound))
        if s > horizon:
            return None
        if rate.is_constant:
            return s
        cursor.advance(s)
        if rng.random() < _rate_ratio(rate, cursor.y):
            return s


def sample_reset(kernel, current: HybridState, rng, modes=None, max_tries: int = 1000) -> HybridState:
    """Post-jump state drawn from ``kernel``.

    The target mode is the kernel's mode or, if it names none, the current
    mode. When ``modes`` is given the draw is repeated until it lies strictly
    inside the target mode's domain.
    """
    mode = current.mode if kernel.mode is None else kernel.mode
    ms = None if modes is None else modes[mode]
    tries = 1 if isinstance(kernel, PointMass) else max_tries
    for _ in range(tries):
        y = kernel.sample_position(rng)
        if ms is None or ms.inside(y):
            return HybridState(mode, y)
    raise KernelSamplingError(f"reset kernel produced no state inside mode {mode!r}")


def _grid_after(t: float, dt: float) -> float:
    k = math.floor(t / dt) + 1
    while k * dt <= t:
        k += 1
    return k * dt


def simulate_pdmp(
    spec,
    x0: HybridState,
    horizon: float,
    dt: float,
    rng,
    max_jumps: int = 10_000,
) -> Trajectory:
    """Simulate one PDMP path on [0, horizon].

    Samples are recorded at multiples of ``dt``, at ``horizon``, and at every
    jump time (post-jump state).
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not spec.modes[x0.mode].inside(x0.position):
        raise ValueError("initial state is not inside its mode domain")
    rate = spec.rate
    bound = rate.bound
    traj = Trajectory()
    traj.append(0.0, x0)
    state = x0
    t0 = 0.0
    while True:
        ms = spec.modes[state.mode]
        cursor = FlowCursor(ms, t0, state.position, dt)
        prop = t0 + float(rng.exponential(1.0 / bound)) if bound > 0 else math.inf
        jump = None
        while jump is None:
            nxt = min(_grid_after(cursor.t, dt), horizon)
            target = min(nxt, prop)
            if cursor.advance(target, watch_boundary=ms.has_boundary):
                jump = FORCED
            elif cursor.t == prop:
                if rate.is_constant or rng.random() < _rate_ratio(rate, cursor.y):
                    jump = SPONTANEOUS
                else:
                    prop = cursor.t + float(rng.exponential(1.0 / bound))
            if jump is None and cursor.t == nxt:
                traj.append(cursor.t, HybridState(state.mode, cursor.y.copy()))
                if cursor.t >= horizon:
                    return traj
        if len(traj.jumps) >= max_jumps:
            raise ZenoSuspected(
                f"more than {max_jumps} jumps before t={cursor.t:.6g} (horizon {horizon})"
            )
        pre = HybridState(state.mode, cursor.y.copy())
        post = sample_reset(spec.kernel, pre, rng, spec.modes)
        traj.jumps.append(JumpRecord(cursor.t, pre, post, jump))
        traj.append(cursor.t, post)
        state, t0 = post, cursor.t
        if t0 >= horizon:
            return traj
