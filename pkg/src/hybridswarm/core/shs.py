"""Diffusion-type stochastic hybrid systems.

Euler-Maruyama between jumps. Spontaneous jumps fire with per-step
probability 1 - exp(-lambda dt); forced jumps fire when the discretized path
leaves the mode box, the crossing located by linear interpolation inside the
step. With ``bridge=True`` a Brownian-bridge test also catches excursions
that start and end inside the box within one step.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ZenoSuspected
from .flow import _check_finite
from .pdmp import sample_reset
from .specs import FORCED, SPONTANEOUS, HybridState, JumpRecord, Trajectory


def crossing_fraction(y0, y1, lo, hi):
    """Earliest fraction of the step at which the chord y0 -> y1 leaves (lo, hi).

    Works on the last axis; returns ``inf`` where the endpoint is inside.
    Starting points already outside give 0.
    """
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    dy = y1 - y0
    with np.errstate(divide="ignore", invalid="ignore"):
        th_hi = np.where(y1 >= hi, (hi - y0) / dy, np.inf)
        th_lo = np.where(y1 <= lo, (lo - y0) / dy, np.inf)
    th = np.minimum(th_hi, th_lo)
    th = np.where(np.isnan(th), 0.0, th)
    return np.clip(th.min(axis=-1), 0.0, None)


def bridge_cross_prob(y0, y1, lo, hi, var_dt):
    """Probability that a Brownian bridge between two interior points touches a face.

    ``var_dt`` is the per-component variance accumulated over the step.
    Faces and components are treated independently.
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        p_hi = np.where(
            np.isfinite(hi) & (var_dt > 0), np.exp(-2.0 * (hi - y0) * (hi - y1) / var_dt), 0.0
        )
        p_lo = np.where(
            np.isfinite(lo) & (var_dt > 0), np.exp(-2.0 * (y0 - lo) * (y1 - lo) / var_dt), 0.0
        )
    stay = np.prod((1.0 - p_hi) * (1.0 - p_lo), axis=-1)
    return 1.0 - stay


def simulate_shs(
    spec,
    x0: HybridState,
    horizon: float,
    dt: float,
    rng,
    max_jumps: int = 10_000,
    bridge: bool = False,
) -> Trajectory:
    """Simulate one SHS path; samples at every step end and every jump.

    Draw order per step: Wiener increment, bridge variate (if enabled),
    spontaneous-jump variate (if a rate is configured), then reset draws.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not spec.modes[x0.mode].inside(x0.position):
        raise ValueError("initial state is not inside its mode domain")
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * horizon:
        raise ValueError("horizon must be a whole number of steps")
    traj = Trajectory()
    traj.append(0.0, x0)
    q, y = x0.mode, x0.position.copy()
    sqdt = math.sqrt(dt)
    for n in range(n_steps):
        ms = spec.modes[q]
        t_start, t_end = n * dt, (n + 1) * dt
        sigma = ms.diffusion(y)
        noise = np.asarray(rng.standard_normal(sigma.shape[1]), dtype=float)
        y1 = y + ms.field(y) * dt + (sigma @ noise) * sqdt
        _check_finite(y1)
        cause = None
        if not ms.inside(y1):
            th = float(crossing_fraction(y, y1, ms.lo, ms.hi))
            t_hit = t_start + th * dt
            pre = y + th * (y1 - y)
            cause = FORCED
        elif bridge and ms.has_boundary:
            var_dt = np.sum(sigma * sigma, axis=1) * dt
            if rng.random() < float(bridge_cross_prob(y, y1, ms.lo, ms.hi, var_dt)):
                t_hit = t_start + 0.5 * dt
                pre = 0.5 * (y + y1)
                cause = FORCED
        if cause is None and spec.rate is not None:
            p = -math.expm1(-spec.rate(y) * dt)
            if rng.random() < p:
                t_hit, pre, cause = t_end, y1, SPONTANEOUS
        if cause is None:
            y = y1
            traj.append(t_end, HybridState(q, y.copy()))
            continue
        if len(traj.jumps) >= max_jumps:
            raise ZenoSuspected(f"more than {max_jumps} jumps before t={t_hit:.6g}")
        kernel = spec.boundary_kernel if cause == FORCED else spec.interior_kernel
        pre_state = HybridState(q, pre)
        if kernel is None:
            raise ValueError(f"no kernel configured for {cause} jumps")
        post = sample_reset(kernel, pre_state, rng, spec.modes)
        traj.jumps.append(JumpRecord(t_hit, pre_state, post, cause))
        q, y = post.mode, post.position.copy()
        traj.append(t_hit, post)
        # the post-jump state is held for the rest of the step
        if t_hit < t_end:
            traj.append(t_end, post)
    return traj


def first_exit_times(
    spec,
    x0: HybridState,
    horizon: float,
    dt: float,
    reps: int,
    rng: np.random.Generator,
    bridge: bool = False,
) -> np.ndarray:
    """First forced-jump times of ``reps`` independent paths, vectorized.

    Spontaneous jumps are ignored (this is the first-passage law of the
    continuous part). Paths that stay inside up to ``horizon`` get ``inf``.
    """
    ms = spec.modes[x0.mode]
    n_steps = int(round(horizon / dt))
    y = np.tile(x0.position, (reps, 1))
    sigma = ms.diffusion(x0.position)
    var_dt = np.sum(sigma * sigma, axis=1) * dt
    sqdt = math.sqrt(dt)
    hit = np.full(reps, np.inf)
    alive = np.arange(reps)
    for n in range(n_steps):
        if alive.size == 0:
            break
        ya = y[alive]
        xi = rng.standard_normal((alive.size, sigma.shape[1]))
        y1 = ya + ms.field(ya) * dt + (xi @ sigma.T) * sqdt
        out = ~(np.all(y1 > ms.lo, axis=1) & np.all(y1 < ms.hi, axis=1))
        th = np.where(out, crossing_fraction(ya, y1, ms.lo, ms.hi), np.inf)
        if bridge:
            u = rng.random(alive.size)
            p = bridge_cross_prob(ya, y1, ms.lo, ms.hi, var_dt)
            th = np.where(~out & (u < p), 0.5, th)
        done = np.isfinite(th)
        hit[alive[done]] = (n + th[done]) * dt
        y[alive] = y1
        alive = alive[~done]
    return hit
