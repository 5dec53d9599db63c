"""Monte-Carlo evaluation of infinitesimal generators.

Drift terms use closed-form gradients of the test function; jump terms
average f(post-jump) - f(pre-jump) over kernel samples.
"""

from __future__ import annotations

import numpy as np

from ..core.pdmp import sample_reset
from ..core.specs import HybridState
from .model import AbstractionModel, ConstantHazard, as_generator


def mean_and_se(values) -> tuple[float, float]:
    """Sample mean and its standard error; exact when all samples agree."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("no samples")
    if np.all(v == v[0]):
        return float(v[0]), 0.0
    if v.size == 1:
        return float(v[0]), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def lie_derivative(field, f, point) -> float:
    """Directional derivative of ``f`` along ``field`` at ``point``."""
    point = np.asarray(point, dtype=float)
    b = np.asarray(field(point), dtype=float)
    g = f.gradient(point)
    if b.shape != g.shape:
        raise ValueError(f"field has shape {b.shape}, gradient {g.shape}")
    return float(np.sum(g * b))


def lie_derivative_many(field, f, points) -> np.ndarray:
    """Row-wise :func:`lie_derivative` for points (n, D)."""
    points = np.asarray(points, dtype=float)
    return np.sum(f.gradient(points) * field(points), axis=-1)


def abstraction_field(model: AbstractionModel):
    """Drift of the (guard, clock) abstraction as a callable."""
    return model.field


def generator_pdmp(spec, f, x, rng, reps: int) -> tuple[float, float]:
    """Generator of a PDMP at ``x``; returns (value, standard error).

    ``x`` is a HybridState or a position in mode 0. The standard error
    covers the sampled jump term only.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if not isinstance(x, HybridState):
        x = HybridState(0, np.asarray(x, dtype=float))
    rng = as_generator(rng)
    y0 = x.position
    drift = lie_derivative(spec.modes[x.mode].field, f, y0)
    lam = float(spec.rate(y0))
    if lam == 0:
        return drift, 0.0
    ys = np.array([sample_reset(spec.kernel, x, rng, spec.modes).position for _ in range(reps)])
    m, se = mean_and_se(f(ys) - f(y0))
    return drift + lam * m, lam * se


def _post_jump(model: AbstractionModel, point, agent: int, seeds) -> np.ndarray:
    """States equal to ``point`` except agent's guard set to ``seeds`` and clock 0."""
    N, d = model.n_agents, model.dim
    y = np.tile(point, (len(seeds), 1))
    y[:, agent * d:(agent + 1) * d] = seeds
    y[:, N * d + agent] = 0.0
    return y


def generator_swarm(model: AbstractionModel, f, point, rng, reps: int) -> tuple[float, float]:
    """Generator of the (guard, clock) abstraction at ``point``.

    Drift along the abstraction field plus, for every agent i, its hazard
    times the mean change of ``f`` when agent i's guard is redrawn and its
    clock restarts. Raises RateValidityError outside a hazard's valid range.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    rng = as_generator(rng)
    point = np.asarray(point, dtype=float)
    value = lie_derivative(model.field, f, point)
    var = 0.0
    rates = model.rates(point)
    fx = f(point)
    for i in range(model.n_agents):
        lam = float(rates[i])
        if lam == 0:
            continue
        seeds = model.kernels[i].sample_many(rng, reps)
        m, se = mean_and_se(f(_post_jump(model, point, i, seeds)) - fx)
        value += lam * m
        var += (lam * se) ** 2
    return value, float(np.sqrt(var))


def generator_agent(guard, lam: float, f, point, rng, reps: int) -> tuple[float, float]:
    """Generator of one agent's (guard, clock) pair with jump rate ``lam``.

    ``point`` is (beta_1, ..., beta_d, tau).
    """
    model = AbstractionModel([guard.k], [guard.kernel], [ConstantHazard(lam)])
    return generator_swarm(model, f, point, rng, reps)


def generator_many(model: AbstractionModel, f, points, rng, draws: int = 1) -> np.ndarray:
    """Unbiased single-state generator estimates for every row of ``points``.

    Each row uses ``draws`` kernel samples per agent; the result averages
    over rows to the generator's mean under the law of the rows.
    """
    rng = as_generator(rng)
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    out = lie_derivative_many(model.field, f, points)
    rates = model.rates(points)
    fx = f(points)
    N, d = model.n_agents, model.dim
    for i in range(N):
        lam = rates[:, i]
        if not np.any(lam != 0):
            continue
        acc = np.zeros(n)
        for _ in range(draws):
            y = points.copy()
            y[:, i * d:(i + 1) * d] = model.kernels[i].sample_many(rng, n)
            y[:, N * d + i] = 0.0
            acc += f(y) - fx
        out = out + lam * acc / draws
    return out
