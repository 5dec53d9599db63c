"""Semigroup estimates and Kolmogorov-equation checks on the abstraction."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .generator import generator_many, generator_swarm, mean_and_se
from .model import AbstractionModel, as_generator, simulate_abstraction


@dataclass
class ResidualReport:
    """Outcome of comparing two estimates of the same quantity."""

    estimate: float
    reference: float
    residual: float
    se: float
    bias_bound: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _report(estimate, reference, se, bias_bound) -> ResidualReport:
    residual = abs(estimate - reference)
    return ResidualReport(
        float(estimate), float(reference), float(residual), float(se), float(bias_bound),
        bool(residual <= bias_bound + 3.0 * se),
    )


def semigroup_estimate(model: AbstractionModel, f, x0, t: float, reps: int, rng) -> tuple[float, float]:
    """Mean of f(x_t) over ``reps`` paths from ``x0``, with its standard error."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x0 = np.asarray(x0, dtype=float)
    if t == 0:
        return float(f(x0)), 0.0
    xs = simulate_abstraction(model, x0, [t], reps, as_generator(rng))[:, 0]
    return mean_and_se(f(xs))


def generator_residual(
    model: AbstractionModel,
    f,
    x0,
    h: float = 0.01,
    reps: int = 10_000,
    rng=None,
    bias_budget: float = 1.0,
) -> ResidualReport:
    """Compare the difference quotient (P_h f - f)/h with the generator at x0.

    ``bias_budget`` bounds half the second time derivative of P_t f near 0,
    so the quotient is within ``bias_budget * h`` of the generator.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    rng = as_generator(rng)
    x0 = np.asarray(x0, dtype=float)
    p, se_p = semigroup_estimate(model, f, x0, h, reps, rng)
    lf, se_l = generator_swarm(model, f, x0, rng, reps)
    quotient = (p - float(f(x0))) / h
    return _report(quotient, lf, np.hypot(se_p / h, se_l), bias_budget * h)


def chapman_kolmogorov_check(
    model: AbstractionModel,
    f,
    x0,
    t: float,
    s: float,
    reps: int = 2_000,
    inner_reps: int = 20,
    rng=None,
) -> ResidualReport:
    """P_{t+s} f(x0) against the nested estimate of P_t (P_s f)(x0).

    The nested estimator draws ``reps`` states at time t and averages
    ``inner_reps`` continuations of length s from each. When t or s is 0 one
    operator is the identity and both sides are the same estimator.
    """
    if t < 0 or s < 0:
        raise ValueError("t and s must be non-negative")
    rng = as_generator(rng)
    x0 = np.asarray(x0, dtype=float)
    if t == 0 or s == 0:
        est, se = semigroup_estimate(model, f, x0, t + s, reps, rng)
        return ResidualReport(est, est, 0.0, se, 0.0, True)
    direct, se_d = semigroup_estimate(model, f, x0, t + s, reps, rng)
    outer = simulate_abstraction(model, x0, [t], reps, rng)[:, 0]
    starts = np.repeat(outer, inner_reps, axis=0)
    inner = simulate_abstraction(model, starts, [s], starts.shape[0], rng)[:, 0]
    per_outer = f(inner).reshape(reps, inner_reps).mean(axis=1)
    nested, se_n = mean_and_se(per_outer)
    return _report(nested, direct, np.hypot(se_d, se_n), 0.0)


@dataclass
class ForwardReport:
    """Pointwise check of d/dt E f(x_t) = E Lf(x_t) on a time grid.

    ``residual`` and ``residual_se`` are defined on the interior grid
    points, where the time derivative is a central difference.
    """

    times: np.ndarray
    mean: np.ndarray
    mean_se: np.ndarray
    derivative: np.ndarray
    generator_mean: np.ndarray
    residual: np.ndarray
    residual_se: np.ndarray
    max_abs_residual: float
    bias_bound: float
    passed: bool

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def forward_equation_residual(
    model: AbstractionModel,
    f,
    x0,
    times,
    reps: int = 10_000,
    rng=None,
    draws: int = 1,
    bias_budget: float = 1.0,
) -> ForwardReport:
    """Check the forward equation along one ensemble of paths.

    Central differences of f along each path estimate d/dt E f(x_t); a
    per-state generator estimate averaged over the same paths estimates
    E Lf(x_t). Pairing both on one ensemble lets the residual's standard
    error come from per-path differences. A point passes when its residual
    is within 3 SE plus ``bias_budget * h^2`` for local spacing h.
    """
    rng = as_generator(rng)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 3 or np.any(np.diff(times) <= 0):
        raise ValueError("need at least three increasing grid times")
    xs = simulate_abstraction(model, x0, times, reps, rng)
    fx = f(xs)
    stats = [mean_and_se(fx[:, g]) for g in range(times.size)]
    mean = np.array([m for m, _ in stats])
    mean_se = np.array([s for _, s in stats])

    span = times[2:] - times[:-2]
    deriv_paths = (fx[:, 2:] - fx[:, :-2]) / span
    inner = xs[:, 1:-1].reshape(-1, xs.shape[-1])
    lf_paths = generator_many(model, f, inner, rng, draws).reshape(reps, times.size - 2)
    diff = deriv_paths - lf_paths
    res = [mean_and_se(diff[:, g]) for g in range(times.size - 2)]
    residual = np.array([m for m, _ in res])
    residual_se = np.array([s for _, s in res])
    bias = bias_budget * (0.5 * span) ** 2
    ok = np.abs(residual) <= 3.0 * np.nan_to_num(residual_se) + bias
    return ForwardReport(
        times=times,
        mean=mean,
        mean_se=mean_se,
        derivative=deriv_paths.mean(axis=0),
        generator_mean=lf_paths.mean(axis=0),
        residual=residual,
        residual_se=residual_se,
        max_abs_residual=float(np.max(np.abs(residual))),
        bias_bound=float(np.max(bias)),
        passed=bool(np.all(ok)),
    )
