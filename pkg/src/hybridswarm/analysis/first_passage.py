"""First-passage laws of one agent and the hazard they induce.

The agent's coordination state starts from its initial kernel and evolves
in its initial mode; the other agents' clocks are frozen, which freezes its
coupling input. The passage time is the first instant the state reaches
the modified guard beta(tau) - I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..agent.lanes import crossing
from ..core.flow import rk4_step
from ..core.specs import affine_apply
from ..errors import DimensionError, GuardError, SurvivalTooSmall
from ..rng import NOISE, RESET, CounterStream, lane_keys, lane_normals, stream_key, substream

DEFAULT_SURVIVAL_FLOOR = 0.05


@dataclass(frozen=True, eq=False)
class FirstPassageConditioning:
    """Guard seed and frozen neighbour clocks for one agent.

    ``weights[j]`` (d,) is the coupling weight of the neighbour whose clock
    is ``clocks[j]``. ``gamma=None`` draws the seed from the guard kernel
    on every path.
    """

    gamma: np.ndarray | None = None
    clocks: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    def __post_init__(self):
        clocks = np.asarray(self.clocks, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape[0] != clocks.size:
            raise DimensionError("one weight row per frozen clock")
        if np.any(clocks < 0):
            raise ValueError("frozen clocks must be non-negative")
        object.__setattr__(self, "clocks", clocks)
        object.__setattr__(self, "weights", w)
        if self.gamma is not None:
            object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).reshape(-1))

    @classmethod
    def frozen_input(cls, coupling, gamma=None) -> "FirstPassageConditioning":
        """Conditioning with a given constant coupling input."""
        coupling = np.asarray(coupling, dtype=float).reshape(-1)
        return cls(gamma, np.zeros(1), coupling[None, :])

    @classmethod
    def from_scenario(cls, config, agent: int, clocks, gamma=None) -> "FirstPassageConditioning":
        """Conditioning on neighbour clocks (mapping id -> clock) in ``config``."""
        sources, weights = config.coupling.row(agent)
        tau = [float(clocks[int(j)]) for j in sources]
        return cls(gamma, np.array(tau), np.asarray(weights).reshape(len(tau), -1))

    def coupling(self, k: float, dim: int) -> np.ndarray:
        if self.clocks.size == 0:
            return np.zeros(dim)
        if self.weights.shape[1] != dim:
            raise DimensionError(f"weights have {self.weights.shape[1]} components, expected {dim}")
        return (self.weights * np.exp(-k * self.clocks)[:, None]).sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "gamma": None if self.gamma is None else self.gamma.tolist(),
            "clocks": self.clocks.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(eq=False)
class FirstPassageEstimate:
    """Histogram density on bins ``[edges[j], edges[j+1])`` and CDF at the edges."""

    edges: np.ndarray
    density: np.ndarray
    density_se: np.ndarray
    cdf: np.ndarray
    cdf_se: np.ndarray
    hits: np.ndarray
    reps: int
    truncated: bool
    conditioning: FirstPassageConditioning | None = None

    @classmethod
    def from_hits(cls, hits, edges, conditioning=None) -> "FirstPassageEstimate":
        """Estimate from passage times (``inf`` for paths that never hit)."""
        hits = np.asarray(hits, dtype=float).reshape(-1)
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be increasing with at least one bin")
        n = hits.size
        if n == 0:
            raise ValueError("no replications")
        width = np.diff(edges)
        counts, _ = np.histogram(hits[np.isfinite(hits)], bins=edges)
        # np.histogram closes the last bin; keep it half-open like the others
        counts[-1] -= int(np.count_nonzero(hits == edges[-1]))
        p_bin = counts / n
        cdf = np.searchsorted(np.sort(hits), edges, side="right") / n
        return cls(
            edges=edges,
            density=p_bin / width,
            density_se=np.sqrt(p_bin * (1 - p_bin) / n) / width,
            cdf=cdf,
            cdf_se=np.sqrt(cdf * (1 - cdf) / n),
            hits=hits,
            reps=n,
            truncated=bool(np.count_nonzero(hits <= edges[-1]) == 0),
            conditioning=conditioning,
        )

    @property
    def horizon(self) -> float:
        return float(self.edges[-1])

    def cdf_at(self, tau) -> np.ndarray:
        """Empirical CDF at arbitrary clock values."""
        return np.searchsorted(np.sort(self.hits), np.asarray(tau, dtype=float), side="right") / self.reps

    def bin_of(self, tau: float) -> int:
        j = int(np.searchsorted(self.edges, tau, side="right") - 1)
        if j < 0 or j >= self.density.size:
            raise ValueError(f"clock {tau} outside the estimate's range")
        return j

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "density": self.density.tolist(),
            "density_se": self.density_se.tolist(),
            "cdf": self.cdf.tolist(),
            "cdf_se": self.cdf_se.tolist(),
            "reps": self.reps,
            "truncated": self.truncated,
            "conditioning": None if self.conditioning is None else self.conditioning.to_dict(),
        }


def first_passage_times(
    spec,
    conditioning: FirstPassageConditioning,
    horizon: float,
    dt: float,
    reps: int,
    seed: int = 0,
) -> np.ndarray:
    """Passage times of ``reps`` Euler-Maruyama paths (``inf`` if none by ``horizon``).

    Path r draws its noise and initial state from streams keyed by
    (seed, agent id, r), so two calls with the same seed are paired path
    by path whatever the conditioning.
    """
    if not dt > 0 or not horizon > 0:
        raise ValueError("dt and horizon must be positive")
    d = spec.dim
    k = spec.guard.k
    rhs = spec.guard.rhs
    mode = spec.modes[spec.initial_mode]
    m = mode.diffusion.m
    coupling = conditioning.coupling(k, d)
    keys = [stream_key(seed, spec.id, r) for r in range(reps)]
    noise = lane_keys([substream(key, NOISE) for key in keys])

    z = np.empty((reps, d))
    gamma = np.empty((reps, d))
    for r, key in enumerate(keys):
        stream = CounterStream(substream(key, RESET), 0)
        g = spec.guard.kernel.sample_position(stream)
        gamma[r] = g if conditioning.gamma is None else conditioning.gamma
        z[r] = spec.z_kernel.sample_position(stream)
    if np.any(gamma <= 0):
        raise GuardError("guard seed must be positive")

    hits = np.full(reps, np.inf)
    active = np.arange(reps)
    beta = gamma.copy()
    n_steps = int(np.ceil(horizon / dt - 1e-9))
    for n in range(n_steps):
        t0 = n * dt
        t1 = min((n + 1) * dt, horizon)
        h = t1 - t0
        xi = lane_normals(noise[active], n, m)
        y = z[active]
        y1 = y + mode.field(y) * h + affine_apply(mode.diffusion.sigma, None, xi) * np.sqrt(h)
        if rhs is None:
            b1 = gamma[active] * np.exp(-k * t1)
        else:
            b1 = rk4_step(rhs, beta[active], h)
        g0 = beta[active] - coupling - y
        g1 = b1 - coupling - y1
        theta, _ = crossing(g0, g1)
        hit = np.isfinite(theta)
        hits[active[hit]] = t0 + theta[hit] * h
        keep = ~hit
        active = active[keep]
        z[active] = y1[keep]
        beta[active] = b1[keep]
        if active.size == 0:
            break
    return hits


def estimate_first_passage(
    spec,
    conditioning: FirstPassageConditioning,
    edges,
    reps: int,
    seed: int = 0,
    dt: float = 1e-3,
) -> FirstPassageEstimate:
    """Histogram estimate of the passage-time law on bins ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if edges[0] != 0:
        raise ValueError("bins must start at clock 0")
    hits = first_passage_times(spec, conditioning, float(edges[-1]), dt, reps, seed)
    return FirstPassageEstimate.from_hits(hits, edges, conditioning)


def jump_rate_from_fp(est: FirstPassageEstimate, tau: float, eps: float = DEFAULT_SURVIVAL_FLOOR) -> float:
    """Hazard density / survival at clock ``tau``."""
    surv = 1.0 - float(est.cdf_at(tau))
    if surv < eps:
        raise SurvivalTooSmall(f"survival {surv:.4g} at clock {tau} is below {eps}")
    return float(est.density[est.bin_of(tau)] / surv)


@dataclass(eq=False)
class RateEstimate:
    """Hazard per bin, with ``valid`` marking bins whose start survival is >= eps."""

    edges: np.ndarray
    rates: np.ndarray
    valid: np.ndarray
    eps: float

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "rates": self.rates.tolist(),
            "valid": self.valid.tolist(),
            "eps": self.eps,
        }


def rate_estimate(est: FirstPassageEstimate, eps: float = DEFAULT_SURVIVAL_FLOOR) -> RateEstimate:
    """Hazard on every bin: density over the survival averaged across the bin.

    Dividing by the left-edge survival instead would bias a bin of width w
    low by a factor (1 - e^{-lam w}) / (lam w); the edge average cuts the
    error to second order in w. A bin is valid when its left-edge survival
    is at least ``eps``.
    """
    valid = 1.0 - est.cdf[:-1] >= eps
    surv = 1.0 - 0.5 * (est.cdf[:-1] + est.cdf[1:])
    rates = np.zeros(est.density.size)
    np.divide(est.density, surv, out=rates, where=valid & (surv > 0))
    return RateEstimate(est.edges.copy(), rates, valid, eps)
