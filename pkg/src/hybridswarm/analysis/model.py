"""Stochastic model of the (guard, clock) abstraction.

Each agent carries a guard beta^i decaying as exp(-k^i t) and a clock
tau^i growing at unit slope. Agent i jumps with a hazard that depends on
its own clock; at a jump its guard is redrawn from the guard seed kernel
and its clock restarts at 0. Hazards are either closed-form or tabulated
from first-passage estimates of the full agent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, RateValidityError
from .functions import split_state


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class ConstantHazard:
    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("hazard must be non-negative")

    def rate(self, tau) -> np.ndarray:
        return np.full(np.shape(tau), float(self.lam))

    def wait(self, tau0, e) -> np.ndarray:
        """Time until the integrated hazard from clock ``tau0`` reaches ``e``."""
        e = np.asarray(e, dtype=float)
        if self.lam == 0:
            return np.full(e.shape, np.inf)
        return e / self.lam


@dataclass(frozen=True)
class AffineClockHazard:
    """lambda(tau) = a + b * tau with a, b >= 0."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("affine hazard coefficients must be non-negative")

    def rate(self, tau) -> np.ndarray:
        return self.a + self.b * np.asarray(tau, dtype=float)

    def wait(self, tau0, e) -> np.ndarray:
        # solve (b/2) s^2 + c s = e with c = a + b tau0, in the stable form
        c = self.a + self.b * np.asarray(tau0, dtype=float)
        e = np.asarray(e, dtype=float)
        den = c + np.sqrt(c * c + 2.0 * self.b * e)
        out = np.full(np.broadcast(c, e).shape, np.inf)
        np.divide(2.0 * e, den, out=out, where=den > 0)
        return out


@dataclass(frozen=True, eq=False)
class HazardTable:
    """Piecewise-constant hazard on clock bins ``[edges[j], edges[j+1])``.

    Bins outside ``valid`` (and clocks past the last edge) carry no usable
    estimate; reaching them raises :class:`RateValidityError`.
    """

    edges: np.ndarray
    rates: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if edges.ndim != 1 or rates.shape != (edges.size - 1,) or valid.shape != rates.shape:
            raise DimensionError("hazard table needs G+1 edges and G rates/flags")
        if np.any(np.diff(edges) <= 0) or edges[0] != 0:
            raise ValueError("hazard table edges must start at 0 and increase")
        if np.any(rates[valid] < 0):
            raise ValueError("hazard table rates must be non-negative")
        rates = np.where(valid, rates, 0.0)
        bad = np.flatnonzero(~valid)
        limit = edges[bad[0]] if bad.size else edges[-1]
        cum = np.concatenate([[0.0], np.cumsum(rates * np.diff(edges))])
        for name, val in (("edges", edges), ("rates", rates), ("valid", valid)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "limit", float(limit))
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_estimate(cls, est) -> "HazardTable":
        return cls(est.edges, est.rates, est.valid)

    def _cumulative(self, tau):
        j = np.clip(np.searchsorted(self.edges, tau, side="right") - 1, 0, len(self.rates) - 1)
        return self._cum[j] + self.rates[j] * (tau - self.edges[j])

    def rate(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if np.any(tau >= self.limit) or np.any(tau < 0):
            raise RateValidityError(
                f"clock {float(np.max(tau)):.6g} outside the valid hazard range [0, {self.limit:.6g})"
            )
        j = np.searchsorted(self.edges, tau, side="right") - 1
        return self.rates[j]

    def wait(self, tau0, e) -> np.ndarray:
        """Waiting time, or ``nan`` where the path outlives the valid range."""
        tau0 = np.asarray(tau0, dtype=float)
        if np.any(tau0 >= self.limit):
            raise RateValidityError(f"clock starts past the valid hazard range [0, {self.limit:.6g})")
        target = self._cumulative(tau0) + np.asarray(e, dtype=float)
        beyond = target > self._cumulative(self.limit)
        # invert the piecewise-linear cumulative hazard
        j = np.searchsorted(self._cum, target, side="left") - 1
        j = np.clip(j, 0, len(self.rates) - 1)
        tau = self.edges[j] + (target - self._cum[j]) / np.where(self.rates[j] > 0, self.rates[j], 1.0)
        return np.where(beyond, np.nan, np.maximum(tau - tau0, 0.0))


@dataclass(frozen=True, eq=False)
class AbstractionModel:
    """Guards decay rates ``k`` (N,), seed kernels and clock hazards per agent."""

    k: np.ndarray
    kernels: tuple
    hazards: tuple

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float).reshape(-1)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "hazards", tuple(self.hazards))
        if not (len(self.kernels) == len(self.hazards) == k.size):
            raise DimensionError("need one kernel and one hazard per agent")
        dims = {kern.dim for kern in self.kernels}
        if len(dims) != 1:
            raise DimensionError("all guard kernels must share one dimension")

    @classmethod
    def from_config(cls, config, hazards) -> "AbstractionModel":
        """Guard data from a scenario, hazards supplied per agent."""
        return cls(
            [a.guard.k for a in config.agents], [a.guard.kernel for a in config.agents], hazards
        )

    @property
    def n_agents(self) -> int:
        return self.k.size

    @property
    def dim(self) -> int:
        return self.kernels[0].dim

    @property
    def size(self) -> int:
        return self.n_agents * (self.dim + 1)

    def split(self, x):
        return split_state(x, self.n_agents, self.dim)

    def field(self, x) -> np.ndarray:
        """Deterministic drift (-k^i beta^i ..., 1 ...) at ``x`` (..., D)."""
        beta, tau = self.split(x)
        flow_beta = -self.k[:, None] * beta
        return np.concatenate(
            [flow_beta.reshape(beta.shape[:-2] + (-1,)), np.ones(tau.shape)], axis=-1
        )

    def rates(self, x) -> np.ndarray:
        """Hazards (..., N) at ``x``."""
        _, tau = self.split(x)
        return np.stack([h.rate(tau[..., i]) for i, h in enumerate(self.hazards)], axis=-1)


def _next_jump(hazard, anchor, clock, e, t_max):
    nxt = anchor + hazard.wait(clock, e)
    lost = np.isnan(nxt)
    if lost.any():
        # surviving past the valid range only matters before the last sample
        reach = anchor[lost] + (hazard.limit - clock[lost])
        if np.any(reach <= t_max):
            raise RateValidityError(
                f"a path outlives the valid hazard range [0, {hazard.limit:.6g}) before t={t_max:.6g}"
            )
        nxt[lost] = np.inf
    return nxt


def simulate_abstraction(model: AbstractionModel, x0, times, reps: int, rng) -> np.ndarray:
    """Exact samples of the abstraction at ``times``: shape (reps, T, D).

    ``x0`` is one state (D,) or one state per replication (reps, D). Agents
    evolve independently given their hazards, so each agent's jump times
    form a renewal sequence sampled by inverting its cumulative hazard.
    """
    rng = as_generator(rng)
    times = np.asarray(times, dtype=float).reshape(-1)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("sample times must be non-negative and sorted")
    N, d = model.n_agents, model.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (reps, model.size))
    beta0, tau0 = model.split(x0)
    out = np.empty((reps, times.size, model.size))
    t_max = times[-1] if times.size else 0.0

    for i in range(N):
        hz, kern, k = model.hazards[i], model.kernels[i], model.k[i]
        cols = slice(i * d, (i + 1) * d)
        ccol = N * d + i
        anchor = np.zeros(reps)
        b = beta0[:, i].copy()
        c = tau0[:, i].copy()
        nxt = _next_jump(hz, anchor, c, rng.standard_exponential(reps), t_max)
        todo = np.arange(reps)
        while todo.size:
            a, n = anchor[todo], nxt[todo]
            inside = (times[None, :] >= a[:, None]) & (times[None, :] < n[:, None])
            r, g = np.nonzero(inside)
            dt = times[g] - a[r]
            rows = todo[r]
            out[rows, g, cols] = b[rows] * np.exp(-k * dt)[:, None]
            out[rows, g, ccol] = c[rows] + dt
            todo = todo[n <= t_max]
            if todo.size == 0:
                break
            anchor[todo] = nxt[todo]
            b[todo] = kern.sample_many(rng, todo.size)
            c[todo] = 0.0
            nxt[todo] = _next_jump(hz, anchor[todo], c[todo], rng.standard_exponential(todo.size), t_max)
    return out
