"""Smooth bounded test functions with closed-form gradients.

All functions act on flat state vectors and broadcast over leading axes:
``f(x)`` with ``x`` of shape (..., D) returns shape (...), and
``f.gradient(x)`` returns shape (..., D). Abstraction states are laid out
as (beta^1, ..., beta^N, tau^1, ..., tau^N) with each beta^i of length d.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


def state_vector(beta, tau) -> np.ndarray:
    """Flatten guards (N, d) and clocks (N,) into the abstraction layout."""
    beta = np.asarray(beta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if beta.ndim == 1:
        beta = beta[None, :]
    if beta.shape[0] != tau.reshape(-1).shape[0]:
        raise DimensionError(f"{beta.shape[0]} guards but {tau.size} clocks")
    return np.concatenate([beta.reshape(-1), tau.reshape(-1)])


def split_state(x, n_agents: int, dim: int):
    """Inverse of :func:`state_vector` for (..., N*(d+1)) arrays."""
    x = np.asarray(x, dtype=float)
    nb = n_agents * dim
    if x.shape[-1] != nb + n_agents:
        raise DimensionError(f"expected {nb + n_agents} coordinates, got {x.shape[-1]}")
    return x[..., :nb].reshape(x.shape[:-1] + (n_agents, dim)), x[..., nb:]


class TestFunction:
    """Base class; subclasses implement ``__call__`` and ``gradient``."""

    __test__ = False  # not a pytest class

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def __mul__(self, other):
        return Product((self, other))

    def __add__(self, other):
        return Sum((self, other))


@dataclass(frozen=True)
class Constant(TestFunction):
    c: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.c))

    def gradient(self, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class Coordinate(TestFunction):
    """The coordinate ``x[index]``."""

    index: int

    def __call__(self, x):
        return np.asarray(x, dtype=float)[..., self.index]

    def gradient(self, x):
        g = np.zeros(np.shape(x))
        g[..., self.index] = 1.0
        return g


def GuardCoordinate(agent: int, component: int, dim: int) -> Coordinate:
    """Component ``component`` of agent ``agent``'s guard."""
    return Coordinate(agent * dim + component)


@dataclass(frozen=True)
class ClockCoordinate(TestFunction):
    """Clock of agent ``agent`` in an N-agent, d-dimensional layout."""

    agent: int
    n_agents: int = 1
    dim: int = 1

    @property
    def index(self) -> int:
        return self.n_agents * self.dim + self.agent

    def __call__(self, x):
        return np.asarray(x, dtype=float)[..., self.index]

    def gradient(self, x):
        g = np.zeros(np.shape(x))
        g[..., self.index] = 1.0
        return g


@dataclass(frozen=True, eq=False)
class Quadratic(TestFunction):
    """(x - center)^T Q (x - center) with symmetric Q."""

    matrix: np.ndarray
    center: np.ndarray | None = None

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError("quadratic form needs a square matrix")
        if not np.allclose(q, q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(q).max(initial=0))):
            raise ValueError("quadratic form matrix must be symmetric")
        object.__setattr__(self, "matrix", q)
        c = np.zeros(q.shape[0]) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", y, self.matrix, y)

    def gradient(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return 2.0 * y @ self.matrix


@dataclass(frozen=True, eq=False)
class GaussianBump(TestFunction):
    """exp(-|x - center|^2 / (2 width^2))."""

    center: np.ndarray
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return np.exp(-0.5 * np.sum(y * y, axis=-1) / self.width**2)

    def gradient(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return -(y / self.width**2) * self(x)[..., None]


@dataclass(frozen=True)
class Product(TestFunction):
    factors: tuple = field(default_factory=tuple)

    def __call__(self, x):
        out = np.ones(np.shape(x)[:-1])
        for f in self.factors:
            out = out * f(x)
        return out

    def gradient(self, x):
        vals = [f(x) for f in self.factors]
        g = np.zeros(np.shape(x))
        for i, f in enumerate(self.factors):
            others = np.ones(np.shape(x)[:-1])
            for j, v in enumerate(vals):
                if j != i:
                    others = others * v
            g = g + others[..., None] * f.gradient(x)
        return g


@dataclass(frozen=True)
class Sum(TestFunction):
    """Weighted sum of terms (weights default to 1)."""

    terms: tuple = field(default_factory=tuple)
    weights: tuple | None = None

    def _w(self):
        return (1.0,) * len(self.terms) if self.weights is None else self.weights

    def __call__(self, x):
        out = np.zeros(np.shape(x)[:-1])
        for w, f in zip(self._w(), self.terms):
            out = out + w * f(x)
        return out

    def gradient(self, x):
        g = np.zeros(np.shape(x))
        for w, f in zip(self._w(), self.terms):
            g = g + w * f.gradient(x)
        return g


def is_constant(f) -> bool:
    return isinstance(f, Constant)
