"""Closed catalogs of local characteristics and the PDMP/SHS descriptions.

Vector fields, diffusion matrices, jump rates and reset kernels are small
immutable records with a ``to_dict``/``*_from_dict`` round trip so that a
scenario file fully determines a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from ..errors import DimensionError, KernelSamplingError

ModeId = Hashable


def _vec(x, name="vector") -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


def _mat(x, name="matrix") -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


def _listify(a):
    return np.asarray(a).tolist()


def affine_apply(A: np.ndarray, c, y: np.ndarray) -> np.ndarray:
    """A @ y + c over the last axis of ``y``, accumulated in column order.

    Avoids BLAS so that each row's result does not depend on the batch size.
    """
    out = np.zeros(y.shape[:-1] + (A.shape[0],)) if c is None else np.broadcast_to(
        c, y.shape[:-1] + (A.shape[0],)
    ).copy()
    for q in range(A.shape[1]):
        out += A[:, q] * y[..., q : q + 1]
    return out


# ---------------------------------------------------------------- vector fields


@dataclass(frozen=True, eq=False)
class ConstantField:
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c, "c"))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self.c, y.shape).copy()

    def affine(self):
        return np.zeros((self.dim, self.dim)), np.array(self.c)

    def to_dict(self):
        return {"type": "constant", "c": _listify(self.c)}

    def __eq__(self, other):
        return isinstance(other, ConstantField) and np.array_equal(self.c, other.c)


@dataclass(frozen=True, eq=False)
class LinearField:
    """b(y) = A y + c."""

    A: np.ndarray
    c: np.ndarray = None

    def __post_init__(self):
        A = _mat(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        c = np.zeros(A.shape[0]) if self.c is None else self.c
        c = _vec(c, "c")
        if c.shape[0] != A.shape[0]:
            raise DimensionError(f"c has length {c.shape[0]}, A is {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return affine_apply(self.A, self.c, y)

    def affine(self):
        return np.array(self.A), np.array(self.c)

    def to_dict(self):
        return {"type": "linear", "A": _listify(self.A), "c": _listify(self.c)}

    def __eq__(self, other):
        return (
            isinstance(other, LinearField)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.c, other.c)
        )


@dataclass(frozen=True, eq=False)
class OrnsteinUhlenbeckDrift:
    """b(y) = theta * (mean - y)."""

    theta: float
    mean: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "mean", _vec(self.mean, "mean"))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self.theta * (self.mean - y)

    def affine(self):
        return -self.theta * np.eye(self.dim), self.theta * np.array(self.mean)

    def to_dict(self):
        return {"type": "ou", "theta": self.theta, "mean": _listify(self.mean)}

    def __eq__(self, other):
        return (
            isinstance(other, OrnsteinUhlenbeckDrift)
            and self.theta == other.theta
            and np.array_equal(self.mean, other.mean)
        )


VectorField = ConstantField | LinearField | OrnsteinUhlenbeckDrift


def vector_field_from_dict(d: Mapping) -> VectorField:
    kind = d.get("type")
    if kind == "constant":
        return ConstantField(d["c"])
    if kind == "linear":
        return LinearField(d["A"], d.get("c"))
    if kind == "ou":
        return OrnsteinUhlenbeckDrift(d["theta"], d["mean"])
    raise ValueError(f"unknown vector field type {kind!r}")


# ---------------------------------------------------------------- diffusions


@dataclass(frozen=True, eq=False)
class ZeroDiffusion:
    dim: int
    m: int = 1

    @property
    def sigma(self) -> np.ndarray:
        return np.zeros((self.dim, self.m))

    def __call__(self, y):
        return self.sigma

    def to_dict(self):
        return {"type": "zero", "dim": self.dim, "m": self.m}

    def __eq__(self, other):
        return isinstance(other, ZeroDiffusion) and (self.dim, self.m) == (other.dim, other.m)


@dataclass(frozen=True, eq=False)
class ConstantDiffusion:
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", _mat(self.sigma, "sigma"))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def m(self) -> int:
        return self.sigma.shape[1]

    def __call__(self, y):
        return self.sigma

    def to_dict(self):
        return {"type": "constant", "sigma": _listify(self.sigma)}

    def __eq__(self, other):
        return isinstance(other, ConstantDiffusion) and np.array_equal(self.sigma, other.sigma)


Diffusion = ZeroDiffusion | ConstantDiffusion


def diffusion_from_dict(d: Mapping, dim: int | None = None) -> Diffusion:
    kind = d.get("type")
    if kind == "zero":
        return ZeroDiffusion(int(d.get("dim", dim or 1)), int(d.get("m", 1)))
    if kind == "constant":
        return ConstantDiffusion(d["sigma"])
    raise ValueError(f"unknown diffusion type {kind!r}")


# ---------------------------------------------------------------- jump rates


@dataclass(frozen=True)
class ConstantRate:
    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("rate must be non-negative")

    @property
    def bound(self) -> float:
        return float(self.lam)

    is_constant = True

    def __call__(self, y) -> float:
        return float(self.lam)

    def to_dict(self):
        return {"type": "constant", "lam": self.lam}


@dataclass(frozen=True)
class AffineNormRate:
    """lambda(y) = lam0 + a * ||y||, with a declared upper bound."""

    lam0: float
    a: float
    bound: float

    def __post_init__(self):
        if self.lam0 < 0 or self.a < 0:
            raise ValueError("lam0 and a must be non-negative")
        if self.bound < self.lam0:
            raise ValueError("bound must be at least lam0")

    is_constant = False

    def __call__(self, y) -> float:
        return self.lam0 + self.a * float(np.linalg.norm(y))

    def to_dict(self):
        return {"type": "affine_norm", "lam0": self.lam0, "a": self.a, "bound": self.bound}


RateSpec = ConstantRate | AffineNormRate


def rate_from_dict(d: Mapping) -> RateSpec:
    kind = d.get("type")
    if kind == "constant":
        return ConstantRate(float(d["lam"]))
    if kind == "affine_norm":
        return AffineNormRate(float(d["lam0"]), float(d["a"]), float(d["bound"]))
    raise ValueError(f"unknown rate type {kind!r}")


# ---------------------------------------------------------------- states


@dataclass(frozen=True, eq=False)
class HybridState:
    mode: ModeId
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position, "position"))

    @property
    def dim(self) -> int:
        return self.position.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, HybridState)
            and self.mode == other.mode
            and np.array_equal(self.position, other.position)
        )

    def __repr__(self):
        return f"HybridState(mode={self.mode!r}, position={self.position.tolist()})"


# ---------------------------------------------------------------- reset kernels


def _strictly_inside(y, lo, hi) -> bool:
    return bool((y > lo).all() and (y < hi).all())


def _rejection_fill(n, dim, draw, lo, hi, max_rounds, message) -> np.ndarray:
    """``n`` rows from ``draw(k)`` redrawing rows not strictly inside (lo, hi)."""
    out = np.empty((n, dim))
    todo = np.arange(n)
    for _ in range(max_rounds):
        if todo.size == 0:
            return out
        y = draw(todo.size)
        ok = np.all((y > lo) & (y < hi), axis=1)
        out[todo[ok]] = y[ok]
        todo = todo[~ok]
    if todo.size == 0:
        return out
    raise KernelSamplingError(message)


@dataclass(frozen=True, eq=False)
class PointMass:
    value: np.ndarray
    mode: ModeId = None

    def __post_init__(self):
        object.__setattr__(self, "value", _vec(self.value, "value"))

    @property
    def dim(self) -> int:
        return self.value.shape[0]

    def sample_position(self, rng) -> np.ndarray:
        return np.array(self.value)

    def sample_many(self, rng, n: int) -> np.ndarray:
        return np.tile(self.value, (n, 1))

    def mean(self) -> np.ndarray:
        return np.array(self.value)

    def support_positive(self) -> bool:
        return bool(np.all(self.value > 0))

    def to_dict(self):
        d = {"type": "point", "value": _listify(self.value)}
        if self.mode is not None:
            d["mode"] = self.mode
        return d

    def __eq__(self, other):
        return (
            isinstance(other, PointMass)
            and self.mode == other.mode
            and np.array_equal(self.value, other.value)
        )


@dataclass(frozen=True, eq=False)
class UniformBox:
    lo: np.ndarray
    hi: np.ndarray
    mode: ModeId = None
    max_tries: int = 64

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise DimensionError("lo and hi must have the same length")
        if not np.all(np.isfinite(lo) & np.isfinite(hi)) or not np.all(lo < hi):
            raise ValueError("uniform box needs finite bounds with lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "_width", hi - lo)
        # plain-float copies for the one-sample path
        object.__setattr__(self, "_bounds", list(zip(lo.tolist(), (hi - lo).tolist(), hi.tolist())))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def sample_position(self, rng) -> np.ndarray:
        for _ in range(self.max_tries):
            u = rng.random(self.dim).tolist()
            y = [lo + w * v for (lo, w, _), v in zip(self._bounds, u)]
            # rounding can land exactly on a face
            if all(lo < c < hi for (lo, _, hi), c in zip(self._bounds, y)):
                return np.array(y)
        raise KernelSamplingError("uniform box sampling kept hitting the boundary")

    def sample_many(self, rng, n: int) -> np.ndarray:
        return _rejection_fill(
            n, self.dim, lambda k: self.lo + self._width * rng.random((k, self.dim)),
            self.lo, self.hi, self.max_tries, "uniform box sampling kept hitting the boundary",
        )

    def mean(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def support_positive(self) -> bool:
        return bool(np.all(self.lo >= 0))

    def to_dict(self):
        d = {"type": "uniform", "lo": _listify(self.lo), "hi": _listify(self.hi)}
        if self.mode is not None:
            d["mode"] = self.mode
        return d

    def __eq__(self, other):
        return (
            isinstance(other, UniformBox)
            and self.mode == other.mode
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    """Gaussian law restricted to the open box (lo, hi) by rejection."""

    mean_: np.ndarray
    cov: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None
    mode: ModeId = None
    max_tries: int = 10_000

    def __post_init__(self):
        mean = _vec(self.mean_, "mean")
        cov = _mat(self.cov, "cov")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionError(f"cov must be {d}x{d}, got {cov.shape}")
        lo = _vec(np.full(d, -np.inf) if self.lo is None else self.lo, "lo")
        hi = _vec(np.full(d, np.inf) if self.hi is None else self.hi, "hi")
        if lo.shape != (d,) or hi.shape != (d,) or not np.all(lo < hi):
            raise ValueError("clip bounds must match the mean and satisfy lo < hi")
        chol = np.linalg.cholesky(cov)
        object.__setattr__(self, "mean_", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean_.shape[0]

    def sample_position(self, rng) -> np.ndarray:
        for _ in range(self.max_tries):
            xi = np.asarray(rng.standard_normal(self.dim), dtype=float)
            y = self.mean_ + self._chol @ xi
            if _strictly_inside(y, self.lo, self.hi):
                return y
        raise KernelSamplingError(
            f"clipped Gaussian rejection budget of {self.max_tries} exhausted"
        )

    def sample_many(self, rng, n: int) -> np.ndarray:
        def draw(k):
            xi = np.asarray(rng.standard_normal((k, self.dim)), dtype=float)
            return self.mean_ + xi @ self._chol.T

        return _rejection_fill(
            n, self.dim, draw, self.lo, self.hi, self.max_tries,
            f"clipped Gaussian rejection budget of {self.max_tries} exhausted",
        )

    def mean(self) -> np.ndarray:
        if np.all(np.isinf(self.lo)) and np.all(np.isinf(self.hi)):
            return np.array(self.mean_)
        raise NotImplementedError("mean of a clipped Gaussian is not tabulated")

    def support_positive(self) -> bool:
        return bool(np.all(self.lo >= 0))

    def to_dict(self):
        d = {"type": "gaussian", "mean": _listify(self.mean_), "cov": _listify(self.cov)}
        if np.any(np.isfinite(self.lo)):
            d["lo"] = [x if np.isfinite(x) else None for x in self.lo.tolist()]
        if np.any(np.isfinite(self.hi)):
            d["hi"] = [x if np.isfinite(x) else None for x in self.hi.tolist()]
        if self.mode is not None:
            d["mode"] = self.mode
        return d

    def __eq__(self, other):
        return (
            isinstance(other, GaussianKernel)
            and self.mode == other.mode
            and np.array_equal(self.mean_, other.mean_)
            and np.array_equal(self.cov, other.cov)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )


ResetKernel = PointMass | UniformBox | GaussianKernel


def _bounds(values, fill):
    if values is None:
        return None
    return [fill if v is None else float(v) for v in values]


def kernel_from_dict(d: Mapping) -> ResetKernel:
    kind = d.get("type")
    mode = d.get("mode")
    if kind == "point":
        return PointMass(d["value"], mode)
    if kind == "uniform":
        return UniformBox(d["lo"], d["hi"], mode)
    if kind == "gaussian":
        return GaussianKernel(
            d["mean"], d["cov"], _bounds(d.get("lo"), -np.inf), _bounds(d.get("hi"), np.inf), mode
        )
    raise ValueError(f"unknown kernel type {kind!r}")


# ---------------------------------------------------------------- process descriptions


@dataclass(frozen=True, eq=False)
class ModeSpec:
    """Per-mode data: flow field, open box domain and optional diffusion."""

    field: VectorField
    lo: np.ndarray = None
    hi: np.ndarray = None
    diffusion: Diffusion | None = None

    def __post_init__(self):
        d = self.field.dim
        lo = _vec(np.full(d, -np.inf) if self.lo is None else self.lo, "lo")
        hi = _vec(np.full(d, np.inf) if self.hi is None else self.hi, "hi")
        if lo.shape != (d,) or hi.shape != (d,):
            raise DimensionError(f"domain bounds must have length {d}")
        if not np.all(lo < hi):
            raise ValueError("mode domain needs lo < hi")
        if self.diffusion is not None and self.diffusion.dim != d:
            raise DimensionError("diffusion rows must match the mode dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.field.dim

    def inside(self, y) -> bool:
        return _strictly_inside(np.asarray(y), self.lo, self.hi)

    @property
    def has_boundary(self) -> bool:
        return bool(np.any(np.isfinite(self.lo)) or np.any(np.isfinite(self.hi)))


def _check_kernel_modes(kernels: Sequence, modes: Mapping) -> None:
    for k in kernels:
        if k is None:
            continue
        if k.mode is not None and k.mode not in modes:
            raise ValueError(f"kernel targets unknown mode {k.mode!r}")
        if k.mode is not None and k.dim != modes[k.mode].dim:
            raise DimensionError(f"kernel dimension {k.dim} does not match mode {k.mode!r}")


@dataclass(frozen=True, eq=False)
class PdmpSpec:
    modes: Mapping[ModeId, ModeSpec]
    rate: RateSpec
    kernel: ResetKernel

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode is required")
        _check_kernel_modes([self.kernel], self.modes)

    def dim(self, mode: ModeId) -> int:
        return self.modes[mode].dim


@dataclass(frozen=True, eq=False)
class ShsSpec:
    modes: Mapping[ModeId, ModeSpec]
    rate: RateSpec | None
    interior_kernel: ResetKernel | None
    boundary_kernel: ResetKernel | None

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode is required")
        for q, m in self.modes.items():
            if m.diffusion is None:
                raise ValueError(f"mode {q!r} needs a diffusion spec")
        _check_kernel_modes([self.interior_kernel, self.boundary_kernel], self.modes)

    def dim(self, mode: ModeId) -> int:
        return self.modes[mode].dim


# ---------------------------------------------------------------- trajectories

SPONTANEOUS = "spontaneous"
FORCED = "forced"


@dataclass(frozen=True)
class JumpRecord:
    time: float
    pre: HybridState
    post: HybridState
    cause: str


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[HybridState] = field(default_factory=list)
    jumps: list[JumpRecord] = field(default_factory=list)

    def append(self, t: float, state: HybridState) -> None:
        self.times.append(float(t))
        self.states.append(state)

    @property
    def final(self) -> HybridState:
        return self.states[-1]

    def jump_times(self) -> np.ndarray:
        return np.array([j.time for j in self.jumps])

    def __eq__(self, other):
        return (
            isinstance(other, Trajectory)
            and self.times == other.times
            and self.states == other.states
            and self.jumps == other.jumps
        )
