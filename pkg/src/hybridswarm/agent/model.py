"""Hybrid agents with a decaying guard, a local clock and jump coupling.

Each agent's coordination state z follows an SDE in its current mode. The
guard starts from a seed gamma at the agent's last forced jump and decays,
beta = gamma * exp(-k * clock). Neighbors that jumped more recently than the
agent push it towards its guard through the coupling input

    I = sum_j w_ij * exp(-k * clock_j)    over j with |w_ij| >= threshold
                                           and clock_j <= clock_i

and a forced jump fires when z + I first reaches beta in some component.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core.flow import integrate_field
from ..core.specs import Diffusion, LinearField, ResetKernel, VectorField
from ..errors import DimensionError, GuardError, UnknownAgentError


@dataclass(frozen=True, eq=False)
class GuardSpec:
    """Guard dynamics: decay rate, seed kernel and optional general right-hand side.

    ``rhs`` is None for pure exponential decay; otherwise the guard solves
    beta' = rhs(beta) from the seed.
    """

    k: float
    kernel: ResetKernel
    rhs: VectorField | None = None

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError("guard decay rate must be non-negative")
        if not self.kernel.support_positive():
            raise GuardError("guard seed kernel must have strictly positive support")
        if self.rhs is not None and self.rhs.dim != self.kernel.dim:
            raise DimensionError("guard right-hand side must match the seed dimension")
        object.__setattr__(self, "k", float(self.k))

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def default_rhs(self) -> LinearField:
        return LinearField(-self.k * np.eye(self.dim), np.zeros(self.dim))


def guard_value(gamma, k: float, clock, rhs: VectorField | None = None, dt: float = 1e-3):
    """Guard level after ``clock`` time units from seed ``gamma``.

    Closed form gamma * exp(-k * clock) unless a right-hand side is given,
    in which case the guard ODE is integrated with RK4.
    """
    gamma = np.asarray(gamma, dtype=float)
    if rhs is None:
        clock = np.asarray(clock, dtype=float)
        decay = np.exp(-k * clock)
        return gamma * (decay[..., None] if clock.ndim else decay)
    return integrate_field(rhs, gamma, float(clock), dt)


@dataclass(frozen=True, eq=False)
class AgentModeSpec:
    field: VectorField
    diffusion: Diffusion
    label: str | None = None

    def __post_init__(self):
        if self.diffusion.dim != self.field.dim:
            raise DimensionError("diffusion rows must match the field dimension")

    @property
    def dim(self) -> int:
        return self.field.dim


CYCLIC = "cyclic"


@dataclass(frozen=True, eq=False)
class AgentSpec:
    """Static description of one agent.

    ``transition`` is ``"cyclic"`` or a probability vector over modes used
    to pick the post-jump mode. ``seed``/``stream_id`` override the master
    seed and the id used to derive the agent's random streams, which lets a
    composed scenario reuse the streams an agent had in its own collective.
    """

    id: int
    modes: tuple[AgentModeSpec, ...]
    z_kernel: ResetKernel
    guard: GuardSpec
    initial_mode: int = 0
    transition: str | tuple[float, ...] = CYCLIC
    seed: int | None = None
    stream_id: int | None = None

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if self.id < 0 or int(self.id) != self.id:
            raise ValueError("agent id must be a non-negative integer")
        if not modes:
            raise ValueError("an agent needs at least one mode")
        d = modes[0].dim
        for q, m in enumerate(modes):
            if m.dim != d:
                raise DimensionError(f"mode {q} has dimension {m.dim}, expected {d}")
        if self.z_kernel.dim != d:
            raise DimensionError("initial z kernel dimension mismatch")
        if self.guard.dim != d:
            raise DimensionError("guard dimension mismatch")
        if not 0 <= self.initial_mode < len(modes):
            raise ValueError("initial mode out of range")
        if self.transition != CYCLIC:
            p = np.asarray(self.transition, dtype=float)
            if p.shape != (len(modes),) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("transition probabilities must be a distribution over modes")
            object.__setattr__(self, "transition", tuple(float(x) for x in p))

    @property
    def dim(self) -> int:
        return self.modes[0].dim

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def wiener_dim(self) -> int:
        return max(m.diffusion.m for m in self.modes)

    def next_mode(self, mode: int, u: float | None = None) -> int:
        if self.transition == CYCLIC:
            return (mode + 1) % self.n_modes
        cdf = np.cumsum(self.transition)
        return int(min(np.searchsorted(cdf, u, side="right"), self.n_modes - 1))


@dataclass(frozen=True, eq=False)
class AgentState:
    """Snapshot of one agent at a grid time.

    ``known`` maps neighbor ids to their last jump time as learned from
    messages; neighbors that never announced a jump are absent.
    ``beta`` and ``coupling`` are the guard and coupling input at ``time``.
    """

    mode: int
    z: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    coupling: np.ndarray
    time: float
    last_jump: float
    step: int = 0
    jumps: int = 0
    reset_counter: int = 0
    known: Mapping[int, float] = field(default_factory=dict)

    @property
    def clock(self) -> float:
        return self.time - self.last_jump

    @property
    def z_tilde(self) -> np.ndarray:
        return effective_position(self.z, self.coupling)

    def replace(self, **kw) -> "AgentState":
        return replace(self, **kw)

    def __eq__(self, other):
        if not isinstance(other, AgentState):
            return NotImplemented
        return (
            self.mode == other.mode
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.gamma, other.gamma)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.coupling, other.coupling)
            and (self.time, self.last_jump, self.step, self.jumps, self.reset_counter)
            == (other.time, other.last_jump, other.step, other.jumps, other.reset_counter)
            and dict(self.known) == dict(other.known)
        )


# ---------------------------------------------------------------- coupling


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Sparse weight table keyed by agent ids.

    Entry ``(target, source, w)`` contributes ``w`` to the target's input
    when ``source`` jumps. Only entries with Euclidean norm at or above the
    threshold are stored; the rest can never enter a neighborhood.
    """

    targets: np.ndarray
    sources: np.ndarray
    weights: np.ndarray
    threshold: float
    dim: int = 1

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("coupling threshold must be strictly positive")
        t = np.asarray(self.targets, dtype=np.int64).reshape(-1)
        s = np.asarray(self.sources, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(len(t), self.dim)
        if t.shape != s.shape:
            raise DimensionError("targets and sources must have equal length")
        if np.any(t == s):
            raise ValueError("self-coupling entries must be zero")
        keep = np.linalg.norm(w, axis=1) >= self.threshold if len(t) else np.zeros(0, bool)
        t, s, w = t[keep], s[keep], w[keep]
        order = np.lexsort((s, t))
        t, s, w = t[order], s[order], w[order]
        if len(t) > 1 and np.any((np.diff(t) == 0) & (np.diff(s) == 0)):
            raise ValueError("duplicate coupling entries")
        for a in (t, s, w):
            a.setflags(write=False)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "sources", s)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "threshold", float(self.threshold))

    @classmethod
    def from_edges(cls, edges: Iterable, threshold: float, dim: int = 1) -> "CouplingSpec":
        edges = list(edges)
        if not edges:
            return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, dim)), threshold, dim)
        t = [int(e[0]) for e in edges]
        s = [int(e[1]) for e in edges]
        w = [np.asarray(e[2], dtype=float).reshape(dim) for e in edges]
        return cls(np.array(t), np.array(s), np.array(w), threshold, dim)

    @classmethod
    def from_dense(cls, weights, ids: Sequence[int], threshold: float) -> "CouplingSpec":
        """``weights[a][b]`` is the weight of source ``ids[b]`` on target ``ids[a]``."""
        w = np.asarray(weights, dtype=float)
        n = len(ids)
        if w.ndim == 2:
            w = w[..., None]
        if w.shape[:2] != (n, n):
            raise DimensionError(f"dense coupling must be {n}x{n}, got {w.shape[:2]}")
        diag = w[np.arange(n), np.arange(n)]
        if np.any(diag != 0):
            raise ValueError("self-coupling entries must be zero")
        a, b = np.nonzero(np.linalg.norm(w, axis=2) >= threshold)
        ids = np.asarray(ids, dtype=np.int64)
        return cls(ids[a], ids[b], w[a, b], threshold, w.shape[2])

    @classmethod
    def empty(cls, threshold: float = 1.0, dim: int = 1) -> "CouplingSpec":
        return cls.from_edges([], threshold, dim)

    def __len__(self) -> int:
        return len(self.targets)

    def edges(self):
        return [
            (int(t), int(s), self.weights[e].copy())
            for e, (t, s) in enumerate(zip(self.targets, self.sources))
        ]

    def row(self, target: int):
        """Sources and weights feeding ``target``, by ascending source id."""
        lo, hi = np.searchsorted(self.targets, [target, target + 1])
        return self.sources[lo:hi], self.weights[lo:hi]

    def weight(self, target: int, source: int) -> np.ndarray:
        src, w = self.row(target)
        hit = np.flatnonzero(src == source)
        return w[hit[0]].copy() if hit.size else np.zeros(self.dim)

    def recipients(self, source: int) -> np.ndarray:
        return np.sort(self.targets[self.sources == source])

    def __eq__(self, other):
        return (
            isinstance(other, CouplingSpec)
            and self.threshold == other.threshold
            and self.dim == other.dim
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.weights, other.weights)
        )


def _check_agent(i, clocks):
    if i not in clocks:
        raise UnknownAgentError(i)


def neighborhood(i: int, coupling: CouplingSpec, clocks: Mapping[int, float]) -> set[int]:
    """Ids j with |w_ij| >= threshold and clock_j <= clock_i.

    ``clocks`` maps agent ids to their current clocks; ids missing from it
    (agents whose clock is unknown to ``i``) are never neighbors.
    """
    _check_agent(i, clocks)
    if any(c < 0 for c in clocks.values()):
        raise ValueError("clock values must be non-negative")
    src, _ = coupling.row(i)
    ci = clocks[i]
    return {int(j) for j in src if int(j) in clocks and clocks[int(j)] <= ci}


def coupling_input(i: int, coupling: CouplingSpec, k: float, clocks: Mapping[int, float]) -> np.ndarray:
    """Closed-form coupling input: one term per current neighbor, ascending id."""
    nbrs = neighborhood(i, coupling, clocks)
    src, w = coupling.row(i)
    total = np.zeros(coupling.dim)
    for e, j in enumerate(src):
        if int(j) in nbrs:
            total = total + w[e] * np.exp(-k * clocks[int(j)])
    return total


def coupling_input_recursive(
    i: int,
    coupling: CouplingSpec,
    k: float,
    events: Iterable[tuple[float, int]],
    t: float,
    own_last_jump: float = 0.0,
) -> np.ndarray:
    """Coupling input built by folding neighbor jump events one at a time.

    Each event ``(time, j)`` adds the increment w_ij * exp(-k (t - time));
    a later event from the same neighbor first removes that neighbor's
    previous increment, so the result matches :func:`coupling_input`.
    Events before the agent's own last jump are ignored.
    """
    src, w = coupling.row(i)
    index = {int(j): e for e, j in enumerate(src)}
    terms: dict[int, np.ndarray] = {}
    total = np.zeros(coupling.dim)
    for time, j in sorted(events):
        if j not in index or time < own_last_jump or time > t:
            continue
        inc = w[index[j]] * np.exp(-k * (t - time))
        if j in terms:
            total = total - terms[j]
        terms[j] = inc
        total = total + inc
    return total


def effective_position(z, coupling) -> np.ndarray:
    return np.asarray(z, dtype=float) + np.asarray(coupling, dtype=float)


def modified_guard(beta, coupling) -> np.ndarray:
    return np.asarray(beta, dtype=float) - np.asarray(coupling, dtype=float)
