"""The (guard, clock) abstraction of a swarm and its path correspondence.

Projecting a swarm trace onto guards and clocks loses z, z-tilde and the
modes, but the jump times of every agent remain recoverable: they are the
instants where an agent's clock restarts from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CorruptTraceError
from .trace import SwarmTrace

_CLOCK_TOL = 1e-9


@dataclass(eq=False)
class AbstractionTrace:
    """Guards ``beta`` (T, N, d) and clocks ``tau`` (T, N) on a time grid.

    ``event_time``/``event_agent``/``event_beta`` optionally carry the exact
    jump instants and post-jump guards captured at extraction.
    """

    agent_ids: np.ndarray
    k: np.ndarray
    times: np.ndarray
    beta: np.ndarray
    tau: np.ndarray
    event_time: np.ndarray | None = None
    event_agent: np.ndarray | None = None
    event_beta: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def dim(self) -> int:
        return self.beta.shape[2]

    def state_vector(self, row: int) -> np.ndarray:
        """Grid row ``row`` flattened as (beta^1, ..., beta^N, tau^1, ..., tau^N)."""
        return np.concatenate([self.beta[row].reshape(-1), self.tau[row]])

    def has_events(self) -> bool:
        return self.event_time is not None

    def __eq__(self, other):
        if not isinstance(other, AbstractionTrace):
            return NotImplemented
        fields = ("agent_ids", "k", "times", "beta", "tau")
        same = all(np.array_equal(getattr(self, f), getattr(other, f)) for f in fields)
        if self.has_events() != other.has_events():
            return False
        if self.has_events():
            same = same and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("event_time", "event_agent", "event_beta")
            )
        return same


def extract_abstraction(trace, embed_events: bool = True) -> AbstractionTrace:
    """Project a swarm trace onto (beta, tau); idempotent on abstractions."""
    if isinstance(trace, AbstractionTrace):
        ev = trace.has_events() and embed_events
        return AbstractionTrace(
            trace.agent_ids.copy(), trace.k.copy(), trace.times.copy(), trace.beta.copy(),
            trace.tau.copy(),
            trace.event_time.copy() if ev else None,
            trace.event_agent.copy() if ev else None,
            trace.event_beta.copy() if ev else None,
        )
    if not isinstance(trace, SwarmTrace):
        raise TypeError("expected a SwarmTrace or AbstractionTrace")
    jl = trace.jumps
    return AbstractionTrace(
        trace.agent_ids.copy(),
        trace.k.copy(),
        trace.times.copy(),
        trace.beta.copy(),
        trace.upsilon.copy(),
        jl.time.copy() if embed_events else None,
        jl.agent.copy() if embed_events else None,
        jl.post_beta.copy() if embed_events else None,
    )


def _check_clocks(abs_: AbstractionTrace) -> None:
    tau, t = abs_.tau, abs_.times
    if np.any(np.diff(t) <= 0):
        raise CorruptTraceError("time grid is not strictly increasing")
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise CorruptTraceError("negative or non-finite clock value")
    if np.any(tau > t[:, None] + _CLOCK_TOL):
        raise CorruptTraceError("clock exceeds elapsed time")
    dt = np.diff(t)[:, None]
    if np.any(np.diff(tau, axis=0) > dt + _CLOCK_TOL):
        raise CorruptTraceError("clock grows faster than unit slope")


def _gridded_resets(times, tau_col) -> list[float]:
    out = []
    for r in range(len(times)):
        grew = tau_col[r] - (tau_col[r - 1] if r else 0.0)
        elapsed = times[r] - (times[r - 1] if r else 0.0)
        if grew < elapsed - _CLOCK_TOL:
            out.append(float(times[r] - tau_col[r]))
    return out


def reconstruct_jump_times(abs_: AbstractionTrace) -> dict[int, np.ndarray]:
    """Per-agent jump times.

    With embedded events the exact instants are returned after checking that
    they explain every gridded clock value; otherwise they are read off the
    clock resets on the grid (only the last jump between two grid points is
    visible).
    """
    _check_clocks(abs_)
    out = {}
    for col, a in enumerate(abs_.agent_ids.tolist()):
        if abs_.has_events():
            ts = abs_.event_time[abs_.event_agent == a]
            if np.any(np.diff(ts) <= 0):
                raise CorruptTraceError(f"agent {a}: jump times not strictly increasing")
            idx = np.searchsorted(ts, abs_.times, side="right") - 1
            last = np.where(idx >= 0, ts[np.maximum(idx, 0)], 0.0) if ts.size else np.zeros(abs_.times.size)
            expect = abs_.times - last
            if np.any(np.abs(expect - abs_.tau[:, col]) > _CLOCK_TOL * np.maximum(1.0, abs_.times)):
                raise CorruptTraceError(f"agent {a}: embedded jumps disagree with clock samples")
            out[a] = ts.copy()
        else:
            out[a] = np.array(_gridded_resets(abs_.times, abs_.tau[:, col]))
    return out


def roundtrip_matches(trace: SwarmTrace) -> bool:
    """Extract then reconstruct, and compare with the jump log bit for bit."""
    rec = reconstruct_jump_times(extract_abstraction(trace))
    ref = trace.jump_times()
    return set(rec) == set(ref) and all(np.array_equal(rec[a], ref[a]) for a in ref)


def reintegrate(abs_: AbstractionTrace, row: int) -> tuple[np.ndarray, np.ndarray]:
    """Predict (beta, tau) on later grid rows from row ``row`` alone.

    Uses exponential guard decay and unit-slope clocks, valid up to each
    agent's next jump.
    """
    dt = abs_.times[row:] - abs_.times[row]
    beta = abs_.beta[row][None] * np.exp(-abs_.k[None, :] * dt[:, None])[..., None]
    tau = abs_.tau[row][None] + dt[:, None]
    return beta, tau
