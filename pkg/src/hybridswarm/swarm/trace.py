"""Swarm traces: gridded per-agent samples plus an exact jump log."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class JumpLog:
    """Columnar jump log ordered by (time, agent id)."""

    time: np.ndarray
    agent: np.ndarray
    component: np.ndarray
    pre_mode: np.ndarray
    pre_z: np.ndarray
    pre_z_tilde: np.ndarray
    pre_beta: np.ndarray
    post_mode: np.ndarray
    post_z: np.ndarray
    post_beta: np.ndarray
    recipients: list[tuple[int, ...]]

    @classmethod
    def from_events(cls, events, dim: int) -> "JumpLog":
        n = len(events)

        def vec(attr):
            if n == 0:
                return np.zeros((0, dim))
            return np.array([getattr(e, attr) for e in events], dtype=float).reshape(n, dim)

        return cls(
            time=np.array([e.time for e in events], dtype=float),
            agent=np.array([e.agent for e in events], dtype=np.int64),
            component=np.array([e.component for e in events], dtype=np.int64),
            pre_mode=np.array([e.pre_mode for e in events], dtype=np.int64),
            pre_z=vec("pre_z"),
            pre_z_tilde=vec("pre_z_tilde"),
            pre_beta=vec("pre_beta"),
            post_mode=np.array([e.post_mode for e in events], dtype=np.int64),
            post_z=vec("post_z"),
            post_beta=vec("post_beta"),
            recipients=[tuple(e.recipients) for e in events],
        )

    def __len__(self) -> int:
        return len(self.time)

    def times_of(self, agent: int) -> np.ndarray:
        return self.time[self.agent == agent]

    def __eq__(self, other):
        if not isinstance(other, JumpLog):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in (
                "time", "agent", "component", "pre_mode", "pre_z", "pre_z_tilde",
                "pre_beta", "post_mode", "post_z", "post_beta",
            )
        ) and self.recipients == other.recipients


@dataclass(eq=False)
class SwarmTrace:
    """One replication of a swarm run.

    Sample arrays have shape ``(T, N)`` or ``(T, N, d)``; column ``a``
    belongs to agent ``agent_ids[a]``.
    """

    agent_ids: np.ndarray
    k: np.ndarray
    times: np.ndarray
    mode: np.ndarray
    z: np.ndarray
    z_tilde: np.ndarray
    beta: np.ndarray
    upsilon: np.ndarray
    jumps: JumpLog
    dt: float
    horizon: float
    seed: int
    replication: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def dim(self) -> int:
        return self.z.shape[2]

    def column(self, agent: int) -> int:
        hit = np.flatnonzero(self.agent_ids == agent)
        if hit.size == 0:
            raise KeyError(agent)
        return int(hit[0])

    def jump_times(self) -> dict[int, np.ndarray]:
        return {int(a): self.jumps.times_of(int(a)) for a in self.agent_ids}

    def __eq__(self, other):
        if not isinstance(other, SwarmTrace):
            return NotImplemented
        arrays = ("agent_ids", "k", "times", "mode", "z", "z_tilde", "beta", "upsilon")
        return (
            all(np.array_equal(getattr(self, f), getattr(other, f)) for f in arrays)
            and self.jumps == other.jumps
            and (self.dt, self.horizon, self.seed, self.replication)
            == (other.dt, other.horizon, other.seed, other.replication)
        )

    def select(self, agents) -> "SwarmTrace":
        """Sub-trace restricted to ``agents`` (jump recipients untouched)."""
        cols = [self.column(a) for a in agents]
        keep = np.isin(self.jumps.agent, list(agents))
        idx = np.flatnonzero(keep)
        jl = self.jumps
        sub = JumpLog(
            jl.time[idx], jl.agent[idx], jl.component[idx], jl.pre_mode[idx], jl.pre_z[idx],
            jl.pre_z_tilde[idx], jl.pre_beta[idx], jl.post_mode[idx], jl.post_z[idx],
            jl.post_beta[idx], [jl.recipients[i] for i in idx],
        )
        return SwarmTrace(
            self.agent_ids[cols], self.k[cols], self.times, self.mode[:, cols], self.z[:, cols],
            self.z_tilde[:, cols], self.beta[:, cols], self.upsilon[:, cols], sub,
            self.dt, self.horizon, self.seed, self.replication,
        )
