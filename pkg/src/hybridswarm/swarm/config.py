"""Scenario description for a swarm run."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..agent.model import AgentSpec, CouplingSpec
from ..errors import ConfigError
from ..rng import AGENT_BITS


@dataclass(frozen=True)
class Numerics:
    dt: float
    horizon: float
    stride: int = 1
    max_jumps: int = 100_000

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def problems(self) -> list[str]:
        errs = []
        if not self.dt > 0:
            errs.append("numerics.dt must be positive")
        if not self.horizon > 0:
            errs.append("numerics.horizon must be positive")
        if self.dt > 0 and self.horizon > 0:
            n = round(self.horizon / self.dt)
            if n < 1 or abs(n * self.dt - self.horizon) > 1e-9 * self.horizon:
                errs.append("numerics.horizon must be a whole number of dt steps")
        if self.stride < 1:
            errs.append("numerics.stride must be at least 1")
        if self.max_jumps < 1:
            errs.append("numerics.max_jumps must be at least 1")
        return errs


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    agents: tuple[AgentSpec, ...]
    coupling: CouplingSpec
    numerics: Numerics
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        errs = self.problems()
        if errs:
            raise ConfigError(errs)

    def problems(self) -> list[str]:
        errs = []
        if len(self.agents) < 1:
            errs.append("at least one agent is required")
            return errs
        d = self.agents[0].dim
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            errs.append("agent ids must be unique")
        for pos, a in enumerate(self.agents):
            if a.dim != d:
                errs.append(f"agents[{pos}] has dimension {a.dim}, expected {d}")
            sid = a.id if a.stream_id is None else a.stream_id
            if sid >= 1 << AGENT_BITS:
                errs.append(f"agents[{pos}] stream id {sid} must be below 2**{AGENT_BITS}")
        if self.coupling.dim != d:
            errs.append(f"coupling dimension {self.coupling.dim} does not match agent dimension {d}")
        known = set(ids)
        bad = sorted(
            {int(x) for x in np.concatenate([self.coupling.targets, self.coupling.sources])} - known
        )
        if bad:
            errs.append(f"coupling references unknown agents {bad[:10]}")
        errs.extend(self.numerics.problems())
        if not 0 <= self.seed < 1 << 64:
            errs.append("seed must be a 64-bit unsigned integer")
        return errs

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def dim(self) -> int:
        return self.agents[0].dim

    @property
    def ids(self) -> list[int]:
        return [a.id for a in self.agents]

    def agent(self, agent_id: int) -> AgentSpec:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def with_numerics(self, **kw) -> "ScenarioConfig":
        return replace(self, numerics=replace(self.numerics, **kw))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def with_coupling(self, coupling: CouplingSpec) -> "ScenarioConfig":
        return replace(self, coupling=coupling)
