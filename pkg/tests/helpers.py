"""Scenario builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from hybridswarm.agent.model import AgentModeSpec, AgentSpec, CouplingSpec, GuardSpec
from hybridswarm.core.specs import (
    ConstantDiffusion,
    ConstantField,
    OrnsteinUhlenbeckDrift,
    PointMass,
    UniformBox,
    ZeroDiffusion,
)
from hybridswarm.swarm.config import Numerics, ScenarioConfig


def drift_agent(
    agent_id: int,
    drift: float = 1.0,
    sigma: float = 0.3,
    k: float = 0.5,
    guard=(0.8, 1.2),
    z0=(0.0, 0.3),
    n_modes: int = 1,
    seed: int | None = None,
) -> AgentSpec:
    """One-dimensional agent with constant drift; intervals give uniform kernels."""
    diffusion = ConstantDiffusion([[sigma]]) if sigma > 0 else ZeroDiffusion(1, 1)
    mode = AgentModeSpec(ConstantField([drift]), diffusion)
    gk = PointMass([guard]) if np.isscalar(guard) else UniformBox([guard[0]], [guard[1]])
    zk = PointMass([z0]) if np.isscalar(z0) else UniformBox([z0[0]], [z0[1]])
    return AgentSpec(agent_id, (mode,) * n_modes, zk, GuardSpec(k, gk), seed=seed)


def ou_agent(agent_id: int, theta=1.0, sigma=0.2, k=1.0) -> AgentSpec:
    mode = AgentModeSpec(OrnsteinUhlenbeckDrift(theta, [0.0]), ConstantDiffusion([[sigma]]))
    return AgentSpec(agent_id, (mode,), PointMass([0.0]), GuardSpec(k, UniformBox([0.5], [1.5])))


def scenario(
    agents,
    edges=(),
    threshold: float = 0.01,
    dt: float = 1e-3,
    horizon: float = 2.0,
    stride: int = 10,
    max_jumps: int = 100_000,
    seed: int = 0,
) -> ScenarioConfig:
    dim = agents[0].dim
    coupling = CouplingSpec.from_edges(edges, threshold, dim)
    return ScenarioConfig(tuple(agents), coupling, Numerics(dt, horizon, stride, max_jumps), seed)


def random_scenario(rng: np.random.Generator, max_agents: int = 10, horizon: float = 2.0) -> ScenarioConfig:
    """Small random swarm with noisy drifting agents and random sparse coupling."""
    n = int(rng.integers(1, max_agents + 1))
    agents = []
    for i in range(n):
        lo = float(rng.uniform(0.5, 1.0))
        agents.append(
            drift_agent(
                i,
                drift=float(rng.uniform(0.5, 2.0)),
                sigma=float(rng.uniform(0.0, 0.5)),
                k=float(rng.uniform(0.0, 1.0)),
                guard=(lo, lo + float(rng.uniform(0.1, 0.5))),
                n_modes=int(rng.integers(1, 3)),
            )
        )
    edges = []
    for t in range(n):
        for s in range(n):
            if t != s and rng.random() < 0.4:
                edges.append((t, s, [float(rng.uniform(0.0, 0.4))]))
    return scenario(agents, edges, threshold=0.02, horizon=horizon, stride=50, seed=int(rng.integers(1 << 32)))


def ks_distance(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov statistic of ``samples`` against ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = cdf(x)
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def inverse_gaussian_cdf(t, mean: float = 1.0, shape: float = 1.0):
    """Closed-form CDF of the inverse-Gaussian law (first passage of drifted BM)."""
    from math import erfc, exp, sqrt

    def phi(x):
        return 0.5 * erfc(-x / sqrt(2.0))

    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    for i, s in enumerate(t):
        if np.isinf(s):
            out[i] = 1.0
        elif s > 0:
            a = sqrt(shape / s)
            out[i] = phi(a * (s / mean - 1)) + exp(2 * shape / mean) * phi(-a * (s / mean + 1))
    return out
