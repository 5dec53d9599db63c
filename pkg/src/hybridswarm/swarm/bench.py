"""Synthetic scenarios for throughput measurements."""

from __future__ import annotations

import time

import numpy as np

from ..agent.model import AgentModeSpec, AgentSpec, CouplingSpec, GuardSpec
from ..core.specs import ConstantDiffusion, ConstantField, UniformBox
from .config import Numerics, ScenarioConfig
from .engine import simulate_swarm


def random_coupling_edges(ids, dim: int, mean_degree=None, p=None, weight_range=(0.0, 1.0), seed: int = 0):
    """Erdos-Renyi directed edges over ``ids`` with uniform weight components.

    Returns (targets, sources, weights) arrays.

    The number of edges is binomial over all ordered pairs; the edge set is
    then a uniform draw of that size, which gives the same law without
    enumerating every pair.
    """
    n = len(ids)
    pairs = n * (n - 1)
    ids = np.asarray(ids, dtype=np.int64)
    if pairs == 0:
        return ids[:0], ids[:0], np.zeros((0, dim))
    if p is None:
        p = float(mean_degree) / (n - 1)
    if not 0 <= p <= 1:
        raise ValueError("edge probability must lie in [0, 1]")
    lo, hi = (float(x) for x in weight_range)
    if not lo <= hi:
        raise ValueError("weight_range must satisfy lo <= hi")
    rng = np.random.default_rng(seed)
    m = int(rng.binomial(pairs, p))
    codes = np.zeros(0, dtype=np.int64)
    while codes.size < m:
        extra = rng.integers(0, pairs, m - codes.size, dtype=np.int64)
        codes = np.unique(np.concatenate([codes, extra]))
    codes = np.sort(codes)
    t = codes // (n - 1)
    s = codes % (n - 1)
    s = s + (s >= t)
    w = rng.uniform(lo, hi, (m, dim))
    return ids[t], ids[s], w


def bench_scenario(
    n_agents: int,
    mean_degree: float = 8.0,
    horizon: float = 10.0,
    dt: float = 1e-3,
    seed: int = 0,
    weight_range=(0.02, 0.06),
    threshold: float = 0.01,
) -> ScenarioConfig:
    """Identical drifting agents on a sparse random coupling graph.

    Drift 1, noise 0.3, guard decay 0.5 with seeds uniform on [0.8, 1.2]
    and initial states uniform on [0, 0.3]: every agent jumps roughly twice
    per time unit and each jump reaches about ``mean_degree`` neighbours.
    """
    mode = AgentModeSpec(ConstantField([1.0]), ConstantDiffusion([[0.3]]))
    guard = GuardSpec(0.5, UniformBox([0.8], [1.2]))
    z0 = UniformBox([0.0], [0.3])
    agents = tuple(AgentSpec(i, (mode,), z0, guard) for i in range(n_agents))
    t, s, w = random_coupling_edges(range(n_agents), 1, mean_degree, None, weight_range, seed)
    coupling = CouplingSpec(t, s, w, threshold, 1)
    stride = max(1, int(round(horizon / dt)))
    return ScenarioConfig(agents, coupling, Numerics(dt, horizon, stride), seed)


def run_bench(config: ScenarioConfig, seed: int | None = None) -> dict:
    """Simulate without intermediate samples and report throughput."""
    start = time.perf_counter()
    trace = simulate_swarm(config, seed=seed, record=False)
    wall = time.perf_counter() - start
    steps = config.n_agents * config.numerics.n_steps
    return {
        "agents": config.n_agents,
        "edges": len(config.coupling),
        "agent_steps": steps,
        "jumps": len(trace.jumps),
        "wall_seconds": wall,
        "agent_steps_per_second": steps / wall if wall > 0 else float("inf"),
    }
