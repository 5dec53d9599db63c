"""Synchronous swarm simulation over many agents and replications."""

from __future__ import annotations

import numpy as np

from ..agent.lanes import EFFECTIVE, LaneKernel
from ..agent.step import agent_keys
from .config import ScenarioConfig
from .trace import JumpLog, SwarmTrace


def build_kernel(
    config: ScenarioConfig,
    replications,
    seed: int | None = None,
    predicate: str = EFFECTIVE,
) -> LaneKernel:
    """Lane kernel for ``config`` with one block of N lanes per replication.

    Lane ``r * N + a`` is agent ``config.agents[a]`` in the r-th requested
    replication.
    """
    master = config.seed if seed is None else seed
    agents = config.agents
    N = len(agents)
    reps = list(replications)
    R = len(reps)
    pos = {a.id: p for p, a in enumerate(agents)}

    noise, reset = [], []
    for r in reps:
        for a in agents:
            nk, rk = agent_keys(a, master, r)
            noise.append(nk)
            reset.append(rk)

    cp = config.coupling
    tpos = np.array([pos[int(t)] for t in cp.targets], dtype=np.int64)
    spos = np.array([pos[int(s)] for s in cp.sources], dtype=np.int64)
    E = len(tpos)
    offs = np.repeat(np.arange(R, dtype=np.int64) * N, E)
    recv = np.tile(tpos, R) + offs
    src = np.tile(spos, R) + offs
    w = np.tile(cp.weights, (R, 1))
    order = np.lexsort((np.tile(cp.sources, R), recv))
    edges = (recv[order], src[order], w[order])

    lane_id = np.tile(np.array([a.id for a in agents], dtype=np.int64), R)
    return LaneKernel(
        agents,
        np.tile(np.arange(N), R),
        lane_id,
        noise,
        reset,
        edges,
        lane_id,
        config.numerics.dt,
        predicate,
        config.numerics.max_jumps,
    )


def run_ensemble(
    config: ScenarioConfig,
    reps: int | None = None,
    seed: int | None = None,
    replications=None,
    predicate: str = EFFECTIVE,
    record: bool = True,
    stride: int | None = None,
) -> list[SwarmTrace]:
    """Simulate several replications side by side.

    Replication r uses the streams keyed by (seed, agent id, r), so any
    replication's trace is the same whether it runs alone or with others.
    With ``record=False`` only the initial and final samples are kept.
    """
    if replications is None:
        replications = range(1 if reps is None else reps)
    replications = list(replications)
    master = config.seed if seed is None else seed
    num = config.numerics
    stride = num.stride if stride is None else stride
    kern = build_kernel(config, replications, master, predicate)
    kern.initialize()
    N, R, d = config.n_agents, len(replications), config.dim
    n_steps = num.n_steps

    times, samples = [], []

    def snapshot(n):
        t = kern.time_of(n)
        times.append(t)
        samples.append(
            (
                kern.mode.reshape(R, N).copy(),
                kern.z.reshape(R, N, d).copy(),
                (kern.z + kern.I).reshape(R, N, d),
                kern.beta.reshape(R, N, d).copy(),
                (t - kern.last).reshape(R, N),
            )
        )

    snapshot(0)
    per_rep = [[] for _ in range(R)]
    for n in range(n_steps):
        for ev in kern.step():
            per_rep[ev.lane // N].append(ev)
        if n + 1 == n_steps or (record and (n + 1) % stride == 0):
            snapshot(n + 1)

    k = np.array([a.guard.k for a in config.agents])
    ids = np.array(config.ids, dtype=np.int64)
    times = np.array(times)
    traces = []
    for ri, r in enumerate(replications):
        cols = [np.stack([s[f][ri] for s in samples]) for f in range(5)]
        traces.append(
            SwarmTrace(
                agent_ids=ids.copy(),
                k=k.copy(),
                times=times.copy(),
                mode=cols[0],
                z=cols[1],
                z_tilde=cols[2],
                beta=cols[3],
                upsilon=cols[4],
                jumps=JumpLog.from_events(per_rep[ri], d),
                dt=num.dt,
                horizon=n_steps * num.dt,
                seed=master,
                replication=r,
            )
        )
    return traces


def simulate_swarm(
    config: ScenarioConfig,
    seed: int | None = None,
    replication: int = 0,
    predicate: str = EFFECTIVE,
    record: bool = True,
) -> SwarmTrace:
    """One replication of ``config``; deterministic given the seed."""
    return run_ensemble(config, seed=seed, replications=[replication], predicate=predicate, record=record)[0]
