import math
from dataclasses import replace

import numpy as np
import pytest
from helpers import drift_agent, random_scenario, scenario

from hybridswarm.agent.lanes import MODIFIED
from hybridswarm.agent.model import coupling_input
from hybridswarm.agent.step import CouplingView, initial_agent_state, step_agent
from hybridswarm.errors import CorruptTraceError, DimensionError, UnknownAgentError, ZenoSuspected
from hybridswarm.swarm import (
    AbstractionTrace,
    compose_collectives,
    extract_abstraction,
    reconstruct_jump_times,
    reintegrate,
    roundtrip_matches,
    run_ensemble,
    simulate_swarm,
)
from hybridswarm.swarm.bench import bench_scenario, random_coupling_edges, run_bench


def owning_step(t, dt):
    # step n owns (n*dt, (n+1)*dt]; jumps may sit one ulp after n*dt
    m = np.round(t / dt)
    on_grid = np.abs(t / dt - m) < 1e-6
    return np.where(on_grid, np.where(t > m * dt, m, m - 1), np.floor(t / dt))


def busy_pair(weight=0.3, seed=1, horizon=3.0):
    agents = [drift_agent(0, sigma=0.4), drift_agent(1, sigma=0.4, drift=1.3)]
    return scenario(agents, [(1, 0, [weight]), (0, 1, [weight / 2])], horizon=horizon, seed=seed)


# ---------------------------------------------------------------- reductions


def test_single_agent_matches_step_agent_loop():
    spec = drift_agent(0, sigma=0.5, k=0.4, n_modes=2)
    cfg = scenario([spec], horizon=3.0, stride=1, seed=9)
    tr = simulate_swarm(cfg)
    state = initial_agent_state(spec, 9)
    times = []
    for n in range(cfg.numerics.n_steps):
        res = step_agent(state, spec, CouplingView.isolated(1), cfg.numerics.dt, 9)
        state = res.state
        if res.jump is not None:
            times.append(res.jump.time)
        np.testing.assert_array_equal(tr.z[n + 1, 0], state.z)
        np.testing.assert_array_equal(tr.beta[n + 1, 0], state.beta)
    np.testing.assert_array_equal(tr.jumps.time, times)
    assert len(times) > 2


def test_zero_weights_decouple_agents():
    agents = [drift_agent(0, sigma=0.4), drift_agent(1, sigma=0.4, drift=1.4)]
    joint = simulate_swarm(scenario(agents, [(1, 0, [0.001]), (0, 1, [0.001])], threshold=0.01, seed=3))
    for a in agents:
        alone = simulate_swarm(scenario([a], seed=3))
        part = joint.select([a.id])
        assert part == alone


def test_replications_independent_of_batch():
    cfg = busy_pair()
    batch = run_ensemble(cfg, replications=[0, 1, 2, 3])
    for tr in batch:
        assert tr == simulate_swarm(cfg, replication=tr.replication)


def test_deterministic():
    cfg = random_scenario(np.random.default_rng(4))
    assert simulate_swarm(cfg) == simulate_swarm(cfg)


def test_predicates_give_identical_swarm_runs():
    cfg = busy_pair(weight=0.35)
    a = simulate_swarm(cfg)
    b = simulate_swarm(cfg, predicate=MODIFIED)
    assert a == b and len(a.jumps) > 5


# ---------------------------------------------------------------- trace invariants


@pytest.mark.parametrize("seed", range(5))
def test_trace_invariants(seed):
    cfg = random_scenario(np.random.default_rng(seed), max_agents=6)
    tr = simulate_swarm(cfg)
    jl = tr.jumps
    keys = list(zip(jl.time.tolist(), jl.agent.tolist()))
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    step = owning_step(jl.time, cfg.numerics.dt)
    for a in tr.agent_ids:
        ts = jl.times_of(a)
        assert np.all(np.diff(ts) > 0)
        # at most one jump per agent per step
        s = step[jl.agent == a]
        assert np.all(np.diff(s) > 0)
    # clocks equal sample time minus the latest jump
    for col, a in enumerate(tr.agent_ids.tolist()):
        ts = jl.times_of(a)
        idx = np.searchsorted(ts, tr.times, side="right") - 1
        last = np.where(idx >= 0, ts[np.maximum(idx, 0)], 0.0)
        np.testing.assert_array_equal(tr.upsilon[:, col], tr.times - last)
    assert np.all(tr.beta > 0)
    # sampled coupling equals the closed form built from the jump log
    for col, a in enumerate(tr.agent_ids.tolist()):
        k = tr.k[col]
        for r, t in enumerate(tr.times.tolist()):
            clocks = {int(b): float(tr.upsilon[r, tr.column(int(b))]) for b in tr.agent_ids}
            jumped = {int(b) for b in jl.agent[jl.time <= t].tolist()}
            clocks = {b: c for b, c in clocks.items() if b in jumped or b == a}
            want = coupling_input(a, cfg.coupling, k, clocks)
            np.testing.assert_allclose(tr.z_tilde[r, col] - tr.z[r, col], want, rtol=1e-9, atol=1e-12)


def test_recipients_follow_coupling():
    cfg = busy_pair(weight=0.2)
    tr = simulate_swarm(cfg)
    for a, rec in zip(tr.jumps.agent.tolist(), tr.jumps.recipients):
        assert rec == tuple(cfg.coupling.recipients(a).tolist())


def test_permuting_agents_permutes_trace():
    cfg = random_scenario(np.random.default_rng(11), max_agents=5)
    perm = list(reversed(range(cfg.n_agents)))
    shuffled = replace(cfg, agents=tuple(cfg.agents[p] for p in perm))
    a, b = simulate_swarm(cfg), simulate_swarm(shuffled)
    np.testing.assert_array_equal(a.z[:, perm], b.z)
    np.testing.assert_array_equal(a.beta[:, perm], b.beta)
    assert a.jumps == b.jumps


def test_relabeling_with_pinned_streams():
    cfg = busy_pair()
    relabel = {0: 10, 1: 20}
    agents = tuple(replace(a, id=relabel[a.id], stream_id=a.id) for a in cfg.agents)
    edges = [(relabel[t], relabel[s], w) for t, s, w in cfg.coupling.edges()]
    moved = scenario(list(agents), edges, horizon=cfg.numerics.horizon, seed=cfg.seed)
    a, b = simulate_swarm(cfg), simulate_swarm(moved)
    np.testing.assert_array_equal(a.jumps.time, b.jumps.time)
    np.testing.assert_array_equal([relabel[x] for x in a.jumps.agent.tolist()], b.jumps.agent)


def test_zeno_budget():
    agents = [drift_agent(0, drift=50.0, sigma=0.0, guard=0.01, z0=0.0, k=0.0)]
    cfg = scenario(agents, horizon=1.0, max_jumps=20)
    with pytest.raises(ZenoSuspected):
        simulate_swarm(cfg)
    with pytest.raises(ZenoSuspected):
        simulate_swarm(cfg)


# ---------------------------------------------------------------- abstraction


def test_extract_idempotent():
    tr = simulate_swarm(busy_pair())
    once = extract_abstraction(tr)
    assert extract_abstraction(once) == once


def test_extract_single_agent_no_jumps():
    cfg = scenario([drift_agent(0, drift=0.0, sigma=0.0, guard=1.0, z0=0.1)], horizon=1.0, stride=100)
    abs_ = extract_abstraction(simulate_swarm(cfg))
    np.testing.assert_array_equal(abs_.tau[:, 0], abs_.times)
    assert reconstruct_jump_times(abs_)[0].size == 0


def test_extract_guard_matches_closed_form():
    tr = simulate_swarm(busy_pair())
    abs_ = extract_abstraction(tr)
    for col, a in enumerate(tr.agent_ids.tolist()):
        ev = tr.jumps.agent == a
        seeds = np.concatenate([[tr.beta[0, col, 0]], tr.jumps.post_beta[ev, 0]])
        idx = np.searchsorted(tr.jumps.times_of(a), tr.times, side="right")
        want = seeds[idx] * np.exp(-tr.k[col] * abs_.tau[:, col])
        np.testing.assert_allclose(abs_.beta[:, col, 0], want, rtol=1e-12)


def test_reconstruct_hand_built():
    times = np.arange(0, 31) * 0.1
    tau = np.where(times < 1.0, times, np.where(times < 2.5, times - 1.0, times - 2.5))
    abs_ = AbstractionTrace(
        np.array([0]), np.array([0.0]), times, np.ones((31, 1, 1)), tau[:, None],
    )
    np.testing.assert_allclose(reconstruct_jump_times(abs_)[0], [1.0, 2.5], atol=1e-12)
    ev = AbstractionTrace(
        np.array([0]), np.array([0.0]), times, np.ones((31, 1, 1)), tau[:, None],
        np.array([1.0, 2.5]), np.array([0, 0]), np.ones((2, 1)),
    )
    np.testing.assert_array_equal(reconstruct_jump_times(ev)[0], [1.0, 2.5])


def test_reconstruct_rejects_corrupt_clock():
    times = np.linspace(0, 1, 11)
    bad = AbstractionTrace(np.array([0]), np.array([0.0]), times, np.ones((11, 1, 1)), (2 * times)[:, None])
    with pytest.raises(CorruptTraceError):
        reconstruct_jump_times(bad)


@pytest.mark.parametrize("seed", range(4))
def test_roundtrip_random(seed):
    tr = simulate_swarm(random_scenario(np.random.default_rng(100 + seed)))
    assert roundtrip_matches(tr)


def test_reintegrate_predicts_between_jumps():
    cfg = scenario([drift_agent(0, drift=0.2, sigma=0.0, guard=1.0, z0=0.0, k=0.1)], horizon=2.0, stride=50)
    tr = simulate_swarm(cfg)
    assert len(tr.jumps) == 0
    abs_ = extract_abstraction(tr)
    beta, tau = reintegrate(abs_, 3)
    np.testing.assert_allclose(beta, abs_.beta[3:], rtol=1e-12)
    np.testing.assert_allclose(tau, abs_.tau[3:], rtol=1e-12)


# ---------------------------------------------------------------- composition


def collective(ids, drift, seed):
    return scenario([drift_agent(i, drift=drift, sigma=0.4) for i in ids], horizon=2.0, seed=seed)


def test_compose_empty_wiring_is_block_independent():
    a, b = collective([0, 1], 1.0, 5), collective([0, 1], 1.3, 8)
    merged = compose_collectives(a, b, [])
    assert merged.ids == [0, 1, 2, 3]
    joint = simulate_swarm(merged)
    ra, rb = simulate_swarm(a), simulate_swarm(b)
    np.testing.assert_array_equal(joint.z[:, :2], ra.z)
    np.testing.assert_array_equal(joint.z[:, 2:], rb.z)
    np.testing.assert_array_equal(joint.jumps.times_of(3), rb.jumps.times_of(1))


def test_compose_weak_wire_is_filtered():
    a, b = collective([0], 1.0, 5), collective([1], 1.3, 8)
    weak = compose_collectives(a, b, [(0, 1, [0.001])])
    none = compose_collectives(a, b, [])
    assert weak.coupling == none.coupling
    assert simulate_swarm(weak) == simulate_swarm(none)


def test_compose_strong_wire_increases_downstream_jumps():
    a, b = collective([0], 1.0, 5), collective([0], 0.6, 8)
    iso = run_ensemble(compose_collectives(a, b, []), reps=200, record=False)
    wired = run_ensemble(compose_collectives(a, b, [(0, 0, [0.4])]), reps=200, record=False)
    c_iso = np.array([len(t.jumps.times_of(1)) for t in iso], dtype=float)
    c_wired = np.array([len(t.jumps.times_of(1)) for t in wired], dtype=float)
    diff = c_wired - c_iso
    assert diff.mean() > 3 * diff.std(ddof=1) / math.sqrt(diff.size)
    # no back-edge: upstream agent unchanged
    assert all(np.array_equal(x.jumps.times_of(0), y.jumps.times_of(0)) for x, y in zip(iso, wired))


def test_compose_errors():
    a, b = collective([0], 1.0, 5), collective([0], 1.0, 5)
    with pytest.raises(UnknownAgentError):
        compose_collectives(a, b, [(3, 0, [0.5])])
    with pytest.raises(DimensionError):
        compose_collectives(a, b, [(0, 0, [0.5, 0.1])])


# ---------------------------------------------------------------- benchmark helpers


def test_random_coupling_edges():
    t, s, w = random_coupling_edges(range(500), 1, mean_degree=8, seed=3)
    assert np.all(t != s)
    assert len(set(zip(t.tolist(), s.tolist()))) == t.size
    assert abs(t.size / 500 - 8) < 0.5
    assert np.all((w >= 0) & (w <= 1))
    t2, s2, w2 = random_coupling_edges(range(500), 1, mean_degree=8, seed=3)
    assert np.array_equal(t, t2) and np.array_equal(w, w2)


def test_run_bench_report():
    report = run_bench(bench_scenario(50, horizon=0.5))
    assert report["agents"] == 50 and report["agent_steps"] == 50 * 500
    assert report["agent_steps_per_second"] > 0
