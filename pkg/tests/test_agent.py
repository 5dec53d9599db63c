import math
from fractions import Fraction

import numpy as np
import pytest
from helpers import drift_agent
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridswarm.agent.lanes import EFFECTIVE, MODIFIED, crossing, guard_gap
from hybridswarm.agent.model import (
    AgentModeSpec,
    AgentSpec,
    CouplingSpec,
    GuardSpec,
    coupling_input,
    coupling_input_recursive,
    effective_position,
    guard_value,
    modified_guard,
    neighborhood,
)
from hybridswarm.agent.step import CouplingView, initial_agent_state, step_agent
from hybridswarm.core.specs import (
    ConstantDiffusion,
    ConstantField,
    LinearField,
    PointMass,
    UniformBox,
    ZeroDiffusion,
)
from hybridswarm.errors import GuardError, UnknownAgentError

# ---------------------------------------------------------------- guards


def test_guard_value_examples():
    assert guard_value([1.0], 0.0, 5.0)[0] == 1.0
    assert guard_value([2.0], 1.0, 0.0)[0] == 2.0
    assert abs(guard_value([1.0], 1.0, 1.0)[0] - 0.36787944117144233) < 1e-15


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.01, 10.0),
    st.floats(0.0, 5.0),
    st.floats(0.0, 10.0),
)
def test_guard_value_closed_form(gamma, k, clock):
    assert abs(guard_value([gamma], k, clock)[0] - gamma * math.exp(-k * clock)) <= 1e-12 * gamma


def test_guard_value_general_rhs_matches_closed_form_for_decay():
    k = 0.7
    rhs = LinearField([[-k]], [0.0])
    out = guard_value([1.3], k, 2.0, rhs=rhs, dt=1e-3)
    assert abs(out[0] - 1.3 * math.exp(-k * 2.0)) < 1e-8


def test_guard_value_vectorized_clock():
    out = guard_value(np.array([1.0, 2.0]), 1.0, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, [[1.0, 2.0], [math.exp(-1), 2 * math.exp(-1)]])


def test_guard_spec_rejects_nonpositive_support():
    with pytest.raises(GuardError):
        GuardSpec(1.0, UniformBox([-0.5], [1.0]))
    with pytest.raises(ValueError):
        GuardSpec(-1.0, PointMass([1.0]))


# ---------------------------------------------------------------- neighborhoods and coupling


def test_neighborhood_below_threshold_is_empty():
    c = CouplingSpec.from_edges([(1, 2, [0.05])], threshold=0.1)
    assert neighborhood(1, c, {1: 3.0, 2: 0.0}) == set()


def test_neighborhood_clock_condition():
    c = CouplingSpec.from_edges([(1, 2, [0.5])], threshold=0.1)
    assert neighborhood(1, c, {1: 1.0, 2: 2.0}) == set()
    assert neighborhood(1, c, {1: 2.0, 2: 2.0}) == {2}


def test_neighborhood_hand_example():
    # agent 3 jumped less recently than agent 1, so only agent 2 counts
    c = CouplingSpec.from_edges([(1, 2, [0.5]), (1, 3, [0.5])], threshold=0.1)
    assert neighborhood(1, c, {1: 5.0, 2: 1.0, 3: 7.0}) == {2}


def test_neighborhood_unknown_agent():
    c = CouplingSpec.empty()
    with pytest.raises(UnknownAgentError):
        neighborhood(4, c, {1: 0.0})


def test_coupling_input_examples():
    empty = CouplingSpec.empty(0.1)
    np.testing.assert_array_equal(coupling_input(1, empty, 1.0, {1: 1.0}), [0.0])
    one = CouplingSpec.from_edges([(1, 2, [0.5])], 0.1)
    np.testing.assert_array_equal(coupling_input(1, one, 1.0, {1: 1.0, 2: 0.0}), [0.5])
    two = CouplingSpec.from_edges([(1, 2, [0.3]), (1, 3, [0.4])], 0.1)
    out = coupling_input(1, two, 1.0, {1: 1.0, 2: 0.0, 3: math.log(2)})
    assert abs(out[0] - 0.5) < 1e-15


def test_coupling_spec_filters_and_validates():
    c = CouplingSpec.from_edges([(0, 1, [0.05]), (1, 0, [0.5])], threshold=0.1)
    assert len(c) == 1
    with pytest.raises(ValueError):
        CouplingSpec.from_edges([(0, 0, [1.0])], 0.1)
    with pytest.raises(ValueError):
        CouplingSpec.from_edges([], 0.0)
    d = CouplingSpec.from_dense([[0, 0.5], [0.05, 0]], [3, 7], 0.1)
    assert d.edges()[0][:2] == (3, 7) and len(d) == 1


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_recursive_coupling_matches_closed_form(data):
    n = data.draw(st.integers(2, 5))
    k = data.draw(st.floats(0.0, 2.0))
    weights = {j: data.draw(st.floats(0.2, 1.0)) for j in range(1, n)}
    c = CouplingSpec.from_edges([(0, j, [w]) for j, w in weights.items()], 0.1)
    t = 10.0
    own_last = data.draw(st.floats(0.0, 5.0))
    events = []
    for j in range(1, n):
        for _ in range(data.draw(st.integers(0, 3))):
            events.append((data.draw(st.floats(0.0, t)), j))
    clocks = {0: t - own_last}
    for j in range(1, n):
        mine = [s for s, i in events if i == j]
        if mine:
            clocks[j] = t - max(mine)
    closed = coupling_input(0, c, k, clocks)
    rec = coupling_input_recursive(0, c, k, events, t, own_last)
    np.testing.assert_allclose(rec, closed, rtol=1e-12, atol=1e-15)


def test_effective_and_modified():
    np.testing.assert_array_equal(effective_position([0.2], [0.0]), [0.2])
    assert abs(effective_position([0.2], [0.5])[0] - 0.7) < 1e-15
    np.testing.assert_array_equal(modified_guard([1.0], [0.0]), [1.0])
    assert modified_guard([1.0], [0.25])[0] == 0.75
    incs = [np.array([0.1]), np.array([0.05]), np.array([0.2])]
    z = np.array([0.3])
    seq = z
    for inc in incs:
        seq = effective_position(seq, inc)
    np.testing.assert_allclose(seq, effective_position(z, sum(incs)), rtol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_hit_predicates_agree(beta, z, coupling):
    g_eff = guard_gap(np.array([beta]), np.array([z]), np.array([coupling]), EFFECTIVE)
    g_mod = guard_gap(np.array([beta]), np.array([z]), np.array([coupling]), MODIFIED)
    assert g_eff[0] == g_mod[0]
    exact = Fraction(beta) - Fraction(z) - Fraction(coupling)
    assert g_eff[0] == float(exact)


def test_crossing_fraction_and_component():
    th, comp = crossing(np.array([[1.0, 1.0], [0.5, -0.1], [1.0, 2.0]]), np.array([[-1.0, -3.0], [0.2, 0.3], [0.5, 1.0]]))
    np.testing.assert_allclose(th, [0.25, 0.0, np.inf])
    assert comp.tolist()[:2] == [1, 1]


# ---------------------------------------------------------------- step_agent


def run_agent(spec, steps, dt, view=None, master=0):
    view = view or CouplingView.isolated(spec.dim)
    state = initial_agent_state(spec, master)
    out = []
    for _ in range(steps):
        res = step_agent(state, spec, view, dt, master)
        state = res.state
        out.append(res)
    return state, out


def test_step_deterministic_linear_crossing():
    spec = drift_agent(0, drift=1.0, sigma=0.0, k=0.0, guard=1.0, z0=0.0)
    _, results = run_agent(spec, 150, 0.01)
    jumps = [r.jump.time for r in results if r.jump is not None]
    assert abs(jumps[0] - 1.0) <= 0.01
    assert results[99].message is not None or results[100].message is not None


def test_step_no_jump_when_still():
    spec = drift_agent(0, drift=0.0, sigma=0.0, k=0.0, guard=1.0, z0=0.5)
    state, results = run_agent(spec, 300, 0.01)
    assert all(r.jump is None for r in results)
    assert abs(state.clock - 3.0) < 1e-12


def test_step_neighbor_message_triggers_immediate_jump():
    # beta - z = 0.4 and the delivered input is 0.5: the agent jumps at the arrival
    spec = drift_agent(0, drift=0.0, sigma=0.0, k=0.0, guard=1.0, z0=0.6)
    state = initial_agent_state(spec)
    view = CouplingView((1,), np.array([[0.5]]), ((0.005, 1),))
    res = step_agent(state, spec, view, 0.01)
    assert res.jump is not None
    assert res.jump.time == 0.005
    assert res.message.time == 0.005 and res.message.sender == 0
    assert res.state.last_jump == 0.005
    assert res.state.known == {1: 0.005}


def test_step_message_too_weak_does_not_trigger():
    spec = drift_agent(0, drift=0.0, sigma=0.0, k=0.0, guard=1.0, z0=0.6)
    view = CouplingView((1,), np.array([[0.3]]), ((0.005, 1),))
    res = step_agent(initial_agent_state(spec), spec, view, 0.01)
    assert res.jump is None
    assert abs(res.state.coupling[0] - 0.3) < 1e-15


def test_step_clock_consistency_and_guard_positivity():
    spec = drift_agent(0, drift=1.5, sigma=0.4, k=0.8, n_modes=3)
    state = initial_agent_state(spec, master=5)
    last = 0.0
    modes = [state.mode]
    for _ in range(3000):
        res = step_agent(state, spec, CouplingView.isolated(1), 1e-3, master=5)
        state = res.state
        if res.jump is not None:
            last = res.jump.time
            modes.append(state.mode)
        assert state.clock == state.time - last
        assert np.all(state.beta > 0)
        assert np.all(state.z + state.coupling < state.beta)
    assert len(modes) > 3
    # cyclic transition rule over three modes
    assert all(b == (a + 1) % 3 for a, b in zip(modes, modes[1:]))


def test_step_predicates_give_identical_runs():
    spec = drift_agent(0, drift=1.0, sigma=0.5, k=0.3)
    view = CouplingView((1,), np.array([[0.2]]), ())
    s_eff = s_mod = initial_agent_state(spec, master=2)
    for n in range(2000):
        arr = ((n * 1e-3 + 4e-4, 1),) if n % 97 == 0 else ()
        v = CouplingView(view.sources, view.weights, arr)
        r1 = step_agent(s_eff, spec, v, 1e-3, 2, predicate=EFFECTIVE)
        r2 = step_agent(s_mod, spec, v, 1e-3, 2, predicate=MODIFIED)
        assert r1.state == r2.state
        assert (r1.jump is None) == (r2.jump is None)
        if r1.jump is not None:
            assert r1.jump.time == r2.jump.time
        s_eff, s_mod = r1.state, r2.state


def test_step_post_jump_keeps_only_simultaneous_jumpers():
    # the trigger jumped at the same instant, so its clock equals ours and it stays a neighbour
    spec = drift_agent(0, drift=0.0, sigma=0.0, k=0.0, guard=1.0, z0=0.2)
    view = CouplingView((1, 2), np.array([[0.5], [0.3]]), ((0.002, 2), (0.005, 1)))
    res = step_agent(initial_agent_state(spec), spec, view, 0.01)
    assert res.jump is not None and res.jump.time == 0.005
    assert res.jump.pre_z_tilde[0] == 0.2 + 0.3 + 0.5
    # agent 2 announced earlier and drops out; agent 1 is a simultaneous jumper
    assert res.state.coupling[0] == 0.5
    res2 = step_agent(res.state, spec, CouplingView((1, 2), np.array([[0.5], [0.3]]), ()), 0.01)
    assert res2.jump is None


def test_step_triggered_agent_beyond_guard_jumps_next_step():
    # post-jump z plus the simultaneous trigger's term already exceeds the guard;
    # the second jump waits for the next step (one jump per agent per step)
    spec = drift_agent(0, drift=0.0, sigma=0.0, k=0.0, guard=1.0, z0=0.6)
    view = CouplingView((1,), np.array([[0.5]]), ((0.005, 1),))
    res = step_agent(initial_agent_state(spec), spec, view, 0.01)
    assert res.state.coupling[0] == 0.5
    res2 = step_agent(res.state, spec, CouplingView((1,), np.array([[0.5]]), ()), 0.01)
    assert res2.jump is not None and 0.01 < res2.jump.time < 0.01 + 1e-15
    assert res2.state.coupling[0] == 0.0


def test_agent_spec_validation():
    mode = AgentModeSpec(ConstantField([1.0]), ConstantDiffusion([[0.1]]))
    with pytest.raises(ValueError):
        AgentSpec(0, (), PointMass([0.0]), GuardSpec(1.0, PointMass([1.0])))
    with pytest.raises(ValueError):
        AgentSpec(0, (mode,), PointMass([0.0]), GuardSpec(1.0, PointMass([1.0])), transition=(0.5,))
    spec = AgentSpec(0, (mode, mode), PointMass([0.0]), GuardSpec(1.0, PointMass([1.0])), transition=(0.25, 0.75))
    assert spec.next_mode(0, 0.1) == 0 and spec.next_mode(0, 0.9) == 1
    assert AgentModeSpec(ConstantField([0.0]), ZeroDiffusion(1)).dim == 1
