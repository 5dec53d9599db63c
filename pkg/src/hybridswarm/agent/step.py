"""Single-agent stepping on top of the lane kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import NOISE, RESET, stream_key, substream
from .lanes import EFFECTIVE, JumpEvent, LaneKernel
from .model import AgentSpec, AgentState, CouplingSpec


@dataclass(frozen=True, eq=False)
class CouplingView:
    """What one agent sees of the coupling during a step.

    ``sources``/``weights`` are its above-threshold neighbors (ascending
    id); ``arrivals`` are ``(time, sender id)`` jump announcements that
    reach it inside the step.
    """

    sources: tuple[int, ...] = ()
    weights: np.ndarray = None
    arrivals: tuple[tuple[float, int], ...] = ()

    @classmethod
    def from_coupling(cls, coupling: CouplingSpec, agent: int, arrivals=()) -> "CouplingView":
        src, w = coupling.row(agent)
        return cls(tuple(int(j) for j in src), np.array(w), tuple(arrivals))

    @classmethod
    def isolated(cls, dim: int) -> "CouplingView":
        return cls((), np.zeros((0, dim)), ())


@dataclass(frozen=True)
class Message:
    """One-bit jump announcement; only the sender and the instant travel."""

    time: float
    sender: int


@dataclass(frozen=True, eq=False)
class StepResult:
    state: AgentState
    jump: JumpEvent | None
    message: Message | None


def agent_keys(spec: AgentSpec, master: int, replication: int = 0) -> tuple[int, int]:
    seed = master if spec.seed is None else spec.seed
    sid = spec.id if spec.stream_id is None else spec.stream_id
    key = stream_key(seed, sid, replication)
    return substream(key, NOISE), substream(key, RESET)


def _kernel(spec, view, dt, master, replication, predicate, max_jumps):
    d = spec.dim
    sources = tuple(view.sources)
    if list(sources) != sorted(sources):
        raise ValueError("coupling view sources must be in ascending id order")
    weights = np.zeros((0, d)) if view.weights is None else np.asarray(view.weights, dtype=float)
    p = len(sources)
    edges = (np.zeros(p, np.int64), np.arange(1, p + 1), weights.reshape(p, d))
    nk, rk = agent_keys(spec, master, replication)
    return LaneKernel(
        [spec], [0], [spec.id], [nk], [rk], edges, (spec.id,) + sources, dt, predicate, max_jumps
    )


def initial_agent_state(spec: AgentSpec, master: int = 0, replication: int = 0) -> AgentState:
    """State at t = 0: seed and position drawn from the agent's reset stream."""
    kern = _kernel(spec, CouplingView.isolated(spec.dim), 1.0, master, replication, EFFECTIVE, 1)
    kern.initialize()
    return AgentState(
        mode=int(kern.mode[0]),
        z=kern.z[0].copy(),
        gamma=kern.gamma[0].copy(),
        beta=kern.beta[0].copy(),
        coupling=kern.I[0].copy(),
        time=0.0,
        last_jump=0.0,
        step=0,
        jumps=0,
        reset_counter=int(kern.reset_counter[0]),
        known={},
    )


def step_agent(
    state: AgentState,
    spec: AgentSpec,
    view: CouplingView,
    dt: float,
    master: int = 0,
    replication: int = 0,
    predicate: str = EFFECTIVE,
    max_jumps: int = 100_000,
) -> StepResult:
    """Advance one agent by one step of length ``dt``.

    The step covers [step*dt, (step+1)*dt]. Arrivals are processed in time
    order; the agent jumps at most once. Its noise and reset draws come from
    the streams keyed by (master, id, replication), so the result matches
    the same agent inside a swarm run.
    """
    kern = _kernel(spec, view, dt, master, replication, predicate, max_jumps)
    kern.n = state.step
    kern.mode[0] = state.mode
    kern.z[0] = state.z
    kern.gamma[0] = state.gamma
    kern.beta[0] = state.beta
    kern.I[0] = state.coupling
    kern.last[0] = state.last_jump
    kern.jumps[0] = state.jumps
    kern.reset_counter[0] = state.reset_counter
    kern.refresh()
    pos = {j: e + 1 for e, j in enumerate(view.sources)}
    for j, tj in state.known.items():
        if j in pos:
            kern.src_last[pos[j]] = tj
    msgs = [(t, pos[j]) for t, j in view.arrivals if j in pos]
    events = kern.step(msgs)

    known = dict(state.known)
    for j, e in pos.items():
        if np.isfinite(kern.src_last[e]):
            known[j] = float(kern.src_last[e])
    new_state = AgentState(
        mode=int(kern.mode[0]),
        z=kern.z[0].copy(),
        gamma=kern.gamma[0].copy(),
        beta=kern.beta[0].copy(),
        coupling=kern.I[0].copy(),
        time=kern.time_of(kern.n),
        last_jump=float(kern.last[0]),
        step=kern.n,
        jumps=int(kern.jumps[0]),
        reset_counter=int(kern.reset_counter[0]),
        known=known,
    )
    jump = events[0] if events else None
    message = Message(jump.time, spec.id) if jump is not None else None
    return StepResult(new_state, jump, message)
