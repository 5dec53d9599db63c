"""Microscopic hybrid agents: guards, clocks, coupling and stepping."""

from .lanes import EFFECTIVE, MODIFIED, JumpEvent, LaneKernel, crossing, guard_gap
from .model import (
    CYCLIC,
    AgentModeSpec,
    AgentSpec,
    AgentState,
    CouplingSpec,
    GuardSpec,
    coupling_input,
    coupling_input_recursive,
    effective_position,
    guard_value,
    modified_guard,
    neighborhood,
)
from .step import CouplingView, Message, StepResult, agent_keys, initial_agent_state, step_agent
