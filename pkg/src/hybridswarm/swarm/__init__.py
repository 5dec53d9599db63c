"""Swarm simulation, the (guard, clock) abstraction and composition."""

from .abstraction import (
    AbstractionTrace,
    extract_abstraction,
    reconstruct_jump_times,
    reintegrate,
    roundtrip_matches,
)
from .compose import compose_collectives
from .config import Numerics, ScenarioConfig
from .engine import build_kernel, run_ensemble, simulate_swarm
from .trace import JumpLog, SwarmTrace
from .bench import bench_scenario, random_coupling_edges, run_bench
