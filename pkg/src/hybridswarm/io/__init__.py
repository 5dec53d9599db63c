"""Scenario files, CSV traces, manifests and the command line."""

from .csvio import read_abstraction, read_jumps, read_trace, write_abstraction, write_jumps, write_trace
from .manifest import RunManifest
from .schema import (
    canonical_json,
    config_digest,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

__all__ = [
    "RunManifest",
    "canonical_json",
    "config_digest",
    "load_scenario",
    "parse_scenario",
    "read_abstraction",
    "read_jumps",
    "read_trace",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "write_abstraction",
    "write_jumps",
    "write_trace",
]
