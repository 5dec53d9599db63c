"""JSON scenario files: parsing, validation and canonical serialization.

A scenario looks like::

    {
      "n_agents": 2, "dim": 1, "seed": 7, "threshold": 0.01,
      "numerics": {"dt": 0.001, "horizon": 5.0, "stride": 10, "max_jumps": 100000},
      "agents": [{"id": 0, "count": 2,
                  "modes": [{"field": {"type": "constant", "c": [1.0]},
                             "diffusion": {"type": "constant", "sigma": [[0.3]]}}],
                  "z_kernel": {"type": "point", "value": [0.0]},
                  "guard": {"k": 0.5, "kernel": {"type": "uniform", "lo": [0.8], "hi": [1.2]}}}],
      "coupling": {"edges": [[1, 0, 0.2]]}
    }

An agent entry with ``count`` > 1 stands for that many identical agents
with consecutive ids. Coupling is given as sparse ``edges`` (target,
source, weight), a dense ``weights`` matrix indexed by agent position, or
a ``random_graph`` that is materialized to edges at load time.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..agent.model import CYCLIC, AgentModeSpec, AgentSpec, CouplingSpec, GuardSpec
from ..core.specs import diffusion_from_dict, kernel_from_dict, vector_field_from_dict
from ..errors import ConfigError
from ..swarm.bench import random_coupling_edges
from ..swarm.config import Numerics, ScenarioConfig

TOP_KEYS = {"n_agents", "dim", "agents", "coupling", "threshold", "numerics", "seed"}
NUMERIC_KEYS = {"dt", "horizon", "stride", "max_jumps"}
AGENT_KEYS = {"id", "count", "modes", "z_kernel", "guard", "initial_mode", "transition", "seed", "stream_id"}
MODE_KEYS = {"field", "diffusion", "label"}
GUARD_KEYS = {"k", "kernel", "rhs"}
COUPLING_KINDS = ("edges", "weights", "random_graph")
RANDOM_GRAPH_KEYS = {"mean_degree", "p", "weight_range", "seed"}

_TYPED_KEYS = {
    "field": {
        "constant": {"type", "c"},
        "linear": {"type", "A", "c"},
        "ou": {"type", "theta", "mean"},
    },
    "diffusion": {
        "zero": {"type", "dim", "m"},
        "constant": {"type", "sigma"},
    },
    "kernel": {
        "point": {"type", "value", "mode"},
        "uniform": {"type", "lo", "hi", "mode"},
        "gaussian": {"type", "mean", "cov", "lo", "hi", "mode"},
    },
}
_BUILDERS = {
    "field": vector_field_from_dict,
    "diffusion": diffusion_from_dict,
    "kernel": kernel_from_dict,
}


class _Errors:
    def __init__(self):
        self.items: list[str] = []

    def add(self, path: str, msg: str) -> None:
        self.items.append(f"{path}: {msg}")

    def unknown(self, path: str, obj, allowed) -> None:
        for key in sorted(set(obj) - set(allowed)):
            self.add(path, f"unknown key {key!r}")

    def need(self, path: str, obj, keys) -> bool:
        missing = [k for k in keys if k not in obj]
        for k in missing:
            self.add(path, f"missing key {k!r}")
        return not missing


def _typed(errs: _Errors, path: str, obj, family: str):
    if not isinstance(obj, dict):
        errs.add(path, "expected an object")
        return None
    kinds = _TYPED_KEYS[family]
    kind = obj.get("type")
    if kind not in kinds:
        errs.add(path, f"unknown {family} type {kind!r} (expected one of {sorted(kinds)})")
        return None
    errs.unknown(path, obj, kinds[kind])
    try:
        return _BUILDERS[family](obj)
    except (ValueError, KeyError, TypeError, np.linalg.LinAlgError) as exc:
        errs.add(path, str(exc))
        return None


def _agent_group(errs: _Errors, path: str, obj, default_id: int):
    """Agents described by one entry, or [] when it is invalid."""
    if not isinstance(obj, dict):
        errs.add(path, "expected an object")
        return []
    errs.unknown(path, obj, AGENT_KEYS)
    if not errs.need(path, obj, ("modes", "z_kernel", "guard")):
        return []
    modes = []
    raw_modes = obj["modes"]
    if not isinstance(raw_modes, list) or not raw_modes:
        errs.add(f"{path}.modes", "expected a non-empty list")
        return []
    for q, m in enumerate(raw_modes):
        mp = f"{path}.modes[{q}]"
        if not isinstance(m, dict):
            errs.add(mp, "expected an object")
            continue
        errs.unknown(mp, m, MODE_KEYS)
        if not errs.need(mp, m, ("field", "diffusion")):
            continue
        field = _typed(errs, f"{mp}.field", m["field"], "field")
        diff = _typed(errs, f"{mp}.diffusion", m["diffusion"], "diffusion")
        if field is not None and diff is not None:
            try:
                modes.append(AgentModeSpec(field, diff, m.get("label")))
            except ValueError as exc:
                errs.add(mp, str(exc))
    zk = _typed(errs, f"{path}.z_kernel", obj["z_kernel"], "kernel")
    guard = None
    g = obj["guard"]
    gp = f"{path}.guard"
    if not isinstance(g, dict):
        errs.add(gp, "expected an object")
    else:
        errs.unknown(gp, g, GUARD_KEYS)
        if errs.need(gp, g, ("k", "kernel")):
            gk = _typed(errs, f"{gp}.kernel", g["kernel"], "kernel")
            rhs = _typed(errs, f"{gp}.rhs", g["rhs"], "field") if g.get("rhs") is not None else None
            if gk is not None:
                try:
                    guard = GuardSpec(float(g["k"]), gk, rhs)
                except (ValueError, TypeError) as exc:
                    errs.add(gp, str(exc))
    if len(modes) != len(raw_modes) or zk is None or guard is None:
        return []
    count = obj.get("count", 1)
    if not isinstance(count, int) or count < 1:
        errs.add(f"{path}.count", "must be a positive integer")
        return []
    first = obj.get("id", default_id)
    transition = obj.get("transition", CYCLIC)
    if isinstance(transition, list):
        transition = tuple(transition)
    out = []
    try:
        for c in range(count):
            out.append(
                AgentSpec(
                    int(first) + c, tuple(modes), zk, guard,
                    int(obj.get("initial_mode", 0)), transition,
                    obj.get("seed"), obj.get("stream_id"),
                )
            )
    except (ValueError, TypeError) as exc:
        errs.add(path, str(exc))
        return []
    return out


def _weight(w, dim: int) -> np.ndarray:
    return np.asarray(w, dtype=float).reshape(dim)


def _coupling(errs: _Errors, obj, ids, dim: int, threshold: float, seed: int):
    path = "coupling"
    if not isinstance(obj, dict):
        errs.add(path, "expected an object")
        return None
    kinds = [k for k in COUPLING_KINDS if k in obj]
    errs.unknown(path, obj, COUPLING_KINDS)
    if len(kinds) != 1:
        errs.add(path, f"give exactly one of {list(COUPLING_KINDS)}")
        return None
    kind = kinds[0]
    val = obj[kind]
    n = len(ids)
    edges = []
    if kind == "edges":
        if not isinstance(val, list):
            errs.add("coupling.edges", "expected a list")
            return None
        for e, row in enumerate(val):
            if not isinstance(row, list) or len(row) != 3:
                errs.add(f"coupling.edges[{e}]", "expected [target, source, weight]")
                continue
            try:
                edges.append((int(row[0]), int(row[1]), _weight(row[2], dim)))
            except (ValueError, TypeError) as exc:
                errs.add(f"coupling.edges[{e}]", f"bad weight: {exc}")
    elif kind == "weights":
        if not isinstance(val, list) or len(val) != n:
            errs.add("coupling.weights", f"expected {n} rows")
            return None
        for a, row in enumerate(val):
            if not isinstance(row, list) or len(row) != n:
                got = len(row) if isinstance(row, list) else type(row).__name__
                errs.add(f"coupling.weights[{a}]", f"row has length {got}, expected {n}")
                continue
            for b, w in enumerate(row):
                try:
                    wv = _weight(w, dim)
                except (ValueError, TypeError):
                    errs.add(f"coupling.weights[{a}][{b}]", f"expected {dim} numbers")
                    continue
                if a == b:
                    if np.any(wv != 0):
                        errs.add(f"coupling.weights[{a}][{b}]", "self-coupling must be zero")
                    continue
                if np.linalg.norm(wv) >= threshold:
                    edges.append((ids[a], ids[b], wv))
    else:
        if not isinstance(val, dict):
            errs.add("coupling.random_graph", "expected an object")
            return None
        errs.unknown("coupling.random_graph", val, RANDOM_GRAPH_KEYS)
        if ("p" in val) == ("mean_degree" in val):
            errs.add("coupling.random_graph", "give exactly one of 'p' and 'mean_degree'")
            return None
        try:
            t, s, w = random_coupling_edges(
                ids, dim, val.get("mean_degree"), val.get("p"),
                val.get("weight_range", (0.0, 1.0)), int(val.get("seed", seed)),
            )
            return CouplingSpec(t, s, w, threshold, dim)
        except (ValueError, TypeError) as exc:
            errs.add("coupling.random_graph", str(exc))
            return None
    if errs.items:
        return None
    try:
        return CouplingSpec.from_edges(edges, threshold, dim)
    except (ValueError, TypeError) as exc:
        errs.add(path, str(exc))
        return None


def scenario_from_dict(data) -> ScenarioConfig:
    """Validate a parsed scenario; raises ConfigError listing every problem."""
    errs = _Errors()
    if not isinstance(data, dict):
        raise ConfigError(["scenario must be a JSON object"])
    errs.unknown("scenario", data, TOP_KEYS)
    errs.need("scenario", data, ("agents", "coupling", "threshold", "numerics"))

    threshold = data.get("threshold")
    if threshold is not None and not (isinstance(threshold, (int, float)) and threshold > 0):
        errs.add("threshold", "the lower threshold for the interaction strength must be positive")
        threshold = None

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 1 << 64:
        errs.add("seed", "must be a 64-bit unsigned integer")
        seed = 0

    numerics = None
    num = data.get("numerics")
    if num is not None:
        if not isinstance(num, dict):
            errs.add("numerics", "expected an object")
        else:
            errs.unknown("numerics", num, NUMERIC_KEYS)
            if errs.need("numerics", num, ("dt", "horizon")):
                try:
                    numerics = Numerics(
                        float(num["dt"]), float(num["horizon"]),
                        int(num.get("stride", 1)), int(num.get("max_jumps", 100_000)),
                    )
                except (TypeError, ValueError) as exc:
                    errs.add("numerics", f"bad value: {exc}")
                else:
                    for p in numerics.problems():
                        errs.add("numerics", p)

    agents = []
    raw_agents = data.get("agents")
    if raw_agents is not None:
        if not isinstance(raw_agents, list) or not raw_agents:
            errs.add("agents", "expected a non-empty list")
        else:
            for pos, entry in enumerate(raw_agents):
                default_id = agents[-1].id + 1 if agents else 0
                agents.extend(_agent_group(errs, f"agents[{pos}]", entry, default_id))
    if "n_agents" in data and agents and data["n_agents"] != len(agents):
        errs.add("n_agents", f"declared {data['n_agents']} but agents describe {len(agents)}")
    dim = agents[0].dim if agents else None
    if "dim" in data and dim is not None and data["dim"] != dim:
        errs.add("dim", f"declared {data['dim']} but agents have dimension {dim}")

    coupling = None
    if agents and threshold is not None and "coupling" in data and not errs.items:
        coupling = _coupling(errs, data["coupling"], [a.id for a in agents], dim, float(threshold), seed)
    if errs.items or coupling is None or numerics is None:
        if not errs.items:
            errs.add("scenario", "incomplete scenario")
        raise ConfigError(errs.items)
    return ScenarioConfig(tuple(agents), coupling, numerics, seed)


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return scenario_from_dict(data)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    return parse_scenario(text)


def _agent_dict(a: AgentSpec) -> dict:
    out = {
        "id": a.id,
        "modes": [
            dict(
                {"field": m.field.to_dict(), "diffusion": m.diffusion.to_dict()},
                **({"label": m.label} if m.label is not None else {}),
            )
            for m in a.modes
        ],
        "z_kernel": a.z_kernel.to_dict(),
        "guard": dict(
            {"k": a.guard.k, "kernel": a.guard.kernel.to_dict()},
            **({"rhs": a.guard.rhs.to_dict()} if a.guard.rhs is not None else {}),
        ),
        "initial_mode": a.initial_mode,
        "transition": a.transition if a.transition == CYCLIC else list(a.transition),
    }
    if a.seed is not None:
        out["seed"] = a.seed
    if a.stream_id is not None:
        out["stream_id"] = a.stream_id
    return out


def scenario_to_dict(config: ScenarioConfig) -> dict:
    """Canonical form: one entry per agent and explicit sparse edges."""
    num = config.numerics
    cp = config.coupling
    return {
        "n_agents": config.n_agents,
        "dim": config.dim,
        "seed": config.seed,
        "threshold": cp.threshold,
        "numerics": {"dt": num.dt, "horizon": num.horizon, "stride": num.stride, "max_jumps": num.max_jumps},
        "agents": [_agent_dict(a) for a in config.agents],
        "coupling": {"edges": [[int(t), int(s), w.tolist()] for t, s, w in cp.edges()]},
    }


def canonical_json(config: ScenarioConfig) -> str:
    """Byte-stable serialization (sorted keys, shortest round-trip floats)."""
    return json.dumps(scenario_to_dict(config), sort_keys=True, separators=(",", ":"))


def config_digest(config: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def save_scenario(config: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(config), sort_keys=True, indent=1) + "\n")
