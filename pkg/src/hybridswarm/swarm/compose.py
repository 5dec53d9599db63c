"""Sequential composition of two collectives."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..agent.model import CouplingSpec
from ..errors import ConfigError, DimensionError, UnknownAgentError
from .config import Numerics, ScenarioConfig


def compose_collectives(a: ScenarioConfig, b: ScenarioConfig, wiring) -> ScenarioConfig:
    """Join ``a`` and ``b`` with one-way wires from outputs of ``a`` to inputs of ``b``.

    ``wiring`` lists ``(agent id in a, agent id in b, weight)``. Agents of
    ``b`` keep their ids when they do not clash with ``a``; otherwise they
    are shifted past the largest id of ``a``. Every agent keeps the random
    streams it had in its own collective.
    """
    if a.dim != b.dim:
        raise DimensionError(f"collectives have dimensions {a.dim} and {b.dim}")
    if a.coupling.threshold != b.coupling.threshold:
        raise ConfigError("collectives must share the coupling threshold")
    if a.numerics.dt != b.numerics.dt or a.numerics.horizon != b.numerics.horizon:
        raise ConfigError("collectives must share dt and horizon")
    d = a.dim
    ids_a, ids_b = set(a.ids), set(b.ids)
    shift = 0 if ids_a.isdisjoint(ids_b) else max(ids_a) + 1 - min(ids_b)
    remap = {i: i + shift for i in ids_b}

    agents_a = [
        replace(x, seed=a.seed if x.seed is None else x.seed) for x in a.agents
    ]
    agents_b = [
        replace(
            x,
            id=remap[x.id],
            seed=b.seed if x.seed is None else x.seed,
            stream_id=x.id if x.stream_id is None else x.stream_id,
        )
        for x in b.agents
    ]

    edges = a.coupling.edges()
    edges += [(remap[t], remap[s], w) for t, s, w in b.coupling.edges()]
    for out_a, in_b, w in wiring:
        if out_a not in ids_a:
            raise UnknownAgentError(f"wiring source {out_a} is not an agent of the first collective")
        if in_b not in ids_b:
            raise UnknownAgentError(f"wiring target {in_b} is not an agent of the second collective")
        w = np.asarray(w, dtype=float)
        if w.size != d:
            raise DimensionError(f"wire weight has {w.size} components, expected {d}")
        edges.append((remap[in_b], out_a, w.reshape(d)))

    numerics = Numerics(
        a.numerics.dt,
        a.numerics.horizon,
        a.numerics.stride,
        max(a.numerics.max_jumps, b.numerics.max_jumps),
    )
    coupling = CouplingSpec.from_edges(edges, a.coupling.threshold, d)
    return ScenarioConfig(tuple(agents_a + agents_b), coupling, numerics, a.seed)
