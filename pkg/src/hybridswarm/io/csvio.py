"""CSV files for traces, jump logs and abstractions.

Floats are written with ``repr``, the shortest string that parses back to
the same double, so files round-trip exactly and reruns compare byte for
byte.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import CorruptTraceError
from ..swarm.abstraction import AbstractionTrace
from ..swarm.trace import JumpLog, SwarmTrace


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _vec_cols(prefix: str, d: int) -> list[str]:
    return [f"{prefix}{c}" for c in range(d)]


def trace_columns(d: int) -> list[str]:
    return ["t", "agent", "q", *_vec_cols("z", d), *_vec_cols("z_tilde", d), *_vec_cols("beta", d), "upsilon"]


def jump_columns(d: int) -> list[str]:
    return [
        "t", "agent", "component", "pre_q", *_vec_cols("pre_z", d), *_vec_cols("pre_z_tilde", d),
        *_vec_cols("pre_beta", d), "post_q", *_vec_cols("post_z", d), *_vec_cols("post_beta", d),
        "recipients",
    ]


def abstraction_columns(d: int) -> list[str]:
    return ["t", "agent", *_vec_cols("beta", d), "tau"]


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trace(trace: SwarmTrace, path) -> None:
    d = trace.dim
    fh, w = _writer(path)
    with fh:
        w.writerow(trace_columns(d))
        for r, t in enumerate(trace.times.tolist()):
            for c, a in enumerate(trace.agent_ids.tolist()):
                w.writerow(
                    [fmt(t), a, int(trace.mode[r, c])]
                    + [fmt(x) for x in trace.z[r, c]]
                    + [fmt(x) for x in trace.z_tilde[r, c]]
                    + [fmt(x) for x in trace.beta[r, c]]
                    + [fmt(trace.upsilon[r, c])]
                )


def write_jumps(log: JumpLog, path, d: int) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(jump_columns(d))
        for e in range(len(log)):
            w.writerow(
                [fmt(log.time[e]), int(log.agent[e]), int(log.component[e]), int(log.pre_mode[e])]
                + [fmt(x) for x in log.pre_z[e]]
                + [fmt(x) for x in log.pre_z_tilde[e]]
                + [fmt(x) for x in log.pre_beta[e]]
                + [int(log.post_mode[e])]
                + [fmt(x) for x in log.post_z[e]]
                + [fmt(x) for x in log.post_beta[e]]
                + [" ".join(str(i) for i in log.recipients[e])]
            )


def write_abstraction(abs_: AbstractionTrace, grid_path, events_path=None) -> None:
    d = abs_.dim
    fh, w = _writer(grid_path)
    with fh:
        w.writerow(abstraction_columns(d))
        for r, t in enumerate(abs_.times.tolist()):
            for c, a in enumerate(abs_.agent_ids.tolist()):
                w.writerow([fmt(t), a] + [fmt(x) for x in abs_.beta[r, c]] + [fmt(abs_.tau[r, c])])
    if events_path is not None and abs_.has_events():
        fh, w = _writer(events_path)
        with fh:
            w.writerow(["t", "agent", *_vec_cols("beta", d)])
            for e in range(abs_.event_time.size):
                w.writerow(
                    [fmt(abs_.event_time[e]), int(abs_.event_agent[e])]
                    + [fmt(x) for x in abs_.event_beta[e]]
                )


def _read(path, expected_prefix):
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][: len(expected_prefix)] != expected_prefix:
        raise CorruptTraceError(f"{path}: unexpected header")
    return rows[0], rows[1:]


def _dim_of(header, prefix) -> int:
    return sum(1 for h in header if h.startswith(prefix) and h[len(prefix):].isdigit())


def _grid(rows, n_fixed_cols):
    """Group rows by time; returns times, agent ids and a (T, N, cols) array."""
    if not rows:
        raise CorruptTraceError("file has no data rows")
    times = sorted({float(r[0]) for r in rows}, key=float)
    agents = []
    for r in rows:
        a = int(r[1])
        if a in agents:
            break
        agents.append(a)
    T, N = len(times), len(agents)
    if len(rows) != T * N:
        raise CorruptTraceError(f"expected {T * N} rows for {T} times and {N} agents, found {len(rows)}")
    data = np.array([[float(x) for x in r[2:]] for r in rows]).reshape(T, N, -1)
    ids = np.array([int(r[1]) for r in rows]).reshape(T, N)
    if np.any(ids != np.array(agents)[None, :]):
        raise CorruptTraceError("agent order differs between time rows")
    return np.array(times), np.array(agents, dtype=np.int64), data


def read_jumps(path) -> JumpLog:
    header, rows = _read(path, ["t", "agent", "component", "pre_q"])
    d = _dim_of(header, "pre_z")
    n = len(rows)

    def block(start):
        return np.array([[float(x) for x in r[start:start + d]] for r in rows]).reshape(n, d)

    i_prez = 4
    i_post_q = 4 + 3 * d
    return JumpLog(
        time=np.array([float(r[0]) for r in rows]),
        agent=np.array([int(r[1]) for r in rows], dtype=np.int64),
        component=np.array([int(r[2]) for r in rows], dtype=np.int64),
        pre_mode=np.array([int(r[3]) for r in rows], dtype=np.int64),
        pre_z=block(i_prez),
        pre_z_tilde=block(i_prez + d),
        pre_beta=block(i_prez + 2 * d),
        post_mode=np.array([int(r[i_post_q]) for r in rows], dtype=np.int64),
        post_z=block(i_post_q + 1),
        post_beta=block(i_post_q + 1 + d),
        recipients=[tuple(int(x) for x in r[-1].split()) for r in rows],
    )


def read_trace(trace_path, jumps_path, k, dt: float, seed: int, replication: int = 0) -> SwarmTrace:
    """Rebuild a SwarmTrace from its two CSV files.

    ``k`` holds the guard decay rates in agent order (not stored in the CSV).
    """
    header, rows = _read(trace_path, ["t", "agent", "q"])
    d = _dim_of(header, "z")
    times, agents, data = _grid(rows, 2)
    jumps = read_jumps(jumps_path)
    return SwarmTrace(
        agent_ids=agents,
        k=np.asarray(k, dtype=float),
        times=times,
        mode=data[:, :, 0].astype(np.int64),
        z=data[:, :, 1:1 + d],
        z_tilde=data[:, :, 1 + d:1 + 2 * d],
        beta=data[:, :, 1 + 2 * d:1 + 3 * d],
        upsilon=data[:, :, 1 + 3 * d],
        jumps=jumps,
        dt=dt,
        horizon=float(times[-1]),
        seed=seed,
        replication=replication,
    )


def read_abstraction(grid_path, events_path=None, k=None) -> AbstractionTrace:
    header, rows = _read(grid_path, ["t", "agent", "beta0"])
    d = _dim_of(header, "beta")
    times, agents, data = _grid(rows, 2)
    ev = (None, None, None)
    if events_path is not None and Path(events_path).exists():
        _, erows = _read(events_path, ["t", "agent"])
        ev = (
            np.array([float(r[0]) for r in erows]),
            np.array([int(r[1]) for r in erows], dtype=np.int64),
            np.array([[float(x) for x in r[2:]] for r in erows]).reshape(len(erows), d),
        )
    kk = np.zeros(agents.size) if k is None else np.asarray(k, dtype=float)
    return AbstractionTrace(agents, kk, times, data[:, :, :d], data[:, :, d], *ev)


def write_table(path, columns, rows) -> None:
    """Generic CSV table; floats use round-trip formatting."""
    fh, w = _writer(path)
    with fh:
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
