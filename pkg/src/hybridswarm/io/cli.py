"""Command-line interface.

Exit codes: 0 success or check passed, 1 check failed or run error,
2 usage or configuration error. Errors are printed to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..analysis import (
    AbstractionModel,
    ClockCoordinate,
    Constant,
    ConstantHazard,
    Coordinate,
    FirstPassageConditioning,
    HazardTable,
    Region,
    Sum,
    estimate_first_passage,
    forward_equation_residual,
    generator_residual,
    mean_jump_intensity,
    rate_estimate,
    state_vector,
)
from ..errors import ConfigError, CorruptTraceError, HybridSwarmError
from ..swarm import (
    compose_collectives,
    extract_abstraction,
    reconstruct_jump_times,
    roundtrip_matches,
    run_ensemble,
)
from ..swarm.bench import bench_scenario, run_bench
from .csvio import (
    read_abstraction,
    read_trace,
    write_abstraction,
    write_jumps,
    write_table,
    write_trace,
)
from .manifest import RunManifest
from .schema import load_scenario, save_scenario, scenario_from_dict, scenario_to_dict

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (overrides the scenario)")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--horizon", type=float, help="time horizon")
    p.add_argument("--reps", type=int, help="number of replications")
    p.add_argument("--out", type=Path, help="output file or directory")


def _scenario(args):
    config = load_scenario(args.scenario)
    num = config.numerics
    dt = num.dt if args.dt is None else args.dt
    horizon = num.horizon if args.horizon is None else args.horizon
    if args.dt is not None or args.horizon is not None:
        # re-validate so a horizon that is not a whole number of steps is caught
        data = scenario_to_dict(config)
        data["numerics"].update(dt=dt, horizon=horizon)
        config = scenario_from_dict(data)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# ------------------------------------------------------------ simulate / abstract


def _trace_name(rep: int, reps: int, stem: str) -> str:
    return f"{stem}.csv" if reps == 1 else f"{stem}_rep{rep}.csv"


def cmd_simulate(args) -> int:
    config = _scenario(args)
    out = args.out or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    reps = args.reps or 1
    manifest = RunManifest.start(config, "simulate")
    traces = run_ensemble(config, reps=reps, predicate=args.predicate, stride=args.stride)
    files = []
    for tr in traces:
        tname = _trace_name(tr.replication, reps, "trace")
        jname = _trace_name(tr.replication, reps, "jumps")
        write_trace(tr, out / tname)
        write_jumps(tr.jumps, out / jname, tr.dim)
        files += [tname, jname]
    save_scenario(config, out / "scenario.json")
    manifest.finish(replications=reps, jumps=[len(t.jumps) for t in traces], files=files)
    manifest.write(out / "manifest.json")
    _emit({"out": str(out), "files": files, "jumps": [len(t.jumps) for t in traces]})
    return EXIT_OK


def _load_traces(folder: Path):
    if not (folder / "scenario.json").exists():
        raise ConfigError([f"{folder}: no scenario.json (not a simulate output directory)"])
    config = load_scenario(folder / "scenario.json")
    k = [a.guard.k for a in config.agents]
    names = sorted(folder.glob("trace*.csv"))
    if not names:
        raise CorruptTraceError(f"{folder}: no trace CSV files")
    traces = []
    for tpath in names:
        rep = int(tpath.stem.split("_rep")[1]) if "_rep" in tpath.stem else 0
        jpath = folder / tpath.name.replace("trace", "jumps", 1)
        traces.append(read_trace(tpath, jpath, k, config.numerics.dt, config.seed, rep))
    return config, traces


def cmd_abstract(args) -> int:
    folder = args.trace
    _, traces = _load_traces(folder)
    out = args.out or folder
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for tr in traces:
        abs_ = extract_abstraction(tr)
        suffix = "" if len(traces) == 1 else f"_rep{tr.replication}"
        g, e = f"abstraction{suffix}.csv", f"abstraction_events{suffix}.csv"
        write_abstraction(abs_, out / g, out / e)
        files += [g, e]
    _emit({"out": str(out), "files": files})
    return EXIT_OK


def cmd_verify_roundtrip(args) -> int:
    folder = args.trace
    _, traces = _load_traces(folder)
    results = []
    for tr in traces:
        ok = roundtrip_matches(tr)
        suffix = "" if len(traces) == 1 else f"_rep{tr.replication}"
        grid = folder / f"abstraction{suffix}.csv"
        if grid.exists():
            # the abstraction written by `abstract` must give the same jump times
            abs_ = read_abstraction(grid, folder / f"abstraction_events{suffix}.csv", tr.k)
            rec = reconstruct_jump_times(abs_)
            ref = tr.jump_times()
            ok = ok and set(rec) == set(ref) and all(np.array_equal(rec[a], ref[a]) for a in ref)
        results.append({"replication": tr.replication, "jumps": len(tr.jumps), "passed": bool(ok)})
    passed = all(r["passed"] for r in results)
    _emit({"passed": passed, "traces": results})
    return EXIT_OK if passed else EXIT_FAIL


# ------------------------------------------------------------ analysis commands


def _agent(config, agent_id):
    return config.agents[0] if agent_id is None else config.agent(agent_id)


def _edges(horizon: float, bins: int) -> np.ndarray:
    return np.linspace(0.0, horizon, bins + 1)


def cmd_estimate_fp(args) -> int:
    config = _scenario(args)
    spec = _agent(config, args.agent)
    clocks = {}
    for item in args.clock or []:
        j, tau = item.split("=")
        clocks[int(j)] = float(tau)
    # neighbours without a stated clock have never jumped and contribute nothing
    sources, _ = config.coupling.row(spec.id)
    clocks = {int(j): clocks.get(int(j), np.inf) for j in sources}
    gamma = None if args.gamma is None else np.array(args.gamma)
    cond = FirstPassageConditioning.from_scenario(config, spec.id, clocks, gamma)
    horizon = args.horizon or 5.0
    est = estimate_first_passage(
        spec, cond, _edges(horizon, args.bins), args.reps or 10_000, config.seed, args.dt or 1e-3
    )
    rates = rate_estimate(est, args.eps)
    out = args.out or Path("fp.csv")
    rows = [
        (
            float(est.edges[j]), float(est.edges[j + 1]), float(est.density[j]),
            float(est.density_se[j]), float(est.cdf[j]), float(est.cdf_se[j]),
            float(rates.rates[j]), int(rates.valid[j]),
        )
        for j in range(est.density.size)
    ]
    write_table(out, ["lo", "hi", "density", "density_se", "cdf_lo", "cdf_lo_se", "rate", "valid"], rows)
    hits = est.hits[np.isfinite(est.hits)]
    _emit({
        "out": str(out),
        "reps": est.reps,
        "hits": int(hits.size),
        "mean_hit_time": float(hits.mean()) if hits.size else None,
        "truncated": est.truncated,
    })
    return EXIT_OK


def _model(args, config, horizon: float) -> AbstractionModel:
    if args.lam is not None:
        hazards = [ConstantHazard(args.lam) for _ in config.agents]
    else:
        hazards = []
        for spec in config.agents:
            est = estimate_first_passage(
                spec, FirstPassageConditioning(), _edges(horizon, args.bins),
                args.fp_reps, config.seed, args.fp_dt,
            )
            hazards.append(HazardTable.from_estimate(rate_estimate(est, args.eps)))
    return AbstractionModel.from_config(config, hazards)


def _function(spec: str, n: int, d: int):
    parts = spec.split(":")
    if parts[0] == "one":
        return Constant(1.0)
    if parts[0] == "clock":
        return ClockCoordinate(int(parts[1]), n, d)
    if parts[0] == "guard":
        return Coordinate(int(parts[1]) * d + int(parts[2]))
    if parts[0] == "clocks":
        return Sum(tuple(ClockCoordinate(i, n, d) for i in range(n)))
    raise UsageError(f"unknown test function {spec!r} (one, clock:i, guard:i:p, clocks)")


def _start_point(args, config) -> np.ndarray:
    n, d = config.n_agents, config.dim
    beta = np.ones((n, d)) if args.beta is None else np.resize(np.array(args.beta, dtype=float), (n, d))
    tau = np.zeros(n) if args.tau is None else np.resize(np.array(args.tau, dtype=float), n)
    return state_vector(beta, tau)


def cmd_verify_generator(args) -> int:
    config = load_scenario(args.scenario)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    model = _model(args, config, args.horizon or 5.0)
    f = _function(args.function, config.n_agents, config.dim)
    x0 = _start_point(args, config)
    rep = generator_residual(
        model, f, x0, args.h, args.reps or 100_000, np.random.default_rng(config.seed), args.bias_budget
    )
    _emit(rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_verify_forward(args) -> int:
    config = load_scenario(args.scenario)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    horizon = args.horizon or 2.0
    model = _model(args, config, max(horizon, 5.0))
    f = _function(args.function, config.n_agents, config.dim)
    x0 = _start_point(args, config)
    n = int(round(horizon / args.grid_step))
    times = np.linspace(0.0, n * args.grid_step, n + 1)
    rep = forward_equation_residual(
        model, f, x0, times, args.reps or 10_000, np.random.default_rng(config.seed),
        bias_budget=args.bias_budget,
    )
    if args.out is not None:
        pad = lambda v: np.concatenate([[np.nan], v, [np.nan]])  # noqa: E731
        cols = (rep.times, rep.mean, rep.mean_se, pad(rep.residual), pad(rep.residual_se))
        write_table(
            args.out, ["t", "mean", "mean_se", "residual", "residual_se"],
            [tuple(float(c[g]) for c in cols) for g in range(rep.times.size)],
        )
    _emit(rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_intensity(args) -> int:
    _, traces = _load_traces(args.trace)
    horizon = args.horizon or float(traces[0].times[-1])
    region = Region(args.lo, args.hi)
    times = np.linspace(0.0, horizon, args.points)
    est = mean_jump_intensity(traces, region, times, args.field)
    out = args.out or Path("intensity.csv")
    rows = zip(est.times, est.cumulative, est.cumulative_se, est.rate, est.rate_se)
    write_table(out, ["t", "cumulative", "cumulative_se", "rate", "rate_se"], [tuple(map(float, r)) for r in rows])
    _emit({"out": str(out), "traces": est.n_traces, "total": float(est.cumulative[-1])})
    return EXIT_OK


# ------------------------------------------------------------ compose / bench


def _wire(text: str):
    try:
        src, dst, w = text.split(":")
        return int(src), int(dst), [float(x) for x in w.split(",")]
    except ValueError:
        raise UsageError(f"bad wire {text!r}; expected SRC:DST:W[,W...]") from None


def cmd_compose(args) -> int:
    a = load_scenario(args.a)
    b = load_scenario(args.b)
    merged = compose_collectives(a, b, [_wire(w) for w in args.wire or []])
    if args.seed is not None:
        merged = merged.with_seed(args.seed)
    if args.dt is not None or args.horizon is not None:
        merged = merged.with_numerics(
            dt=args.dt or merged.numerics.dt, horizon=args.horizon or merged.numerics.horizon
        )
    out = args.out or Path("composed.json")
    save_scenario(merged, out)
    _emit({"out": str(out), "agents": merged.n_agents, "edges": len(merged.coupling)})
    return EXIT_OK


def cmd_bench(args) -> int:
    config = bench_scenario(
        args.agents, args.mean_degree, args.horizon or 10.0, args.dt or 1e-3,
        0 if args.seed is None else args.seed,
    )
    report = run_bench(config)
    if args.out is not None:
        Path(args.out).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    _emit(report)
    return EXIT_OK


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybridswarm", description="Simulate and verify swarms of hybrid agents.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a scenario and write CSV traces")
    s.add_argument("--scenario", type=Path, required=True)
    s.add_argument("--predicate", choices=("effective", "modified"), default="effective")
    s.add_argument("--stride", type=int, help="sample every STRIDE steps")
    _common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("abstract", help="write the (guard, clock) abstraction of a trace")
    s.add_argument("--trace", type=Path, required=True, help="simulate output directory")
    _common(s)
    s.set_defaults(func=cmd_abstract)

    s = sub.add_parser("verify-roundtrip", help="check jump times are recovered from the abstraction")
    s.add_argument("--trace", type=Path, required=True, help="simulate output directory")
    _common(s)
    s.set_defaults(func=cmd_verify_roundtrip)

    s = sub.add_parser("estimate-fp", help="first-passage law of one agent")
    s.add_argument("--scenario", type=Path, required=True)
    s.add_argument("--agent", type=int)
    s.add_argument("--gamma", type=float, nargs="+", help="guard seed (default: drawn per path)")
    s.add_argument("--clock", action="append", metavar="ID=TAU", help="frozen neighbour clock")
    s.add_argument("--bins", type=int, default=50)
    s.add_argument("--eps", type=float, default=0.05)
    _common(s)
    s.set_defaults(func=cmd_estimate_fp)

    for name, func, help_ in (
        ("verify-generator", cmd_verify_generator, "difference quotient of the semigroup vs the generator"),
        ("verify-forward", cmd_verify_forward, "forward-equation residuals on a time grid"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", type=Path, required=True)
        s.add_argument("--lam", type=float, help="constant hazard for every agent (default: estimated)")
        s.add_argument("--function", default="clock:0", help="one | clock:i | guard:i:p | clocks")
        s.add_argument("--tau", type=float, nargs="+", help="starting clocks")
        s.add_argument("--beta", type=float, nargs="+", help="starting guards")
        s.add_argument("--bias-budget", type=float, default=1.0)
        s.add_argument("--bins", type=int, default=100, help="hazard bins when estimated")
        s.add_argument("--eps", type=float, default=0.05)
        s.add_argument("--fp-reps", type=int, default=10_000)
        s.add_argument("--fp-dt", type=float, default=1e-3)
        if name == "verify-generator":
            s.add_argument("--h", type=float, default=0.01)
        else:
            s.add_argument("--grid-step", type=float, default=0.1)
        _common(s)
        s.set_defaults(func=func)

    s = sub.add_parser("intensity", help="mean jump intensity from simulate output")
    s.add_argument("--trace", type=Path, required=True)
    s.add_argument("--lo", type=float, nargs="+", help="region lower corner on the pre-jump state")
    s.add_argument("--hi", type=float, nargs="+", help="region upper corner on the pre-jump state")
    s.add_argument("--field", default="pre_z", choices=("pre_z", "pre_z_tilde", "pre_beta"))
    s.add_argument("--points", type=int, default=11)
    _common(s)
    s.set_defaults(func=cmd_intensity)

    s = sub.add_parser("compose", help="wire two scenarios into one")
    s.add_argument("--a", type=Path, required=True)
    s.add_argument("--b", type=Path, required=True)
    s.add_argument("--wire", action="append", metavar="SRC:DST:W", help="edge from an agent of A to one of B")
    _common(s)
    s.set_defaults(func=cmd_compose)

    s = sub.add_parser("bench", help="throughput on a synthetic sparse swarm")
    s.add_argument("--agents", type=int, default=1000)
    s.add_argument("--mean-degree", type=float, default=8.0)
    _common(s)
    s.set_defaults(func=cmd_bench)
    return p


def _fail(code: int, exc: BaseException) -> int:
    details = exc.errors if isinstance(exc, ConfigError) else []
    payload = {"error": type(exc).__name__, "message": str(exc), "details": details}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (KeyError, FileNotFoundError) as exc:
        return _fail(EXIT_USAGE, exc)
    except HybridSwarmError as exc:
        return _fail(EXIT_FAIL, exc)


if __name__ == "__main__":
    sys.exit(main())
