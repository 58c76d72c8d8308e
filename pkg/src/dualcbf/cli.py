"""Command-line front end: ``dualcbf run | check | sequences | bench``.

Exit codes: 0 success, 1 specification not satisfied, 2 parse or
validation error, 3 no feasible subtask sequence (or CBFs negative at the
initial state), 4 QP infeasible during the run.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scenarios
from .controller import (
    Controller,
    InitiallyInfeasible,
    QpInfeasible,
    RunReport,
    StepRecord,
    initial_alternatives,
    simulate,
)
from .sequencer import NoFeasibleSequence, all_orders
from .stl import SpecError, parse_spec
from .stl.monitor import Trajectory, TrajectoryTooShort, group_robustness
from .stl.syntax import OpKind

EXIT_OK, EXIT_UNSAT, EXIT_INPUT, EXIT_SEQUENCE, EXIT_QP = 0, 1, 2, 3, 4

BENCH = ("conflict", "recurrence", "disjunction", "disjunction_pinned", "example1", "case_study")
REFERENCE = {"case_study": {"cost": 20.29, "solve_ms": 0.013}}
BASELINES = {"MIQP": 17.03, "NLP": 14.65}


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _overrides(args) -> dict:
    return {
        "dt": args.dt,
        "beta": args.beta,
        "alpha_gain": args.alpha_gain,
        "facets": args.facets,
        "relax_secondary": True if args.relax else None,
    }


# -- trajectory files ---------------------------------------------------------

def trajectory_columns(dim: int) -> list[str]:
    return (
        ["t"] + [f"x{i + 1}" for i in range(dim)] + [f"u{i + 1}" for i in range(dim)]
        + ["h", "h_hold", "b", "active_subtask", "critical_term", "qp_status", "slack"]
    )


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_trajectory(path: Path, records: list[StepRecord]) -> None:
    dim = len(records[0].x) if records else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_columns(dim))
        for r in records:
            w.writerow(
                [_num(r.t)] + [_num(v) for v in r.x] + [_num(v) for v in r.u]
                + [_num(r.h), _num(r.h_hold), _num(r.b), _num(r.active_subtask), _num(r.critical_term), r.qp_status, _num(r.slack)]
            )


def read_trajectory(path: Path) -> Trajectory:
    """Load ``t, x1..xn[, u1..un]`` columns from a CSV file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    header = list(rows[0].keys())
    xs = [c for c in header if c.startswith("x") and c[1:].isdigit()]
    us = [c for c in header if c.startswith("u") and c[1:].isdigit()]
    if "t" not in header or not xs:
        raise ValueError(f"{path}: needs a 't' column and at least one 'x1' column")
    try:
        t = [float(r["t"]) for r in rows]
        x = [[float(r[c]) for c in xs] for r in rows]
        u = [[float(r[c]) for c in us] if us else [0.0] * len(xs) for r in rows]
    except (TypeError, ValueError):
        raise ValueError(f"{path}: non-numeric sample") from None
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    return Trajectory(dt, t, x, u)


# -- subcommands ---------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = scenarios.load(args.scenario, **_overrides(args))
        traj, report, records = simulate(cfg)
    except (SpecError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    except (NoFeasibleSequence, InitiallyInfeasible) as exc:
        return _fail(str(exc), EXIT_SEQUENCE)
    except QpInfeasible as exc:
        return _fail(str(exc), EXIT_QP)
    if args.out:
        write_trajectory(Path(args.out), records)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    _print_summary(report)
    return EXIT_OK if report.satisfied else EXIT_UNSAT


def _print_summary(r: RunReport) -> None:
    verdict = "satisfied" if r.satisfied else "NOT satisfied"
    print(f"{r.name or 'scenario'}: {verdict}  robustness={r.robustness:.4g}  cost={r.cost:.4f}")
    print(f"  min h={r.min_h:.3g}  min b={r.min_b:.3g}  steps={r.steps}  mean QP={r.solve_time_mean_ms:.4f} ms")
    if r.resequence_events:
        print(f"  resequenced at t={', '.join(f'{t:g}' for t in r.resequence_events)}")


def cmd_check(args) -> int:
    try:
        spec = parse_spec(args.spec)
        traj = read_trajectory(Path(args.trajectory))
        if spec.variables and traj.x.shape[1] != spec.dim:
            raise ValueError(f"trajectory has {traj.x.shape[1]} state columns but the formula uses {spec.variables}")
        rob = group_robustness(traj, spec)
    except (SpecError, TrajectoryTooShort, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    value = min(rob) if rob else math.inf
    print(f"robustness {value:.6g}")
    for g, v in zip(spec.groups, rob):
        print(f"  {' || '.join(str(s) for s in g)}: {v:.6g}")
    return EXIT_OK if value >= 0 else EXIT_UNSAT


def cmd_sequences(args) -> int:
    try:
        cfg = scenarios.load(args.scenario, **_overrides(args))
        alts = initial_alternatives(cfg)
    except (SpecError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        selected = Controller(cfg).sequence
        error = None
    except (NoFeasibleSequence, InitiallyInfeasible) as exc:
        selected, error = None, exc
    except SpecError as exc:
        return _fail(str(exc), EXIT_INPUT)
    for k, terms in enumerate(alts, 1):
        label = ", ".join(f"{t.subtask_id}" + (f"/{t.clause}" if _alternatives_of(cfg, t.subtask_id) > 1 else "") for t in terms)
        print(f"alternative {k}: {{{label}}}")
        for seq in all_orders([terms], cfg.x0, 0.0, cfg.speed, dwell_credit=cfg.dwell_credit):
            mark = "*" if selected is not None and _same(seq, selected) else " "
            status = "feasible" if seq.feasible else f"deficit {-min(seq.slack):.3f} s"
            print(f" {mark} order {seq.ids}  {status}  total slack {seq.total_slack:.3f}")
            for term, req, sl in zip(seq.terms, seq.required, seq.slack):
                print(f"      {term.subtask_id:>3}  required {req:8.3f}  remaining {term.remaining0:8.3f}  slack {sl:8.3f}")
    if selected is None:
        print(f"no feasible order: {error}")
        return EXIT_SEQUENCE
    print(f"selected order: {selected.ids}")
    for g in cfg.spec.groups:
        for s in g:
            if s.op.kind is OpKind.GF:
                print(f"  subtask {s.id} resequences at runtime")
    return EXIT_OK


def _alternatives_of(cfg, sid: int) -> int:
    for g in cfg.spec.groups:
        if any(s.id == sid for s in g):
            return sum(len(s.inner.clauses) for s in g)
    return 1


def _same(a, b) -> bool:
    return a.ids == b.ids and tuple(t.clause for t in a.terms) == tuple(t.clause for t in b.terms)


def _bench_one(name: str, overrides: dict) -> dict:
    try:
        cfg = scenarios.load(name, **overrides)
        _, report, _ = simulate(cfg)
    except (NoFeasibleSequence, InitiallyInfeasible, QpInfeasible, SpecError, ValueError) as exc:
        return {"name": name, "error": f"{type(exc).__name__}: {exc}"}
    return report.to_dict()


def cmd_bench(args) -> int:
    overrides = _overrides(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_one, BENCH, [overrides] * len(BENCH)))
    else:
        results = [_bench_one(n, overrides) for n in BENCH]
    ok = True
    print(f"{'scenario':<20} {'result':<14} {'cost':>9} {'mean QP ms':>11} {'runtime s':>10}  reference")
    for r in results:
        if "error" in r:
            ok = False
            print(f"{r['name']:<20} {'error':<14} {r['error']}")
            continue
        ok &= r["satisfied"]
        ref = REFERENCE.get(r["name"])
        note = f"cost {ref['cost']}, {ref['solve_ms']} ms/step" if ref else ""
        verdict = "satisfied" if r["satisfied"] else "NOT satisfied"
        print(f"{r['name']:<20} {verdict:<14} {r['cost']:9.3f} {r['solve_time_mean_ms']:11.4f} {r['runtime_s']:10.2f}  {note}")
    print("baseline costs for the case study (not reimplemented): " + ", ".join(f"{k} {v}" for k, v in BASELINES.items()))
    return EXIT_OK if ok else EXIT_UNSAT


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualcbf", description="Dual control barrier functions for STL tasks.")
    p.add_argument("--seed", type=int, default=None, help="seed numpy's global RNG (runs themselves are deterministic)")
    sub = p.add_subparsers(dest="command", required=True)

    def tuning(sp):
        sp.add_argument("--dt", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--alpha-gain", type=float)
        sp.add_argument("--facets", type=int)
        sp.add_argument("--relax", action="store_true", help="soften the secondary constraint with a penalised slack")

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    run.add_argument("--out", help="trajectory CSV path")
    run.add_argument("--report", help="run report JSON path")
    tuning(run)
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="monitor a trajectory CSV against a specification")
    check.add_argument("trajectory")
    check.add_argument("spec", help="specification text")
    check.set_defaults(func=cmd_check)

    seqs = sub.add_parser("sequences", help="list every subtask order with its slack")
    seqs.add_argument("scenario")
    tuning(seqs)
    seqs.set_defaults(func=cmd_sequences)

    bench = sub.add_parser("bench", help="run the bundled benchmark scenarios")
    bench.add_argument("--jobs", type=int, default=1)
    tuning(bench)
    bench.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None:
        np.random.seed(args.seed)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
