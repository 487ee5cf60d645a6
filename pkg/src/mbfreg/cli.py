"""Command line: ``mbfreg {run,sweep,bounds,verify-bounds,attack,check}``.

Exit status is 0 when every check of the command passed, 1 when some check
failed, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .mobility import STRATEGIES
from .sim import RunConfig, run

SCHEDULES = ("sstar", "random", "file", "none")
POLICIES = ("adversarial", "fixed-max", "uniform")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of RunConfig keys; flags override it")
    p.add_argument("--model", type=str.upper, choices=("CAM", "CUM"))
    p.add_argument("--n", type=int, help="servers (default: the model's minimum)")
    p.add_argument("--f", type=int)
    p.add_argument("--delta", type=int, help="message delay bound δ in ticks")
    p.add_argument("--Delta", type=int, help="minimum agent dwell Δ in ticks")
    p.add_argument("--schedule", choices=SCHEDULES)
    p.add_argument("--schedule-file", type=Path, help="agent schedules, text format (implies --schedule file)")
    p.add_argument("--strategy", choices=sorted(STRATEGIES))
    p.add_argument("--delay-policy", choices=POLICIES)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--readers", type=int)
    p.add_argument("--phase-offset", type=int, help="CUM maintenance phase offset")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = {}
    if args.config is not None:
        base = json.loads(args.config.read_text())
    cfg = RunConfig.from_dict(base)
    overrides = {}
    for key in ("model", "n", "f", "delta", "Delta", "schedule", "strategy", "horizon", "seed",
                "readers"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.delay_policy is not None:
        overrides["delay_policy"] = args.delay_policy
    if args.phase_offset is not None:
        overrides["phase_offset"] = args.phase_offset
    if args.schedule_file is not None:
        overrides["schedule"] = "file"
        overrides["schedule_text"] = args.schedule_file.read_text()
    return replace(cfg, **overrides)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    if args.trace is not None:
        cfg = replace(cfg, trace_messages=args.trace_messages)
    result = run(cfg)
    rep = result.report
    if args.trace is not None:
        args.trace.write_text(result.trace_lines())
    if args.report is not None:
        args.report.write_text(result.report_json() + "\n")
    if args.json:
        print(result.report_json())
    else:
        print(f"seed {rep['seed']}  model {cfg.model}  n {rep['n']}  f {cfg.f}  "
              f"δ {cfg.delta}  Δ {cfg.Delta}  schedule {cfg.schedule}  strategy {cfg.strategy}")
        print(f"writes {rep['writes']}  reads {rep['reads']}  no-quorum {rep['no_quorum_reads']}")
        print(f"validity violations {len(rep['validity_violations'])}  "
              f"termination violations {len(rep['termination_violations'])}")
        print(f"gamma measured {rep['gamma_measured']} (bound {rep['gamma_bound']})")
        print("OK" if rep["ok"] else "FAILED")
    return 0 if rep["ok"] else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    template = config_from_args(args)
    seeds = range(args.seed_from, args.seed_from + args.seeds)
    strategies = _str_list(args.strategies) if args.strategies else [template.strategy]
    offsets = _int_list(args.offsets) if args.offsets else [template.phase_offset]
    rows = harness.sweep(template, seeds, strategies, offsets)
    if args.csv is not None:
        args.csv.write_text(harness.rows_to_csv(rows))
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(harness.format_table(rows, harness.SWEEP_COLUMNS))
        bad = sum(not r["ok"] for r in rows)
        print(f"{len(rows)} runs, {bad} failed")
    return 0 if all(r["ok"] for r in rows) else 1


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.grid in ("default", "table"):
        rows = harness.bounds_table(_int_list(args.f), args.delta)
        cols = ["model", "regime", "f", "max_b_f", "max_cu_f", "max_sil_f", "min_cbc_f", "n_lb", "n_min"]
    else:
        rows = harness.bounds_grid("CAM") + harness.bounds_grid("CUM")
        cols = ["model", "delta", "Delta", "gamma", "T_r", "max_b", "max_cu", "max_sil", "min_cbc",
                "n_lb"]
    print(json.dumps(rows, indent=2) if args.json else harness.format_table(rows, cols))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    rep = harness.verify_bounds()
    if args.json:
        print(json.dumps(rep, indent=2))
    else:
        cols = ["model", "delta", "Delta", "gamma", "T_r", "n", "max_b", "enum_max_b",
                "reply_counts", "enum_reply_counts", "ok"]
        rows = rep["rows"] if args.all else [r for r in rep["rows"] if not r["ok"]]
        if rows:
            print(harness.format_table(rows, cols))
        print(f"{rep['points']} grid points, {rep['failures']} disagreements; "
              f"composition identity {'holds' if rep['composition_ok'] else 'FAILS'}")
        print("OK" if rep["ok"] else "FAILED")
    return 0 if rep["ok"] else 1


def cmd_attack(args: argparse.Namespace) -> int:
    gamma = args.gamma if args.gamma is not None else (2 if args.model == "CAM" else 4) * args.delta
    T_r = args.T_r if args.T_r is not None else 2 * args.delta
    rep = harness.attack_report(args.model, args.n, args.f, args.delta, args.Delta, gamma, T_r)
    if args.json:
        print(json.dumps(rep, indent=2))
    else:
        print(f"model {rep['model']}  n {rep['n']}  f {rep['f']}  (impossible for n ≤ {rep['n_lb']})")
        print(f"feasible: {str(rep['feasible']).lower()}")
        if rep["feasible"]:
            print(f"E0 replies: {rep['E0']}")
            print(f"E1 replies: {rep['E1']}")
            print(f"registers hold: {rep['correct_values']}")
        else:
            print(f"reason: {rep['reason']}")
        print(f"indistinguishable: {str(rep['indistinguishable']).lower()}")
    return 0 if rep["feasible"] == rep["indistinguishable"] else 1


def cmd_check(args: argparse.Namespace) -> int:
    rep = harness.check_trace(args.trace.read_text().splitlines(), args.delta)
    if args.json:
        print(json.dumps(rep, indent=2))
    else:
        print(f"{rep['ops']} operations; validity violations {len(rep['validity_violations'])}; "
              f"termination violations {len(rep['termination_violations'])}")
        print("OK" if rep["ok"] else "FAILED")
    return 0 if rep["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbfreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration and check it")
    _add_run_options(p)
    p.add_argument("--trace", type=Path, help="write the JSON-lines trace here")
    p.add_argument("--trace-messages", action="store_true", help="include every delivery in the trace")
    p.add_argument("--report", type=Path, help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="print the full JSON report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of seeds × strategies × phase offsets")
    _add_run_options(p)
    p.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds")
    p.add_argument("--seed-from", type=int, default=0)
    p.add_argument("--strategies", help="comma-separated strategy names")
    p.add_argument("--offsets", help="comma-separated CUM phase offsets")
    p.add_argument("--csv", type=Path, help="write the summary CSV here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="evaluate the closed-form replica bounds")
    p.add_argument("--grid", choices=("default", "table", "full"), default="default",
                   help="default/table: the replica table; full: every point of the formula grid")
    p.add_argument("--f", default="1,2,3", help="comma-separated f values (table grid)")
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify-bounds", help="compare formulas against brute-force enumeration")
    p.add_argument("--all", action="store_true", help="list every grid point, not only failures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="build and replay the two-execution attack")
    p.add_argument("--model", type=str.upper, choices=("CAM", "CUM"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--f", type=int, default=1)
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--Delta", type=int, default=20)
    p.add_argument("--gamma", type=int, help="curing time (default 2δ CAM, 4δ CUM)")
    p.add_argument("--T_r", "--T-r", dest="T_r", type=int, help="read duration (default 2δ)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("check", help="re-run the history checks on a saved trace")
    p.add_argument("trace", type=Path)
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"mbfreg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
