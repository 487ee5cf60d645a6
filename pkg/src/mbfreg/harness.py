"""Batch drivers behind the command line: sweeps, bound verification, attacks, re-checks."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import replace
from typing import Iterable, Sequence

from . import bounds
from .checker import History, check_termination, check_validity
from .oracle import (EnumGrid, Infeasible, default_enum_points, enumerate_maxB,
                     enumerate_reply_sets, simulate_attack, build_attack,
                     sweep_composition_identity)
from .sim import RunConfig, run

SWEEP_COLUMNS = ["model", "n", "f", "delta", "Delta", "schedule", "strategy", "phase_offset",
                 "seed", "writes", "reads", "no_quorum_reads", "validity_violations",
                 "termination_violations", "gamma_measured", "gamma_bound", "ok"]


def summary_row(report: dict) -> dict:
    cfg = report["config"]
    return {
        "model": cfg["model"], "n": report["n"], "f": cfg["f"], "delta": cfg["delta"],
        "Delta": cfg["Delta"], "schedule": cfg["schedule"], "strategy": cfg["strategy"],
        "phase_offset": cfg["phase_offset"], "seed": report["seed"],
        "writes": report["writes"], "reads": report["reads"],
        "no_quorum_reads": report["no_quorum_reads"],
        "validity_violations": len(report["validity_violations"]),
        "termination_violations": len(report["termination_violations"]),
        "gamma_measured": report["gamma_measured"], "gamma_bound": report["gamma_bound"],
        "ok": report["ok"],
    }


def sweep(template: RunConfig, seeds: Iterable[int], strategies: Sequence[str],
          offsets: Sequence[int] = (0,)) -> list[dict]:
    """Every (seed, strategy, offset) combination of ``template``; one summary row each."""
    rows = []
    for seed in seeds:
        for strategy in strategies:
            for offset in offsets:
                cfg = replace(template, seed=seed, strategy=strategy, phase_offset=offset)
                rows.append(summary_row(run(cfg).report))
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    cells = [[str(r[c]) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    line = lambda vals: "  ".join(v.ljust(w) for v, w in zip(vals, widths)).rstrip()
    return "\n".join([line(columns), line(["-" * w for w in widths])] + [line(r) for r in cells])


# ---------------------------------------------------------------------------

def bounds_table(f_values: Sequence[int] = (1, 2, 3), delta: int = 10) -> list[dict]:
    rows = []
    for f in f_values:
        for model, regime, p in bounds.table_cells(f, delta):
            out = bounds.evaluate(p)
            rows.append({"model": model, "regime": regime, "f": f, "delta": p.delta,
                         "Delta": p.Delta, "gamma": p.gamma, "T_r": p.T_r, **out.to_json()})
    return rows


def bounds_grid(model: str) -> list[dict]:
    rows = []
    for p in bounds.default_grid(model):
        rows.append({"model": model, "delta": p.delta, "Delta": p.Delta, "gamma": p.gamma,
                     "T_r": p.T_r, **bounds.evaluate(p).to_json()})
    return rows


def verify_bounds(grid_n: int = 8) -> dict:
    """Compare every formula against its brute-force counterpart on the default grid."""
    rows = []
    for model in bounds.MODELS:
        for delta, Delta, gamma, T_r in default_enum_points():
            p = bounds.BoundsInput(delta, Delta, gamma, T_r, 1, model)
            n = bounds.n_lb(p) + 1
            formula_b = bounds.max_b(T_r, Delta, 1)
            enum_b = enumerate_maxB(EnumGrid(grid_n, delta, Delta, gamma, T_r))
            formula_r = bounds.reply_counts(p, n)
            enum_r = enumerate_reply_sets(delta, Delta, gamma, T_r, model, n)
            rows.append({"model": model, "delta": delta, "Delta": Delta, "gamma": gamma,
                         "T_r": T_r, "n": n,
                         "max_b": formula_b, "enum_max_b": enum_b,
                         "reply_counts": list(formula_r), "enum_reply_counts": list(enum_r),
                         "separates": formula_r[1] > formula_r[0],
                         "ok": formula_b == enum_b and formula_r == enum_r and formula_r[1] > formula_r[0]})
    comp = sweep_composition_identity()
    return {"points": len(rows), "failures": sum(not r["ok"] for r in rows),
            "composition_ok": comp["ok"], "ok": all(r["ok"] for r in rows) and comp["ok"],
            "rows": rows}


def attack_report(model: str, n: int, f: int, delta: int, Delta: int, gamma: int,
                  T_r: int) -> dict:
    plan = build_attack(n, model, delta, Delta, gamma, T_r, f)
    p = bounds.BoundsInput(delta, Delta, gamma, T_r, f, model)
    base = {"model": model, "n": n, "f": f, "n_lb": bounds.n_lb(p)}
    if isinstance(plan, Infeasible):
        return {**base, "feasible": False, "reason": plan.reason, "indistinguishable": False}
    outcome = simulate_attack(plan)
    return {**base, "feasible": True, **outcome.to_json()}


def check_trace(lines: Iterable[str], delta: int) -> dict:
    """Re-run the history checks over the operation records of a saved trace."""
    ops = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec.get("ev") == "op":
            ops.append({k: rec[k] for k in ("kind", "client", "t_begin", "t_end", "entry", "no_quorum")})
    h = History.from_json(ops)
    validity = check_validity(h)
    termination = check_termination(h, delta)
    return {"ops": len(ops), "validity_violations": [f.__dict__ for f in validity],
            "termination_violations": [f.__dict__ for f in termination],
            "ok": not validity and not termination}
