"""Command-line front end.

Exit status: 0 on success, 1 when a property or tolerance check fails,
2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from .analyzer import AnalysisReport, BeableAssignment, Deviation, analyze
from .dynamics import Formulation, Outcome, Setting
from .engine import (
    FrameOrder,
    JointDistribution,
    Scenario,
    enumerate_branches,
    joint_distribution,
    sample_counts,
)
from .errors import GRWLocalityError

SCHEMA_VERSION = "1"
COMPARE_TOL = 1e-12
Z_LIMIT = 5.0

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_FORMULATIONS = {f.value: f for f in Formulation}
_SETTINGS = {s.value: s for s in Setting}
_BEABLES = {b.value: b for b in BeableAssignment}
_FRAMES = {f.value: f for f in FrameOrder}


def _num(x: float) -> float:
    """Round for stable serialization; also folds -0.0 into 0.0."""
    if math.isinf(x) or math.isnan(x):
        return x
    return round(x, 12) + 0.0


def _joint_rows(dist: JointDistribution) -> list[dict]:
    return [{"left": l.value, "right": r.value, "prob": _num(dist[(l, r)])} for l, r in dist.keys()]


def _marginal(m: dict[Outcome, float]) -> dict[str, float]:
    return {o.value: _num(p) for o, p in m.items()}


def _document(command: str, inputs: dict, results: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command,
            "inputs": inputs, "results": results}


def _exhaustive_joint(dist: JointDistribution, right: Setting) -> JointDistribution:
    rights = (Outcome.UP, Outcome.DOWN) if right is Setting.MEASURE else (Outcome.NONE,)
    return JointDistribution({(l, r): dist[(l, r)] for l in (Outcome.UP, Outcome.DOWN) for r in rights})


def cmd_enumerate(formulation: Formulation, right: Setting, frame: FrameOrder) -> tuple[dict, int]:
    records = enumerate_branches(Scenario(right, frame, formulation))
    dist = _exhaustive_joint(joint_distribution(records), right)
    branches = [{
        "coins": {w.value: c.value for w, c in r.coin_key},
        "outcomes": {w.value: r.outcomes[w].value for w in sorted(r.outcomes, key=lambda w: w.value)},
        "final_state": [[_num(a.real), _num(a.imag)] for a in r.final_state.amplitudes],
        "raw_prob": _num(r.raw_prob),
        "cooked_prob": _num(r.cooked_prob),
    } for r in records]
    results: dict[str, Any] = {
        "branches": branches,
        "joint": _joint_rows(dist),
        "left_marginal": _marginal(dist.left_marginal()),
        "right_marginal": _marginal(dist.right_marginal()),
    }
    if right is Setting.MEASURE:
        rm = dist.right_marginal()
        results["left_given_right"] = {
            f"{l.value}|{r.value}": _num(dist[(l, r)] / rm[r])
            for r in (Outcome.UP, Outcome.DOWN) if rm.get(r, 0.0) > 0
            for l in (Outcome.UP, Outcome.DOWN)}
    inputs = {"formulation": formulation.value, "right": right.value, "frame": frame.value}
    return _document("enumerate", inputs, results), EXIT_OK


def cmd_compare(right: Setting, frame: FrameOrder) -> tuple[dict, int]:
    dists = {f: _exhaustive_joint(joint_distribution(enumerate_branches(Scenario(right, frame, f))), right)
             for f in Formulation}
    diff = dists[Formulation.NONLINEAR].max_abs_diff(dists[Formulation.LINEAR_COOKING])
    results = {
        "joint": {f.value: _joint_rows(d) for f, d in dists.items()},
        "max_abs_diff": _num(diff),
        "equivalent": diff <= COMPARE_TOL,
    }
    code = EXIT_OK if diff <= COMPARE_TOL else EXIT_FAIL
    return _document("compare", {"right": right.value, "frame": frame.value}, results), code


def _deviation(d: Deviation) -> dict:
    return {"value": _num(d.value), "witness": _witness(d)}


def _witness(d: Deviation) -> dict | None:
    if d.witness is None:
        return None
    w = d.witness.to_dict()
    w["values"] = [_num(v) for v in w["values"]]
    return w


def _report(r: AnalysisReport) -> dict:
    nc = r.no_conspiracy
    return {
        "formulation": r.formulation.value,
        "beables": r.beables.value,
        "pi": _deviation(r.pi),
        "oi": _deviation(r.oi),
        "factorizability": _deviation(r.factorizability),
        "no_conspiracy": {
            "value": _num(nc.deviation),
            "common_tv": _num(nc.common_tv),
            "reweighting": {s.value: _num(v) for s, v in nc.reweighting.items()},
            "support_restricted": nc.support_restricted,
            "flagged": nc.flagged,
        },
        "deterministic": r.deterministic,
        "classification": r.classification.value if r.classification else None,
        "verdict": r.verdict,
        "note": r.note,
    }


def cmd_analyze(formulations: Sequence[Formulation], beables: Sequence[BeableAssignment],
                frame: FrameOrder) -> tuple[dict, int]:
    cells = [_report(analyze(f, b, frame)) for b in beables for f in formulations]
    inputs = {"formulation": [f.value for f in formulations],
              "beables": [b.value for b in beables], "frame": frame.value}
    return _document("analyze", inputs, {"cells": cells}), EXIT_OK


def cmd_sample(formulation: Formulation, right: Setting, frame: FrameOrder,
               seed: int, trials: int, workers: int = 1) -> tuple[dict, int]:
    scenario = Scenario(right, frame, formulation)
    exact = _exhaustive_joint(joint_distribution(enumerate_branches(scenario)), right)
    counts = sample_counts(scenario, seed, trials, workers)
    rows = []
    for pair in exact.keys():
        p, c = exact[pair], counts.get(pair, 0)
        sd = math.sqrt(trials * p * (1.0 - p))
        if sd > 0:
            z = (c - trials * p) / sd
        else:
            # p is 0 or 1: any deviation at all is infinitely surprising
            z = 0.0 if abs(c - trials * p) < 0.5 else math.inf
        rows.append({"left": pair[0].value, "right": pair[1].value, "count": c,
                     "frequency": _num(c / trials), "expected": _num(p), "z": _num(z)})
    max_z = max(abs(r["z"]) for r in rows)
    results = {"rows": rows, "max_abs_z": max_z if math.isinf(max_z) else _num(max_z),
               "z_limit": Z_LIMIT, "passed": max_z <= Z_LIMIT}
    inputs = {"formulation": formulation.value, "right": right.value, "frame": frame.value,
              "seed": seed, "trials": trials}
    return _document("sample", inputs, results), EXIT_OK if max_z <= Z_LIMIT else EXIT_FAIL


def to_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _fmt(x: Any) -> str:
    return f"{x:.6f}" if isinstance(x, float) else str(x)


def _table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def to_table(doc: dict) -> str:
    res, cmd = doc["results"], doc["command"]
    inputs = " ".join(f"{k}={v}" for k, v in sorted(doc["inputs"].items()))
    out = [f"# {cmd}  {inputs}", ""]
    if cmd == "enumerate":
        out.append(_table(
            ["coins", "outcomes", "raw", "cooked"],
            [[",".join(f"{c}_{w}" for w, c in b["coins"].items()),
              ",".join(f"{o}_{w}" for w, o in b["outcomes"].items()),
              float(b["raw_prob"]), float(b["cooked_prob"])] for b in res["branches"]]))
        out += ["", _table(["left", "right", "P"],
                           [[r["left"], r["right"], float(r["prob"])] for r in res["joint"]])]
        out += ["", "left marginal: " + ", ".join(
            f"P({o}_L)={float(p):.6f}" for o, p in res["left_marginal"].items())]
        for key, p in res.get("left_given_right", {}).items():
            l, r = key.split("|")
            out.append(f"P({l}_L|{r}_R)={float(p):.6f}")
    elif cmd == "compare":
        rows = []
        for nl, ck in zip(res["joint"]["nonlinear"], res["joint"]["cooking"]):
            rows.append([nl["left"], nl["right"], float(nl["prob"]), float(ck["prob"])])
        out.append(_table(["left", "right", "nonlinear", "cooking"], rows))
        out += ["", f"max abs diff: {float(res['max_abs_diff']):.6f}"]
    elif cmd == "analyze":
        out.append(_table(
            ["formulation", "beables", "PI", "OI", "factor.", "conspiracy", "classification"],
            [[c["formulation"], c["beables"], float(c["pi"]["value"]), float(c["oi"]["value"]),
              float(c["factorizability"]["value"]), float(c["no_conspiracy"]["value"]),
              c["classification"] or f"- ({c['verdict']})"] for c in res["cells"]]))
        for c in res["cells"]:
            w = c["pi"]["witness"]
            if w:
                out.append(f"PI witness {c['formulation']}/{c['beables']}: lambda={w['lambdas'][0]} "
                           f"P(up_L|measure)={float(w['values'][0]):.6f} "
                           f"P(up_L|none)={float(w['values'][1]):.6f}")
    elif cmd == "sample":
        out.append(_table(["left", "right", "count", "freq", "expected", "z"],
                          [[r["left"], r["right"], r["count"], float(r["frequency"]),
                            float(r["expected"]), float(r["z"])] for r in res["rows"]]))
        out += ["", f"max |z| = {float(res['max_abs_z']):.6f} (limit {res['z_limit']})"]
    return "\n".join(out) + "\n"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grwlocality",
                                     description="Toy GRW collapse models in the EPR-Bell setup.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--frame", choices=list(_FRAMES), default="right-first")
    common.add_argument("--format", choices=["table", "json"], default="table")
    common.add_argument("--out", type=Path, help="also write the output to this file")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="list every coin-flip branch")
    p.add_argument("--formulation", choices=list(_FORMULATIONS), default="nonlinear")
    p.add_argument("--right", choices=list(_SETTINGS), default="measure")

    p = sub.add_parser("compare", parents=[common], help="compare both formulations")
    p.add_argument("--right", choices=list(_SETTINGS), default="measure")

    p = sub.add_parser("analyze", parents=[common], help="PI / OI / factorizability analysis")
    p.add_argument("--formulation", choices=[*_FORMULATIONS, "all"], default="all")
    p.add_argument("--beables", choices=[*_BEABLES, "all"], default="all")
    p.add_argument("--all", action="store_true", help="full formulation x beables matrix")

    p = sub.add_parser("sample", parents=[common], help="seeded Monte Carlo cross-check")
    p.add_argument("--formulation", choices=list(_FORMULATIONS), default="nonlinear")
    p.add_argument("--right", choices=list(_SETTINGS), default="measure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--workers", type=_positive_int, default=1)
    return parser


def run(args: argparse.Namespace) -> tuple[dict, int]:
    frame = _FRAMES[args.frame]
    if args.command == "enumerate":
        return cmd_enumerate(_FORMULATIONS[args.formulation], _SETTINGS[args.right], frame)
    if args.command == "compare":
        return cmd_compare(_SETTINGS[args.right], frame)
    if args.command == "analyze":
        forms = list(Formulation) if args.all or args.formulation == "all" else [_FORMULATIONS[args.formulation]]
        beables = list(BeableAssignment) if args.all or args.beables == "all" else [_BEABLES[args.beables]]
        return cmd_analyze(forms, beables, frame)
    return cmd_sample(_FORMULATIONS[args.formulation], _SETTINGS[args.right], frame,
                      args.seed, args.trials, args.workers)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc, code = run(args)
    except GRWLocalityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = to_json(doc) if args.format == "json" else to_table(doc)
    sys.stdout.write(text)
    if args.out is not None:
        args.out.write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
