"""Command-line entry point: ``invplace <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import NetworkInstance, StarNetwork, expand_star, rng_stream
from .data import default_synth_spec, ingest, parse_orders, synth_generate
from .demand import scenarios_from_csv, scenarios_to_csv, sequences_to_csv
from .harness import (
    DOMINANCE,
    LOAD_FACTORS,
    PLACEMENTS,
    POLICIES,
    R_VALUES,
    evaluate_cell,
    gap_decay_study,
    manifest_json,
    oracle_dominates,
    q_for_load_factor,
    random_star_model,
    run_grid,
)
from .placement import PROCEDURES, place
from .verify import rounding_report


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_records(args):
    if getattr(args, "synthetic_seed", None) is not None:
        return parse_orders(synth_generate(default_synth_spec(args.synthetic_seed)))
    if not args.input:
        raise SystemExit("either --input or --synthetic-seed is required")
    with open(args.input, newline="") as fh:
        return parse_orders(fh, skip_bad=getattr(args, "skip_bad", False))


def _filters(args) -> dict:
    return {"mean_lo": args.mean_lo, "mean_hi": args.mean_hi, "cv_max": args.cv_max}


def cmd_verify(args) -> int:
    report = rounding_report(args.seed, n_vectors=args.vectors, trials=args.trials)
    _emit(report, args.out)
    return 0 if report["passed"] else 1


def cmd_place(args) -> int:
    inst = NetworkInstance.from_json(Path(args.instance).read_text())
    seq_text = Path(args.sequences).read_text() if args.sequences else None
    S = scenarios_from_csv(Path(args.scenarios).read_text(), inst.m, seq_text)
    report = place(args.procedure, inst, S, args.q, seed=args.seed, prefer=args.prefer)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_ingest(args) -> int:
    records = _load_records(args)
    regions = ingest(records, args.region or None, **_filters(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for reg in regions:
        stem = out / f"region_{reg.region_id}"
        for name, S in (("train", reg.train), ("test", reg.test)):
            Path(f"{stem}_{name}.csv").write_text(scenarios_to_csv(S))
            Path(f"{stem}_{name}_sequences.csv").write_text(sequences_to_csv(S))
        Path(f"{stem}_network.json").write_text(StarNetwork(reg.n_fdc, 0.5).to_json() + "\n")
        summary.append({"region": reg.region_id, "n_fdc": reg.n_fdc, "skus": list(reg.skus),
                        "K_train": reg.train.K, "K_test": reg.test.K,
                        "mean_weekly_demand": reg.mean_weekly_demand})
    _emit({"regions": summary}, None)
    return 0


def cmd_evaluate(args) -> int:
    regions = {r.region_id: r for r in ingest(_load_records(args), **_filters(args))}
    if args.region not in regions:
        raise SystemExit(f"region {args.region} not found after filtering")
    reg = regions[args.region]
    Q = args.q if args.q else q_for_load_factor(reg.mean_weekly_demand, args.load_factor)
    before = DOMINANCE.violations
    rows = evaluate_cell(reg.region_id, reg.n_fdc, reg.train, reg.test, args.r, Q,
                         args.placement, args.policy, args.seed, (0,))
    out = [{"placement": pl, "policy": po, "ratio": ratio, "x": x.x.tolist()} for pl, po, ratio, x in rows]
    _emit({"region": reg.region_id, "r": args.r, "Q": Q, "cells": out}, args.out)
    return 1 if DOMINANCE.violations > before else 0


def cmd_experiment(args) -> int:
    regions = ingest(_load_records(args), **_filters(args))
    res = run_grid(regions, args.r, args.load_factors, args.placements, args.policies, args.seed)
    Path(args.out_csv).write_text(res.csv_text) if args.out_csv else sys.stdout.write(res.csv_text)
    if args.manifest:
        Path(args.manifest).write_text(manifest_json(res) + "\n")
    bad = (res.manifest["dominance_violations"] or res.manifest["ratio_violations"]
           or oracle_dominates(res))
    return 1 if bad else 0


def cmd_gap_study(args) -> int:
    inst = expand_star(StarNetwork(args.n_fdc, args.r), args.q)
    model = random_star_model(args.n_fdc, args.q, rng_stream(args.seed, 99))
    g = gap_decay_study(inst, model, args.k, args.holdout, args.seed, args.resamples)
    rows = [{"K": k, "mean_gap": m, "stderr": s, "mean_abs_gap": a}
            for k, m, s, a in zip(g.K_values, g.mean_gap, g.stderr, g.abs_gap)]
    _emit({"seed": args.seed, "rows": rows, "exponent": g.exponent}, args.out)
    return 0


def cmd_gallery(args) -> int:
    from .gallery import build_greedy_grid, build_tight, greedy_gap, tight_gap, tight_ratio_closed_form

    if args.family == "tight":
        fam = build_tight(args.n, args.d)
        gap = tight_gap(args.n, args.d)
        closed = float(tight_ratio_closed_form(args.n, args.d))
        ok = abs(gap.ratio - closed) <= 1e-12
        report = {"n": args.n, "d": args.d, "integer_opt": gap.integer_opt, "fractional_opt": gap.fractional_opt,
                  "ratio": gap.ratio, "closed_form": closed, "brute_force": gap.brute_force, "passed": ok}
        inst = fam.inst
    else:
        g = build_greedy_grid(args.q)
        gap = greedy_gap(args.q)
        target = 1 - (1 - 1 / args.q) ** args.q
        ok = abs(gap.ratio - target) <= 1e-9
        report = {"Q": args.q, "greedy_value": gap.greedy_value, "optimal_value": gap.optimal_value,
                  "ratio": gap.ratio, "target_ratio": target, "greedy_trace": list(gap.trace), "passed": ok}
        inst = g.inst
    _emit({"instance": inst.to_dict(), "report": report}, args.out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invplace", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", help="rounding property checks as a JSON report")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--vectors", type=int, default=50)
    v.add_argument("--trials", type=int, default=100_000)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("place", help="run one placement procedure")
    pl.add_argument("--procedure", choices=PROCEDURES, required=True)
    pl.add_argument("--instance", required=True)
    pl.add_argument("--scenarios", required=True)
    pl.add_argument("--sequences")
    pl.add_argument("--q", type=int, required=True)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--prefer", choices=("rdc", "fdc"), default="rdc")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_place)

    def data_args(a):
        a.add_argument("--input")
        a.add_argument("--synthetic-seed", type=int)
        a.add_argument("--skip-bad", action="store_true")
        a.add_argument("--mean-lo", type=float, default=20.0)
        a.add_argument("--mean-hi", type=float, default=40.0)
        a.add_argument("--cv-max", type=float, default=0.5)

    ing = sub.add_parser("ingest", help="pool SKUs and write train/test scenario CSVs")
    data_args(ing)
    ing.add_argument("--region", type=int, action="append")
    ing.add_argument("--out-dir", required=True)
    ing.set_defaults(func=cmd_ingest)

    ev = sub.add_parser("evaluate", help="one (region, r, load factor) cell")
    data_args(ev)
    ev.add_argument("--region", type=int, required=True)
    ev.add_argument("--r", type=float, required=True)
    ev.add_argument("--load-factor", type=float, default=1.0)
    ev.add_argument("--q", type=int)
    ev.add_argument("--placement", nargs="+", choices=PLACEMENTS, default=list(PLACEMENTS))
    ev.add_argument("--policy", nargs="+", choices=POLICIES, default=list(POLICIES))
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("experiment", help="full placement x fulfillment grid")
    data_args(ex)
    ex.add_argument("--r", type=float, nargs="+", default=list(R_VALUES))
    ex.add_argument("--load-factors", type=float, nargs="+", default=list(LOAD_FACTORS))
    ex.add_argument("--placements", nargs="+", choices=PLACEMENTS, default=list(PLACEMENTS))
    ex.add_argument("--policies", nargs="+", choices=POLICIES, default=list(POLICIES))
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--out-csv")
    ex.add_argument("--manifest")
    ex.set_defaults(func=cmd_experiment)

    gs = sub.add_parser("gap-study", help="in-sample vs holdout gap of the sample-average placement")
    gs.add_argument("--n-fdc", type=int, default=4)
    gs.add_argument("--q", type=int, default=20)
    gs.add_argument("--r", type=float, default=0.5)
    gs.add_argument("--k", type=int, nargs="+", default=[5, 20, 80])
    gs.add_argument("--resamples", type=int, default=20)
    gs.add_argument("--holdout", type=int, default=100_000)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--out")
    gs.set_defaults(func=cmd_gap_study)

    ga = sub.add_parser("gallery", help="worst-case instance families")
    ga.add_argument("--family", choices=("tight", "greedy-grid"), required=True)
    ga.add_argument("--n", type=int, default=4)
    ga.add_argument("--d", type=int, default=2)
    ga.add_argument("--q", type=int, default=3)
    ga.add_argument("--out")
    ga.set_defaults(func=cmd_gallery)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
