"""Command-line entry point: tune-expert, train, sweep, ablate, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..integration import METHOD_IDS, VARIANT_IDS
from .config import RunConfig
from .records import RunRecord
from .report import report, summarize
from .sweep import SweepGrid, record_filename, sweep
from .train import train_all

log = logging.getLogger("edgebench")


def _tune_expert(args) -> int:
    from ..experts import save_gain_file
    from ..experts.tune import tune_task

    gf = tune_task(args.env, n_operating_points=args.n_points, j_exp_seeds=args.j_exp_seeds)
    path = save_gain_file(gf, Path(args.out) / f"{args.env}.json")
    print(f"{args.env}: J_exp = {gf.j_exp:.2f} over {gf.j_exp_seeds} seeds -> {path}")
    return 0


def _train(args) -> int:
    cfg = RunConfig.load(args.config)
    out = Path(args.out)
    for rec in train_all(cfg):
        path = rec.save(out / record_filename(rec))
        print(f"seed {rec.seed}: status={rec.status} final={rec.final_window_scalar} -> {path}")
    return 0


def _sweep(args) -> int:
    d = json.loads(Path(args.config).read_text())
    base = RunConfig.from_dict(d["base"])
    grid = SweepGrid.from_dict(d.get("grid", {}))
    res = sweep(base, grid, workers=args.workers, out_dir=args.out)
    print(f"{len(res.records)} records, {len(res.errors)} errors -> {args.out}")
    return 0 if not res.errors else 1


def _ablate(args) -> int:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    cfg = replace(
        base, env_id=args.env, method=args.variant,
        total_steps=args.steps if args.steps is not None else base.total_steps,
        seeds=tuple(args.seeds) if args.seeds else base.seeds,
    )
    records = train_all(cfg)
    summary = summarize(records, reference=args.variant) if all(r.status == "ok" for r in records) else []
    out = Path(args.out) / f"{args.env}__{args.variant}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "env_id": args.env, "variant": args.variant, "config": cfg.to_dict(), "config_hash": cfg.hash(),
        "summary": summary, "records": [r.to_dict() for r in records],
    }
    out.write_text(json.dumps(payload, indent=1) + "\n")
    print(f"{args.env}/{args.variant}: final-window scalars "
          f"{[round(r.final_window_scalar, 2) for r in records if r.final_window_scalar is not None]} -> {out}")
    return 0


def _report(args) -> int:
    records = []
    for p in args.records:
        path = Path(p)
        files = sorted(path.glob("*.json")) if path.is_dir() else [path]
        for f in files:
            d = json.loads(f.read_text())
            if isinstance(d, dict) and "records" in d:
                records.extend(RunRecord.from_dict(r) for r in d["records"])
            elif isinstance(d, dict) and "config_hash" in d and "eval_steps" in d:
                records.append(RunRecord.from_dict(d))
    _, text = report(records, csv_path=args.csv, reference=args.reference)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgebench", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("tune-expert", help="relay-tune the PID expert for one task and write its gain file")
    p.add_argument("env", choices=["fourtank", "plane3dcircle", "glassfurnace"])
    p.add_argument("--out", default="gains")
    p.add_argument("--n-points", type=int, default=8)
    p.add_argument("--j-exp-seeds", type=int, default=16)
    p.set_defaults(func=_tune_expert)

    p = sub.add_parser("train", help="train every seed of a run config")
    p.add_argument("config")
    p.add_argument("--out", default="runs")
    p.set_defaults(func=_train)

    p = sub.add_parser("sweep", help="run a {base, grid} sweep file")
    p.add_argument("config")
    p.add_argument("--out", default="runs")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_sweep)

    p = sub.add_parser("ablate", help="run one ablation variant on one env")
    p.add_argument("env")
    p.add_argument("variant", choices=VARIANT_IDS + METHOD_IDS)
    p.add_argument("--config", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seeds", type=int, nargs="*", default=None)
    p.add_argument("--out", default="ablation_results")
    p.set_defaults(func=_ablate)

    p = sub.add_parser("report", help="tabulate record files or directories")
    p.add_argument("records", nargs="+")
    p.add_argument("--csv", default=None)
    p.add_argument("--reference", default="edge")
    p.set_defaults(func=_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
