"""Per-environment result tables: IQM, bootstrap CI, corrected rank-test p-values, ENA and crossings."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .. import stats
from .records import RunRecord

PROTOCOL_KEYS = ("total_steps", "eval_interval", "eval_episodes", "final_window_fraction")
COLUMNS = (
    "env_id", "method", "perturbation", "n_seeds", "iqm", "ci_lo", "ci_hi", "ena",
    "p_raw", "p_holm", "marker", "crossings",
)


def first_permanent_crossing(steps, values, threshold: float) -> tuple[int | None, bool]:
    """First evaluation step from which the curve never falls below ``threshold`` again.

    Returns ``(step, censored)``; a curve that ends below the threshold is
    censored at the budget and reports ``None``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or values[-1] < threshold:
        return None, True
    below = np.flatnonzero(values < threshold)
    k = 0 if below.size == 0 else int(below[-1]) + 1
    return int(steps[k]), False


def check_consistent(records: list[RunRecord]) -> None:
    """Reject record sets that mix protocols, configurations within a cell, or duplicate seeds."""
    if not records:
        raise ValueError("no records")
    proto = {tuple(r.config[k] for k in PROTOCOL_KEYS) for r in records}
    if len(proto) > 1:
        raise ValueError(f"records mix evaluation protocols: {sorted(proto)}")
    cells: dict[tuple, set] = defaultdict(set)
    seen: set = set()
    for r in records:
        key = (r.env_id, r.method, r.perturbation)
        cells[key].add(r.cell_hash)
        if (key, r.seed) in seen:
            raise ValueError(f"duplicate record for {key} seed {r.seed}")
        seen.add((key, r.seed))
    mixed = [k for k, v in cells.items() if len(v) > 1]
    if mixed:
        raise ValueError(f"records for {mixed} come from different configurations")
    by_env: dict[str, set] = defaultdict(set)
    for r in records:
        by_env[r.env_id].add(r.j_exp_unperturbed)
    for env, vals in by_env.items():
        if len(vals) > 1:
            raise ValueError(f"{env}: records disagree on the unperturbed expert return {sorted(map(str, vals))}")


def _group(records):
    groups: dict[tuple, list[RunRecord]] = defaultdict(list)
    for r in records:
        groups[(r.env_id, r.method, r.perturbation)].append(r)
    return groups


def summarize(records: list[RunRecord], reference: str = "edge", n_resamples: int = stats.BOOTSTRAP_RESAMPLES,
              seed: int = stats.BOOTSTRAP_SEED) -> list[dict]:
    """One row per (env, method, perturbation).

    Rank tests compare ``reference`` against every other method of the same
    env and perturbation; the Holm correction runs over that family.
    """
    records = [r for r in records if r.final_window_scalar is not None]
    check_consistent(records)
    rows = []
    groups = _group(records)
    for (env, method, pert), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r.seed)
        vals = np.array([r.final_window_scalar for r in recs])
        centre = stats.trimmed_mean(vals)
        if vals.size >= 4:
            lo, hi = stats.bootstrap_ci_iqm(vals, n_resamples, seed)
        elif np.all(vals == vals[0]):
            lo = hi = float(vals[0])
        else:
            lo = hi = math.nan
        j_exp, j_ref = recs[0].j_exp_unperturbed, recs[0].j_ref
        ena = stats.ena(centre, j_exp, j_ref).value if j_exp is not None and j_ref > j_exp else math.nan
        crossings = []
        for frac in recs[0].config.get("crossing_fractions", (0.5, 0.75, 1.0)):
            if j_exp is None:
                break
            thr = frac * j_exp
            hits = [first_permanent_crossing(r.eval_steps, r.eval_mean, thr) for r in recs]
            crossed = [s for s, c in hits if not c]
            crossings.append({
                "fraction": frac, "threshold": thr,
                "iqm_step": stats.trimmed_mean(crossed) if crossed else None,
                "n_crossed": len(crossed), "n_total": len(recs),
                "censored": len(crossed) < len(recs),
            })
        rows.append({
            "env_id": env, "method": method, "perturbation": pert, "n_seeds": int(vals.size),
            "iqm": centre, "ci_lo": lo, "ci_hi": hi, "ena": ena, "p_raw": math.nan, "p_holm": math.nan,
            "marker": "", "crossings": crossings, "_values": vals,
        })
    families: dict[tuple, list[dict]] = defaultdict(list)
    for row in rows:
        families[(row["env_id"], row["perturbation"])].append(row)
    for fam in families.values():
        ref = [r for r in fam if r["method"] == reference]
        others = [r for r in fam if r["method"] != reference]
        if not ref or not others:
            continue
        raw = [stats.mann_whitney_two_sided(ref[0]["_values"], r["_values"])[1] for r in others]
        for r, p, q in zip(others, raw, stats.holm_bonferroni(raw)):
            r["p_raw"], r["p_holm"], r["marker"] = float(p), float(q), stats.significance_marker(q)
    for row in rows:
        row.pop("_values")
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.4g}"
    return str(x)


def _crossing_text(cs) -> str:
    parts = []
    for c in cs:
        step = "-" if c["iqm_step"] is None else f"{c['iqm_step']:.0f}"
        parts.append(f"{c['fraction']:g}:{step}({c['n_crossed']}/{c['n_total']}){'+' if c['censored'] else ''}")
    return " ".join(parts)


def write_csv(rows: list[dict], path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_crossing_text(r[c]) if c == "crossings" else _fmt(r[c]) for c in COLUMNS])
    return p


def format_table(rows: list[dict]) -> str:
    lines = [f"{'env':<14} {'method':<22} {'perturbation':<16} {'n':>3} {'IQM':>10} {'95% CI':>22} "
             f"{'ENA':>8} {'p(Holm)':>9}  crossings"]
    for r in rows:
        ci = f"[{_fmt(r['ci_lo'])}, {_fmt(r['ci_hi'])}]"
        lines.append(
            f"{r['env_id']:<14} {r['method']:<22} {r['perturbation']:<16} {r['n_seeds']:>3} {_fmt(r['iqm']):>10} "
            f"{ci:>22} {_fmt(r['ena']):>8} {_fmt(r['p_holm']):>9}{r['marker']:<3} {_crossing_text(r['crossings'])}"
        )
    return "\n".join(lines)


def report(records: list[RunRecord], csv_path=None, reference: str = "edge") -> tuple[list[dict], str]:
    rows = summarize(records, reference)
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows, format_table(rows)
