"""Cross-product sweeps over methods, perturbation strengths and seeds."""

from __future__ import annotations

import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .config import Perturbation, RunConfig
from .records import RunRecord
from .train import train_run


@dataclass(frozen=True)
class SweepGrid:
    methods: tuple[str, ...] = ("edge",)
    perturbation_type: str = "none"
    sigmas: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SweepGrid":
        d = dict(d)
        for k in ("methods", "sigmas", "seeds"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)

    def cells(self, base: RunConfig) -> list[tuple[RunConfig, int]]:
        seeds = base.seeds if self.seeds is None else self.seeds
        out = []
        for method in self.methods:
            for sigma in self.sigmas:
                pert = Perturbation(self.perturbation_type, float(sigma))
                cfg = replace(base, method=method, perturbation=pert, seeds=tuple(seeds))
                out.extend((cfg, int(s)) for s in seeds)
        return out


@dataclass
class SweepResult:
    records: list[RunRecord] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def n_cells(self) -> int:
        return len(self.records) + len(self.errors)


def _run_cell(args):
    cfg, seed = args
    try:
        return train_run(cfg, seed), None
    except Exception as exc:  # one failing cell must not stop the sweep
        return None, {
            "method": cfg.method, "perturbation": asdict(cfg.perturbation), "seed": seed,
            "config_hash": cfg.hash(), "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
        }


def sweep(base: RunConfig, grid: SweepGrid, workers: int = 1, out_dir=None) -> SweepResult:
    """Run every (method, sigma, seed) cell; failures become error entries."""
    cells = grid.cells(base)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    res = SweepResult()
    for rec, err in results:
        if rec is not None:
            res.records.append(rec)
        else:
            res.errors.append(err)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rec in res.records:
            rec.save(out / record_filename(rec))
        if res.errors:
            (out / "errors.json").write_text(json.dumps(res.errors, indent=1) + "\n")
    return res


def record_filename(rec: RunRecord) -> str:
    pert = rec.perturbation.replace("@", "_")
    return f"{rec.env_id}__{rec.method}__{pert}__seed{rec.seed}.json"
