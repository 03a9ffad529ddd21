"""Versioned JSON gain files: tuned controller parameters plus tuning provenance."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .controllers import CPG, LoopSpec, PIDLoops

GAIN_FILE_VERSION = "1.0"


@dataclass
class GainFile:
    task: str
    kind: str
    loops: list[LoopSpec] = field(default_factory=list)
    cpg_params: list[float] | None = None
    action_dim: int = 0
    dt: float = 1.0
    tuning: dict[str, Any] = field(default_factory=dict)
    j_exp: float | None = None
    j_exp_seeds: int = 0
    version: str = GAIN_FILE_VERSION

    def controller(self):
        if self.kind == "pid_loops":
            return PIDLoops(self.loops, self.action_dim, self.dt)
        if self.kind == "cpg":
            return CPG.from_params(self.cpg_params, self.dt)
        raise ValueError(f"unknown controller kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "task": self.task,
            "kind": self.kind,
            "action_dim": self.action_dim,
            "dt": self.dt,
            "loops": [lp.to_dict() for lp in self.loops],
            "cpg_params": self.cpg_params,
            "tuning": self.tuning,
            "j_exp": self.j_exp,
            "j_exp_seeds": self.j_exp_seeds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainFile":
        return cls(
            task=d["task"],
            kind=d["kind"],
            loops=[LoopSpec.from_dict(x) for x in d.get("loops", [])],
            cpg_params=d.get("cpg_params"),
            action_dim=int(d["action_dim"]),
            dt=float(d["dt"]),
            tuning=d.get("tuning", {}),
            j_exp=d.get("j_exp"),
            j_exp_seeds=int(d.get("j_exp_seeds", 0)),
            version=d.get("version", GAIN_FILE_VERSION),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "GainFile":
        return cls.from_dict(json.loads(text))


def save_gain_file(gf: GainFile, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(gf.dumps() + "\n")
    return path


def load_gain_file(path) -> GainFile:
    return GainFile.loads(Path(path).read_text())


def find_gain_file(task: str, gains_dir=None) -> Path | None:
    """``<gains_dir>/<task>.json`` if given, else the copy shipped with the package."""
    if gains_dir is not None:
        p = Path(gains_dir) / f"{task}.json"
        return p if p.exists() else None
    res = resources.files("edgebench.gains").joinpath(f"{task}.json")
    if res.is_file():
        return Path(str(res))
    return None


def load_expert(task: str, gains_dir=None):
    """Controller and gain file for ``task``; raises FileNotFoundError when untuned."""
    path = find_gain_file(task, gains_dir)
    if path is None:
        raise FileNotFoundError(f"no gain file for task {task!r}; run `edgebench tune-expert {task}`")
    gf = load_gain_file(path)
    return gf.controller(), gf
