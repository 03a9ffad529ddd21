"""Per-seed training traces and the gate-statistics accumulator."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class GateWindow:
    """Action-source counts and gate extremes over one block of training steps."""

    start: int
    n: int = 0
    n_policy: int = 0
    n_expert: int = 0
    p_max: float | None = None
    p_min: float | None = None
    delta_max: float | None = None


class GateStats:
    """Streams per-step (p, b, delta) into fixed windows, a histogram and a decimated log."""

    def __init__(self, window: int, bins: int = 20, decimation: int = 100):
        self.window = int(window)
        self.edges = np.linspace(0.0, 1.0, int(bins) + 1)
        self.hist = np.zeros(int(bins), dtype=np.int64)
        self.decimation = int(decimation)
        self.windows: list[GateWindow] = []
        self.log: list[list] = []
        self.p_min_seen = math.inf

    def record(self, step: int, used_expert: bool, p: float | None, delta: float | None) -> None:
        w_start = (step // self.window) * self.window
        if not self.windows or self.windows[-1].start != w_start:
            self.windows.append(GateWindow(w_start))
        w = self.windows[-1]
        w.n += 1
        if used_expert:
            w.n_expert += 1
        else:
            w.n_policy += 1
        if p is not None:
            w.p_max = p if w.p_max is None else max(w.p_max, p)
            w.p_min = p if w.p_min is None else min(w.p_min, p)
            k = min(int(p * self.hist.size), self.hist.size - 1)
            self.hist[k] += 1
        if delta is not None:
            w.delta_max = delta if w.delta_max is None else max(w.delta_max, delta)
        if self.decimation > 0 and step % self.decimation == 0:
            self.log.append([int(step), None if p is None else float(p), bool(used_expert),
                             None if delta is None else float(delta)])

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "windows": [asdict(w) for w in self.windows],
            "p_hist_edges": self.edges.tolist(),
            "p_hist_counts": self.hist.tolist(),
            "decimation": self.decimation,
            "log": self.log,
        }


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    cell_hash: str
    seed: int
    env_id: str
    method: str
    perturbation: str
    eval_steps: list = field(default_factory=list)
    eval_returns: list = field(default_factory=list)
    eval_mean: list = field(default_factory=list)
    final_window_scalar: float | None = None
    final_window_steps: list = field(default_factory=list)
    gate: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    train_episode_returns: list = field(default_factory=list)
    j_exp_unperturbed: float | None = None
    j_ref: float | None = None
    expert_eval_returns: list | None = None
    n_prefill: int = 0
    n_updates: int = 0
    status: str = "ok"
    error: str | None = None
    wall_clock_s: float = 0.0
    rng: dict = field(default_factory=dict)
    version: int = 1

    def append_eval(self, step: int, returns) -> None:
        self.eval_steps.append(int(step))
        self.eval_returns.append([float(r) for r in returns])
        self.eval_mean.append(float(np.mean(returns)))

    def finalize(self, total_steps: int, fraction: float) -> None:
        """Final-window scalar: mean evaluation return over the trailing ``fraction`` of training."""
        if not self.eval_steps:
            return
        start = (1.0 - fraction) * total_steps
        idx = [i for i, s in enumerate(self.eval_steps) if s >= start] or [len(self.eval_steps) - 1]
        self.final_window_steps = [self.eval_steps[i] for i in idx]
        self.final_window_scalar = float(np.mean([self.eval_mean[i] for i in idx]))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.dumps() + "\n")
        return p

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def comparable(self) -> dict:
        """Everything except wall-clock: two runs of one config must agree on this."""
        d = self.to_dict()
        d.pop("wall_clock_s")
        return d
