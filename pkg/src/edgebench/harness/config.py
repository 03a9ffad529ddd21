"""Run configuration: a JSON-round-trippable value with a stable content hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

PERTURBATIONS = ("none", "undertune", "action_bias", "obs_noise")
# budget the expert-prefill size is quoted against
REFERENCE_BUDGET = 1_000_000
EXPERT_PREFILL_STEPS = 100_000


@dataclass(frozen=True)
class Perturbation:
    type: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.type not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation {self.type!r}; expected one of {PERTURBATIONS}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")

    @property
    def label(self) -> str:
        return "none" if self.type == "none" else f"{self.type}@{self.sigma:g}"


@dataclass(frozen=True)
class RunConfig:
    env_id: str = "fourtank"
    method: str = "edge"
    seeds: tuple[int, ...] = (0,)
    total_steps: int = 50_000
    eval_interval: int = 2_500
    eval_episodes: int = 5
    final_window_fraction: float = 0.2
    learning_starts: int = 1_000
    buffer_capacity: int = 1_000_000
    # gate settings; None falls back to the per-task tuned defaults
    kappa: float | None = None
    tau: float | None = None
    scoring: str = "lcb"
    method_knobs: dict = field(default_factory=dict)
    sac: dict = field(default_factory=dict)
    perturbation: Perturbation = field(default_factory=Perturbation)
    gate_window: int = 1_000
    gate_log_decimation: int = 100
    gate_hist_bins: int = 20
    crossing_fractions: tuple[float, ...] = (0.5, 0.75, 1.0)
    gains_dir: str | None = None

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.eval_interval <= 0:
            raise ValueError("eval_interval must be > 0")
        if not 0 < self.final_window_fraction <= 1:
            raise ValueError("final_window_fraction must be in (0, 1]")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "crossing_fractions", tuple(float(c) for c in self.crossing_fractions))

    @property
    def expert_prefill_steps(self) -> int:
        """Expert-prefill size scaled from the reference budget to this run's budget."""
        return int(round(EXPERT_PREFILL_STEPS * self.total_steps / REFERENCE_BUDGET))

    def with_seeds(self, seeds) -> "RunConfig":
        return replace(self, seeds=tuple(seeds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["crossing_fractions"] = list(self.crossing_fractions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "perturbation" in d and not isinstance(d["perturbation"], Perturbation):
            d["perturbation"] = Perturbation(**d["perturbation"])
        for k in ("seeds", "crossing_fractions"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> Path:
        p = Path(path)
        p.write_text(self.dumps() + "\n")
        return p

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text())

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def cell_hash(self) -> str:
        """Hash of everything except the seed list: records sharing it are one cell."""
        d = self.to_dict()
        d.pop("seeds")
        return config_hash(d)


def config_hash(d: dict) -> str:
    text = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
