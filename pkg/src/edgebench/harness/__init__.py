"""Run configuration, training loop, sweeps, reports and the CLI."""

from __future__ import annotations

from .config import PERTURBATIONS, Perturbation, RunConfig, config_hash
from .records import GateStats, GateWindow, RunRecord
from .report import check_consistent, first_permanent_crossing, format_table, report, summarize, write_csv
from .sweep import SweepGrid, SweepResult, sweep
from .train import Trainer, eval_seeds, expert_episode, train_all, train_run

__all__ = [
    "PERTURBATIONS", "GateStats", "GateWindow", "Perturbation", "RunConfig", "RunRecord", "SweepGrid",
    "SweepResult", "Trainer", "check_consistent", "config_hash", "eval_seeds", "expert_episode",
    "first_permanent_crossing", "format_table", "report", "summarize", "sweep", "train_all", "train_run",
    "write_csv",
]
