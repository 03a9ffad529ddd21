"""Expert controllers, their tuning protocols, and expert-side perturbations."""

from __future__ import annotations

from .controllers import CPG, LoopSpec, PIDLoops, RandomExpert, bias_action, draw_action_bias, undertune
from .gainfile import GainFile, find_gain_file, load_expert, load_gain_file, save_gain_file
from .relay import (
    DelayedIntegratorPlant,
    FOPDTPlant,
    RelayError,
    RelayMeasurement,
    RelaySettings,
    TuningRule,
    fopdt_ultimate,
    relay_autotune,
    relay_experiment,
)

__all__ = [
    "CPG",
    "DelayedIntegratorPlant",
    "FOPDTPlant",
    "GainFile",
    "LoopSpec",
    "PIDLoops",
    "RandomExpert",
    "RelayError",
    "RelayMeasurement",
    "RelaySettings",
    "TuningRule",
    "bias_action",
    "draw_action_bias",
    "find_gain_file",
    "fopdt_ultimate",
    "load_expert",
    "load_gain_file",
    "relay_autotune",
    "relay_experiment",
    "save_gain_file",
    "undertune",
]
