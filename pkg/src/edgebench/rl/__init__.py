"""Numpy SAC backbone: replay, normalisation, ensemble critics, squashed-Gaussian actor."""

from __future__ import annotations

from .buffer import Batch, ReplayBuffer
from .nets import Adam, StackedMLP
from .norm import IdentityNorm, RunningNorm
from .sac import NonFiniteLoss, SACAgent, SACConfig, augment, sigmoid

__all__ = [
    "Adam",
    "Batch",
    "IdentityNorm",
    "NonFiniteLoss",
    "ReplayBuffer",
    "RunningNorm",
    "SACAgent",
    "SACConfig",
    "StackedMLP",
    "augment",
    "sigmoid",
]
