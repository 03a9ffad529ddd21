"""Shared environment plumbing: state/spec containers, constants loading, RK4."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Any, Callable

import numpy as np


class EnvError(RuntimeError):
    """Raised on invalid environment usage (e.g. stepping a finished episode)."""


@dataclass
class EnvState:
    env_id: str
    observation: np.ndarray
    internal: np.ndarray
    params: dict[str, Any]
    step_index: int = 0
    done: bool = False

    def copy(self) -> "EnvState":
        return replace(
            self,
            observation=self.observation.copy(),
            internal=self.internal.copy(),
            params=dict(self.params),
        )


@dataclass(frozen=True)
class EnvSpec:
    env_id: str
    action_dim: int
    obs_dim: int
    horizon: int
    reward_ceiling_per_step: float
    terminating: bool
    dt: float
    j_exp: float | None = None

    @property
    def j_ref(self) -> float:
        return self.reward_ceiling_per_step * self.horizon


@lru_cache(maxsize=1)
def load_constants() -> dict[str, Any]:
    text = resources.files("edgebench.envs").joinpath("constants.json").read_text()
    return json.loads(text)


def rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float, n: int) -> np.ndarray:
    for _ in range(n):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def seeded_rng(seed: int) -> np.random.Generator:
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    return np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 64) - 1)))


def tracking_factor(error, scale: float):
    return np.exp(-np.abs(error) / scale)


class Env:
    """Base class; subclasses implement ``_initial``, ``_advance``, ``_observe`` and ``_reward``."""

    env_id: str = ""
    spec: EnvSpec

    def __init__(self, constants: dict[str, Any] | None = None):
        self.c = dict(constants if constants is not None else load_constants()[self.env_id])

    def reset(self, seed: int, options: dict[str, Any] | None = None) -> EnvState:
        rng = seeded_rng(seed)
        internal, params = self._initial(rng, options or {})
        obs = self._observe(internal, params)
        return EnvState(self.env_id, obs, internal, params, 0, False)

    def step(self, state: EnvState, action) -> tuple[EnvState, float]:
        if state.done:
            raise EnvError(f"{self.env_id}: step() called on a finished episode")
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(self.spec.action_dim), -1.0, 1.0)
        if not np.all(np.isfinite(a)):
            raise EnvError(f"{self.env_id}: non-finite action {a}")
        internal, crashed = self._advance(state.internal, a, state.params)
        k = state.step_index + 1
        reward = 0.0 if crashed else float(self._reward(internal, state.params))
        done = crashed or k >= self.spec.horizon
        obs = self._observe(internal, state.params)
        return EnvState(self.env_id, obs, internal, dict(state.params), k, done), reward

    # subclass hooks
    def _initial(self, rng, options):  # pragma: no cover - abstract
        raise NotImplementedError

    def _advance(self, x, a, params) -> tuple[np.ndarray, bool]:  # pragma: no cover
        raise NotImplementedError

    def _observe(self, x, params) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def _reward(self, x, params) -> float:  # pragma: no cover
        raise NotImplementedError


def perturb_observation(obs, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add per-component N(0, sigma^2) noise; ``sigma == 0`` returns the input untouched."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    obs = np.asarray(obs, dtype=np.float64)
    if sigma == 0:
        return obs
    return obs + sigma * rng.standard_normal(obs.shape)


__all__ = [
    "Env",
    "EnvError",
    "EnvSpec",
    "EnvState",
    "load_constants",
    "perturb_observation",
    "rk4",
    "seeded_rng",
    "tracking_factor",
]
