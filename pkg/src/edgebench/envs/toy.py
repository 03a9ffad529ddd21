"""One-dimensional integrator with a truncated quadratic reward (learning smoke test)."""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec

DEFAULTS = {
    "horizon": 50,
    "gain": 0.2,
    "bound": 3.0,
    "initial_abs_range": [1.0, 2.0],
}


class Integrator1D(Env):
    env_id = "integrator"

    def __init__(self, constants=None):
        self.c = dict(DEFAULTS if constants is None else constants)
        self.spec = EnvSpec(
            env_id=self.env_id,
            action_dim=1,
            obs_dim=1,
            horizon=int(self.c["horizon"]),
            reward_ceiling_per_step=1.0,
            terminating=False,
            dt=1.0,
        )

    def _initial(self, rng, options):
        lo, hi = self.c["initial_abs_range"]
        x0 = float(rng.uniform(lo, hi)) * (1.0 if rng.random() < 0.5 else -1.0)
        x0 = float(options.get("x0", x0))
        return np.array([x0]), {}

    def _advance(self, x, a, params):
        b = self.c["bound"]
        return np.clip(x + self.c["gain"] * a, -b, b), False

    def _observe(self, x, params):
        return x.copy()

    def _reward(self, x, params):
        return max(0.0, 1.0 - float(x[0]) ** 2)
