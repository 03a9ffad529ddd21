"""Quadruple-tank process (Johansson), non-minimum-phase valve setting.

Two pumps feed four tanks; pump 1 splits into tanks 1 and 4, pump 2 into
tanks 2 and 3; the upper tanks 3 and 4 drain into the lower tanks 1 and 2.
The lower two levels are tracked.

Observation: ``[h1, h2, h3, h4, r1, r2]`` in cm.
Action: pump voltages, ``v_i = (a_i + 1) / 2 * pump_max_v``.
"""

from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec, tracking_factor


class FourTank(Env):
    env_id = "fourtank"

    def __init__(self, constants=None):
        super().__init__(constants)
        c = self.c
        self.spec = EnvSpec(
            env_id=self.env_id,
            action_dim=2,
            obs_dim=6,
            horizon=int(c["horizon"]),
            reward_ceiling_per_step=1.0,
            terminating=False,
            dt=float(c["dt_s"]),
        )
        self.A = [float(v) for v in c["tank_area_cm2"]]
        self.a = [float(v) for v in c["outlet_area_cm2"]]
        self.k = [float(v) for v in c["pump_gain_cm3_per_vs"]]
        self.gamma = [float(v) for v in c["valve_split"]]
        self.g2 = 2.0 * float(c["gravity_cm_s2"])
        self.h_max = float(c["tank_height_cm"])
        self.v_max = float(c["pump_max_v"])
        self.substeps = int(c["substeps"])

    # -- physics ---------------------------------------------------------
    def voltages(self, action) -> tuple[float, float]:
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        return (float(a[0]) + 1.0) * 0.5 * self.v_max, (float(a[1]) + 1.0) * 0.5 * self.v_max

    def derivatives(self, h, v1: float, v2: float) -> list[float]:
        A, a, k, (g1, g2) = self.A, self.a, self.k, self.gamma
        q = [a[i] * math.sqrt(self.g2 * h[i]) if h[i] > 0.0 else 0.0 for i in range(4)]
        return [
            (-q[0] + q[2] + g1 * k[0] * v1) / A[0],
            (-q[1] + q[3] + g2 * k[1] * v2) / A[1],
            (-q[2] + (1.0 - g2) * k[1] * v2) / A[2],
            (-q[3] + (1.0 - g1) * k[0] * v1) / A[3],
        ]

    def _advance(self, x, a, params):
        v1, v2 = self.voltages(a)
        h = [float(x[0]), float(x[1]), float(x[2]), float(x[3])]
        dt = self.spec.dt / self.substeps
        f = self.derivatives
        for _ in range(self.substeps):
            k1 = f(h, v1, v2)
            k2 = f([h[i] + 0.5 * dt * k1[i] for i in range(4)], v1, v2)
            k3 = f([h[i] + 0.5 * dt * k2[i] for i in range(4)], v1, v2)
            k4 = f([h[i] + dt * k3[i] for i in range(4)], v1, v2)
            h = [h[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(4)]
            # an upper tank cannot drain below empty: hand the overshoot back
            # to the tank it drains into so total volume is conserved
            for upper, lower in ((2, 0), (3, 1)):
                if h[upper] < 0.0:
                    h[lower] += h[upper] * self.A[upper] / self.A[lower]
                    h[upper] = 0.0
            h = [min(max(v, 0.0), self.h_max) for v in h]
        return np.array(h), False

    def volume(self, levels) -> float:
        return float(sum(self.A[i] * levels[i] for i in range(4)))

    def equilibrium(self, setpoints) -> tuple[np.ndarray, np.ndarray]:
        """Steady levels and pump action that hold ``(h1, h2) = setpoints``."""
        r1, r2 = float(setpoints[0]), float(setpoints[1])
        (g1, g2), a = self.gamma, self.a
        q1 = a[0] * math.sqrt(self.g2 * r1)
        q2 = a[1] * math.sqrt(self.g2 * r2)
        det = g1 * g2 - (1.0 - g1) * (1.0 - g2)
        w1 = (g2 * q1 - (1.0 - g2) * q2) / det
        w2 = (g1 * q2 - (1.0 - g1) * q1) / det
        v1, v2 = w1 / self.k[0], w2 / self.k[1]
        q3 = (1.0 - g2) * w2
        q4 = (1.0 - g1) * w1
        h3 = (q3 / a[2]) ** 2 / self.g2
        h4 = (q4 / a[3]) ** 2 / self.g2
        action = np.array([2.0 * v1 / self.v_max - 1.0, 2.0 * v2 / self.v_max - 1.0])
        return np.array([r1, r2, h3, h4]), action

    # -- env hooks ------------------------------------------------------
    def _initial(self, rng, options):
        lo, hi = self.c["setpoint_range_cm"]
        sp = rng.uniform(lo, hi, size=2)
        ilo, ihi = self.c["initial_level_range_cm"]
        levels = rng.uniform(ilo, ihi, size=4)
        if "setpoints" in options:
            sp = np.asarray(options["setpoints"], dtype=np.float64)
        if "initial_levels" in options:
            levels = np.asarray(options["initial_levels"], dtype=np.float64)
        return levels.astype(np.float64), {"setpoints": [float(sp[0]), float(sp[1])]}

    def _observe(self, x, params):
        sp = params["setpoints"]
        return np.array([x[0], x[1], x[2], x[3], sp[0], sp[1]], dtype=np.float64)

    def _reward(self, x, params):
        sp = params["setpoints"]
        s = self.c["tracking_scale_cm"]
        return 0.5 * (math.exp(-abs(x[0] - sp[0]) / s) + math.exp(-abs(x[1] - sp[1]) / s))

    def zero_level_reward(self, setpoints) -> float:
        s = self.c["tracking_scale_cm"]
        return float(np.mean(tracking_factor(np.asarray(setpoints), s)))
