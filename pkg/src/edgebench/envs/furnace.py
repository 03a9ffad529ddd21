"""Four-zone furnace with slow linear thermal coupling.

Each zone has a heater element, the zone mass, and a lagged thermocouple;
neighbouring zones exchange heat. Each zone also carries a slow seeded
sinusoidal load (glass pull) that the controller must reject. Internal state
is ``[heater_0..3, zone_0..3, thermocouple_0..3]`` in K followed by the
elapsed time in s.

Observation: ``[thermocouple_0..3, setpoint_0..3]``.
Action: heater power fraction ``u_i = (a_i + 1) / 2``.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec


class GlassFurnace(Env):
    env_id = "glassfurnace"

    def __init__(self, constants=None):
        super().__init__(constants)
        c = self.c
        n = self.n = int(c["n_zones"])
        self.spec = EnvSpec(
            env_id=self.env_id,
            action_dim=n,
            obs_dim=2 * n,
            horizon=int(c["horizon"]),
            reward_ceiling_per_step=1.0,
            terminating=False,
            dt=float(c["dt_s"]),
        )
        self.substeps = int(c["substeps"])
        self.A, self.B, self.w0 = self._linear_model()
        self.Phi, self.Gamma = self._rk4_propagator()

    def coupling_matrix(self) -> np.ndarray:
        n, k = self.n, float(self.c["zone_coupling_w_k"])
        K = np.zeros((n, n))
        for i in range(n - 1):
            K[i, i + 1] = K[i + 1, i] = k
        return K

    def _linear_model(self):
        c, n = self.c, self.n
        ch, cz = c["heater_capacity_j_k"], c["zone_capacity_j_k"]
        g, tau_m = c["heater_zone_conductance_w_k"], c["thermocouple_tau_s"]
        loss = np.asarray(c["zone_loss_w_k"], dtype=np.float64)
        K = self.coupling_matrix()
        A = np.zeros((3 * n, 3 * n))
        B = np.zeros((3 * n, n))
        w0 = np.zeros(3 * n)
        H, Z, M = slice(0, n), slice(n, 2 * n), slice(2 * n, 3 * n)
        A[H, H] = -g / ch * np.eye(n)
        A[H, Z] = g / ch * np.eye(n)
        A[Z, H] = g / cz * np.eye(n)
        A[Z, Z] = (-np.diag(g + loss + K.sum(axis=1)) + K) / cz
        A[M, Z] = np.eye(n) / tau_m
        A[M, M] = -np.eye(n) / tau_m
        B[H, :] = c["heater_power_max_w"] / ch * np.eye(n)
        w0[Z] = loss * c["ambient_k"] / cz
        return A, B, w0

    def _rk4_propagator(self):
        # RK4 on a linear ODE x' = A x + w is the affine map
        # x <- x + S (A x + w) with S = h (I + Z/2 + Z^2/6 + Z^3/24), Z = h A;
        # composing the substeps once keeps stepping cheap.
        h = self.spec.dt / self.substeps
        m = self.A.shape[0]
        I = np.eye(m)
        Zm = h * self.A
        Z2 = Zm @ Zm
        S = h * (I + Zm / 2.0 + Z2 / 6.0 + Z2 @ Zm / 24.0)
        step = I + S @ self.A
        Phi = np.eye(m)
        Gamma = np.zeros((m, m))
        for _ in range(self.substeps):
            Phi = step @ Phi
            Gamma = step @ Gamma + S
        return Phi, Gamma

    def heater_fraction(self, a) -> np.ndarray:
        return (np.clip(np.asarray(a, dtype=np.float64), -1.0, 1.0) + 1.0) * 0.5

    def load(self, t: float, params) -> np.ndarray:
        """Extra heat drawn from each zone (W) at time ``t``; held constant over a step."""
        amp = np.asarray(params["load_amplitudes"]) * self.c["heater_power_max_w"]
        return amp * np.sin(2.0 * np.pi * t / np.asarray(params["load_periods"]) + np.asarray(params["load_phases"]))

    def _advance(self, x, a, params):
        m = 3 * self.n
        t = float(x[m])
        w = self.B @ self.heater_fraction(a) + self.w0
        w[self.n:2 * self.n] -= self.load(t, params) / self.c["zone_capacity_j_k"]
        out = np.empty_like(x)
        out[:m] = self.Phi @ x[:m] + self.Gamma @ w
        out[m] = t + self.spec.dt
        return out, False

    def equilibrium(self, setpoints) -> tuple[np.ndarray, np.ndarray]:
        """Steady internal state (at t = 0) and action holding every zone at its setpoint without load."""
        c, n = self.c, self.n
        r = np.asarray(setpoints, dtype=np.float64)
        loss = np.asarray(c["zone_loss_w_k"], dtype=np.float64)
        K = self.coupling_matrix()
        power = loss * (r - c["ambient_k"]) + K.sum(axis=1) * r - K @ r
        u = power / c["heater_power_max_w"]
        heater = r + power / c["heater_zone_conductance_w_k"]
        return np.concatenate([heater, r, r, [0.0]]), 2.0 * u - 1.0

    def _initial(self, rng, options):
        c, n = self.c, self.n
        sp = rng.uniform(*c["setpoint_range_k"], size=n)
        t0 = rng.uniform(*c["initial_temp_range_k"], size=n)
        if "setpoints" in options:
            sp = np.asarray(options["setpoints"], dtype=np.float64)
        amps = rng.uniform(*c["load_amplitude_fraction_range"], size=n)
        periods = rng.uniform(*c["load_period_range_s"], size=n)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
        x = np.concatenate([t0, t0, t0, [0.0]])
        if "initial_state" in options:
            x = np.asarray(options["initial_state"], dtype=np.float64).copy()
        if "load_amplitudes" in options:
            amps = np.asarray(options["load_amplitudes"], dtype=np.float64)
        return x, {
            "setpoints": [float(v) for v in sp],
            "load_amplitudes": [float(v) for v in amps],
            "load_periods": [float(v) for v in periods],
            "load_phases": [float(v) for v in phases],
        }

    def _observe(self, x, params):
        n = self.n
        return np.concatenate([x[2 * n:3 * n], np.asarray(params["setpoints"])])

    def _reward(self, x, params):
        n = self.n
        err = x[n:2 * n] - np.asarray(params["setpoints"])
        return float(np.mean(np.exp(-np.abs(err) / self.c["tracking_scale_k"])))
