"""Point-mass kinematic aircraft tracking a horizontal circle at a target altitude.

Internal state: ``[x, y, h, V, psi, phi, hdot]`` (m, m, m, m/s, rad, rad, m/s).
Actions: throttle -> commanded airspeed (first-order lag), stick -> commanded
climb rate (first-order lag), aileron -> commanded bank (first-order lag);
bank turns the heading at ``g tan(phi) / V``. Banking and flying below the
stall speed both cost altitude. Altitude <= 0 is a crash. Episodes start
tangent to the circle at a seeded radial offset.

Observation (12): altitude error, radial error, heading relative to the
circle tangent, V, phi, hdot, h, radial distance, radius, altitude target,
sin(psi), cos(psi).
"""

from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    return (x + math.pi) % TWO_PI - math.pi


class Plane3DCircle(Env):
    env_id = "plane3dcircle"

    OBS_NAMES = (
        "alt_err", "radial_err", "heading_rel", "airspeed", "bank", "climb_rate",
        "altitude", "radial_dist", "radius", "altitude_ref", "sin_psi", "cos_psi",
    )

    def __init__(self, constants=None):
        super().__init__(constants)
        c = self.c
        self.spec = EnvSpec(
            env_id=self.env_id,
            action_dim=3,
            obs_dim=len(self.OBS_NAMES),
            horizon=int(c["horizon"]),
            reward_ceiling_per_step=1.0,
            terminating=True,
            dt=float(c["dt_s"]),
        )
        self.substeps = int(c["substeps"])

    def commands(self, a) -> tuple[float, float, float]:
        c = self.c
        vlo, vhi = c["airspeed_range_m_s"]
        v_cmd = vlo + (float(a[0]) + 1.0) * 0.5 * (vhi - vlo)
        return v_cmd, float(a[1]) * c["climb_rate_max_m_s"], float(a[2]) * c["bank_max_rad"]

    def _deriv(self, s, v_cmd, hdot_cmd, phi_cmd):
        c = self.c
        _, _, _, v, psi, phi, hdot = s
        vs = max(v, 1.0)
        cphi = max(math.cos(phi), 0.05)
        sink = c["bank_sink_m_s"] * (1.0 / cphi - 1.0)
        stall = c["stall_speed_m_s"] - v
        if stall > 0.0:
            sink += c["stall_sink_coeff"] * stall * stall
        return (
            v * math.cos(psi),
            v * math.sin(psi),
            hdot - sink,
            (v_cmd - v) / c["airspeed_tau_s"],
            c["gravity_m_s2"] * math.tan(phi) / vs,
            (phi_cmd - phi) / c["bank_tau_s"],
            (hdot_cmd - hdot) / c["climb_tau_s"],
        )

    def _advance(self, x, a, params):
        v_cmd, hdot_cmd, phi_cmd = self.commands(a)
        s = tuple(float(v) for v in x)
        h = self.spec.dt / self.substeps
        f = self._deriv
        for _ in range(self.substeps):
            k1 = f(s, v_cmd, hdot_cmd, phi_cmd)
            k2 = f(tuple(s[i] + 0.5 * h * k1[i] for i in range(7)), v_cmd, hdot_cmd, phi_cmd)
            k3 = f(tuple(s[i] + 0.5 * h * k2[i] for i in range(7)), v_cmd, hdot_cmd, phi_cmd)
            k4 = f(tuple(s[i] + h * k3[i] for i in range(7)), v_cmd, hdot_cmd, phi_cmd)
            s = tuple(s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(7))
        out = np.array(s)
        out[4] = wrap_angle(out[4])
        crashed = out[2] <= 0.0
        if crashed:
            out[2] = 0.0
        return out, bool(crashed)

    def _initial(self, rng, options):
        c = self.c
        lo, hi = c["radius_range_m"]
        radius = float(rng.uniform(lo, hi))
        jitter = float(rng.uniform(-1.0, 1.0)) * c["initial_altitude_jitter_m"]
        offset = float(rng.uniform(-1.0, 1.0)) * c["initial_radial_offset_m"]
        radius = float(options.get("radius", radius))
        offset = float(options.get("radial_offset", offset))
        h_ref = float(options.get("altitude_ref", c["altitude_ref_m"]))
        h0 = float(options.get("altitude", h_ref + jitter))
        v0 = float(options.get("airspeed", c["initial_airspeed_m_s"]))
        x = np.array([radius + offset, 0.0, h0, v0, math.pi / 2.0, 0.0, 0.0])
        return x, {"radius": radius, "altitude_ref": h_ref}

    def _observe(self, x, params):
        px, py, h, v, psi, phi, hdot = (float(t) for t in x)
        rho = math.hypot(px, py)
        psi_tan = math.atan2(py, px) + math.pi / 2.0
        return np.array([
            h - params["altitude_ref"],
            rho - params["radius"],
            wrap_angle(psi - psi_tan),
            v, phi, hdot, h, rho,
            params["radius"], params["altitude_ref"],
            math.sin(psi), math.cos(psi),
        ])

    def factors(self, x, params) -> tuple[float, float]:
        c = self.c
        rho = math.hypot(float(x[0]), float(x[1]))
        fa = math.exp(-abs(float(x[2]) - params["altitude_ref"]) / c["altitude_scale_m"])
        fr = math.exp(-abs(rho - params["radius"]) / c["radial_scale_m"])
        return fa, fr

    def _reward(self, x, params):
        fa, fr = self.factors(x, params)
        p = self.c["reward_power"]
        return fa**p * fr**p
