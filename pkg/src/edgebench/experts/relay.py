"""Relay-feedback identification of the ultimate gain and period, and PID mapping.

A SISO plant exposes ``dt``, ``reset(op) -> e``, ``step(u) -> e``, a
``nominal_output`` (read after ``reset``) and ``output_limits``, where ``e`` is the tracking error
``r - y``. The relay drives ``u = u0 + d * sign(e)``; the bias ``u0`` is
re-centred every full period so asymmetric plants still settle into a
symmetric limit cycle.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np


class RelayError(RuntimeError):
    """No usable limit cycle was found."""


class SISOPlant(Protocol):
    dt: float
    nominal_output: float
    output_limits: tuple[float, float]

    def reset(self, op: float) -> float: ...

    def step(self, u: float) -> float: ...


@dataclass
class RelaySettings:
    amplitude: float = 0.2
    max_steps: int = 20000
    discard_switches: int = 5
    n_consistent: int = 4
    tolerance: float = 0.05
    # half-periods are whole samples, so agreement is never demanded below this many steps
    resolution_steps: float = 1.0
    noise_floor: float = 1e-9
    amplitude_estimator: str = "fundamental"
    adapt_bias: bool = True


@dataclass
class TuningRule:
    kp_factor: float = 0.45
    ti_factor: float = 0.83
    td_factor: float = 0.125

    def gains(self, k_u: float, t_u: float) -> tuple[float, float, float]:
        kp = self.kp_factor * k_u
        ti = self.ti_factor * t_u
        td = self.td_factor * t_u
        return kp, kp / ti, kp * td


@dataclass
class RelayMeasurement:
    k_u: float
    t_u: float
    amplitude: float
    peak_amplitude: float
    relay_amplitude: float
    bias: float
    n_steps: int
    n_switches: int

    def to_dict(self) -> dict:
        return asdict(self)


def fundamental_amplitude(signal, n_periods: int) -> float:
    """Amplitude of the first harmonic of ``signal`` spanning ``n_periods`` whole periods."""
    x = np.asarray(signal, dtype=np.float64)
    x = x - x.mean()
    k = np.arange(len(x))
    c = np.exp(-2j * math.pi * n_periods * k / len(x))
    return float(2.0 * abs(np.dot(x, c)) / len(x))


def relay_experiment(plant: SISOPlant, op: float, settings: RelaySettings | None = None) -> RelayMeasurement:
    s = settings or RelaySettings()
    lo, hi = plant.output_limits
    e = float(plant.reset(op))
    u0 = float(plant.nominal_output)
    sign = 1.0 if e >= 0 else -1.0
    es, us = [], []
    switches: list[int] = []
    halves: deque[int] = deque(maxlen=s.n_consistent)
    for k in range(s.max_steps):
        d = min(s.amplitude, u0 - lo, hi - u0)
        if d <= 0:
            raise RelayError(f"relay bias {u0:.4g} pinned at the output limits [{lo}, {hi}]")
        if e > 0:
            new_sign = 1.0
        elif e < 0:
            new_sign = -1.0
        else:
            new_sign = sign
        if new_sign != sign and es:
            switches.append(k)
            sign = new_sign
            if len(switches) >= 2:
                halves.append(switches[-1] - switches[-2])
            if s.adapt_bias and len(switches) >= 3 and len(switches) % 2 == 1:
                u0 = float(np.mean(us[switches[-3]:switches[-1]]))
                u0 = min(max(u0, lo), hi)
            if len(switches) > s.discard_switches + s.n_consistent and len(halves) == s.n_consistent:
                h = np.array(halves, dtype=np.float64)
                if np.all(np.abs(h - h.mean()) <= max(s.tolerance * h.mean(), s.resolution_steps)):
                    start, stop = switches[-1 - s.n_consistent], switches[-1]
                    window = np.array(es[start:stop])
                    n_periods = s.n_consistent // 2
                    t_u = (stop - start) * plant.dt / n_periods
                    peak = 0.5 * float(window.max() - window.min())
                    if s.amplitude_estimator == "fundamental":
                        a = fundamental_amplitude(window, n_periods)
                    elif s.amplitude_estimator == "peak":
                        a = peak
                    else:
                        raise ValueError(f"unknown amplitude estimator {s.amplitude_estimator!r}")
                    if a < s.noise_floor:
                        raise RelayError(f"oscillation amplitude {a:.3g} below noise floor {s.noise_floor:.3g}")
                    return RelayMeasurement(
                        k_u=4.0 * d / (math.pi * a),
                        t_u=t_u,
                        amplitude=a,
                        peak_amplitude=peak,
                        relay_amplitude=d,
                        bias=u0,
                        n_steps=k,
                        n_switches=len(switches),
                    )
        u = u0 + d * sign
        es.append(e)
        us.append(u)
        e = float(plant.step(u))
    raise RelayError(
        f"no sustained oscillation within {s.max_steps} steps at op={op}: "
        f"{len(switches)} switches, last half-periods {list(halves)}"
    )


def relay_autotune(
    plant: SISOPlant,
    operating_points,
    settings: RelaySettings | None = None,
    rule: TuningRule | None = None,
) -> dict:
    """Relay probe at every operating point; gains come from the middle one.

    Returns ``{"kp", "ki", "kd", "bias", "k_u", "t_u", "points"}``.
    """
    rule = rule or TuningRule()
    ops = [float(v) for v in operating_points]
    if not ops:
        raise ValueError("need at least one operating point")
    points = []
    for op in ops:
        m = relay_experiment(plant, op, settings)
        points.append({"op": op, **m.to_dict()})
    mid = points[len(points) // 2]
    kp, ki, kd = rule.gains(mid["k_u"], mid["t_u"])
    return {
        "kp": kp,
        "ki": ki,
        "kd": kd,
        "bias": mid["bias"],
        "k_u": mid["k_u"],
        "t_u": mid["t_u"],
        "middle_op": mid["op"],
        "rule": asdict(rule),
        "points": points,
    }


def operating_points(lo: float, hi: float, n: int = 8) -> list[float]:
    return [float(v) for v in np.linspace(lo, hi, n)]


class FOPDTPlant:
    """``G(s) = K e^{-L s} / (T s + 1)`` under zero-order hold; the setpoint is the operating point."""

    def __init__(self, gain=1.0, tau=1.0, delay=1.0, dt=0.01):
        self.K, self.T, self.L, self.dt = float(gain), float(tau), float(delay), float(dt)
        self.nominal_output = 0.0
        self.output_limits = (-math.inf, math.inf)
        self.phi = math.exp(-self.dt / self.T)
        self.n_delay = int(round(self.L / self.dt))

    def reset(self, op: float) -> float:
        self.r = float(op)
        self.y = self.r
        self.nominal_output = self.r / self.K
        self.queue = deque([self.nominal_output] * self.n_delay)
        return 0.0

    def step(self, u: float) -> float:
        self.queue.append(float(u))
        ud = self.queue.popleft()
        self.y = self.phi * self.y + (1.0 - self.phi) * self.K * ud
        return self.r - self.y


class DelayedIntegratorPlant:
    """``G(s) = K e^{-L s} / s``: under a relay the output is a symmetric triangle wave."""

    def __init__(self, gain=1.0, delay=1.0, dt=0.01):
        self.K, self.L, self.dt = float(gain), float(delay), float(dt)
        self.nominal_output = 0.0
        self.output_limits = (-math.inf, math.inf)
        self.n_delay = int(round(self.L / self.dt))

    def reset(self, op: float) -> float:
        self.r = float(op)
        self.y = self.r
        self.queue = deque([0.0] * self.n_delay)
        return 0.0

    def step(self, u: float) -> float:
        self.queue.append(float(u))
        self.y += self.K * self.dt * self.queue.popleft()
        return self.r - self.y


def fopdt_ultimate(gain=1.0, tau=1.0, delay=1.0) -> tuple[float, float]:
    """Frequency-domain oracle: solve ``-atan(w T) - w L = -pi`` by bisection."""
    lo, hi = 1e-9, math.pi / delay
    for _ in range(200):
        w = 0.5 * (lo + hi)
        if math.atan(w * tau) + w * delay < math.pi:
            lo = w
        else:
            hi = w
    w = 0.5 * (lo + hi)
    k_u = math.sqrt(1.0 + (w * tau) ** 2) / gain
    return k_u, 2.0 * math.pi / w
