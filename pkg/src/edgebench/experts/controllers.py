"""Deterministic expert controllers with an exposed internal state ``z``.

Every controller implements::

    z0 = ctrl.initial_state(obs)
    action, z1 = ctrl.act(obs, z0)

``act`` is pure: the same ``(obs, z)`` always gives the same result.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap(x: float) -> float:
    return (x + math.pi) % TWO_PI - math.pi


@dataclass
class LoopSpec:
    """One PID loop.

    The setpoint is read from ``obs[setpoint_index]``, or taken from the
    output of loop ``setpoint_from`` times ``setpoint_scale`` (cascade), or
    else the constant ``setpoint_value``. ``output_index`` of ``None`` marks
    an outer cascade loop whose output only feeds another loop's setpoint.
    """

    name: str
    measure_index: int
    output_index: int | None
    setpoint_index: int | None = None
    setpoint_value: float = 0.0
    setpoint_from: int | None = None
    setpoint_scale: float = 1.0
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    bias: float = 0.0
    wrap_error: bool = False

    @property
    def gains(self) -> tuple[float, float, float]:
        return self.kp, self.ki, self.kd

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LoopSpec":
        return cls(**d)


class PIDLoops:
    """A bank of PID loops, possibly cascaded, producing one action vector.

    Per loop the state holds ``(integrator, filtered derivative, last measurement)``.
    The derivative acts on the measurement through a first-order filter with
    time constant ``Td / 10``; the integrator is frozen while the output is
    saturated in the direction the error pushes it.
    """

    kind = "pid_loops"
    STATE_PER_LOOP = 3

    def __init__(self, loops: list[LoopSpec], action_dim: int, dt: float):
        self.loops = [replace(lp) for lp in loops]
        self.action_dim = int(action_dim)
        self.dt = float(dt)
        self.order = self._evaluation_order()

    def _evaluation_order(self) -> list[int]:
        order, done = [], set()
        while len(order) < len(self.loops):
            progressed = False
            for i, lp in enumerate(self.loops):
                if i in done:
                    continue
                if lp.setpoint_from is None or lp.setpoint_from in done:
                    order.append(i)
                    done.add(i)
                    progressed = True
            if not progressed:
                raise ValueError("cyclic cascade in loop specification")
        return order

    @property
    def state_dim(self) -> int:
        return self.STATE_PER_LOOP * len(self.loops)

    @property
    def params(self) -> np.ndarray:
        return np.array([g for lp in self.loops for g in lp.gains], dtype=np.float64)

    def with_params(self, params) -> "PIDLoops":
        p = np.asarray(params, dtype=np.float64).reshape(len(self.loops), 3)
        loops = [replace(lp, kp=float(k[0]), ki=float(k[1]), kd=float(k[2])) for lp, k in zip(self.loops, p)]
        return PIDLoops(loops, self.action_dim, self.dt)

    def initial_state(self, obs) -> np.ndarray:
        z = np.zeros(self.state_dim)
        for i, lp in enumerate(self.loops):
            z[3 * i + 2] = obs[lp.measure_index]
        return z

    def act(self, obs, z, override: dict[int, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(action, z')``; ``override`` replaces chosen loop outputs (used by relay probes)."""
        dt = self.dt
        z = np.asarray(z, dtype=np.float64)
        z_new = z.copy()
        outputs = [0.0] * len(self.loops)
        action = np.zeros(self.action_dim)
        for i in self.order:
            lp = self.loops[i]
            y = float(obs[lp.measure_index])
            if lp.setpoint_index is not None:
                r = float(obs[lp.setpoint_index])
            elif lp.setpoint_from is not None:
                r = lp.setpoint_scale * outputs[lp.setpoint_from]
            else:
                r = lp.setpoint_value
            e = r - y
            dy = y - float(z[3 * i + 2])
            if lp.wrap_error:
                e, dy = _wrap(e), _wrap(dy)
            integ, dfilt = float(z[3 * i]), float(z[3 * i + 1])
            if lp.kd > 0.0 and lp.kp > 0.0:
                tf = 0.1 * lp.kd / lp.kp
                dfilt = (tf * dfilt - dy) / (tf + dt)
            else:
                dfilt = 0.0
            cand = integ + e * dt
            u = lp.kp * e + lp.ki * cand + lp.kd * dfilt + lp.bias
            if (u > 1.0 and e > 0.0) or (u < -1.0 and e < 0.0):
                cand = integ
                u = lp.kp * e + lp.ki * cand + lp.kd * dfilt + lp.bias
            u = min(max(u, -1.0), 1.0)
            if override is not None and i in override:
                u = float(override[i])
            outputs[i] = u
            z_new[3 * i] = cand
            z_new[3 * i + 1] = dfilt
            z_new[3 * i + 2] = y
            if lp.output_index is not None:
                action[lp.output_index] = u
        return np.clip(action, -1.0, 1.0), z_new


@dataclass
class CPG:
    """Open-loop sinusoidal pattern generator; ``z`` is the oscillator phase in radians."""

    frequency: float
    amplitudes: np.ndarray
    phases: np.ndarray
    dt: float
    kind: str = field(default="cpg", init=False)

    FREQ_BOUNDS = (0.5, 5.0)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)

    @property
    def action_dim(self) -> int:
        return len(self.amplitudes)

    @property
    def state_dim(self) -> int:
        return 1

    @staticmethod
    def bounds(n_actuators: int = 6) -> tuple[np.ndarray, np.ndarray]:
        lo = np.concatenate([[CPG.FREQ_BOUNDS[0]], np.zeros(n_actuators), np.zeros(n_actuators)])
        hi = np.concatenate([[CPG.FREQ_BOUNDS[1]], np.ones(n_actuators), np.full(n_actuators, TWO_PI)])
        return lo, hi

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([[self.frequency], self.amplitudes, self.phases])

    @classmethod
    def from_params(cls, params, dt: float) -> "CPG":
        p = np.asarray(params, dtype=np.float64)
        n = (len(p) - 1) // 2
        lo, hi = cls.bounds(n)
        p = np.clip(p, lo, hi)
        return cls(float(p[0]), p[1:1 + n], p[1 + n:], dt)

    def with_params(self, params) -> "CPG":
        return CPG.from_params(params, self.dt)

    def initial_state(self, obs=None) -> np.ndarray:
        return np.zeros(1)

    def act(self, obs, z) -> tuple[np.ndarray, np.ndarray]:
        phase = float(z[0])
        action = np.clip(self.amplitudes * np.sin(phase + self.phases), -1.0, 1.0)
        return action, np.array([(phase + TWO_PI * self.frequency * self.dt) % TWO_PI])


class RandomExpert:
    """Stateful seeded uniform-random policy standing in for the expert (sanity ablation).

    It exposes no internal state to the learner: augmentation with it is a no-op.
    """

    kind = "random"

    def __init__(self, action_dim: int, seed: int):
        self.action_dim = int(action_dim)
        self.rng = np.random.default_rng(seed)

    state_dim = 0
    params = np.zeros(0)

    def initial_state(self, obs=None) -> np.ndarray:
        return np.zeros(0)

    def act(self, obs, z) -> tuple[np.ndarray, np.ndarray]:
        return self.rng.uniform(-1.0, 1.0, size=self.action_dim), z

    def with_params(self, params) -> "RandomExpert":
        return self


def undertune(controller, sigma: float, rng: np.random.Generator, which: str = "all"):
    """Log-normal miscalibration: each positive gain ``g -> g * exp(sigma * xi)``.

    One ``xi`` is drawn per parameter (a fixed per-seed miscalibration).
    ``which="proportional"`` restricts the perturbation to PID ``kp`` gains.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    p = np.asarray(controller.params, dtype=np.float64)
    xi = rng.standard_normal(p.shape)
    if sigma == 0:
        return controller.with_params(p.copy())
    mask = p > 0
    if which == "proportional":
        if getattr(controller, "kind", None) != "pid_loops":
            raise ValueError("proportional-only undertuning applies to PID controllers")
        sel = np.zeros_like(mask)
        sel[0::3] = True
        mask &= sel
    elif which != "all":
        raise ValueError(f"unknown undertune scope {which!r}")
    out = p.copy()
    out[mask] = p[mask] * np.exp(sigma * xi[mask])
    return controller.with_params(out)


def draw_action_bias(sigma: float, action_dim: int, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return sigma * rng.standard_normal(action_dim)


def bias_action(action, bias_vector) -> np.ndarray:
    return np.clip(np.asarray(action, dtype=np.float64) + np.asarray(bias_vector, dtype=np.float64), -1.0, 1.0)
