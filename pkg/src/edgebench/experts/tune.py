"""Per-task PID loop layouts and the sequential relay tuning that fills in their gains.

MIMO plants are tuned one SISO loop at a time. Already-tuned loops stay
closed while the next is probed; untuned loops hold their feedforward bias.
Cascades are tuned inside-out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .. import envs
from .controllers import LoopSpec, PIDLoops
from .gainfile import GainFile
from .relay import RelaySettings, TuningRule, operating_points, relay_autotune


@dataclass
class LoopTuning:
    loop: int
    op_range: tuple[float, float]
    settings: RelaySettings
    # op -> (reset options, extras: nominal_output / setpoint_value / override_outputs)
    scenario: Callable[[float], tuple[dict, dict]]


@dataclass
class TaskLayout:
    task: str
    loops: list[LoopSpec]
    order: list[LoopTuning]
    nominal_options: dict = field(default_factory=dict)
    rule: TuningRule = field(default_factory=TuningRule)


def fourtank_layout() -> TaskLayout:
    env = envs.make("fourtank")
    nominal = [12.5, 12.5]
    _, a_nom = env.equilibrium(nominal)
    # non-minimum-phase valve split: the diagonal RGA entry is negative, so
    # each lower tank is paired with the pump that feeds it through the upper tank
    loops = [
        LoopSpec("h1_from_pump2", measure_index=0, setpoint_index=4, output_index=1, bias=float(a_nom[1])),
        LoopSpec("h2_from_pump1", measure_index=1, setpoint_index=5, output_index=0, bias=float(a_nom[0])),
    ]

    def scenario(i):
        def f(op):
            sp = list(nominal)
            sp[i] = op
            levels, a = env.equilibrium(sp)
            return {"setpoints": sp, "initial_levels": levels}, {"nominal_output": float(a[loops[i].output_index])}
        return f

    settings = RelaySettings(amplitude=0.2, max_steps=6000)
    return TaskLayout(
        "fourtank",
        loops,
        [LoopTuning(0, (10.0, 15.0), settings, scenario(0)), LoopTuning(1, (10.0, 15.0), settings, scenario(1))],
        {"setpoints": nominal},
        # derivative action on the slow loop amplifies the pump-2 cross-feed
        # into a sustained limit cycle, so both loops are mapped to PI
        rule=TuningRule(td_factor=0.0),
    )


def glassfurnace_layout() -> TaskLayout:
    env = envs.make("glassfurnace")
    n = env.n
    nominal = [1350.0] * n
    _, a_nom = env.equilibrium(nominal)
    loops = [
        LoopSpec(f"zone{i}", measure_index=i, setpoint_index=n + i, output_index=i, bias=float(a_nom[i]))
        for i in range(n)
    ]

    def scenario(i):
        def f(op):
            sp = list(nominal)
            sp[i] = op
            x, a = env.equilibrium(sp)
            return {"setpoints": sp, "initial_state": x, "load_amplitudes": [0.0] * n}, {"nominal_output": float(a[i])}
        return f

    settings = RelaySettings(amplitude=0.2, max_steps=20000)
    return TaskLayout(
        "glassfurnace",
        loops,
        [LoopTuning(i, (1250.0, 1450.0), settings, scenario(i)) for i in range(n)],
        {"setpoints": nominal},
    )


def plane_layout() -> TaskLayout:
    env = envs.make("plane3dcircle")
    c = env.c
    vlo, vhi = c["airspeed_range_m_s"]
    v_nom = float(c["initial_airspeed_m_s"])
    thr_bias = 2.0 * (v_nom - vlo) / (vhi - vlo) - 1.0
    r_nom = 0.5 * sum(c["radius_range_m"])

    def trim_bank(radius):
        return math.atan(v_nom**2 / (c["gravity_m_s2"] * radius)) / c["bank_max_rad"]

    loops = [
        LoopSpec("airspeed", measure_index=3, setpoint_value=v_nom, output_index=0, bias=thr_bias),
        LoopSpec("altitude", measure_index=6, setpoint_index=9, output_index=1),
        LoopSpec("bank", measure_index=4, setpoint_from=3, setpoint_scale=c["bank_max_rad"], output_index=2),
        LoopSpec("heading", measure_index=2, setpoint_value=0.0, output_index=None, bias=trim_bank(r_nom), wrap_error=True),
    ]
    h_ref = float(c["altitude_ref_m"])

    def airspeed(op):
        trim = 2.0 * (op - vlo) / (vhi - vlo) - 1.0
        return (
            {"radius": r_nom, "radial_offset": 0.0, "altitude": h_ref, "airspeed": op},
            {"setpoint_value": (0, op), "nominal_output": trim},
        )

    def altitude(op):
        return {"radius": r_nom, "radial_offset": 0.0, "altitude_ref": op, "altitude": op, "airspeed": v_nom}, {"nominal_output": 0.0}

    def bank(op):
        # inner loop probed with its setpoint pinned; the heading loop is still open
        return (
            {"radius": r_nom, "radial_offset": 0.0, "altitude": h_ref, "airspeed": v_nom},
            {"override_outputs": {3: op}, "nominal_output": op},
        )

    def heading(op):
        return {"radius": op, "radial_offset": 0.0, "altitude": h_ref, "airspeed": v_nom}, {"nominal_output": trim_bank(op)}

    return TaskLayout(
        "plane3dcircle",
        loops,
        [
            LoopTuning(0, (20.0, 30.0), RelaySettings(amplitude=0.2, max_steps=6000), airspeed),
            LoopTuning(1, (80.0, 120.0), RelaySettings(amplitude=0.3, max_steps=6000), altitude),
            LoopTuning(2, (-0.3, 0.3), RelaySettings(amplitude=0.2, max_steps=6000), bank),
            LoopTuning(3, (150.0, 400.0), RelaySettings(amplitude=0.2, max_steps=10000), heading),
        ],
        {},
    )


LAYOUTS: dict[str, Callable[[], TaskLayout]] = {
    "fourtank": fourtank_layout,
    "glassfurnace": glassfurnace_layout,
    "plane3dcircle": plane_layout,
}


class EnvLoopPlant:
    """One loop of a task's PID bank exposed as a SISO plant for the relay.

    Loops in ``closed`` run under their current gains, other loops output their bias.
    """

    def __init__(self, task: str, loops: list[LoopSpec], loop: int, closed: set[int], scenario, seed: int = 0):
        self.env = envs.make(task)
        self.dt = self.env.spec.dt
        self.loop = loop
        self.seed = seed
        self.scenario = scenario
        self.base = [lp if i in closed or i == loop else replace(lp, kp=0.0, ki=0.0, kd=0.0) for i, lp in enumerate(loops)]
        self.bias = float(loops[loop].bias)
        self.nominal_output = self.bias
        self.output_limits = (-1.0, 1.0)

    def _error(self) -> float:
        lp = self.ctrl.loops[self.loop]
        obs = self.state.observation
        if lp.setpoint_index is not None:
            r = float(obs[lp.setpoint_index])
        elif lp.setpoint_from is not None:
            r = lp.setpoint_scale * self.override[lp.setpoint_from]
        else:
            r = lp.setpoint_value
        e = r - float(obs[lp.measure_index])
        if lp.wrap_error:
            e = (e + math.pi) % (2 * math.pi) - math.pi
        return e

    def reset(self, op: float) -> float:
        options, extra = self.scenario(op)
        loops = [replace(lp) for lp in self.base]
        if "setpoint_value" in extra:
            i, v = extra["setpoint_value"]
            loops[i] = replace(loops[i], setpoint_value=v)
        self.ctrl = PIDLoops(loops, self.env.spec.action_dim, self.dt)
        self.nominal_output = float(extra.get("nominal_output", self.bias))
        self.fixed = dict(extra.get("override_outputs", {}))
        self.override = {**self.fixed, self.loop: self.nominal_output}
        self.state = self.env.reset(self.seed, options)
        self.z = self.ctrl.initial_state(self.state.observation)
        return self._error()

    def step(self, u: float) -> float:
        self.override = {**self.fixed, self.loop: float(u)}
        action, self.z = self.ctrl.act(self.state.observation, self.z, override=self.override)
        if self.state.done:
            raise RuntimeError("relay probe ran past the episode horizon")
        self.state, _ = self.env.step(self.state, action)
        if self.state.done:
            # probes may outlast one episode: keep the plant running from where it is
            self.state = replace(self.state, done=False, step_index=0)
        return self._error()


def expert_return(controller, task: str, seed: int, options: dict | None = None) -> float:
    env = envs.make(task)
    state = env.reset(seed, options)
    z = controller.initial_state(state.observation)
    total = 0.0
    while not state.done:
        a, z = controller.act(state.observation, z)
        state, r = env.step(state, a)
        total += r
    return total


def measure_j_exp(controller, task: str, seeds) -> float:
    return float(np.mean([expert_return(controller, task, int(s)) for s in seeds]))


def tune_task(
    task: str,
    n_operating_points: int = 8,
    rule: TuningRule | None = None,
    j_exp_seeds: int = 16,
    j_seed_offset: int = 10_000,
) -> GainFile:
    layout = LAYOUTS[task]()
    rule = rule or layout.rule
    loops = [replace(lp) for lp in layout.loops]
    closed: set[int] = set()
    provenance = []
    for step in layout.order:
        plant = EnvLoopPlant(task, loops, step.loop, closed, step.scenario)
        ops = operating_points(*step.op_range, n_operating_points)
        out = relay_autotune(plant, ops, step.settings, rule)
        lp = loops[step.loop]
        loops[step.loop] = replace(lp, kp=out["kp"], ki=out["ki"], kd=out["kd"])
        closed.add(step.loop)
        provenance.append({"loop": lp.name, "relay": step.settings.__dict__, **out})
    env = envs.make(task)
    ctrl = PIDLoops(loops, env.spec.action_dim, env.spec.dt)
    seeds = list(range(j_seed_offset, j_seed_offset + j_exp_seeds))
    j_exp = measure_j_exp(ctrl, task, seeds)
    return GainFile(
        task=task,
        kind="pid_loops",
        loops=loops,
        action_dim=env.spec.action_dim,
        dt=env.spec.dt,
        tuning={"method": "relay", "n_operating_points": n_operating_points, "loops": provenance, "j_exp_seed_list": seeds},
        j_exp=j_exp,
        j_exp_seeds=j_exp_seeds,
    )
