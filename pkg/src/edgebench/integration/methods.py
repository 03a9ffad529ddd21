"""Method and ablation-variant specifications, and per-step selectors with instrumentation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .gates import (
    SCORERS,
    argmax_pick,
    edge_gate,
    jsrl_curriculum_horizon,
    jsrl_tt_uses_expert,
    residual_select,
    thompson_pick,
)

METHOD_IDS = ("sac", "expert", "edge", "ibrl", "jsrl_curriculum", "jsrl_tt", "residual")
VARIANT_IDS = (
    "gating_argmax",
    "argmax_lcb",
    "no_pessimism",
    "bootstrap_argmax",
    "bootstrap_lcb_gated",
    "no_state_aug",
    "no_obs_norm",
    "random_expert",
    "store_policy_action",
    "expert_prefill",
    "literal_thompson",
    "literal_thompson_k10",
)
FOUR_CORNERS = ("gating_argmax", "no_pessimism", "argmax_lcb", "edge")

# per-task tuned gate settings shipped as defaults
TUNED_GATES = {
    "plane3dcircle": (4.05, 8.51),
    "glassfurnace": (2.61, 0.24),
    "cheetahrun": (1.16, 0.17),
    "fourtank": (0.12, 1.64),
}

MECHANISMS = ("none", "gate_draw", "argmax", "handoff_test", "warm_start_test", "residual_add")


@dataclass(frozen=True)
class GateConfig:
    kappa: float = 1.0
    tau: float = 1.0
    scoring: str = "lcb"

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.scoring not in SCORERS:
            raise ValueError(f"unknown scoring rule {self.scoring!r}")

    @classmethod
    def for_task(cls, env_id: str, scoring: str = "lcb") -> "GateConfig":
        kappa, tau = TUNED_GATES.get(env_id, (1.0, 1.0))
        return cls(kappa, tau, scoring)


@dataclass(frozen=True)
class MethodSpec:
    """Everything a training run needs to know about the integration mechanism."""

    method_id: str
    variant_id: str | None = None
    gate: GateConfig = field(default_factory=GateConfig)
    # "softmax" | "argmax" | "thompson" for gate-based methods, else None
    gate_form: str | None = None
    argmax_scoring: str = "mean"
    target_mode: str = "plain"
    uses_expert: bool = True
    state_aug: bool = True
    normalize_obs: bool = True
    random_expert: bool = False
    store_policy_action: bool = False
    expert_prefill_per_million: int = 0
    n_critics: int = 2
    rho_warm: float = 0.1
    residual_bound: float = 1.0
    ibrl_aggregate: str = "mean"

    @property
    def name(self) -> str:
        return self.variant_id or self.method_id

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        d = dict(d)
        d["gate"] = GateConfig(**d.get("gate", {}))
        return cls(**d)


def method_spec(method_id: str, gate: GateConfig | None = None, **knobs) -> MethodSpec:
    gate = gate or GateConfig()
    if method_id == "sac":
        spec = MethodSpec("sac", gate=gate, uses_expert=False, state_aug=False)
    elif method_id == "expert":
        spec = MethodSpec("expert", gate=gate)
    elif method_id == "edge":
        spec = MethodSpec("edge", gate=gate, gate_form="softmax")
    elif method_id == "ibrl":
        spec = MethodSpec("ibrl", gate=gate, gate_form="argmax", target_mode="ibrl")
        spec = replace(spec, argmax_scoring=knobs.pop("ibrl_aggregate", spec.ibrl_aggregate))
    elif method_id in ("jsrl_curriculum", "jsrl_tt", "residual"):
        spec = MethodSpec(method_id, gate=gate)
    elif method_id in VARIANT_IDS:
        return variant_dispatch(method_id, gate, **knobs)
    else:
        raise ValueError(f"unknown method id {method_id!r}")
    if method_id == "ibrl":
        spec = replace(spec, ibrl_aggregate=spec.argmax_scoring)
    return replace(spec, **knobs) if knobs else spec


def variant_dispatch(variant_id: str, gate: GateConfig | None = None, **knobs) -> MethodSpec:
    """EDGE with exactly one design knob flipped."""
    gate = gate or GateConfig()
    base = MethodSpec("edge", variant_id=variant_id, gate=gate, gate_form="softmax")
    if variant_id == "gating_argmax":
        spec = replace(base, gate_form="argmax", argmax_scoring="mean")
    elif variant_id == "argmax_lcb":
        spec = replace(base, gate_form="argmax", argmax_scoring=gate.scoring)
    elif variant_id == "no_pessimism":
        spec = replace(base, gate=replace(gate, kappa=0.0, scoring="lcb"))
    elif variant_id == "bootstrap_argmax":
        spec = replace(base, target_mode="ibrl")
    elif variant_id == "bootstrap_lcb_gated":
        spec = replace(base, target_mode="lcb_gated")
    elif variant_id == "no_state_aug":
        spec = replace(base, state_aug=False)
    elif variant_id == "no_obs_norm":
        spec = replace(base, normalize_obs=False)
    elif variant_id == "random_expert":
        spec = replace(base, random_expert=True)
    elif variant_id == "store_policy_action":
        spec = replace(base, store_policy_action=True)
    elif variant_id == "expert_prefill":
        spec = replace(base, expert_prefill_per_million=100_000)
    elif variant_id == "literal_thompson":
        spec = replace(base, gate_form="thompson")
    elif variant_id == "literal_thompson_k10":
        spec = replace(base, gate_form="thompson", n_critics=10)
    else:
        raise ValueError(f"unknown variant id {variant_id!r}")
    return replace(spec, **knobs) if knobs else spec


@dataclass
class Selection:
    action: np.ndarray
    policy_action: np.ndarray
    used_expert: bool
    mechanism: str
    p: float | None = None
    delta: float | None = None


class Selector:
    """Per-step action choice for one method; counts which mechanism fired."""

    def __init__(self, spec: MethodSpec, total_steps: int, horizon: int, rng: np.random.Generator):
        self.spec = spec
        self.total_steps = int(total_steps)
        self.horizon = int(horizon)
        self.rng = rng
        self.counters = {m: 0 for m in MECHANISMS}
        self.h_t = horizon

    def start_episode(self, global_step: int) -> None:
        if self.spec.method_id == "jsrl_curriculum":
            progress = global_step / self.total_steps if self.total_steps > 0 else 1.0
            self.h_t = jsrl_curriculum_horizon(progress, self.horizon)

    def _count(self, mechanism: str) -> None:
        self.counters[mechanism] += 1

    def select(self, q_fn, policy_action, expert_action, t_episode: int, global_step: int,
               greedy: bool = False) -> Selection:
        """``q_fn(actions) -> (N, K)`` is only called by critic-based rules."""
        s = self.spec
        a_p = np.asarray(policy_action, dtype=np.float64)
        a_e = np.asarray(expert_action, dtype=np.float64)
        m = s.method_id
        if m == "sac":
            self._count("none")
            return Selection(a_p, a_p, False, "none")
        if m == "expert":
            self._count("none")
            return Selection(a_e, a_p, True, "none")
        if m == "residual":
            self._count("residual_add")
            return Selection(residual_select(a_e, a_p, s.residual_bound), a_p, False, "residual_add")
        if m == "jsrl_curriculum":
            self._count("handoff_test")
            use = t_episode < self.h_t
            return Selection(a_e if use else a_p, a_p, use, "handoff_test")
        if m == "jsrl_tt":
            self._count("warm_start_test")
            use = jsrl_tt_uses_expert(global_step, s.rho_warm, self.total_steps)
            return Selection(a_e if use else a_p, a_p, use, "warm_start_test")
        q = q_fn(np.stack([a_p, a_e]))
        form = s.gate_form
        if form == "softmax" and not greedy:
            self._count("gate_draw")
            b, p, delta = edge_gate(q, s.gate.kappa, s.gate.tau, self.rng, s.gate.scoring)
            return Selection(a_e if b else a_p, a_p, b, "gate_draw", p, delta)
        if form == "softmax":
            # greedy evaluation of the gate: the more likely arm
            self._count("argmax")
            use, delta = argmax_pick(q, s.gate.scoring, s.gate.kappa)
            return Selection(a_e if use else a_p, a_p, use, "argmax", None, delta)
        if form == "argmax":
            self._count("argmax")
            scoring = s.argmax_scoring
            kappa = s.gate.kappa if scoring in ("lcb", "meanstd") else 0.0
            use, delta = argmax_pick(q, scoring, kappa)
            return Selection(a_e if use else a_p, a_p, use, "argmax", None, delta)
        if form == "thompson":
            if greedy:
                self._count("argmax")
                use, delta = argmax_pick(q, "mean")
                return Selection(a_e if use else a_p, a_p, use, "argmax", None, delta)
            self._count("gate_draw")
            use, delta = thompson_pick(q, self.rng)
            return Selection(a_e if use else a_p, a_p, use, "gate_draw", None, delta)
        raise ValueError(f"method {m!r} has no action-selection rule")
