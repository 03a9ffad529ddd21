"""Expert-integration mechanisms and the ablation-variant matrix."""

from __future__ import annotations

from .gates import (
    SCORERS,
    argmax_pick,
    edge_gate,
    edge_select,
    gate_probability,
    ibrl_select,
    jsrl_curriculum_horizon,
    jsrl_curriculum_select,
    jsrl_tt_select,
    jsrl_tt_uses_expert,
    literal_thompson_select,
    meanstd_score,
    pessimistic_score,
    residual_select,
    thompson_pick,
)
from .methods import (
    FOUR_CORNERS,
    MECHANISMS,
    METHOD_IDS,
    TUNED_GATES,
    VARIANT_IDS,
    GateConfig,
    MethodSpec,
    Selection,
    Selector,
    method_spec,
    variant_dispatch,
)

__all__ = [
    "FOUR_CORNERS", "MECHANISMS", "METHOD_IDS", "SCORERS", "TUNED_GATES", "VARIANT_IDS",
    "GateConfig", "MethodSpec", "Selection", "Selector",
    "argmax_pick", "edge_gate", "edge_select", "gate_probability", "ibrl_select",
    "jsrl_curriculum_horizon", "jsrl_curriculum_select", "jsrl_tt_select", "jsrl_tt_uses_expert",
    "literal_thompson_select", "meanstd_score", "method_spec", "pessimistic_score",
    "residual_select", "thompson_pick", "variant_dispatch",
]
