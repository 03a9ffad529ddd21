"""Action-selection rules that decide between the expert and the learner.

``ensemble`` arguments are anything with ``q_values(s_tilde, actions) -> (N, K)``.
Candidate order in every helper is ``[policy, expert]``.
"""

from __future__ import annotations

import math

import numpy as np


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def pessimistic_score(q, kappa: float) -> np.ndarray:
    """``min_n Q - kappa (max_n Q - min_n Q)`` over the leading ensemble axis."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    q = np.asarray(q, dtype=np.float64)
    lo, hi = q.min(axis=0), q.max(axis=0)
    return lo - kappa * (hi - lo)


def meanstd_score(q, kappa: float) -> np.ndarray:
    """``mean_n Q - kappa std_n Q`` (population std)."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    q = np.asarray(q, dtype=np.float64)
    return q.mean(axis=0) - kappa * q.std(axis=0)


def mean_score(q, kappa: float = 0.0) -> np.ndarray:
    return np.asarray(q, dtype=np.float64).mean(axis=0)


def min_score(q, kappa: float = 0.0) -> np.ndarray:
    return np.asarray(q, dtype=np.float64).min(axis=0)


SCORERS = {
    "lcb": pessimistic_score,
    "meanstd": meanstd_score,
    "mean": mean_score,
    "min": min_score,
}


def gate_probability(delta: float, tau: float) -> float:
    """``sigma(delta / tau)``: probability of executing the expert action."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return _sigmoid(float(delta) / tau)


def edge_gate(q_pair, kappa: float, tau: float, rng: np.random.Generator, scoring: str = "lcb"):
    """Gate draw from critic outputs ``(N, 2)`` ordered ``[policy, expert]``; returns ``(b, p, delta)``."""
    s = SCORERS[scoring](q_pair, kappa)
    delta = float(s[1] - s[0])
    p = gate_probability(delta, tau)
    b = bool(rng.random() < p)
    return b, p, delta


def edge_select(s_tilde, policy_action, expert_action, ensemble, gate, rng: np.random.Generator):
    """Stochastic expert/policy mix; returns ``(action, p, b)``."""
    q = ensemble.q_values(s_tilde, np.stack([policy_action, expert_action]))
    b, p, _ = edge_gate(q, gate.kappa, gate.tau, rng, getattr(gate, "scoring", "lcb"))
    b_f = float(b)
    action = b_f * np.asarray(expert_action) + (1.0 - b_f) * np.asarray(policy_action)
    return action, p, b


def argmax_pick(q_pair, scoring: str = "mean", kappa: float = 0.0) -> tuple[bool, float]:
    """``(expert wins, score gap)``; exact ties go to the policy."""
    s = SCORERS[scoring](q_pair, kappa)
    delta = float(s[1] - s[0])
    return delta > 0.0, delta


def ibrl_select(s_tilde, policy_action, expert_action, ensemble, aggregate: str = "mean"):
    q = ensemble.q_values(s_tilde, np.stack([policy_action, expert_action]))
    use_expert, _ = argmax_pick(q, aggregate)
    return np.asarray(expert_action if use_expert else policy_action)


def jsrl_curriculum_horizon(progress: float, horizon: int) -> int:
    """Linear handoff schedule: ``horizon`` at progress 0 down to 0 at progress 1."""
    progress = min(max(float(progress), 0.0), 1.0)
    return int(round(horizon * (1.0 - progress)))


def jsrl_curriculum_select(t_episode: int, h_t: int, expert_action, policy_action):
    if h_t < 0:
        raise ValueError("handoff step must be >= 0")
    return np.asarray(expert_action if t_episode < h_t else policy_action)


def jsrl_tt_uses_expert(global_step: int, rho_warm: float, total_steps: int) -> bool:
    return global_step < rho_warm * total_steps


def jsrl_tt_select(global_step: int, rho_warm: float, total_steps: int, expert_action, policy_action):
    return np.asarray(expert_action if jsrl_tt_uses_expert(global_step, rho_warm, total_steps) else policy_action)


def residual_select(expert_action, residual_action, bound: float = 1.0) -> np.ndarray:
    return np.clip(np.asarray(expert_action) + bound * np.asarray(residual_action), -1.0, 1.0)


def thompson_pick(q_pair, rng: np.random.Generator) -> tuple[bool, float]:
    """One Gaussian draw per arm from the ensemble mean/std; ``(expert wins, draw gap)``."""
    q = np.asarray(q_pair, dtype=np.float64)
    mu, sd = q.mean(axis=0), q.std(axis=0)
    draws = mu + sd * rng.standard_normal(2)
    return bool(draws[1] > draws[0]), float(draws[1] - draws[0])


def literal_thompson_select(s_tilde, actions, ensemble, rng: np.random.Generator):
    """``actions`` is ``[policy, expert]``; returns the chosen action."""
    acts = np.asarray(actions)
    use_expert, _ = thompson_pick(ensemble.q_values(s_tilde, acts), rng)
    return acts[1] if use_expert else acts[0]
