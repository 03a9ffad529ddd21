"""Differential-evolution tuning of the CPG expert, and a synthetic gait plant to tune it on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import differential_evolution

from .controllers import CPG


@dataclass
class DEResult:
    params: np.ndarray
    fitness: float
    initial_best: float
    history: list[float] = field(default_factory=list)
    evaluated: list[np.ndarray] = field(default_factory=list)


def de_maximize(
    fitness,
    bounds,
    pop_multiplier: int = 5,
    iterations: int = 30,
    seed: int = 0,
    record: bool = False,
) -> DEResult:
    """DE/rand/1/bin maximisation of ``fitness(x)`` over a box; returns the best-so-far."""
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    evaluated: list[np.ndarray] = []
    values: list[float] = []

    def objective(x):
        f = float(fitness(x))
        values.append(f)
        if record:
            evaluated.append(np.array(x))
        return -f

    history: list[float] = []

    def callback(intermediate_result):
        history.append(-float(intermediate_result.fun))

    pop = pop_multiplier * len(lo)
    res = differential_evolution(
        objective,
        list(zip(lo, hi)),
        strategy="rand1bin",
        popsize=pop_multiplier,
        maxiter=iterations,
        tol=0.0,
        atol=0.0,
        polish=False,
        init="latinhypercube",
        seed=seed,
        callback=callback,
    )
    return DEResult(
        params=np.asarray(res.x),
        fitness=-float(res.fun),
        initial_best=max(values[:pop]),
        history=history,
        evaluated=evaluated,
    )


class GaitProxyPlant:
    """Open-loop oscillatory plant whose return rewards matching a hidden gait.

    Per step the reward is ``mean_i a_i(t) * sin(2 pi f* t + phi*_i + jitter)``,
    so return peaks when the CPG runs at ``f*`` with phases ``phi*`` and full
    amplitude. The seed jitters the reference phase slightly.
    """

    def __init__(self, target_frequency=2.0, target_phases=None, dt=0.01, horizon=1000, jitter=0.05):
        self.f = float(target_frequency)
        self.phi = np.asarray(
            target_phases if target_phases is not None else np.linspace(0.0, 2.0 * math.pi, 6, endpoint=False),
            dtype=np.float64,
        )
        self.dt, self.horizon, self.jitter = float(dt), int(horizon), float(jitter)
        self.t = np.arange(self.horizon) * self.dt

    def episode_return(self, params, seed: int) -> float:
        cpg = CPG.from_params(params, self.dt)
        shift = self.jitter * np.random.default_rng(seed).standard_normal()
        # closed form of stepping cpg.act from z = 0: phase advances 2 pi f dt per step
        phase = (2.0 * math.pi * cpg.frequency * self.t)[:, None]
        a = np.clip(cpg.amplitudes * np.sin(phase + cpg.phases), -1.0, 1.0)
        ref = np.sin(2.0 * math.pi * self.f * self.t[:, None] + self.phi + shift)
        return float(np.sum(np.mean(a * ref, axis=1)))


def de_tune_cpg(
    plant,
    bounds=None,
    pop_multiplier: int = 5,
    iterations: int = 30,
    seeds_per_eval: int = 8,
    seed: int = 0,
    dt: float | None = None,
) -> tuple[CPG, DEResult]:
    """Tune the 13 CPG scalars to maximise mean return over ``seeds_per_eval`` fixed seeds."""
    bounds = bounds if bounds is not None else CPG.bounds(6)
    eval_seeds = list(range(seeds_per_eval))

    def fitness(x):
        return np.mean([plant.episode_return(x, s) for s in eval_seeds])

    res = de_maximize(fitness, bounds, pop_multiplier, iterations, seed)
    return CPG.from_params(res.params, dt if dt is not None else plant.dt), res
