"""Seed-reproducible simulators: ``fourtank``, ``plane3dcircle``, ``glassfurnace``."""

from __future__ import annotations

from dataclasses import replace
from functools import lru_cache

from .base import Env, EnvError, EnvSpec, EnvState, load_constants, perturb_observation
from .fourtank import FourTank
from .furnace import GlassFurnace
from .plane import Plane3DCircle
from .toy import Integrator1D

ENV_IDS = ("fourtank", "plane3dcircle", "glassfurnace")

_REGISTRY: dict[str, type[Env]] = {
    "fourtank": FourTank,
    "plane3dcircle": Plane3DCircle,
    "glassfurnace": GlassFurnace,
    "integrator": Integrator1D,
}


@lru_cache(maxsize=None)
def make(env_id: str) -> Env:
    """Shared, stateless simulator instance for ``env_id``."""
    try:
        cls = _REGISTRY[env_id]
    except KeyError:
        raise ValueError(f"unknown env_id {env_id!r}; expected one of {sorted(_REGISTRY)}") from None
    return cls()


def reset(env_id: str, seed: int, options: dict | None = None) -> EnvState:
    return make(env_id).reset(seed, options)


def step(state: EnvState, action) -> tuple[EnvState, float]:
    return make(state.env_id).step(state, action)


def spec_for(env_id: str, gains_dir=None) -> EnvSpec:
    """EnvSpec with ``j_exp`` filled from the task's gain file when one exists."""
    spec = make(env_id).spec
    from ..experts.gainfile import find_gain_file, load_gain_file

    path = find_gain_file(env_id, gains_dir)
    if path is None:
        return spec
    return replace(spec, j_exp=load_gain_file(path).j_exp)


__all__ = [
    "ENV_IDS",
    "Env",
    "EnvError",
    "EnvSpec",
    "EnvState",
    "FourTank",
    "GlassFurnace",
    "Integrator1D",
    "Plane3DCircle",
    "load_constants",
    "make",
    "perturb_observation",
    "reset",
    "spec_for",
    "step",
]
