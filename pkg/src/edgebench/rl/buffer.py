"""Preallocated ring replay buffer with a uniform seeded sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    exp_act: np.ndarray
    next_exp_act: np.ndarray


class ReplayBuffer:
    """Stores augmented observations, executed actions and the expert's proposals.

    The expert proposals are extra columns for the bootstrap variants and the
    residual learner; the ``act`` column is whatever the caller passes, which
    the training loop keeps as the executed action.
    """

    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.act = np.zeros((self.capacity, act_dim))
        self.exp_act = np.zeros((self.capacity, act_dim))
        self.next_exp_act = np.zeros((self.capacity, act_dim))
        self.rew = np.zeros(self.capacity)
        self.done = np.zeros(self.capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, done, exp_act=None, next_exp_act=None) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.exp_act[i] = 0.0 if exp_act is None else exp_act
        self.next_exp_act[i] = 0.0 if next_exp_act is None else next_exp_act
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(
            self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx],
            self.done[idx], self.exp_act[idx], self.next_exp_act[idx],
        )

    def state(self) -> dict:
        return {
            "obs": self.obs[: self.size], "act": self.act[: self.size], "rew": self.rew[: self.size],
            "next_obs": self.next_obs[: self.size], "done": self.done[: self.size],
            "exp_act": self.exp_act[: self.size], "next_exp_act": self.next_exp_act[: self.size],
            "ptr": self.ptr,
        }
