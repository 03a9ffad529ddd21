"""Running mean/std observation normalisation (Chan et al. parallel Welford update)."""

from __future__ import annotations

import numpy as np


class RunningNorm:
    def __init__(self, dim: int, eps: float = 1e-6):
        self.dim = int(dim)
        self.eps = float(eps)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)
        self.frozen = False

    def update(self, x) -> None:
        """Fold one observation ``(dim,)`` or a batch ``(n, dim)`` into the statistics."""
        if self.frozen:
            return
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        n_b = x.shape[0]
        if n_b == 0:
            return
        mean_b = x.mean(axis=0)
        m2_b = ((x - mean_b) ** 2).sum(axis=0)
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / n)
        self.m2 = self.m2 + m2_b + delta**2 * (self.count * n_b / n)
        self.count = n

    @property
    def var(self) -> np.ndarray:
        return self.m2 / self.count if self.count > 0 else np.ones(self.dim)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def normalize(self, x) -> np.ndarray:
        """Pure apply: never touches the statistics."""
        return (np.asarray(x, dtype=np.float64) - self.mean) / np.maximum(self.std, self.eps)

    def state(self) -> dict:
        return {"count": np.array(self.count), "mean": self.mean.copy(), "m2": self.m2.copy(), "eps": np.array(self.eps)}

    def load_state(self, s: dict) -> None:
        self.count = int(s["count"])
        self.mean = np.array(s["mean"], dtype=np.float64)
        self.m2 = np.array(s["m2"], dtype=np.float64)
        self.eps = float(s["eps"])


class IdentityNorm(RunningNorm):
    """Drop-in for the no-normalisation ablation."""

    def update(self, x) -> None:
        return

    def normalize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)
