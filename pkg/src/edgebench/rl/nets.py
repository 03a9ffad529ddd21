"""Small ReLU MLPs with a leading ensemble axis, hand-written backprop, and Adam."""

from __future__ import annotations

import numpy as np


class StackedMLP:
    """``E`` independent MLPs evaluated together.

    Parameters are ``[W0, b0, W1, b1, ...]`` with ``W_k`` of shape
    ``(E, fan_in, fan_out)`` and ``b_k`` of shape ``(E, 1, fan_out)``.
    Inputs are ``(B, in)`` (shared across members) or ``(E, B, in)``.
    """

    def __init__(self, sizes, n_members: int, rng: np.random.Generator, final_scale: float | None = None, dtype=np.float64):
        self.sizes = [int(s) for s in sizes]
        self.E = int(n_members)
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for k, (fi, fo) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fi)
            if k == n_layers - 1 and final_scale is not None:
                bound = final_scale
            self.params.append(rng.uniform(-bound, bound, size=(self.E, fi, fo)).astype(dtype))
            self.params.append(rng.uniform(-bound, bound, size=(self.E, 1, fo)).astype(dtype))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray, params=None):
        ps = self.params if params is None else params
        h = x if x.ndim == 3 else x[None]
        acts = [h]
        for k in range(self.n_layers):
            h = np.matmul(h, ps[2 * k])
            h += ps[2 * k + 1]
            if k < self.n_layers - 1:
                np.maximum(h, 0.0, out=h)
            acts.append(h)
        return h, acts

    def backward(self, acts, dout: np.ndarray, param_grads: bool = True, input_grad: bool = False, params=None):
        """Gradients of ``sum(dout * out)``; returns ``(param grads or None, d input or None)``."""
        ps = self.params if params is None else params
        grads = [None] * len(ps) if param_grads else None
        g = dout
        for k in range(self.n_layers - 1, -1, -1):
            if k < self.n_layers - 1:
                g = g * (acts[k + 1] > 0.0)
            if param_grads:
                a_in = acts[k]
                if a_in.shape[0] != g.shape[0]:
                    a_in = np.broadcast_to(a_in, (g.shape[0],) + a_in.shape[1:])
                grads[2 * k] = np.matmul(a_in.transpose(0, 2, 1), g)
                grads[2 * k + 1] = g.sum(axis=1, keepdims=True)
            if k > 0 or input_grad:
                g = np.matmul(g, ps[2 * k].transpose(0, 2, 1))
        return grads, (g if input_grad else None)

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = float(lr), betas[0], betas[1], eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            dst[...] = src
