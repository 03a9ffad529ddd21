"""Soft actor-critic with a critic ensemble, written directly against numpy.

The actor is a tanh-squashed Gaussian. Critic targets come in three flavours:
``plain`` (clipped double-Q with entropy), ``ibrl`` (max of the policy and
expert bootstrap values) and ``lcb_gated`` (the softmax gate applied to the
bootstrap). With ``residual=True`` the actor output is a bounded correction
added to the expert action.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .buffer import Batch
from .nets import Adam, StackedMLP
from .norm import IdentityNorm, RunningNorm

LOG2 = math.log(2.0)
TARGET_MODES = ("plain", "ibrl", "lcb_gated")


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def augment(observation, expert_state, expected_dim: int | None = None) -> np.ndarray:
    """``[s, z]``; an empty ``z`` returns ``s`` unchanged."""
    s = np.asarray(observation, dtype=np.float64).ravel()
    z = np.asarray(expert_state, dtype=np.float64).ravel()
    out = np.concatenate([s, z]) if z.size else s.copy()
    if expected_dim is not None and out.size != expected_dim:
        raise ValueError(f"augmented state has dim {out.size}, expected {expected_dim}")
    if not np.all(np.isfinite(out)):
        raise ValueError("augmented state is not finite")
    return out


@dataclass
class SACConfig:
    hidden: tuple[int, ...] = (64, 64)
    n_critics: int = 2
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 256
    polyak: float = 0.005
    init_alpha: float = 0.2
    target_entropy: float | None = None
    log_std_min: float = -5.0
    log_std_max: float = 2.0
    actor_final_scale: float = 3e-3
    normalize_obs: bool = True
    norm_eps: float = 1e-6
    target_mode: str = "plain"
    gate_kappa: float = 0.0
    gate_tau: float = 1.0
    residual: bool = False
    residual_bound: float = 1.0
    dtype: str = "float32"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SACConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, what: str, diagnostics: dict):
        super().__init__(f"non-finite {what} loss: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass
class ActorSample:
    action: np.ndarray  # squashed, (B, A)
    logp: np.ndarray  # (B,)
    u: np.ndarray
    eps: np.ndarray
    std: np.ndarray
    raw: np.ndarray
    cache: list = field(repr=False, default_factory=list)


class SACAgent:
    def __init__(self, obs_dim: int, act_dim: int, config: SACConfig | None = None, seed: int = 0):
        self.cfg = config or SACConfig()
        if self.cfg.n_critics < 2:
            raise ValueError("the critic ensemble needs at least two members")
        if self.cfg.target_mode not in TARGET_MODES:
            raise ValueError(f"unknown target mode {self.cfg.target_mode!r}")
        self.obs_dim, self.act_dim = int(obs_dim), int(act_dim)
        init_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
        init_rng = np.random.default_rng(init_seq)
        self.rng = np.random.default_rng(noise_seq)
        h = list(self.cfg.hidden)
        self.dtype = np.dtype(self.cfg.dtype)
        self.actor = StackedMLP(
            [obs_dim, *h, 2 * act_dim], 1, init_rng, final_scale=self.cfg.actor_final_scale, dtype=self.dtype
        )
        if self.cfg.residual:
            # the correction starts at exactly zero so the composed policy is the expert
            self.actor.params[-2][..., :act_dim] = 0.0
            self.actor.params[-1][..., :act_dim] = 0.0
        self.critic = StackedMLP([obs_dim + act_dim, *h, 1], self.cfg.n_critics, init_rng, dtype=self.dtype)
        self.target_params = self.critic.copy_params()
        self.log_alpha = np.array([math.log(self.cfg.init_alpha)])  # kept in float64
        self.target_entropy = float(self.cfg.target_entropy if self.cfg.target_entropy is not None else -act_dim)
        self.actor_opt = Adam(self.actor.params, self.cfg.lr)
        self.critic_opt = Adam(self.critic.params, self.cfg.lr)
        self.alpha_opt = Adam([self.log_alpha], self.cfg.lr)
        self.norm = RunningNorm(obs_dim, self.cfg.norm_eps) if self.cfg.normalize_obs else IdentityNorm(obs_dim)
        self.n_updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- policy ---------------------------------------------------------------
    def _log_std(self, raw):
        lo, hi = self.cfg.log_std_min, self.cfg.log_std_max
        return lo + 0.5 * (hi - lo) * (np.tanh(raw) + 1.0)

    def sample_actions(self, obs_n: np.ndarray, eps: np.ndarray, params=None) -> ActorSample:
        out, cache = self.actor.forward(obs_n, params)
        out = out[0]
        A = self.act_dim
        mu, raw = out[:, :A], out[:, A:]
        log_std = self._log_std(raw)
        std = np.exp(log_std)
        u = mu + std * eps
        a = np.tanh(u)
        log_det = 2.0 * (LOG2 - u - softplus(-2.0 * u))
        logp = np.sum(-0.5 * eps**2 - log_std - 0.5 * math.log(2.0 * math.pi) - log_det, axis=1)
        return ActorSample(a, logp, u, eps, std, raw, cache)

    def log_prob(self, obs_n: np.ndarray, action: np.ndarray) -> np.ndarray:
        """log pi(action | obs) for squashed actions strictly inside the box."""
        out, _ = self.actor.forward(obs_n)
        out = out[0]
        A = self.act_dim
        mu, log_std = out[:, :A], self._log_std(out[:, A:])
        u = np.arctanh(action)
        eps = (u - mu) / np.exp(log_std)
        log_det = 2.0 * (LOG2 - u - softplus(-2.0 * u))
        return np.sum(-0.5 * eps**2 - log_std - 0.5 * math.log(2.0 * math.pi) - log_det, axis=1)

    def policy_action(self, s_tilde, deterministic: bool = False) -> np.ndarray:
        """Squashed actor output in [-1, 1]^A for one augmented state."""
        x = self.norm.normalize(np.asarray(s_tilde, dtype=np.float64))[None, :].astype(self.dtype)
        out, _ = self.actor.forward(x)
        out = out.astype(np.float64)
        mu = out[0, 0, : self.act_dim]
        if deterministic:
            return np.tanh(mu)
        std = np.exp(self._log_std(out[0, 0, self.act_dim:]))
        return np.tanh(mu + std * self.rng.standard_normal(self.act_dim))

    def compose(self, policy_output: np.ndarray, expert_action: np.ndarray | None) -> np.ndarray:
        """Executed action for a policy output: identity, or the clipped residual sum."""
        if not self.cfg.residual:
            return policy_output
        return np.clip(expert_action + self.cfg.residual_bound * policy_output, -1.0, 1.0)

    def q_values(self, s_tilde, actions) -> np.ndarray:
        """Critic ensemble outputs ``(N, K)`` for one state and ``K`` candidate actions."""
        acts = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        x = self.norm.normalize(np.asarray(s_tilde, dtype=np.float64))
        inp = np.concatenate([np.broadcast_to(x, (acts.shape[0], x.size)), acts], axis=1).astype(self.dtype)
        out, _ = self.critic.forward(inp)
        return out[:, :, 0].astype(np.float64)

    # -- losses -------------------------------------------------------------------
    def _cast(self, batch: Batch) -> Batch:
        dt = self.dtype
        return Batch(
            self.norm.normalize(batch.obs).astype(dt), batch.act.astype(dt), batch.rew.astype(dt),
            self.norm.normalize(batch.next_obs).astype(dt), batch.done.astype(dt),
            batch.exp_act.astype(dt), batch.next_exp_act.astype(dt),
        )

    def critic_target(self, next_obs_n, batch: Batch, eps_next: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        nxt = self.sample_actions(next_obs_n, eps_next)
        a2 = self.compose(nxt.action, batch.next_exp_act)
        B = next_obs_n.shape[0]
        if cfg.target_mode == "plain":
            inp = np.concatenate([next_obs_n, a2], axis=1)
            q_pi, _ = self.critic.forward(inp, self.target_params)
            v = q_pi[:, :, 0].min(axis=0) - self.alpha * nxt.logp
        else:
            inp = np.concatenate(
                [np.concatenate([next_obs_n, a2], axis=1), np.concatenate([next_obs_n, batch.next_exp_act], axis=1)],
                axis=0,
            )
            q, _ = self.critic.forward(inp, self.target_params)
            q_pi, q_e = q[:, :B, 0], q[:, B:, 0]
            v_pi = q_pi.min(axis=0) - self.alpha * nxt.logp
            if cfg.target_mode == "ibrl":
                v = np.maximum(v_pi, q_e.min(axis=0))
            else:
                k = cfg.gate_kappa
                s_pi = q_pi.min(axis=0) - k * (q_pi.max(axis=0) - q_pi.min(axis=0))
                s_e = q_e.min(axis=0) - k * (q_e.max(axis=0) - q_e.min(axis=0))
                p = sigmoid((s_e - s_pi) / cfg.gate_tau)
                v = p * q_e.min(axis=0) + (1.0 - p) * v_pi
        return batch.rew + cfg.gamma * (1.0 - batch.done) * v

    def critic_loss(self, obs_n, act, y, params=None):
        """``sum_n mean_b 0.5 (Q_n - y)^2`` and its parameter gradients."""
        inp = np.concatenate([obs_n, act], axis=1)
        q, cache = self.critic.forward(inp, params)
        err = q[:, :, 0] - y[None, :]
        B = y.shape[0]
        loss = 0.5 * float(np.sum(err**2)) / B
        grads, _ = self.critic.backward(cache, (err / B)[:, :, None], params=params)
        return loss, grads, q[:, :, 0]

    def actor_loss(self, obs_n, eps, exp_act=None, actor_params=None):
        """``mean_b [alpha log pi - min_n Q_n]`` and its actor-parameter gradients."""
        cfg, A = self.cfg, self.act_dim
        B = obs_n.shape[0]
        smp = self.sample_actions(obs_n, eps, actor_params)
        a_exec = self.compose(smp.action, exp_act)
        inp = np.concatenate([obs_n, a_exec], axis=1)
        q, ccache = self.critic.forward(inp)
        q = q[:, :, 0]
        n_star = q.argmin(axis=0)
        qmin = q[n_star, np.arange(B)]
        alpha = self.dtype.type(self.alpha)
        loss = float(np.mean(alpha * smp.logp - qmin))
        mask = np.zeros_like(q)
        mask[n_star, np.arange(B)] = 1.0
        _, dx = self.critic.backward(ccache, mask[:, :, None], param_grads=False, input_grad=True)
        dq_da = dx.sum(axis=0)[:, -A:]
        d_exec = -dq_da / B
        if cfg.residual:
            raw_sum = exp_act + cfg.residual_bound * smp.action
            d_a = d_exec * cfg.residual_bound * (np.abs(raw_sum) < 1.0)
        else:
            d_a = d_exec
        a = smp.action
        d_u = d_a * (1.0 - a**2) + (alpha / B) * 2.0 * a
        d_mu = d_u
        d_logstd = d_u * smp.std * smp.eps - alpha / B
        lo, hi = cfg.log_std_min, cfg.log_std_max
        d_raw = d_logstd * 0.5 * (hi - lo) * (1.0 - np.tanh(smp.raw) ** 2)
        dout = np.concatenate([d_mu, d_raw], axis=1)[None]
        grads, _ = self.actor.backward(smp.cache, dout, params=actor_params)
        return loss, grads, smp.logp

    # -- update -----------------------------------------------------------------------
    def update(self, batch: Batch) -> dict:
        cfg = self.cfg
        B = batch.obs.shape[0]
        batch = self._cast(batch)
        obs_n, next_n = batch.obs, batch.next_obs
        eps_next = self.rng.standard_normal((B, self.act_dim), dtype=self.dtype)
        y = self.critic_target(next_n, batch, eps_next)
        c_loss, c_grads, q = self.critic_loss(obs_n, batch.act, y)
        if not math.isfinite(c_loss):
            raise NonFiniteLoss("critic", {"q_range": [float(np.nanmin(q)), float(np.nanmax(q))],
                                           "target_range": [float(np.nanmin(y)), float(np.nanmax(y))]})
        self.critic_opt.step(self.critic.params, c_grads)

        eps = self.rng.standard_normal((B, self.act_dim), dtype=self.dtype)
        a_loss, a_grads, logp = self.actor_loss(obs_n, eps, batch.exp_act)
        if not math.isfinite(a_loss):
            raise NonFiniteLoss("actor", {"logp_range": [float(np.nanmin(logp)), float(np.nanmax(logp))]})
        self.actor_opt.step(self.actor.params, a_grads)

        alpha_grad = -float(np.mean(logp + self.target_entropy))
        alpha_loss = -float(self.log_alpha[0]) * float(np.mean(logp + self.target_entropy))
        self.alpha_opt.step([self.log_alpha], [np.array([alpha_grad])])

        tau = cfg.polyak
        for tp, p in zip(self.target_params, self.critic.params):
            tp *= 1.0 - tau
            tp += tau * p
        self.n_updates += 1
        return {
            "critic_loss": c_loss,
            "actor_loss": a_loss,
            "alpha_loss": alpha_loss,
            "alpha": self.alpha,
            "entropy": -float(np.mean(logp)),
            "q_mean": float(np.mean(q)),
        }

    # -- checkpoints --------------------------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        d: dict[str, np.ndarray] = {}
        for name, ps in (("actor", self.actor.params), ("critic", self.critic.params), ("target", self.target_params)):
            for i, p in enumerate(ps):
                d[f"{name}_{i}"] = p
        for name, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt), ("alpha_opt", self.alpha_opt)):
            d[f"{name}_t"] = np.array(opt.t)
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                d[f"{name}_m{i}"] = m
                d[f"{name}_v{i}"] = v
        d["log_alpha"] = self.log_alpha
        for k, v in self.norm.state().items():
            d[f"norm_{k}"] = np.asarray(v)
        d["n_updates"] = np.array(self.n_updates)
        d["meta"] = np.array(json.dumps({
            "obs_dim": self.obs_dim, "act_dim": self.act_dim, "config": self.cfg.to_dict(),
            "rng": self.rng.bit_generator.state,
        }))
        return d

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, **self.state_arrays())
        return path

    @classmethod
    def load(cls, path) -> "SACAgent":
        with np.load(path, allow_pickle=False) as f:
            d = {k: f[k] for k in f.files}
        meta = json.loads(str(d["meta"]))
        agent = cls(meta["obs_dim"], meta["act_dim"], SACConfig.from_dict(meta["config"]))
        for name, ps in (("actor", agent.actor.params), ("critic", agent.critic.params), ("target", agent.target_params)):
            for i, p in enumerate(ps):
                p[...] = d[f"{name}_{i}"]
        for name, opt in (("actor_opt", agent.actor_opt), ("critic_opt", agent.critic_opt), ("alpha_opt", agent.alpha_opt)):
            opt.t = int(d[f"{name}_t"])
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                m[...] = d[f"{name}_m{i}"]
                v[...] = d[f"{name}_v{i}"]
        agent.log_alpha[...] = d["log_alpha"]
        agent.norm.load_state({k: d[f"norm_{k}"] for k in ("count", "mean", "m2", "eps")})
        agent.n_updates = int(d["n_updates"])
        agent.rng.bit_generator.state = meta["rng"]
        return agent
