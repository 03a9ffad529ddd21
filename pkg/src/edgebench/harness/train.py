"""Single-seed training run: behaviour loop, replay, SAC updates, periodic deterministic evaluation."""

from __future__ import annotations

import time

import numpy as np

from .. import envs
from ..envs import perturb_observation
from ..experts import RandomExpert, bias_action, draw_action_bias, load_expert, undertune
from ..integration import GateConfig, Selector, method_spec
from ..integration.gates import residual_select
from ..integration.methods import TUNED_GATES, MethodSpec
from ..rl import NonFiniteLoss, ReplayBuffer, SACAgent, SACConfig
from .config import RunConfig
from .records import GateStats, RunRecord

NO_EXPERT = ("sac",)
POLICY_ONLY_EVAL = ("sac", "jsrl_curriculum", "jsrl_tt")


def gate_config(cfg: RunConfig) -> GateConfig:
    kappa, tau = TUNED_GATES.get(cfg.env_id, (1.0, 1.0))
    return GateConfig(
        kappa if cfg.kappa is None else cfg.kappa,
        tau if cfg.tau is None else cfg.tau,
        cfg.scoring,
    )


def resolve_method(cfg: RunConfig) -> MethodSpec:
    return method_spec(cfg.method, gate_config(cfg), **cfg.method_knobs)


def sac_config(cfg: RunConfig, spec: MethodSpec) -> SACConfig:
    base = SACConfig.from_dict(dict(cfg.sac)) if cfg.sac else SACConfig()
    d = base.to_dict()
    d.update(
        n_critics=spec.n_critics,
        normalize_obs=spec.normalize_obs,
        target_mode=spec.target_mode,
        gate_kappa=spec.gate.kappa,
        gate_tau=spec.gate.tau,
        residual=spec.method_id == "residual",
        residual_bound=spec.residual_bound,
    )
    return SACConfig.from_dict(d)


class _Augmenter:
    """Builds the learner input: ``[s, z]`` for expert-using methods, ``s`` otherwise."""

    def __init__(self, use_z: bool):
        self.use_z = use_z

    def __call__(self, obs, z) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if not self.use_z or z is None or len(z) == 0:
            return obs.copy()
        return np.concatenate([obs, np.asarray(z, dtype=np.float64)])


def _episode_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**62))


def eval_seeds(seed: int, n: int) -> list[int]:
    return [1_000_000 + 1_000 * int(seed) + k for k in range(n)]


def expert_episode(controller, env_id: str, seed: int, bias=None) -> float:
    env = envs.make(env_id)
    state = env.reset(seed)
    z = controller.initial_state(state.observation)
    total = 0.0
    while not state.done:
        a, z = controller.act(state.observation, z)
        if bias is not None:
            a = bias_action(a, bias)
        state, r = env.step(state, a)
        total += r
    return total


class Trainer:
    def __init__(self, cfg: RunConfig, seed: int):
        self.cfg = cfg
        self.seed = int(seed)
        self.spec = resolve_method(cfg)
        self.env = envs.make(cfg.env_id)
        self.env_spec = self.env.spec
        ss = np.random.SeedSequence(self.seed)
        (self.ss_agent, ss_episodes, ss_select, ss_warm, ss_buffer, ss_pert, ss_eval, ss_random) = ss.spawn(8)
        self.rng_episodes = np.random.default_rng(ss_episodes)
        self.rng_select = np.random.default_rng(ss_select)
        self.rng_warm = np.random.default_rng(ss_warm)
        self.rng_buffer = np.random.default_rng(ss_buffer)
        self.rng_pert = np.random.default_rng(ss_pert)
        self.ss_eval = ss_eval
        self.ss_random = ss_random
        self.rng_provenance = {"seed": self.seed, "entropy": int(ss.entropy)}

        self.base_expert = None
        self.j_exp = None
        needs_expert = self.spec.method_id not in NO_EXPERT
        if needs_expert:
            self.base_expert, gf = load_expert(cfg.env_id, cfg.gains_dir)
            self.j_exp = float(gf.j_exp)
        elif cfg.env_id in envs.ENV_IDS:
            try:
                _, gf = load_expert(cfg.env_id, cfg.gains_dir)
                self.j_exp = float(gf.j_exp)
            except FileNotFoundError:
                self.j_exp = None

        pert = cfg.perturbation
        self.train_expert = self.base_expert
        self.bias = None
        self.obs_sigma = 0.0
        # every perturbation draw comes from its own stream so sigma = 0 matches the clean run
        if pert.type == "undertune" and self.base_expert is not None:
            self.train_expert = undertune(self.base_expert, pert.sigma, self.rng_pert)
        elif pert.type == "action_bias":
            self.bias = draw_action_bias(pert.sigma, self.env_spec.action_dim, self.rng_pert)
            if pert.sigma == 0:
                self.bias = None
        elif pert.type == "obs_noise":
            self.obs_sigma = float(pert.sigma)

        if self.spec.random_expert:
            self.train_expert = RandomExpert(self.env_spec.action_dim, int(self.ss_random.generate_state(1)[0]))

        z_dim = 0
        if needs_expert and self.spec.state_aug and not self.spec.random_expert:
            z_dim = int(self.base_expert.state_dim)
        self.augment = _Augmenter(z_dim > 0)
        self.in_dim = self.env_spec.obs_dim + z_dim
        self.agent = SACAgent(self.in_dim, self.env_spec.action_dim, sac_config(cfg, self.spec),
                              seed=int(self.ss_agent.generate_state(1)[0]))
        self.buffer = ReplayBuffer(self.in_dim, self.env_spec.action_dim,
                                   min(cfg.buffer_capacity, max(1, cfg.total_steps + cfg.expert_prefill_steps)))
        self.selector = Selector(self.spec, cfg.total_steps, self.env_spec.horizon, self.rng_select)
        self.gate_stats = GateStats(cfg.gate_window, cfg.gate_hist_bins, cfg.gate_log_decimation)

    # -- evaluation -----------------------------------------------------------------
    def _eval_expert(self, k: int):
        if self.spec.random_expert:
            return RandomExpert(self.env_spec.action_dim, int(self.ss_random.generate_state(2 + k)[-1]))
        return self.base_expert

    def evaluate(self, eval_index: int) -> list[float]:
        cfg, spec = self.cfg, self.spec
        rng_noise = np.random.default_rng([*self.ss_eval.generate_state(2), eval_index])
        selector = Selector(spec, cfg.total_steps, self.env_spec.horizon, np.random.default_rng(0))
        out = []
        for k, es in enumerate(eval_seeds(self.seed, cfg.eval_episodes)):
            expert = self._eval_expert(k) if spec.method_id not in NO_EXPERT else None
            state = self.env.reset(es)
            z = expert.initial_state(state.observation) if expert is not None else None
            total = 0.0
            while not state.done:
                obs = state.observation
                a_e = None
                if expert is not None:
                    a_e, z_next = expert.act(obs, z)
                    if self.bias is not None:
                        a_e = bias_action(a_e, self.bias)
                seen = perturb_observation(obs, self.obs_sigma, rng_noise) if self.obs_sigma > 0 else obs
                s = self.augment(seen, z)
                if spec.method_id == "expert":
                    a = a_e
                elif spec.method_id in POLICY_ONLY_EVAL:
                    a = self.agent.policy_action(s, deterministic=True)
                elif spec.method_id == "residual":
                    a = residual_select(a_e, self.agent.policy_action(s, deterministic=True), spec.residual_bound)
                else:
                    a_p = self.agent.policy_action(s, deterministic=True)
                    a = selector.select(lambda acts: self.agent.q_values(s, acts), a_p, a_e, state.step_index,
                                        cfg.total_steps, greedy=True).action
                state, r = self.env.step(state, a)
                total += r
                if expert is not None:
                    z = z_next
            out.append(total)
        return out

    # -- behaviour ------------------------------------------------------------------------
    def _prefill(self, n_steps: int) -> int:
        """Expert-only transitions stored before training starts."""
        stored = 0
        expert = self.train_expert
        while stored < n_steps:
            state = self.env.reset(_episode_seed(self.rng_episodes))
            z = expert.initial_state(state.observation)
            a_e, z_next = expert.act(state.observation, z)
            while not state.done and stored < n_steps:
                s = self.augment(state.observation, z)
                self.agent.norm.update(s)
                nxt, r = self.env.step(state, a_e)
                a_e2, z_next2 = expert.act(nxt.observation, z_next)
                s2 = self.augment(nxt.observation, z_next)
                terminal = nxt.done and nxt.step_index < self.env_spec.horizon
                self.buffer.add(s, a_e, r, s2, terminal, a_e, a_e2)
                state, z, a_e, z_next = nxt, z_next, a_e2, z_next2
                stored += 1
        return stored

    def run(self) -> RunRecord:
        cfg, spec = self.cfg, self.spec
        t0 = time.perf_counter()
        rec = RunRecord(
            config=cfg.to_dict(), config_hash=cfg.hash(), cell_hash=cfg.cell_hash(), seed=self.seed,
            env_id=cfg.env_id, method=spec.name, perturbation=cfg.perturbation.label,
            j_exp_unperturbed=self.j_exp, j_ref=float(self.env_spec.j_ref), rng=self.rng_provenance,
        )
        if self.base_expert is not None:
            expert = self._eval_expert(0) if spec.random_expert else self.base_expert
            rec.expert_eval_returns = [expert_episode(expert, cfg.env_id, es, self.bias)
                                       for es in eval_seeds(self.seed, cfg.eval_episodes)]
        n_eval = 0
        rec.append_eval(0, self.evaluate(n_eval))
        try:
            if spec.method_id == "expert":
                # no learning: the evaluation at every point is the same deterministic rollout
                for step in range(cfg.eval_interval, cfg.total_steps + 1, cfg.eval_interval):
                    n_eval += 1
                    rec.append_eval(step, self.evaluate(n_eval))
            else:
                if spec.expert_prefill_per_million > 0:
                    n = int(round(spec.expert_prefill_per_million * cfg.total_steps / 1_000_000))
                    rec.n_prefill = self._prefill(n)
                self._train(rec)
        except NonFiniteLoss as exc:
            rec.status = "aborted"
            rec.error = f"{exc}: {exc.diagnostics}"
        rec.counters = dict(self.selector.counters)
        rec.gate = self.gate_stats.to_dict()
        rec.n_updates = int(self.agent.n_updates)
        rec.finalize(cfg.total_steps, cfg.final_window_fraction)
        rec.wall_clock_s = time.perf_counter() - t0
        return rec

    def _train(self, rec: RunRecord) -> None:
        cfg, spec, agent = self.cfg, self.spec, self.agent
        expert = self.train_expert
        uses_expert = expert is not None
        horizon = self.env_spec.horizon
        batch_size = agent.cfg.batch_size
        warm_uniform = spec.method_id != "residual"
        n_eval = 0
        state = None
        ep_return = 0.0
        for step in range(cfg.total_steps):
            if state is None or state.done:
                if state is not None:
                    rec.train_episode_returns.append(float(ep_return))
                state = self.env.reset(_episode_seed(self.rng_episodes))
                ep_return = 0.0
                self.selector.start_episode(step)
                z = z_next = a_e = None
                if uses_expert:
                    z = expert.initial_state(state.observation)
                    a_e, z_next = expert.act(state.observation, z)
            s = self.augment(state.observation, z)
            agent.norm.update(s)
            if step < cfg.learning_starts and warm_uniform:
                a_pol = self.rng_warm.uniform(-1.0, 1.0, self.env_spec.action_dim)
            else:
                a_pol = agent.policy_action(s)
            sel = self.selector.select(lambda acts: agent.q_values(s, acts), a_pol,
                                       a_e if uses_expert else a_pol, state.step_index, step)
            nxt, r = self.env.step(state, sel.action)
            ep_return += r
            a_e2 = z_next2 = None
            if uses_expert:
                a_e2, z_next2 = expert.act(nxt.observation, z_next)
            s2 = self.augment(nxt.observation, z_next)
            terminal = nxt.done and nxt.step_index < horizon
            stored = sel.policy_action if spec.store_policy_action else sel.action
            self.buffer.add(s, stored, r, s2, terminal, a_e, a_e2)
            self.gate_stats.record(step, sel.used_expert, sel.p, sel.delta)
            state, z, a_e, z_next = nxt, z_next, a_e2, z_next2
            if step + 1 >= cfg.learning_starts and len(self.buffer) >= batch_size:
                agent.update(self.buffer.sample(batch_size, self.rng_buffer))
            if (step + 1) % cfg.eval_interval == 0:
                n_eval += 1
                rec.append_eval(step + 1, self.evaluate(n_eval))


def train_run(cfg: RunConfig, seed: int | None = None) -> RunRecord:
    """Train one seed (default: the config's first seed) and return its record."""
    return Trainer(cfg, cfg.seeds[0] if seed is None else seed).run()


def train_all(cfg: RunConfig) -> list[RunRecord]:
    return [train_run(cfg, s) for s in cfg.seeds]
