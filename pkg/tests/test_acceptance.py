"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line."""

from __future__ import annotations

import itertools
import json
import math
import time

import numpy as np
import pytest
from oracles import (
    brute_holm,
    brute_iqm,
    brute_mwu,
    brute_permutation,
    frozen_critic_policy_arm_count,
    sac_gradient_errors,
)
from scipy import stats

from edgebench import envs
from edgebench.experts import FOPDTPlant, RelaySettings, fopdt_ultimate, load_expert, relay_experiment
from edgebench.harness import Perturbation, RunConfig, RunRecord, train_all
from edgebench.harness.cli import main
from edgebench.harness.train import eval_seeds, gate_config
from edgebench.integration import FOUR_CORNERS, edge_gate, gate_probability
from edgebench.stats import (
    bootstrap_ci_iqm,
    ena,
    holm_bonferroni,
    iqm,
    mann_whitney_two_sided,
    permutation_one_sided,
    policy_arm_lower_bound,
)

pytestmark = pytest.mark.acceptance


def verdict(capsys, number: int, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}")
    assert ok, detail


def _final_scalars(records):
    assert all(r.status == "ok" for r in records), [r.error for r in records]
    return np.array([r.final_window_scalar for r in records])


def test_c01_gate_correctness(capsys):
    t0 = time.perf_counter()
    ok = gate_probability(0.0, 1.0) == 0.5 and gate_probability(0.0, 0.01) == 0.5
    deltas = np.linspace(-30, 30, 2001)
    probs = np.array([gate_probability(d, 2.0) for d in deltas])
    ok &= bool(np.all(np.diff(probs) > 0))
    rates = {}
    rng = np.random.default_rng(0)
    n = 10_000
    for p in (0.1, 0.5, 0.9):
        tau = 0.8
        delta = tau * math.log(p / (1 - p))
        # equal ensemble members: zero spread, so the score gap is exactly delta
        q = np.array([[0.0, delta], [0.0, delta]])
        k = sum(edge_gate(q, 1.0, tau, rng)[0] for _ in range(n))
        ci = stats.binomtest(k, n, p).proportion_ci(0.99)
        rates[p] = k / n
        ok &= ci.low <= p <= ci.high
    dt = time.perf_counter() - t0
    ok &= dt < 10
    verdict(capsys, 1, "gate correctness", bool(ok), f"rates {rates}, {dt:.1f}s")


def test_c02_coverage_bound_fourtank(capsys):
    t0 = time.perf_counter()
    cfg = RunConfig(env_id="fourtank", method="edge", total_steps=50_000, seeds=(0,), gate_window=1_000)
    rec = train_all(cfg)[0]
    dt = time.perf_counter() - t0
    windows = rec.gate["windows"]
    tau = gate_config(cfg).tau
    bad = []
    for w in windows:
        lb = policy_arm_lower_bound(w["n"], w["p_max"], 0.99, n_windows=len(windows))
        if w["n_policy"] < lb or w["p_max"] > gate_probability(w["delta_max"], tau) + 1e-9:
            bad.append((w["start"], w["n_policy"], lb, w["p_max"]))
    worst = min(w["n_policy"] - policy_arm_lower_bound(w["n"], w["p_max"], 0.99, len(windows)) for w in windows)
    ok = rec.status == "ok" and len(windows) == 50 and not bad and dt < 30 * 60
    verdict(capsys, 2, "coverage lower bound", ok,
            f"{len(windows)} windows, violations {bad[:3]}, min slack {worst}, {dt:.0f}s")


def test_c03_blind_spot_contrast(capsys):
    t0 = time.perf_counter()
    n, gap, tau = 10_000, 1.0, 1.0
    ibrl, _ = frozen_critic_policy_arm_count("ibrl", n, q_gap=gap, tau=tau)
    edge, _ = frozen_critic_policy_arm_count("edge", n, q_gap=gap, tau=tau)
    need = (1 - gate_probability(gap, tau)) * n * (1 - 0.05)
    dt = time.perf_counter() - t0
    ok = ibrl == 0 and edge >= need and dt < 60
    verdict(capsys, 3, "blind-spot contrast", ok, f"IBRL {ibrl}, EDGE {edge} >= {need:.0f}, {dt:.1f}s")


def test_c04_residual_inheritance(capsys):
    t0 = time.perf_counter()
    cfg = RunConfig(env_id="fourtank", method="residual", total_steps=0, seeds=tuple(range(5)))
    records = train_all(cfg)
    ratios = [r.eval_mean[0] / np.mean(r.expert_eval_returns) for r in records]
    dt = time.perf_counter() - t0
    ok = all(abs(x - 1) <= 0.05 for x in ratios) and all(r.eval_steps[0] == 0 for r in records) and dt < 300
    verdict(capsys, 4, "residual inheritance", ok, f"first-eval/expert ratios {np.round(ratios, 4).tolist()}, {dt:.0f}s")


def test_c05_jsrl_tt_below_edge_under_undertuning(capsys):
    t0 = time.perf_counter()
    seeds = tuple(range(10))
    pert = Perturbation("undertune", 0.5)
    jsrl = _final_scalars(train_all(RunConfig(env_id="fourtank", method="jsrl_tt", total_steps=50_000,
                                              seeds=seeds, perturbation=pert)))
    edge = _final_scalars(train_all(RunConfig(env_id="fourtank", method="edge", total_steps=50_000,
                                              seeds=seeds, perturbation=pert)))
    p = permutation_one_sided(jsrl, edge, "less", rng=42)
    dt = time.perf_counter() - t0
    ok = p < 0.1 and dt < 4 * 3600
    verdict(capsys, 5, "JSRL-tt < EDGE (directional)", ok,
            f"IQM JSRL-tt {iqm(jsrl):.1f}, EDGE {iqm(edge):.1f}, p {p:.4g}, {dt:.0f}s")


def test_c06_random_expert_sanity(capsys):
    t0 = time.perf_counter()
    seeds = tuple(range(5))
    rand = _final_scalars(train_all(RunConfig(env_id="fourtank", method="random_expert", total_steps=50_000,
                                              seeds=seeds)))
    sac = _final_scalars(train_all(RunConfig(env_id="fourtank", method="sac", total_steps=50_000, seeds=seeds)))
    lo, hi = bootstrap_ci_iqm(sac)
    excess = iqm(rand) - iqm(sac)
    dt = time.perf_counter() - t0
    ok = excess <= hi - lo
    verdict(capsys, 6, "random-expert sanity", ok,
            f"IQM random_expert {iqm(rand):.1f}, SAC {iqm(sac):.1f}, excess {excess:.1f} <= width {hi - lo:.1f}, {dt:.0f}s")


def _instances(rng, n_per_split=6):
    for na in range(1, 12):
        for nb in range(1, 13 - na):
            for _ in range(n_per_split):
                yield rng.integers(0, 6, na).astype(float), rng.integers(0, 6, nb).astype(float)


def test_c07_statistics_oracles(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    counts = dict(iqm=0, mwu=0, holm=0, perm=0)
    bad = []
    for a, b in _instances(rng):
        pooled = np.concatenate([a, b])
        if len(pooled) >= 4:
            counts["iqm"] += 1
            if abs(iqm(pooled) - brute_iqm(pooled)) > 1e-12:
                bad.append(("iqm", pooled))
        counts["mwu"] += 1
        u, p = mann_whitney_two_sided(a, b, "exact")
        u_o, p_o = brute_mwu(a, b)
        if u != u_o or abs(p - p_o) > 1e-12:
            bad.append(("mwu", a, b))
        counts["perm"] += 1
        for d in ("less", "greater"):
            if abs(permutation_one_sided(a, b, d, mode="exact") - brute_permutation(a, b, d)) > 1e-12:
                bad.append(("perm", d, a, b))
    for m in range(1, 13):
        for _ in range(20):
            ps = rng.choice([0.001, 0.01, 0.02, 0.04, 0.2, 0.5, 1.0], m) * rng.uniform(0.5, 1.0, m)
            counts["holm"] += 1
            if np.max(np.abs(holm_bonferroni(ps) - np.array(brute_holm(list(ps))))) > 1e-15:
                bad.append(("holm", ps))
    x = np.random.default_rng(1).normal(size=20)
    det = bootstrap_ci_iqm(x, seed=42) == bootstrap_ci_iqm(x, seed=42) == bootstrap_ci_iqm(x)
    dt = time.perf_counter() - t0
    ok = not bad and det and dt < 60
    verdict(capsys, 7, "statistics oracles", ok, f"instances {counts}, mismatches {len(bad)}, "
            f"bootstrap deterministic {det}, {dt:.1f}s")


def test_c08_ena_signs(capsys):
    ibrl = ena(239.4, 246.0, 500.0)
    residual = ena(250.4, 246.0, 500.0)
    ok = (ibrl.value < 0 < residual.value and ibrl.value == (239.4 - 246.0) / (500.0 - 246.0)
          and residual.value == (250.4 - 246.0) / (500.0 - 246.0))
    verdict(capsys, 8, "ENA signs", ok, f"IBRL {ibrl.value:.6f}, Residual {residual.value:.6f}")


def test_c09_relay_oracle_and_fourtank_tracking(capsys):
    t0 = time.perf_counter()
    k_o, t_o = fopdt_ultimate()
    m = relay_experiment(FOPDTPlant(), 0.0, RelaySettings(amplitude=0.2))
    ek, et = abs(m.k_u / k_o - 1), abs(m.t_u / t_o - 1)
    ctrl, _ = load_expert("fourtank")
    env = envs.make("fourtank")
    sp = np.array([12.5, 12.5])
    state = env.reset(0, {"setpoints": sp.tolist()})
    z = ctrl.initial_state(state.observation)
    while not state.done:
        a, z = ctrl.act(state.observation, z)
        state, _ = env.step(state, a)
    err = np.abs(state.internal[:2] - sp) / sp
    dt = time.perf_counter() - t0
    ok = ek < 0.05 and et < 0.05 and bool(np.all(err < 0.05)) and dt < 300
    verdict(capsys, 9, "relay oracle and tracking", ok,
            f"K_u err {ek:.4f}, T_u err {et:.4f}, level err {np.round(err, 4).tolist()}, {dt:.1f}s")


def _random_policy_return(seeds, episodes, rng):
    env = envs.make("integrator")
    out = []
    for s in seeds:
        for es in eval_seeds(s, episodes):
            state, total = env.reset(es), 0.0
            while not state.done:
                state, r = env.step(state, rng.uniform(-1, 1, 1))
                total += r
            out.append(total)
    return float(np.mean(out))


def test_c10_sac_gradients_and_learning(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for mode in ("plain", "ibrl", "lcb_gated"):
        for residual in (False, True):
            worst = max(worst, max(sac_gradient_errors(mode, residual, seed=0).values()))
    seeds = tuple(range(5))
    cfg = RunConfig(env_id="integrator", method="sac", total_steps=20_000, eval_interval=2_000, seeds=seeds)
    records = train_all(cfg)
    learned = float(np.mean(_final_scalars(records)))
    random_ret = _random_policy_return(seeds, cfg.eval_episodes, np.random.default_rng(0))
    dt = time.perf_counter() - t0
    ok = worst < 1e-4 and learned >= 3 * random_ret and dt < 20 * 60
    verdict(capsys, 10, "SAC gradients and learning", ok,
            f"max rel err {worst:.2e}, return {learned:.1f} vs random {random_ret:.2f}, {dt:.0f}s")


def test_c11_four_corner_plumbing(tmp_path, capsys):
    t0 = time.perf_counter()
    out = tmp_path / "corners"
    for variant in FOUR_CORNERS:
        assert main(["ablate", "fourtank", variant, "--steps", "20000", "--seeds", "0", "--out", str(out)]) == 0
    files = sorted(out.glob("*.json"))
    payloads = [json.loads(f.read_text()) for f in files]
    hashes = {p["config_hash"] for p in payloads}
    well_formed = True
    for p in payloads:
        recs = [RunRecord.from_dict(r) for r in p["records"]]
        well_formed &= all(r.status == "ok" and r.eval_steps[-1] == 20_000 and math.isfinite(r.final_window_scalar)
                           for r in recs)
        well_formed &= bool(p["summary"]) and p["variant"] in FOUR_CORNERS
    dt = time.perf_counter() - t0
    ok = len(files) == 4 and len(hashes) == 4 and well_formed and \
        {f.name for f in files} == {f"fourtank__{v}.json" for v in FOUR_CORNERS}
    finals = {p["variant"]: round(p["records"][0]["final_window_scalar"], 1) for p in payloads}
    verdict(capsys, 11, "four-corner plumbing", ok, f"files {len(files)}, finals {finals}, {dt:.0f}s")


def test_acceptance_instances_cover_all_splits():
    splits = {(len(a), len(b)) for a, b in _instances(np.random.default_rng(0), 1)}
    assert splits == {(i, j) for i, j in itertools.product(range(1, 12), range(1, 12)) if i + j <= 12}
