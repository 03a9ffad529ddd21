from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from edgebench.harness import (
    Perturbation,
    RunConfig,
    RunRecord,
    SweepGrid,
    Trainer,
    first_permanent_crossing,
    report,
    summarize,
    sweep,
    train_run,
)
from edgebench.harness.cli import main
from edgebench.harness.train import eval_seeds, expert_episode
from edgebench.integration import Selection, Selector

SMALL = dict(hidden=[16, 16], batch_size=32)


def small_cfg(**kw) -> RunConfig:
    base = dict(env_id="fourtank", method="edge", total_steps=600, eval_interval=300, eval_episodes=2,
                learning_starts=200, sac=SMALL, seeds=(0,))
    base.update(kw)
    return RunConfig(**base)


def test_config_round_trip_and_hash(tmp_path):
    cfg = small_cfg(perturbation=Perturbation("undertune", 0.5), method_knobs={"rho_warm": 0.2})
    again = RunConfig.load(cfg.save(tmp_path / "c.json"))
    assert again == cfg
    assert again.hash() == cfg.hash()
    assert replace(cfg, total_steps=601).hash() != cfg.hash()
    assert cfg.with_seeds([5, 6]).cell_hash() == cfg.cell_hash()


def test_config_validation():
    with pytest.raises(ValueError):
        Perturbation("shake", 0.1)
    with pytest.raises(ValueError):
        RunConfig.from_dict({"env_id": "fourtank", "bogus": 1})
    with pytest.raises(ValueError):
        RunConfig(seeds=())


def test_expert_prefill_scales_with_budget():
    assert RunConfig(total_steps=1_000_000).expert_prefill_steps == 100_000
    assert RunConfig(total_steps=50_000).expert_prefill_steps == 5_000


def test_expert_method_returns_deterministic_expert_rollouts():
    rec = train_run(small_cfg(method="expert"))
    from edgebench.experts import load_expert

    ctrl, _ = load_expert("fourtank")
    expected = [expert_episode(ctrl, "fourtank", s) for s in eval_seeds(0, 2)]
    assert rec.eval_steps == [0, 300, 600]
    for returns in rec.eval_returns:
        assert returns == expected


def test_zero_step_run_has_only_initial_evaluation():
    rec = train_run(small_cfg(method="sac", total_steps=0))
    assert rec.eval_steps == [0]
    assert rec.final_window_scalar == rec.eval_mean[0]
    assert rec.n_updates == 0


def test_identical_config_identical_record():
    a = train_run(small_cfg())
    b = train_run(small_cfg())
    assert a.comparable() == b.comparable()
    assert a.config_hash == small_cfg().hash()


def test_missing_gains_are_reported(tmp_path):
    with pytest.raises(FileNotFoundError):
        train_run(small_cfg(gains_dir=str(tmp_path)))


@pytest.mark.parametrize("method,mechanism", [
    ("sac", "none"), ("edge", "gate_draw"), ("ibrl", "argmax"), ("jsrl_curriculum", "handoff_test"),
    ("jsrl_tt", "warm_start_test"), ("residual", "residual_add"), ("gating_argmax", "argmax"),
])
def test_exactly_one_mechanism_per_step(method, mechanism):
    rec = train_run(small_cfg(method=method, total_steps=300, eval_interval=300))
    assert rec.counters[mechanism] == 300
    assert sum(rec.counters.values()) == 300


def test_gate_statistics_logged_per_window():
    rec = train_run(small_cfg(gate_window=100))
    windows = rec.gate["windows"]
    assert len(windows) == 6
    assert all(w["n"] == 100 and w["n_policy"] + w["n_expert"] == 100 for w in windows)
    assert all(0 < w["p_min"] <= w["p_max"] < 1 for w in windows)
    assert sum(rec.gate["p_hist_counts"]) == 600


def test_store_policy_action_breaks_executed_action_contract():
    class ForceExpert(Selector):
        def select(self, q_fn, policy_action, expert_action, t_episode, global_step, greedy=False):
            self.counters["gate_draw"] += 1
            a_p = np.asarray(policy_action, dtype=np.float64)
            return Selection(np.asarray(expert_action, dtype=np.float64), a_p, True, "gate_draw", 1.0, np.inf)

    for variant, should_differ in (("store_policy_action", True), ("edge", False)):
        tr = Trainer(small_cfg(method=variant, total_steps=200, eval_interval=200), 0)
        tr.selector = ForceExpert(tr.spec, 200, 500, np.random.default_rng(0))
        tr.run()
        buf = tr.buffer
        n = len(buf)
        executed = buf.exp_act[:n]
        stored = buf.act[:n]
        if should_differ:
            assert np.all(np.any(stored != executed, axis=1))
        else:
            assert np.array_equal(stored, executed)


def test_undertune_only_touches_training_expert():
    tr = Trainer(small_cfg(perturbation=Perturbation("undertune", 0.5)), 0)
    assert not np.array_equal(tr.train_expert.params, tr.base_expert.params)
    rec = tr.run()
    clean = train_run(small_cfg(method="expert"))
    assert rec.expert_eval_returns == clean.eval_returns[0]


def test_action_bias_and_obs_noise_apply_at_evaluation_only():
    clean = Trainer(small_cfg(), 0)
    biased = Trainer(small_cfg(perturbation=Perturbation("action_bias", 0.25)), 0)
    assert biased.bias is not None and biased.train_expert is clean.train_expert or \
        np.array_equal(biased.train_expert.params, clean.train_expert.params)
    a, b = clean.run(), biased.run()
    assert a.train_episode_returns == b.train_episode_returns
    assert a.gate["windows"] == b.gate["windows"]
    noisy = train_run(small_cfg(perturbation=Perturbation("obs_noise", 0.5)))
    assert noisy.gate["windows"] == a.gate["windows"]
    assert noisy.eval_returns != a.eval_returns


def test_random_expert_variant_replaces_expert():
    tr = Trainer(small_cfg(method="random_expert"), 0)
    assert tr.train_expert.kind == "random"
    assert tr.in_dim == 6


def test_state_augmentation_dimensions():
    assert Trainer(small_cfg(method="sac"), 0).in_dim == 6
    assert Trainer(small_cfg(method="edge"), 0).in_dim == 12
    assert Trainer(small_cfg(method="no_state_aug"), 0).in_dim == 6


def test_expert_prefill_adds_expert_transitions():
    rec = train_run(small_cfg(method="expert_prefill", total_steps=10_000, eval_interval=10_000, learning_starts=10_000))
    assert rec.n_prefill == 1_000


def test_sweep_cell_count_and_zero_sigma_matches_clean():
    base = small_cfg(total_steps=300, eval_interval=300, seeds=(0, 1))
    grid = SweepGrid(methods=("edge", "jsrl_tt"), perturbation_type="undertune", sigmas=(0.0,))
    res = sweep(base, grid)
    assert res.n_cells == 2 * 1 * 2 and not res.errors
    clean = sweep(base, SweepGrid(methods=("edge", "jsrl_tt")))
    for r, c in zip(res.records, clean.records):
        assert r.eval_returns == c.eval_returns


def test_sweep_records_errors_and_continues(tmp_path):
    base = small_cfg(total_steps=300, eval_interval=300)
    res = sweep(base, SweepGrid(methods=("edge", "not_a_method")), out_dir=tmp_path)
    assert len(res.records) == 1 and len(res.errors) == 1
    assert res.n_cells == 2
    assert (tmp_path / "errors.json").exists()


def _fake_record(method, seed, final, steps=(0, 100, 200), curve=None, cfg=None, j_exp=246.0):
    cfg = cfg or RunConfig(env_id="fourtank", method=method, total_steps=200, eval_interval=100)
    rec = RunRecord(config=cfg.to_dict(), config_hash=cfg.hash(), cell_hash=cfg.cell_hash(), seed=seed,
                    env_id="fourtank", method=method, perturbation="none", j_exp_unperturbed=j_exp, j_ref=500.0)
    for s, v in zip(steps, curve or [final] * len(steps)):
        rec.append_eval(s, [v])
    rec.finalize(200, 0.2)
    return rec


def test_report_constant_returns_give_degenerate_interval():
    recs = [_fake_record("edge", s, 300.0) for s in range(6)]
    rows, text = report(recs)
    assert rows[0]["iqm"] == 300.0
    assert rows[0]["ci_lo"] == rows[0]["ci_hi"] == 300.0
    assert rows[0]["ena"] == pytest.approx((300 - 246) / (500 - 246))
    assert "fourtank" in text


def test_report_rank_tests_and_markers(tmp_path):
    recs = [_fake_record("edge", s, 400.0 + s) for s in range(10)]
    recs += [_fake_record("ibrl", s, 100.0 + s) for s in range(10)]
    rows, _ = report(recs, csv_path=tmp_path / "t.csv")
    ibrl = [r for r in rows if r["method"] == "ibrl"][0]
    assert ibrl["p_holm"] < 0.001 and ibrl["marker"] == "***"
    assert (tmp_path / "t.csv").read_text().startswith("env_id,method")


def test_report_rejects_mixed_configs():
    a = _fake_record("edge", 0, 1.0)
    other = RunConfig(env_id="fourtank", method="edge", total_steps=200, eval_interval=100, kappa=3.0)
    b = _fake_record("edge", 1, 1.0, cfg=other)
    with pytest.raises(ValueError):
        summarize([a, b])
    c = _fake_record("ibrl", 0, 1.0, cfg=RunConfig(env_id="fourtank", method="ibrl", total_steps=400, eval_interval=100))
    with pytest.raises(ValueError):
        summarize([a, c])
    with pytest.raises(ValueError):
        summarize([a, _fake_record("edge", 0, 2.0)])


def test_report_uses_unperturbed_expert_for_ena():
    a = _fake_record("edge", 0, 1.0)
    b = _fake_record("edge", 1, 1.0, j_exp=100.0)
    with pytest.raises(ValueError):
        summarize([a, b])


def test_first_permanent_crossing_monotone():
    steps = [0, 10, 20, 30, 40]
    assert first_permanent_crossing(steps, [0, 1, 2, 3, 4], 2.0) == (20, False)
    assert first_permanent_crossing(steps, [0, 1, 2, 3, 4], 10.0) == (None, True)
    assert first_permanent_crossing(steps, [5, 5, 5, 5, 5], 1.0) == (0, False)


def test_first_permanent_crossing_skips_transient():
    rng = np.random.default_rng(0)
    for _ in range(200):
        vals = rng.normal(size=12).cumsum()
        thr = float(rng.normal())
        steps = list(range(0, 120, 10))
        got = first_permanent_crossing(steps, vals, thr)
        brute = None
        for k in range(len(vals)):
            if all(v >= thr for v in vals[k:]):
                brute = steps[k]
                break
        assert got == (brute, brute is None)
    assert first_permanent_crossing([0, 1, 2, 3], [5, 0, 5, 5], 1.0) == (2, False)


def test_cli_ablate_and_report(tmp_path, capsys):
    cfg = small_cfg(total_steps=300, eval_interval=300)
    cfg_path = cfg.save(tmp_path / "cfg.json")
    assert main(["ablate", "fourtank", "no_state_aug", "--config", str(cfg_path), "--out", str(tmp_path / "abl")]) == 0
    out = tmp_path / "abl" / "fourtank__no_state_aug.json"
    payload = json.loads(out.read_text())
    assert payload["variant"] == "no_state_aug" and len(payload["records"]) == 1
    assert main(["report", str(tmp_path / "abl"), "--reference", "no_state_aug"]) == 0
    assert "no_state_aug" in capsys.readouterr().out


def test_cli_train_and_sweep(tmp_path):
    cfg = small_cfg(method="sac", total_steps=0)
    cfg.save(tmp_path / "cfg.json")
    assert main(["train", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "runs")]) == 0
    assert len(list((tmp_path / "runs").glob("*.json"))) == 1
    sweep_file = tmp_path / "sweep.json"
    sweep_file.write_text(json.dumps({"base": cfg.to_dict(), "grid": {"methods": ["sac", "expert"]}}))
    assert main(["sweep", str(sweep_file), "--out", str(tmp_path / "sw")]) == 0
    assert len(list((tmp_path / "sw").glob("*.json"))) == 2
