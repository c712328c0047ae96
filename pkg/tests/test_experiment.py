import numpy as np
import pytest

from metagvf.agent import init_agent
from metagvf.experiment import (ConfigError, TrialResult, agent_config,
                                freeze_eval, make_config, run_batch,
                                run_sweep, run_trial, summarize,
                                write_steps_csv, write_summary_kv,
                                write_trials_csv)


def tiny(agent="obs-only", **kw):
    base = dict(total_steps=2_000, eval_steps=400, n_trials=2, base_seed=0,
                log_every=500)
    base.update(kw)
    return make_config(agent, **base)


def test_table_defaults_per_kind():
    obs = make_config("obs-only")
    assert (obs.epsilon, obs.alpha_control, obs.alpha_gvfs) == (0.1, 0.01, 0.1)
    expert = make_config("expert")
    assert (expert.epsilon, expert.alpha_control, expert.alpha_gvfs) == (0.1, 0.01, 0.1)
    assert expert.t_max == 2.0
    meta = make_config("meta")
    assert (meta.epsilon, meta.alpha_control, meta.alpha_gvfs,
            meta.alpha_pi, meta.alpha_c) == (0.5, 0.0001, 0.1, 0.001, 0.1)
    assert meta.l2_lambda == 0.001
    assert obs.total_steps == 1_000_000
    assert obs.train_steps == 999_000
    assert obs.eval_steps == 1_000
    assert obs.n_trials == 30


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        make_config("nope")
    with pytest.raises(ConfigError, match="alpha_pi"):
        make_config("meta", alpha_pi=-1.0)
    with pytest.raises(ConfigError, match="unknown config key"):
        make_config("obs-only", not_a_key=3)
    with pytest.raises(ConfigError, match="eval_steps"):
        make_config("obs-only", total_steps=100, eval_steps=100)
    with pytest.raises(ConfigError, match="epsilon"):
        make_config("obs-only", epsilon=1.5)
    with pytest.raises(ConfigError, match="memsize"):
        make_config("obs-only", memsize=10)


def test_freeze_eval_keeps_weights_bit_identical():
    cfg = tiny("expert")
    agent = init_agent(agent_config(cfg), 0)
    for _ in range(1_000):
        agent.step()
    freeze_eval(agent)
    before = [arr.copy() for arr in agent._weight_arrays()]
    for _ in range(1_000):
        agent.step()
    for b, a in zip(before, agent._weight_arrays()):
        assert np.array_equal(b, a)


def test_run_trial_deterministic_and_bounded():
    cfg = tiny()
    r1 = run_trial(cfg, 0)
    r2 = run_trial(cfg, 0)
    assert r1.eval_mean_reward == r2.eval_mean_reward
    assert 0.0 <= r1.eval_mean_reward <= 1.0
    assert r1.seed == cfg.base_seed
    assert r1.train_curve == r2.train_curve
    assert r1.step_log == r2.step_log
    assert not r1.failed


def test_run_trial_seed_derivation():
    cfg = tiny(base_seed=100)
    assert run_trial(cfg, 7).seed == 107


def test_run_batch_summary_and_order_independence():
    cfg = tiny(n_trials=3)
    s = run_batch(cfg)
    assert s.n_trials == 3
    assert s.n_failed == 0
    vals = [r.eval_mean_reward for r in s.results]
    assert s.eval_mean == pytest.approx(float(np.mean(vals)))
    shuffled = summarize(cfg, list(reversed(s.results)))
    assert shuffled.eval_mean == s.eval_mean
    assert shuffled.eval_se == s.eval_se


def test_run_batch_parallel_matches_serial():
    cfg = tiny(n_trials=3)
    serial = run_batch(cfg, workers=1)
    parallel = run_batch(cfg, workers=2)
    assert [r.eval_mean_reward for r in serial.results] == \
        [r.eval_mean_reward for r in parallel.results]
    assert serial.eval_mean == parallel.eval_mean
    assert serial.eval_se == parallel.eval_se


def test_summary_standard_error_formula():
    cfg = tiny(n_trials=2)
    fake = [TrialResult(config="obs-only", trial=i, seed=i, eval_mean_reward=v)
            for i, v in enumerate((0.4, 0.6))]
    s = summarize(cfg, fake)
    assert s.eval_mean == pytest.approx(0.5)
    assert s.eval_se == pytest.approx(0.1)


def test_summary_single_trial_se_zero():
    cfg = tiny(n_trials=1)
    s = summarize(cfg, [TrialResult(config="obs-only", trial=0, seed=0,
                                    eval_mean_reward=0.5)])
    assert s.eval_se == 0.0


def test_summary_identical_trials_se_zero():
    cfg = tiny(n_trials=3)
    fake = [TrialResult(config="obs-only", trial=i, seed=i, eval_mean_reward=0.5)
            for i in range(3)]
    assert summarize(cfg, fake).eval_se == 0.0


def test_summarize_raises_when_all_failed():
    cfg = tiny(n_trials=2)
    fake = [TrialResult(config="obs-only", trial=i, seed=i,
                        eval_mean_reward=float("nan"), failed=True)
            for i in range(2)]
    with pytest.raises(RuntimeError):
        summarize(cfg, fake)


def test_run_sweep_product_and_sorting():
    cfg = tiny(n_trials=1)
    out = run_sweep({"epsilon": [0.1, 0.5], "alpha_control": [0.01, 0.001]}, cfg)
    assert len(out) == 4
    means = [s.eval_mean for s in out]
    assert means == sorted(means, reverse=True)

    single = run_sweep({"epsilon": [0.1]}, cfg)
    assert len(single) == 1


def test_run_sweep_rejects_unknown_parameter():
    with pytest.raises(ConfigError, match="unknown config key"):
        run_sweep({"alpha_zeta": [0.1]}, tiny())


def test_csv_writers_deterministic(tmp_path):
    cfg = tiny(n_trials=2)
    s = run_batch(cfg)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_trials_csv(p1, s.results)
    write_trials_csv(p2, s.results)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "config,trial,seed,eval_mean_reward,failed"

    write_steps_csv(p1, s.results)
    assert p1.read_text().splitlines()[0] == \
        "config,trial,seed,phase,step,reward,delta_control"

    write_summary_kv(p1, s)
    text = p1.read_text()
    assert "eval_mean = " in text and "config = obs-only" in text
