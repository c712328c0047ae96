import os

from metagvf.cli import main

TINY = """
agent = obs-only
total_steps = 1500
eval_steps = 300
n_trials = 2
base_seed = 9
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_outputs(out_dir, names=("trials.csv", "steps.csv", "summary.kv")):
    return {n: (out_dir / n).read_bytes() for n in names}


def test_run_writes_outputs_and_succeeds(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out_dir", str(out)]) == 0
    for name in ("trials.csv", "steps.csv", "summary.kv", "summary.txt", "effective.cfg"):
        assert (out / name).exists()
    assert "eval mean reward" in capsys.readouterr().out


def test_run_deterministic_outputs(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["run", "--config", cfg, "--out_dir", str(out1)]) == 0
    assert main(["run", "--config", cfg, "--out_dir", str(out2)]) == 0
    a = read_outputs(out1)
    b = read_outputs(out2)
    assert a == b


def test_run_config_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out1 = tmp_path / "o1"
    main(["run", "--config", cfg, "--out_dir", str(out1)])
    out2 = tmp_path / "o2"
    # Re-running the dumped effective config reproduces identical results.
    assert main(["run", "--config", str(out1 / "effective.cfg"),
                 "--out_dir", str(out2)]) == 0
    assert read_outputs(out1) == read_outputs(out2)


def test_unknown_config_key_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY + "mystery_knob = 3\n")
    assert main(["run", "--config", cfg]) == 2
    assert "mystery_knob" in capsys.readouterr().err


def test_bad_value_names_offending_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "agent = meta\ntotal_steps = 1200\neval_steps = 200\nn_trials = 1\n")
    assert main(["run", "--config", cfg, "--alpha_pi", "-1"]) == 2
    assert "alpha_pi" in capsys.readouterr().err


def test_missing_agent_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "total_steps = 1200\neval_steps = 200\n")
    assert main(["run", "--config", cfg]) == 2
    assert "agent" in capsys.readouterr().err


def test_cli_overrides_beat_config_file(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out_dir", str(out),
                 "--n_trials", "1", "--base_seed", "77"]) == 0
    text = (out / "trials.csv").read_text().splitlines()
    assert len(text) == 2  # header + one trial
    assert ",77," in text[1]


def test_compare_with_three_configs(tmp_path):
    paths = [write_cfg(tmp_path, TINY.replace("obs-only", kind), f"{i}.cfg")
             for i, kind in enumerate(("obs-only", "obs-only", "obs-only"))]
    out = tmp_path / "cmp"
    assert main(["compare", *paths, "--out_dir", str(out), "--n_trials", "1"]) == 0
    rows = (out / "comparison.csv").read_text().splitlines()
    assert rows[0] == "config,n_trials,eval_mean,eval_se"
    assert len(rows) == 4
    svg = (out / "comparison.svg").read_text()
    assert svg.startswith("<svg") and "</svg>" in svg


def test_compare_rejects_wrong_config_count(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY)
    assert main(["compare", cfg, cfg]) == 2
    assert "three" in capsys.readouterr().err


def test_compare_identical_configs_identical_bars(tmp_path):
    paths = [write_cfg(tmp_path, TINY, f"{i}.cfg") for i in range(3)]
    out = tmp_path / "cmp"
    assert main(["compare", *paths, "--out_dir", str(out)]) == 0
    rows = (out / "comparison.csv").read_text().splitlines()[1:]
    stats = {tuple(r.split(",")[1:]) for r in rows}
    assert len(stats) == 1


def test_compare_parallelism_does_not_change_outputs(tmp_path):
    paths = [write_cfg(tmp_path, TINY.replace("obs-only", k), f"{k}.cfg")
             for k in ("obs-only", "expert", "meta")]
    outs = []
    for workers, name in (("1", "c1"), ("2", "c2")):
        out = tmp_path / name
        assert main(["compare", *paths, "--out_dir", str(out),
                     "--total_steps", "1200", "--eval_steps", "200",
                     "--trials-parallel", workers]) == 0
        csvs = sorted(f for f in os.listdir(out) if f.endswith(".csv"))
        outs.append({f: (out / f).read_bytes() for f in csvs})
    assert outs[0] == outs[1]


def test_gradcheck_passes_and_prints(capsys):
    assert main(["gradcheck", "40", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "max relative error" in out


def test_gradcheck_deterministic(capsys):
    main(["gradcheck", "25", "--seed", "5"])
    first = capsys.readouterr().out
    main(["gradcheck", "25", "--seed", "5"])
    assert capsys.readouterr().out == first


def test_oracle_prints_tables(capsys):
    assert main(["oracle"]) == 0
    out = capsys.readouterr().out
    assert "0.8100" in out and "0.9000" in out and "1.0000" in out
    assert "2.0000" in out and "growth" in out and "no-growth" in out
