import json
import os

import numpy as np
import pytest
import yaml

from automaton_lab.circuits import EnsembleSpec
from automaton_lab.cli import main
from automaton_lab.experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    realization_seed,
    run_experiment,
    set_by_path,
)

BASE = {
    "kind": "bitstrings",
    "ensemble": {"n_sites": 8, "depth": 20, "master_seed": 3},
    "realizations": 3,
    "mc_samples": 500,
    "master_seed": 5,
}


def _cfg(**over):
    raw = {**BASE, **over}
    return config_from_dict(raw)


# -- configuration ---------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        config_from_dict({"ensemble": {"n_sites": 8, "depth": 4}})  # no kind
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, "kind": "bogus"})
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, "realizations": 0})
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, "unexpected_field": 1})
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, "ensemble": {"n_sites": 8}})  # no depth
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, "input_state": "bogus"})


def test_config_hash_sensitivity(monkeypatch):
    a = _cfg()
    assert a.config_hash == _cfg().config_hash
    assert a.config_hash != _cfg(realizations=4).config_hash
    assert a.config_hash != _cfg(params={"basis": "z"}).config_hash
    # worker count and output location must not change the hash
    assert a.config_hash == _cfg(workers=4).config_hash
    assert a.config_hash == _cfg(output_root="/elsewhere").config_hash


def test_set_by_path():
    raw = {"ensemble": {"depth": 10}}
    set_by_path(raw, "ensemble.depth", 40)
    set_by_path(raw, "params.basis", "z")
    assert raw == {"ensemble": {"depth": 40}, "params": {"basis": "z"}}


def test_realization_seed_stable():
    assert realization_seed(5, 0) == realization_seed(5, 0)
    assert realization_seed(5, 0) != realization_seed(5, 1)
    assert realization_seed(5, 0) != realization_seed(6, 0)


def test_output_root_env(monkeypatch):
    monkeypatch.setenv("AUTOMATON_LAB_RUNS", "/tmp/xyz")
    cfg = ExperimentConfig(kind="bitstrings", ensemble=EnsembleSpec(n_sites=4, depth=2))
    assert cfg.output_root == "/tmp/xyz"


# -- running ---------------------------------------------------------------


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_run_writes_hash_headers_and_manifest(tmp_path):
    cfg = _cfg()
    run = run_experiment(cfg, str(tmp_path / "out"))
    for name in run.files:
        if name.endswith(".csv"):
            head = _read(os.path.join(run.path, name)).decode().splitlines()[1]
            assert head == f"# config_hash={cfg.config_hash}"
    manifest = json.loads(_read(os.path.join(run.path, "manifest.json")))
    assert manifest["config_hash"] == cfg.config_hash
    assert sorted(manifest["files"]) == sorted(run.files)
    assert len(manifest["task_seeds"]) == cfg.realizations


def test_rerun_byte_identical(tmp_path):
    cfg = _cfg()
    a = run_experiment(cfg, str(tmp_path / "a"))
    b = run_experiment(cfg, str(tmp_path / "b"))
    for name in a.files:
        assert _read(os.path.join(a.path, name)) == _read(os.path.join(b.path, name))


def test_resume_after_partial_run(tmp_path):
    cfg = _cfg()
    a = run_experiment(cfg, str(tmp_path / "a"))
    # simulate a killed run: drop one part and one output, rerun in place
    os.remove(os.path.join(a.path, "parts", "part-00001.npz"))
    os.remove(os.path.join(a.path, "histogram.csv"))
    b = run_experiment(cfg, str(a.path))
    c = run_experiment(cfg, str(tmp_path / "c"))
    for name in c.files:
        assert _read(os.path.join(b.path, name)) == _read(os.path.join(c.path, name))


def test_stale_parts_recomputed(tmp_path):
    cfg = _cfg()
    a = run_experiment(cfg, str(tmp_path / "a"))
    changed = _cfg(master_seed=6)
    b = run_experiment(changed, str(tmp_path / "a"))  # same dir, different config
    assert b.cfg.config_hash != cfg.config_hash
    fresh = run_experiment(changed, str(tmp_path / "fresh"))
    assert _read(os.path.join(b.path, "histogram.csv")) == _read(
        os.path.join(fresh.path, "histogram.csv")
    )


def test_missing_required_param_fails_before_work(tmp_path):
    cfg = _cfg(kind="otoc_max_search")  # lacks params.reference_depth
    with pytest.raises(ConfigError):
        run_experiment(cfg, str(tmp_path / "out"))
    cfg2 = _cfg(kind="scrambling_fit")
    with pytest.raises(ConfigError):
        run_experiment(cfg2, str(tmp_path / "out2"))


def test_input_state_conventions():
    from automaton_lab.experiments import make_input_state

    auto = make_input_state(_cfg(), 0)
    np.testing.assert_allclose(np.abs(auto.site_amps), 1 / np.sqrt(2))
    cliff = make_input_state(
        _cfg(ensemble={"n_sites": 8, "depth": 20, "family": "clifford"}), 0
    )
    assert np.allclose(cliff.site_amps.imag, 0)  # real-amplitude convention
    assert not np.allclose(np.abs(cliff.site_amps), 1 / np.sqrt(2))


# -- CLI -------------------------------------------------------------------


def _write_config(tmp_path, raw):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.split()
    assert out == list(EXPERIMENT_KINDS)


def test_cli_describe(capsys):
    assert main(["describe", "otoc_recursive"]) == 0
    assert "scrambling" in capsys.readouterr().out
    assert main(["describe", "bogus"]) == 1
    assert "valid kinds" in capsys.readouterr().err


def test_cli_usage_error_is_exit_1():
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_cli_run_and_overrides(tmp_path, capsys):
    path = _write_config(tmp_path, BASE)
    assert main(["run", "--config", path, "--output", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "histogram.csv").exists()
    # overrides reach the config (and therefore the hash)
    assert (
        main(
            [
                "run", "--config", path, "--set", "ensemble.depth=10",
                "--output", str(tmp_path / "out2"),
            ]
        )
        == 0
    )
    h1 = json.loads((tmp_path / "out" / "manifest.json").read_text())["config_hash"]
    h2 = json.loads((tmp_path / "out2" / "manifest.json").read_text())["config_hash"]
    assert h1 != h2


def test_cli_validation_failures(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = _write_config(tmp_path, {**BASE, "kind": "bogus"})
    assert main(["run", "--config", bad]) == 1
    assert "config error" in capsys.readouterr().err
