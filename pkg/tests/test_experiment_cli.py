import json

import numpy as np
import pytest
import yaml

from fiberppe.cli import main
from fiberppe.errors import ConfigError, DispersionManagedError
from fiberppe.experiment import ExperimentConfig, bundled_configs, load_config, run_experiment, thread_limit
from fiberppe.io import read_waveform
from fiberppe.estimators import PowerProfile


def _tiny(tmp_path, **over):
    raw = load_config("fig8-desk").to_dict()
    raw["signal"].update(n_symbols=1024, format=["Gaussian", "QPSK"])
    raw["propagation"]["step"] = 1.0
    raw["estimators"] = [{"method": "mCM", "delta_z": 10.0}, {"method": "MMSE", "delta_z": 10.0},
                         {"method": "CM", "delta_z": 10.0, "epsilon": 0.01}]
    raw["theory_overlays"] = {"true_profile": True, "predict_cm": True}
    raw["output_dir"] = str(tmp_path / "out")
    for k, v in over.items():
        raw[k] = v
    return raw


DM_LINK = {"spans": [{"length": 50.0, "beta2": 20.55}, {"length": 50.0, "beta2": -20.55}],
           "amps": [{"position": 50.0, "gain": 10.0}]}


def test_bundled_configs_load():
    names = bundled_configs()
    for name in ("fig3", "fig3-desk", "fig6", "fig6-desk", "fig7", "fig8", "fig8-desk"):
        assert name in names
        cfg = load_config(name)
        assert cfg.signal.n_samples & (cfg.signal.n_samples - 1) == 0
    with pytest.raises(ConfigError):
        load_config("fig99")


@pytest.mark.parametrize("change, err", [
    (lambda r: r["signal"].update(n_symbols=1000), ConfigError),
    (lambda r: r["estimators"][0].update(delta_z=0.0), ConfigError),
    (lambda r: r.update(estimators=[], theory_overlays={}), ConfigError),
    (lambda r: r.update(colour="red"), ConfigError),
    (lambda r: r["estimators"][0].update(method="XCORR"), ConfigError),
    (lambda r: r.update(link=DM_LINK), DispersionManagedError),
])
def test_invalid_configs_write_nothing(tmp_path, change, err):
    raw = _tiny(tmp_path)
    change(raw)
    with pytest.raises(err):
        run_experiment(ExperimentConfig.from_dict(raw))
    assert not (tmp_path / "out").exists()


def test_run_outputs_and_reproducibility(tmp_path):
    cfg = ExperimentConfig.from_dict(_tiny(tmp_path))
    man = run_experiment(cfg)
    out = tmp_path / "out"
    names = set(man["files"])
    assert {"Gaussian_mCM_dz10.csv", "QPSK_MMSE_dz10.csv", "Gaussian_CM_dz10_eps0p01.csv",
            "TRUE_dz10.csv", "Gaussian_PREDICTED-mCM_dz10.csv", "QPSK_PREDICTED-CM_dz10.csv"} <= names
    saved = json.loads((out / "manifest.json").read_text())
    assert saved["rng"] and saved["n_samples"] == 4096 and saved["config"]["name"] == "fig8-desk"
    assert all("seed" in r and "propagation_s" in r for r in saved["runs"])
    mmse = [p for r in saved["runs"] for p in r["profiles"] if p["method"] == "MMSE"]
    assert all(p["cond_M"] > 1 for p in mmse)
    first = {n: (out / n).read_bytes() for n in names}
    run_experiment(cfg, tmp_path / "again")
    for n, data in first.items():
        assert (tmp_path / "again" / n).read_bytes() == data
    prof = PowerProfile.from_csv(out / "QPSK_MMSE_dz10.csv")
    assert prof.method == "MMSE" and len(prof.values) == 16


def test_config_yaml_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(_tiny(tmp_path))
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg.to_dict()))
    assert ExperimentConfig.load(path).to_dict() == cfg.to_dict()


def test_thread_limit(monkeypatch):
    monkeypatch.delenv("PPE_THREADS", raising=False)
    assert thread_limit() == 1
    monkeypatch.setenv("PPE_THREADS", "3")
    assert thread_limit() == 3
    monkeypatch.setenv("PPE_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_limit()


def test_cli_simulate_estimate(tmp_path, capsys):
    tx, rx = tmp_path / "tx.ppe", tmp_path / "rx.ppe"
    code = main(["simulate", "--format", "QPSK", "--n-symbols", "1024", "--sps", "4",
                 "--symbol-rate", "64", "--step", "1", "--tx-out", str(tx), "--rx-out", str(rx)])
    assert code == 0
    assert len(read_waveform(rx)) == 4096
    out = tmp_path / "p.csv"
    assert main(["estimate", "--tx", str(tx), "--rx", str(rx), "--method", "MMSE",
                 "--delta-z", "10", "--out", str(out)]) == 0
    assert PowerProfile.from_csv(out).method == "MMSE"
    assert "cond(M)" in capsys.readouterr().out


def test_cli_theory_commands(tmp_path, capsys):
    assert main(["resolution", "--bandwidths", "64", "128"]) == 0
    assert "128" in capsys.readouterr().out
    assert main(["srf", "--bandwidth", "128", "--points", "101", "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()
    assert main(["predict", "--variant", "mcm", "--delta-z", "10", "--out", str(tmp_path / "p.csv")]) == 0
    assert main(["experiment", "--list"]) == 0
    assert "fig3-desk" in capsys.readouterr().out


def test_cli_oracle(tmp_path, capsys):
    assert main(["oracle", "--n", "20000", "--lti-n", "4096", "--out", str(tmp_path / "o.json")]) == 0
    report = json.loads((tmp_path / "o.json").read_text())
    assert len(report) == 12


def test_cli_experiment(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(_tiny(tmp_path)))
    assert main(["experiment", str(path), "--output-dir", str(tmp_path / "cli")]) == 0
    assert (tmp_path / "cli" / "manifest.json").exists()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["experiment", "nonexistent-config"]) == 2
    assert main(["estimate", "--tx", str(tmp_path / "no.ppe"), "--rx", str(tmp_path / "no.ppe")]) == 2
    bad = tmp_path / "bad.ppe"
    bad.write_bytes(b"JUNKJUNKJUNK" * 4)
    assert main(["estimate", "--tx", str(bad), "--rx", str(bad)]) == 2
    assert "bad magic" in capsys.readouterr().err


def test_cli_singular_system_exit_code(tmp_path, capsys):
    raw = _tiny(tmp_path, link=DM_LINK, allow_dispersion_managed=True)
    raw["estimators"] = [{"method": "MMSE", "delta_z": 10.0, "reg": 0.0}]
    raw["theory_overlays"] = {}
    cfg_path = tmp_path / "dm.yaml"
    cfg_path.write_text(yaml.safe_dump(raw))
    tx, rx = tmp_path / "tx.ppe", tmp_path / "rx.ppe"
    assert main(["simulate", "--config", str(cfg_path), "--allow-dispersion-managed",
                 "--n-symbols", "1024", "--tx-out", str(tx), "--rx-out", str(rx)]) == 0
    args = ["estimate", "--config", str(cfg_path), "--tx", str(tx), "--rx", str(rx),
            "--method", "MMSE", "--delta-z", "10", "--reg", "0"]
    assert main(args) == 2  # refused without the override
    assert main(args + ["--allow-dispersion-managed"]) == 3
    assert "singular" in capsys.readouterr().err
