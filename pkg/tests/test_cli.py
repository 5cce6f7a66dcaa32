import json
import os

import numpy as np
import pytest

from riglid.cli import main, run
from riglid.config import (
    EXPERIMENTS,
    make_config,
    parse_config_file,
    parse_config_text,
)
from riglid.errors import ConfigError
from riglid.reports import format_float, write_csv


class TestConfig:
    def test_defaults_filled(self):
        cfg = make_config("linear-limit")
        assert cfg["params.mu"] == 0.25
        assert cfg["grid.n"] == 4096
        assert cfg.experiment == "linear-limit"

    def test_round_trip_lossless(self):
        cfg = make_config("lin-vs-nonlin", {"solver.dt": 0.0012345678912345678})
        text = cfg.to_text()
        again = parse_config_text(text)
        assert again.values == cfg.values

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            parse_config_text("experiment = null-check\nphysics.nu = 3\n")

    def test_zero_epsilon_rejected(self):
        with pytest.raises(ConfigError, match="epsilon"):
            make_config("null-check", {"params.epsilon": 0.0})

    def test_non_decreasing_eps_list_rejected(self):
        with pytest.raises(ConfigError, match="decreasing"):
            make_config("weak-decay", {"params.eps_list": [0.01, 0.05]})

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ConfigError, match="experiment"):
            make_config("frequency-sweep")

    def test_bad_value_reports_key(self):
        with pytest.raises(ConfigError, match="solver.dt"):
            parse_config_text("experiment = null-check\nsolver.dt = abc\n")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text(
            "# a comment\n\nexperiment = null-check\ngrid.n = 512\n")
        assert cfg["grid.n"] == 512

    def test_all_experiments_have_valid_defaults(self):
        for name in EXPERIMENTS:
            make_config(name)


class TestReportSerialization:
    def test_decay_report_round_trip(self, tmp_path):
        from riglid.reports import DecayReport, write_report_csv

        rep = DecayReport(name="demo", abscissa_label="epsilon",
                          abscissae=np.array([0.1, 0.05]),
                          measured=np.array([1.0, 0.4]),
                          extra_columns={"bound": np.array([1.0, 0.8])})
        path = os.path.join(tmp_path, "demo.csv")
        write_report_csv(path, rep)
        lines = open(path).read().splitlines()
        assert lines[0] == "epsilon,measured,reference,bound"
        assert float(lines[2].split(",")[1]) == 0.4

    def test_non_monotone_abscissae_rejected(self):
        from riglid.reports import DecayReport

        with pytest.raises(ConfigError):
            DecayReport(name="bad", abscissa_label="x",
                        abscissae=np.array([0.1, 0.3, 0.2]),
                        measured=np.zeros(3))


class TestCsvFormat:
    def test_seventeen_significant_digits(self):
        x = 0.1 + 0.2
        assert float(format_float(x)) == x

    def test_write_and_parse(self, tmp_path):
        path = os.path.join(tmp_path, "out.csv")
        write_csv(path, {"a": np.array([1.0, 2.0]), "b": np.array([np.pi, np.e])})
        lines = open(path).read().splitlines()
        assert lines[0] == "a,b"
        assert float(lines[1].split(",")[1]) == np.pi


class TestCliRuns:
    def test_null_check_run_and_manifest(self, tmp_path):
        out = os.path.join(tmp_path, "res")
        code = main(["--experiment", "null-check", "--out", out, "--seed", "5",
                     "--grid-n", "128"])
        assert code == 0
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["experiment"] == "null-check"
        assert manifest["incomplete"] is False
        assert manifest["assertions"][0]["id"] == "criterion_13"
        assert manifest["assertions"][0]["passed"]
        assert manifest["config"]["grid.n"] == 128
        csv_lines = open(os.path.join(out, "null-check.csv")).read().splitlines()
        assert csv_lines[0] == "mu,epsilon,n_z,grad_norm"
        assert len(csv_lines) == 2

    def test_deterministic_output(self, tmp_path):
        out1 = os.path.join(tmp_path, "a")
        out2 = os.path.join(tmp_path, "b")
        for out in (out1, out2):
            assert main(["--experiment", "null-check", "--out", out,
                         "--seed", "9", "--grid-n", "128"]) == 0
        a = open(os.path.join(out1, "null-check.csv"), "rb").read()
        b = open(os.path.join(out2, "null-check.csv"), "rb").read()
        assert a == b

    def test_env_override(self, tmp_path, monkeypatch):
        env_dir = os.path.join(tmp_path, "env-dir")
        monkeypatch.setenv("RIGLID_OUT", env_dir)
        assert main(["--experiment", "null-check", "--out",
                     os.path.join(tmp_path, "ignored"), "--grid-n", "128"]) == 0
        assert os.path.exists(os.path.join(env_dir, "manifest.json"))
        assert not os.path.exists(os.path.join(tmp_path, "ignored"))

    def test_config_file_with_flag_overrides(self, tmp_path):
        conf = os.path.join(tmp_path, "run.conf")
        with open(conf, "w") as handle:
            handle.write("experiment = null-check\ngrid.n = 256\n")
        out = os.path.join(tmp_path, "res")
        assert main(["--config", conf, "--out", out, "--grid-n", "128"]) == 0
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["config"]["grid.n"] == 128

    def test_incomplete_manifest_on_failure(self, tmp_path, monkeypatch):
        cfg = make_config("null-check", {"out": os.path.join(tmp_path, "res")})

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic failure")

        import riglid.cli as cli_mod

        monkeypatch.setitem(cli_mod._DRIVERS, "null-check", boom)
        code = run(cfg)
        assert code == 2
        manifest = json.load(open(os.path.join(tmp_path, "res", "manifest.json")))
        assert manifest["incomplete"] is True
        assert "synthetic failure" in manifest["error"]

    def test_requires_experiment_or_config(self, capsys):
        with pytest.raises(SystemExit):
            main([])

    def test_bad_config_value_exit_code(self, tmp_path):
        conf = os.path.join(tmp_path, "bad.conf")
        with open(conf, "w") as handle:
            handle.write("experiment = null-check\nparams.epsilon = 0\n")
        assert main(["--config", conf]) == 2
