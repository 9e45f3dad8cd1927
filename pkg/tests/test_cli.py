import json

import numpy as np
import pytest

from kraichnan_ns.cli import EXIT_FAIL, EXIT_INVALID, EXIT_OK, SpecError, build_spec, load_spec, main
from kraichnan_ns.errors import ConfigurationError

SMALL = """
[grid]
n = 16
[time]
dt = 0.02
T = 0.1
[noise]
kind = "kraichnan"
n_fields = 2
amplitude = 0.3
[nonlinearity]
kind = "linear"
gamma = 0.2
[initial]
kind = "rough"
alpha = 3.0
[run]
paths = 2
norms = [["bessel", 1.0, 2.0]]
[harness]
samples = 2
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run(args):
    return main([str(a) for a in args])


class TestSpec:
    def test_defaults_fully_populated(self):
        spec = build_spec({}, "simulate")
        d = spec.derived
        assert d["kappa_c"] == 0.0 and d["nu_hat"] == 1.0 and d["M"] == 0.0
        assert d["parameters"]["admissible"] and d["serrin"]["gamma0"] == 1.0
        assert spec.config["grid"] == {"dim": 2, "n": 32}

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown key 'size'"):
            build_spec({"grid": {"size": 3}}, "simulate")

    def test_unknown_section(self):
        with pytest.raises(SpecError, match="unknown section"):
            build_spec({"solver": {}}, "simulate")

    def test_boundary_weight_rejected(self):
        raw = {"parameters": {"p": 4.0, "q": 2.0, "kappa": 1.0}}
        with pytest.raises(SpecError, match="header"):
            build_spec(raw, "exponents")
        assert not build_spec(raw, "exponents", allow_inadmissible=True).derived[
            "parameters"]["admissible"]

    def test_stratonovich_time_dependent_rejected(self):
        raw = {"time": {"mode": "stratonovich"},
               "noise": {"kind": "constant", "vectors": [[0.3, 0.0]], "time_dependent": True,
                         "modulation_depth": 0.5}}
        with pytest.raises(ConfigurationError, match="independent"):
            build_spec(raw, "simulate")

    def test_critical_kappa_keyword(self):
        raw = {"grid": {"dim": 3, "n": 16},
               "parameters": {"p": 4.0, "q": 3.0, "delta": -0.25, "kappa": "critical"}}
        assert build_spec(raw, "exponents").params.kappa == 0.5

    def test_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[grid]\ndim = 2\nn = \n")
        with pytest.raises(SpecError, match="line 3"):
            load_spec(p, "simulate")

    def test_bad_type(self):
        with pytest.raises(SpecError, match="n"):
            build_spec({"grid": {"n": 16.5}}, "simulate")

    def test_hash_depends_on_overrides(self):
        a = build_spec({}, "simulate", seed=1).config_hash()
        b = build_spec({}, "simulate", seed=2).config_hash()
        assert a != b and a == build_spec({}, "simulate", seed=1).config_hash()


class TestMain:
    def test_exponents_classic_pair(self, tmp_path):
        cfg = tmp_path / "e.toml"
        cfg.write_text("[grid]\ndim = 3\nn = 16\n[serrin]\np0 = 4\nq0 = 6\n"
                       "[parameters]\np = 4\nq = 3\ndelta = -0.25\nkappa = \"critical\"\n")
        assert run(["exponents", cfg, "--out", tmp_path / "o"]) == EXIT_OK
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["result"]["serrin"]["gamma0"] == 0.0 and rep["result"]["serrin"]["classic"]

    def test_simulate_zero_data(self, tmp_path):
        out = tmp_path / "z"
        assert run(["simulate", "--out", out, "--paths", 2]) == EXIT_OK
        lines = (out / "series.tsv").read_text().splitlines()
        rows = np.array([[float(x) for x in ln.split("\t")] for ln in lines[1:]])
        assert np.all(rows[:, 2:] == 0)

    def test_reruns_byte_identical(self, small, tmp_path):
        for name in ("a", "b"):
            assert run(["simulate", small, "--out", tmp_path / name,
                        "--snapshot-every", 2]) == EXIT_OK
        for f in ("series.tsv", "manifest.json", "report.json", "snap_00001.knss"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_manifest_contents(self, small, tmp_path):
        run(["noise-info", small, "--out", tmp_path / "n"])
        man = json.loads((tmp_path / "n" / "manifest.json").read_text())
        assert len(man["config_hash"]) == 64
        assert man["noise"]["n_modes"] == 2 and man["derived"]["nu_hat"] > 0

    @pytest.mark.parametrize("preset", ["energy-check", "serrin-monitor", "smr-estimate",
                                        "small-data"])
    def test_harness_presets(self, small, tmp_path, preset):
        assert run([preset, small, "--out", tmp_path / preset]) == EXIT_OK
        assert (tmp_path / preset / "series.tsv").exists()

    def test_scaling_preset(self, tmp_path):
        cfg = tmp_path / "s.toml"
        cfg.write_text('[grid]\nn = 16\n[time]\ndt = 0.01\nT = 0.05\n'
                       '[noise]\nkind = "constant"\nvectors = [[0.3, 0.1]]\n'
                       '[initial]\nkind = "taylor-green"\n')
        assert run(["scaling-check", cfg, "--out", tmp_path / "s", "--paths", 1]) == EXIT_OK

    def test_harness_failure_exit_code(self, tmp_path):
        cfg = tmp_path / "f.toml"
        cfg.write_text('[grid]\nn = 16\n[time]\ndt = 0.01\nT = 0.05\n'
                       '[initial]\nkind = "taylor-green"\n[harness]\ntolerance = -1.0\n')
        assert run(["scaling-check", cfg, "--out", tmp_path / "f", "--paths", 1]) == EXIT_FAIL

    def test_validation_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "v.toml"
        cfg.write_text("[parameters]\np = 4\nq = 2\nkappa = 1\n")
        assert run(["exponents", cfg, "--out", tmp_path / "v"]) == EXIT_INVALID
        assert "header" in capsys.readouterr().err
        assert not (tmp_path / "v").exists()
