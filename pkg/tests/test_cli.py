import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ancientflow.acceptance import Check, CriterionResult
from ancientflow.cli import DEFAULT_SEEDS, EXIT_CHECK, EXIT_OK, EXIT_USAGE, THREAD_ENV, OUTDIR_ENV, emit_report, main
from ancientflow.geometry_core import CylinderGraph, Grid1D, RadialProfile
from ancientflow.io import read_csv, write_csv


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(OUTDIR_ENV, raising=False)
    for var in THREAD_ENV:
        monkeypatch.delenv(var, raising=False)
    return tmp_path



def load(path):
    return json.loads(path.read_text())


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["bowl", "--bogus"]) == EXIT_USAGE

    def test_no_command(self):
        assert main([]) == EXIT_USAGE

    def test_help(self):
        assert main(["--help"]) == EXIT_OK

    def test_nonpositive_value(self):
        assert main(["bowl", "--h", "-1"]) == EXIT_USAGE

    def test_missing_required_option(self):
        assert main(["evolve", "--input", "x.csv"]) == EXIT_USAGE

    def test_missing_input(self, isolated):
        assert main(["evolve", "--input", "nope.csv", "--tend", "1"]) == EXIT_USAGE

    def test_unparsable_input(self, isolated):
        (isolated / "bad.csv").write_text("a,b\n1,2\n")
        assert main(["spectrum", "--input", "bad.csv"]) == EXIT_USAGE

    def test_parameter_error(self, capsys):
        assert main(["bowl", "--rmax", "100", "--h", "0.03"]) == EXIT_USAGE
        assert "invalid parameter" in capsys.readouterr().err

    def test_wrong_surface_kind(self, isolated):
        write_csv(isolated / "r.csv", RadialProfile(Grid1D(-1, 1, 5), np.ones(5)))
        assert main(["neck", "fit", "--input", "r.csv"]) == EXIT_USAGE

    def test_failing_criterion(self, isolated):
        assert main(["verify", "--only", "6", "--quiet"]) == EXIT_CHECK
        doc = load(isolated / "report.json")
        assert doc["summary"]["all_passed"] is False

    def test_bad_only_list(self):
        assert main(["verify", "--only", "six"]) == EXIT_USAGE


class TestOutputs:
    def test_bowl_csv_carries_hash_and_seed(self, isolated):
        assert main(["bowl", "--rmax", "5", "--h", "0.01", "--quiet"]) == EXIT_OK
        surface, meta = read_csv(isolated / "bowl.csv")
        assert surface.grid.hi == 5.0 and surface.f[0] == 0.0
        assert len(meta["config_hash"]) == 16
        assert meta["seed"] == "0"

    def test_hash_ignores_output_location(self, isolated):
        main(["bowl", "--rmax", "5", "--h", "0.01", "--out", "a.csv", "--quiet"])
        main(["bowl", "--rmax", "5", "--h", "0.01", "--outdir", "sub", "--out", "b.csv", "--quiet"])
        main(["bowl", "--rmax", "6", "--h", "0.01", "--out", "c.csv", "--quiet"])
        h = [read_csv(p)[1]["config_hash"] for p in (isolated / "a.csv", isolated / "sub" / "b.csv", isolated / "c.csv")]
        assert h[0] == h[1] != h[2]

    def test_env_outdir(self, isolated, monkeypatch):
        monkeypatch.setenv(OUTDIR_ENV, str(isolated / "env"))
        assert main(["psi", "--nz", "3", "--nt", "2", "--quiet"]) == EXIT_OK
        text = (isolated / "env" / "psi.csv").read_text().splitlines()
        assert text[3] == "z,t,psi,psi_zz"
        assert len(text) == 4 + 6

    def test_flag_beats_env(self, isolated, monkeypatch):
        monkeypatch.setenv(OUTDIR_ENV, str(isolated / "env"))
        main(["psi", "--nz", "3", "--nt", "2", "--outdir", "flag", "--quiet"])
        assert (isolated / "flag" / "psi.csv").is_file()
        assert not (isolated / "env").exists()

    def test_shrinker(self, isolated):
        assert main(["shrinker", "--a", "10", "--quiet"]) == EXIT_OK
        surface, _ = read_csv(isolated / "shrinker.csv")
        assert surface.r[0] == pytest.approx(1.42646, abs=1e-4)

    def test_mz_default_seed(self, isolated):
        assert main(["mz", "--runs", "3", "--span", "20", "--quiet"]) == EXIT_OK
        doc = load(isolated / "mz.json")
        assert doc["metadata"]["seed"] == DEFAULT_SEEDS["mz"] == 42
        assert sum(doc["counts"].values()) == 3
        assert doc["checks"][0]["check"] == "all_runs_decided"

    def test_evolve_writes_states(self, isolated):
        g = Grid1D(-1.0, 1.0, 21)
        write_csv(isolated / "cyl.csv", RadialProfile(g, np.full(21, np.sqrt(2.0))))
        argv = ["evolve", "--input", "cyl.csv", "--t0", "-1", "--tend", "-0.9", "--dt", "0.01",
                "--boundary", "reflection", "--probe", "min_radius", "--quiet"]
        assert main(argv) == EXIT_OK
        doc = load(isolated / "trajectory.json")
        assert len(doc["states"]) == 11
        np.testing.assert_allclose(doc["diagnostics"]["min_radius"][-1], np.sqrt(1.8), rtol=1e-10)
        last, meta = read_csv(isolated / doc["states"][-1]["payload"])
        assert float(meta["t"]) == pytest.approx(-0.9)

    def test_rescaled_and_spectrum(self, isolated):
        argv = ["rescaled", "--mode", "0,1,c", "--zmax", "6", "--nz", "121", "--ntheta", "8", "--tend", "0.05", "--quiet"]
        assert main(argv) == EXIT_OK
        doc = load(isolated / "rescaled.json")
        assert len(doc["states"]) == 51
        graph = CylinderGraph.from_function(lambda T, Z: 1e-3 + 0 * Z, 16, Grid1D(-12.0, 12.0, 481))
        write_csv(isolated / "g.csv", graph)
        assert main(["spectrum", "--input", "g.csv", "--nmax", "2", "--mmax", "1", "--quiet"]) == EXIT_OK
        sp = load(isolated / "split.json")
        assert sp["U_plus"] == pytest.approx(19.10524e-6, rel=1e-6)
        assert len(sp["modes"]) == 9

    def test_rescaled_needs_input(self):
        assert main(["rescaled", "--tend", "0.1"]) == EXIT_USAGE
        assert main(["rescaled", "--mode", "1,2", "--tend", "0.1"]) == EXIT_USAGE

    def test_neck_patch_then_fit(self, isolated):
        argv = ["neck", "patch", "--rmax", "400", "--rcenter", "40", "--nz", "41", "--nt", "9", "--quiet"]
        assert main(argv) == EXIT_OK
        assert main(["neck", "fit", "--input", "patch.csv", "--quiet"]) == EXIT_OK
        doc = load(isolated / "neck_fit.json")
        assert doc["status"] == "neck"
        assert doc["eps_measured"] == pytest.approx(0.0635, rel=0.05)

    def test_neck_improve(self, isolated):
        assert main(["neck", "improve", "--L", "10", "--modes", "m1", "--quiet"]) == EXIT_OK
        doc = load(isolated / "neck_improve.json")
        assert doc["factor"] <= 0.1


class TestVerify:
    def test_no_timing_is_byte_identical(self, isolated):
        for name in ("a.json", "b.json"):
            assert main(["verify", "--only", "1,11", "--no-timing", "--out", name, "--quiet"]) == EXIT_OK
        a, b = (isolated / "a.json").read_bytes(), (isolated / "b.json").read_bytes()
        assert a == b
        doc = json.loads(a)
        assert all(c["runtime"] is None for c in doc["checks"])
        assert doc["metadata"]["seed"] == DEFAULT_SEEDS["verify"] == 7

    def test_echo(self, capsys):
        main(["verify", "--only", "11", "--no-timing"])
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("[PASS] criterion 11")
        assert out[-1].startswith("3/3 checks passed")


class TestConfig:
    def test_flags_override_config(self, isolated):
        (isolated / "c.ini").write_text("rmax = 5\nh = 0.01\n")
        assert main(["bowl", "--config", "c.ini", "--rmax", "4", "--quiet"]) == EXIT_OK
        surface, _ = read_csv(isolated / "bowl.csv")
        assert surface.grid.hi == 4.0 and surface.grid.h == pytest.approx(0.01)

    def test_section_header_and_dashes(self, isolated):
        (isolated / "c.ini").write_text("[evolve]\nkeep-every = 5\ntend = -0.9\ndt = 0.01\nt0 = -1\nboundary = reflection\nprobe = min_radius, H_max\n")
        write_csv(isolated / "cyl.csv", RadialProfile(Grid1D(-1, 1, 11), np.full(11, np.sqrt(2.0))))
        assert main(["evolve", "--config", "c.ini", "--input", "cyl.csv", "--quiet"]) == EXIT_OK
        doc = load(isolated / "trajectory.json")
        assert len(doc["states"]) == 3
        assert set(doc["diagnostics"]) == {"min_radius", "H_max"}

    def test_same_hash_from_config_or_flags(self, isolated):
        (isolated / "c.ini").write_text("rmax = 5\nh = 0.01\n")
        main(["bowl", "--config", "c.ini", "--out", "a.csv", "--quiet"])
        main(["bowl", "--rmax", "5", "--h", "0.01", "--out", "b.csv", "--quiet"])
        assert read_csv(isolated / "a.csv")[1]["config_hash"] == read_csv(isolated / "b.csv")[1]["config_hash"]

    @pytest.mark.parametrize(
        "text", ["colour = red\n", "rmax = big\n", "scheme = leapfrog\n", "no key value line\n"], ids=["key", "value", "choice", "syntax"]
    )
    def test_bad_config(self, isolated, text):
        (isolated / "c.ini").write_text(text)
        assert main(["bowl", "--config", "c.ini"]) == EXIT_USAGE

    def test_bad_boolean(self, isolated):
        (isolated / "c.ini").write_text("no_timing = maybe\n")
        assert main(["verify", "--config", "c.ini"]) == EXIT_USAGE

    def test_missing_config(self):
        assert main(["bowl", "--config", "absent.ini"]) == EXIT_USAGE


class TestThreads:
    def test_threads_set_environment(self, monkeypatch):
        assert main(["psi", "--nz", "2", "--nt", "2", "--threads", "1", "--quiet"]) == EXIT_OK
        assert all(os.environ[v] == "1" for v in THREAD_ENV)


def check(name, measured, passed=True):
    return Check(1, name, "anchor", measured, 1.0 if passed else -1.0)


class TestEmitReport:
    def test_empty(self):
        assert emit_report([]) == {"checks": []}

    def test_single(self):
        doc = emit_report([check("a", 0.5)], {"seed": 1})
        assert doc["summary"] == {"total": 1, "passed": 1, "failed": 0, "all_passed": True}
        assert doc["metadata"] == {"seed": 1}
        assert doc["checks"][0]["measured"] == 0.5

    def test_mixed_and_flattened(self):
        res = CriterionResult(2, "two", [check("a", 0.5), check("b", 0.5, passed=False)], 0.1)
        doc = emit_report([res, check("c", 0.0)], timing=False)
        assert [c["check"] for c in doc["checks"]] == ["a", "b", "c"]
        assert doc["summary"]["failed"] == 1 and not doc["summary"]["all_passed"]
        assert all(c["runtime"] is None for c in doc["checks"])


@pytest.mark.skipif(shutil.which("ancientflow") is None, reason="console script not on PATH")
def test_console_script(isolated):
    res = subprocess.run(["ancientflow", "psi", "--nz", "2", "--nt", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "psi.csv" in res.stdout


def test_module_entry(isolated):
    res = subprocess.run([sys.executable, "-m", "ancientflow.cli", "bowl", "--bogus"], capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE
