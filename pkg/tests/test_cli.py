"""End-to-end coverage of the command-line driver.

Every invocation goes through ``main(argv)`` in-process, so exit codes and
the stderr error payloads are observed exactly as a shell would see them.
"""

from __future__ import annotations

import csv
import json
import math

import pytest

from virusfront.cli import main

EXT = {"theta": 1, "a": 1, "b": 1, "c": 2, "k": 1, "q": 1,
       "mu1": 0.1, "mu2": 0.1, "mu3": 0.1}
PERS = {"theta": 1, "a": 1, "b": 2, "c": 1, "k": 1, "q": 1}

SWEEP_COLUMNS = [
    "theta", "a", "b", "c", "k", "q", "d1", "d2", "d3",
    "mu1", "mu2", "mu3", "h0", "R0", "cond_2_26", "regime",
    "margin_extinction_sup_u2", "margin_extinction_sup_u3",
    "margin_u1_convergence",
    "margin_upper_u1", "margin_upper_u2", "margin_upper_u3",
    "margin_lower_u1", "margin_lower_u2", "margin_lower_u3",
]


def write_config(tmp_path, **cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def invoke(command, cfg_path, out, *extra):
    return main([command, "--config", cfg_path, "--out", str(out),
                 "--quiet", *extra])


class TestSimulate:
    def test_happy_path(self, tmp_path):
        cfg = write_config(
            tmp_path,
            params=PERS,
            simulate={"T": 1.0, "n": 50, "observers": 11, "snapshots": [0.5]},
        )
        out = tmp_path / "out"
        assert invoke("simulate", cfg, out, "--no-figures") == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["T"] == 1.0
        assert manifest["n"] == 50
        assert manifest["h_final"] > 1.0
        assert manifest["figures"] == []
        assert [s["file"] for s in manifest["snapshots"]] == [
            "snapshot_000.csv", "snapshot_001.csv",
        ]
        assert (out / "trajectory.csv").exists()
        for entry in manifest["snapshots"]:
            assert (out / entry["file"]).exists()

    def test_figures_rendered_alongside_csv(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS, simulate={"T": 1.0, "n": 50})
        out = tmp_path / "out"
        assert invoke("simulate", cfg, out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["figures"] == [
            "fig_front.png", "fig_supnorms.png", "fig_final_profile.png",
        ]
        for name in manifest["figures"]:
            assert (out / name).stat().st_size > 0

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS, simulate={"T": 1.0, "n": 50})
        a, b = tmp_path / "a", tmp_path / "b"
        assert invoke("simulate", cfg, a, "--no-figures") == 0
        assert invoke("simulate", cfg, b, "--no-figures") == 0
        for name in ("trajectory.csv", "manifest.json", "snapshot_000.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path):
        assert invoke("simulate", str(tmp_path / "nope.json"), tmp_path) == 2

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert invoke("simulate", str(path), tmp_path) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["category"] == "config"

    def test_unknown_top_level_key(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS, simulat={"T": 1.0})
        assert invoke("simulate", cfg, tmp_path) == 2

    def test_missing_params_block(self, tmp_path):
        cfg = write_config(tmp_path, simulate={"T": 1.0})
        assert invoke("simulate", cfg, tmp_path) == 2

    def test_unknown_simulate_key(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS, simulate={"snapshot_times": [1.0]})
        assert invoke("simulate", cfg, tmp_path) == 2

    def test_nonpositive_rate_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, params={**PERS, "theta": -1.0})
        assert invoke("simulate", cfg, tmp_path) == 2
        err = json.loads(capsys.readouterr().err)
        assert "theta" in err["error"]["message"]


class TestSolverFailures:
    def test_oversized_dt_exits_3(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, params=PERS, simulate={"T": 1.0, "n": 400, "dt": 0.05},
        )
        assert invoke("simulate", cfg, tmp_path / "out", "--no-figures") == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["category"] == "solver"
        assert err["error"]["type"] == "StepSizeError"


class TestEquilibriumCmd:
    def test_complete_chain_outputs(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS, equilibrium={"n": 200})
        out = tmp_path / "out"
        assert invoke("equilibrium", cfg, out, "--no-figures") == 0
        for name in ("upper_u1", "upper_u23", "lower_u1", "lower_u23"):
            assert (out / f"chain_{name}.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["R0"] == 2.0
        assert summary["cond_2_26"] is True
        assert all(e <= 1e-5 for e in summary["farfield_max_rel_error"].values())
        assert "full_equilibrium" not in summary

    def test_full_equilibrium_block(self, tmp_path):
        cfg = write_config(
            tmp_path, params=PERS, equilibrium={"n": 200, "full": True},
        )
        out = tmp_path / "out"
        assert invoke("equilibrium", cfg, out, "--no-figures") == 0
        assert (out / "full_equilibrium.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        far = summary["full_equilibrium"]["farfield"]
        assert far == pytest.approx(
            (0.73841681234051, 0.26158318765949, 0.21525043702153), rel=5e-3,
        )

    def test_subthreshold_writes_hint_only(self, tmp_path):
        cfg = write_config(tmp_path, params=EXT)
        out = tmp_path / "out"
        assert invoke("equilibrium", cfg, out, "--no-figures") == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary == {"R0": 0.5, "regime_hint": "no positive solution"}
        assert not list(out.glob("chain_*.csv"))


class TestClassifyCmd:
    def test_extinction_verdict_and_sweep_agreement(self, tmp_path, capsys):
        """The classify verdict and a single-point sweep over the same
        configuration must name the same regime."""
        sim = {"T": 200.0, "n": 400}
        cfg = write_config(tmp_path, params=EXT, simulate=sim)
        out = tmp_path / "out"
        assert invoke("classify", cfg, out, "--no-figures") == 0
        assert capsys.readouterr().out.strip().endswith("Extinction")
        verdict = json.loads((out / "classification.json").read_text())
        assert verdict["regime"] == "Extinction"
        assert verdict["R0"] == 0.5
        assert verdict["evidence"]["extinction_sup_u2"]["passed"] is True

        cfg2 = write_config(
            tmp_path, params=EXT, simulate=sim, sweep={"axes": {"b": [1.0]}},
        )
        out2 = tmp_path / "sweep"
        assert invoke("sweep", cfg2, out2, "--no-figures") == 0
        rows = list(csv.DictReader((out2 / "sweep.csv").open()))
        assert len(rows) == 1
        assert rows[0]["regime"] == verdict["regime"]


class TestSweepCmd:
    def test_grid_is_row_major_with_full_header(self, tmp_path):
        cfg = write_config(
            tmp_path,
            params=EXT,
            simulate={"T": 2.0, "n": 50, "observers": 11},
            classify={"window": 2.0},
            sweep={"axes": {"b": [0.5, 1.5], "q": [1.0, 2.0]}},
        )
        out = tmp_path / "out"
        assert invoke("sweep", cfg, out, "--no-figures") == 0
        with (out / "sweep.csv").open() as fh:
            header = fh.readline().strip().split(",")
            rows = list(csv.DictReader(fh, fieldnames=header))
        assert header == SWEEP_COLUMNS
        assert [float(r["b"]) for r in rows] == [0.5, 0.5, 1.5, 1.5]
        assert [float(r["q"]) for r in rows] == [1.0, 2.0, 1.0, 2.0]
        assert [float(r["R0"]) for r in rows] == [0.25, 0.125, 0.75, 0.375]
        for r in rows:  # all subthreshold: extinction margins only
            assert r["margin_extinction_sup_u2"] != ""
            assert r["margin_upper_u1"] == ""
            assert r["cond_2_26"] in ("true", "false")

    def test_axis_as_linspace_dict(self, tmp_path):
        cfg = write_config(
            tmp_path,
            params=EXT,
            simulate={"T": 1.0, "n": 50, "observers": 11},
            classify={"window": 1.0},
            sweep={"axes": {"b": {"start": 0.5, "stop": 1.0, "points": 3}}},
        )
        out = tmp_path / "out"
        assert invoke("sweep", cfg, out, "--no-figures") == 0
        rows = list(csv.DictReader((out / "sweep.csv").open()))
        assert [float(r["b"]) for r in rows] == [0.5, 0.75, 1.0]

    def test_sweep_block_required(self, tmp_path):
        cfg = write_config(tmp_path, params=EXT)
        assert invoke("sweep", cfg, tmp_path) == 2

    def test_empty_axis_rejected(self, tmp_path):
        cfg = write_config(tmp_path, params=EXT, sweep={"axes": {"b": []}})
        assert invoke("sweep", cfg, tmp_path) == 2

    def test_axis_must_be_a_model_parameter(self, tmp_path):
        cfg = write_config(tmp_path, params=EXT, sweep={"axes": {"tol": [1.0]}})
        assert invoke("sweep", cfg, tmp_path) == 2


class TestEigenCmd:
    def test_eigenvalue_identity_and_predicate_flip(self, tmp_path, capsys):
        cfg = write_config(tmp_path, params=PERS)
        rc = main([
            "eigen", "--config", cfg, "--quiet",
            "--l", "2.0", "--l", "6.0", "--eps", "0.05",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        records = json.loads(out[out.index("["):])
        assert [r["l"] for r in records] == [2.0, 6.0]
        for r in records:
            assert r["lambda1"] * r["l"] ** 2 == pytest.approx(math.pi**2, abs=1e-12)
        assert records[0]["condition"] is False  # short domain leaks too much
        assert records[1]["condition"] is True

    def test_requires_at_least_one_length(self, tmp_path):
        cfg = write_config(tmp_path, params=PERS)
        assert main(["eigen", "--config", cfg, "--quiet"]) == 2
