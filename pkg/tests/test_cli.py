import json
from datetime import datetime

import numpy as np
import pytest

from conftest import PIPELINE_ARTIFACTS
from demandcast.cli import main
from demandcast.forecaster import NarxNetwork
from demandcast.simulator import read_simulation_csv
from demandcast.synth import SynthParams, deterministic_load, synthesize
from demandcast.tariff import read_bill_csv
from demandcast.timeseries import LoadSeries, load_csv, load_production_csv, write_csv


def run(*argv):
    return main([str(a) for a in argv])


class TestSynth:
    def test_same_seed_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert run("synth", "--seed", 7, "--days", 3, "--out", tmp_path / d) == 0
        for f in ("demand.csv", "production.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_31_days(self, tmp_path):
        assert run("synth", "--days", 31, "--out", tmp_path) == 0
        assert len(load_csv(tmp_path / "demand.csv")) == 2976
        assert len(load_production_csv(tmp_path / "production.csv")) == 31

    def test_zero_noise_is_deterministic_formula(self, tmp_path):
        assert run("synth", "--days", 5, "--noise", 0, "--out", tmp_path) == 0
        s = load_csv(tmp_path / "demand.csv")
        p = load_production_csv(tmp_path / "production.csv")
        expected = deterministic_load(s.start, len(s), p, SynthParams(noise_kw=0.0))
        assert np.array_equal(s.values, np.clip(expected, 0.0, None))

    def test_round_trip_matches_library(self, tmp_path):
        assert run("synth", "--days", 2, "--seed", 11, "--out", tmp_path) == 0
        demand, production = synthesize(2, seed=11)
        assert load_csv(tmp_path / "demand.csv") == demand
        assert load_production_csv(tmp_path / "production.csv") == production

    def test_days_must_be_positive(self, tmp_path, capsys):
        assert run("synth", "--days", 0, "--out", tmp_path) == 1
        assert capsys.readouterr().err.startswith("demandcast: error:")


class TestPipeline:
    def test_outputs_load(self, tmp_path, cli_pipeline):
        out = cli_pipeline(tmp_path / "run", epochs=5)
        assert len(load_csv(out / "forecast.csv")) == 2976
        NarxNetwork.load(out / "model.json")
        assert (out / "training.csv").read_text().splitlines()[0] == "epoch,mse"
        assert len((out / "training.csv").read_text().splitlines()) == 7
        assert (out / "validation.txt").read_text().startswith("erms")

    def test_deterministic(self, tmp_path, cli_pipeline):
        a, b = cli_pipeline(tmp_path / "a", epochs=3), cli_pipeline(tmp_path / "b", epochs=3)
        for f in PIPELINE_ARTIFACTS:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_validate_identical(tmp_path, capsys):
    write_csv(LoadSeries(datetime(2007, 10, 1), 15, np.linspace(1e4, 2e4, 96)), tmp_path / "x.csv")
    assert run("validate", "--forecast", tmp_path / "x.csv", "--actual", tmp_path / "x.csv", "--out", tmp_path) == 0
    assert "erms            0.0000%" in capsys.readouterr().out


def test_validate_cadence_mismatch(tmp_path):
    write_csv(LoadSeries(datetime(2007, 10, 1), 15, [1.0] * 4), tmp_path / "a.csv")
    write_csv(LoadSeries(datetime(2007, 10, 1), 5, [1.0] * 12), tmp_path / "b.csv")
    assert run("validate", "--forecast", tmp_path / "a.csv", "--actual", tmp_path / "b.csv", "--out", tmp_path) == 1


def test_scenario_bundled(tmp_path, capsys):
    assert run("scenario", "--out", tmp_path) == 0
    assert "308,018" in capsys.readouterr().out
    assert "308,018" in (tmp_path / "scenario.txt").read_text()


def test_scenario_file_and_rates(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("name,plant,demand_kw,energy_kwh\nA,P,100,1000\n")
    assert run("scenario", "--file", tmp_path / "s.csv", "--demand-rate", 10, "--energy-rate", 0.1, "--out", tmp_path) == 0
    assert "1,100" in capsys.readouterr().out


def test_bill_zero_series(tmp_path):
    write_csv(LoadSeries(datetime(2007, 10, 1), 15, [0.0] * 96), tmp_path / "z.csv")
    assert run("bill", "--series", tmp_path / "z.csv", "--out", tmp_path) == 0
    assert read_bill_csv(tmp_path / "bill.csv").total_usd == 0.0


def test_bill_power_factor_flags_pair(tmp_path):
    write_csv(LoadSeries(datetime(2007, 10, 1), 15, [5.0] * 96), tmp_path / "s.csv")
    assert run("bill", "--series", tmp_path / "s.csv", "--active-kw", 8, "--apparent-kva", 10, "--out", tmp_path) == 0
    assert read_bill_csv(tmp_path / "bill.csv").power_factor == 0.8
    assert run("bill", "--series", tmp_path / "s.csv", "--active-kw", 8, "--out", tmp_path) == 1


class TestSimulate:
    def test_rlc_spec(self, tmp_path):
        spec = {"model": {"type": "rlc", "R": 0.0, "L": 1.0, "C": 1.0}, "x0": [0.0, 1.0], "t_end": 1.0, "dt": 0.001}
        (tmp_path / "m.json").write_text(json.dumps(spec))
        assert run("simulate", "--spec", tmp_path / "m.json", "--out", tmp_path) == 0
        res = read_simulation_csv(tmp_path / "trajectory.csv")
        assert len(res.times) == 1001
        assert np.max(np.abs(res.states[:, 0] + np.sin(res.times))) < 1e-9

    def test_state_space_with_input(self, tmp_path):
        spec = {
            "model": {"type": "state_space", "A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]},
            "input": {"times": [0.0], "values": [2.0]},
            "t_end": 10.0,
            "dt": 0.01,
        }
        (tmp_path / "m.json").write_text(json.dumps(spec))
        assert run("simulate", "--spec", tmp_path / "m.json", "--out", tmp_path) == 0
        res = read_simulation_csv(tmp_path / "trajectory.csv")
        assert res.outputs[-1, 0] == pytest.approx(2.0 * (1 - np.exp(-10.0)), abs=1e-9)

    def test_ode_spec(self, tmp_path):
        spec = {"model": {"type": "ode", "a": [2.0, 3.0]}, "input": {"times": [0.0], "values": [1.0]}, "t_end": 20.0}
        (tmp_path / "m.json").write_text(json.dumps(spec))
        assert run("simulate", "--spec", tmp_path / "m.json", "--out", tmp_path) == 0
        assert read_simulation_csv(tmp_path / "trajectory.csv").outputs[-1, 0] == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("text", ["not json", '{"model": {"type": "tank"}, "t_end": 1}', '{"t_end": 1}'])
    def test_bad_specs(self, tmp_path, text, capsys):
        (tmp_path / "m.json").write_text(text)
        assert run("simulate", "--spec", tmp_path / "m.json", "--out", tmp_path) == 1
        err = capsys.readouterr().err
        assert err.startswith("demandcast: error:") and err.count("\n") == 1


class TestUserErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["nope"],
            ["train"],
            ["predict", "--model", "m", "--prior", "p", "--plan", "q", "--days", "27"],
            ["bill", "--series", "missing.csv"],
            ["scenario", "--demand-rate", "0"],
            ["train", "--demand", "a", "--production", "b", "--hidden", "x,y"],
        ],
    )
    def test_exit_one(self, tmp_path, monkeypatch, argv, capsys):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == 1
        assert capsys.readouterr().err.startswith("demandcast: error:")

    def test_bad_csv(self, tmp_path):
        (tmp_path / "bad.csv").write_text("timestamp,kw\n2007-10-01T00:00,-3\n")
        assert run("bill", "--series", tmp_path / "bad.csv", "--out", tmp_path) == 1
