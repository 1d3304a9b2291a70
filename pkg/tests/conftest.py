from datetime import timedelta

import pytest

from demandcast.cli import main
from demandcast.synth import synthesize
from demandcast.timeseries import ProductionSeries, load_csv, write_csv

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def _record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def split_days(p: ProductionSeries, first: int, stop: int) -> ProductionSeries:
    return ProductionSeries(
        p.start_date + timedelta(days=first), p.anodes[first:stop], p.acid[first:stop], p.oxygen[first:stop]
    )


@pytest.fixture(scope="session")
def two_months():
    """Default synthetic September (30 days) and October (31 days) 2007."""
    demand, production = synthesize(61)
    return {
        "train": demand.slice(0, 30 * 96),
        "test": demand.slice(30 * 96, 61 * 96),
        "train_production": split_days(production, 0, 30),
        "plan": split_days(production, 30, 61),
    }


PIPELINE_ARTIFACTS = (
    "demand.csv", "production.csv", "model.json", "training.csv", "forecast.csv", "validation.txt", "validation.csv",
)


def _split_month(path, first, stop, dest):
    write_csv(load_csv(path).slice(first * 96, stop * 96), dest)
    return str(dest)


def _run_pipeline(out, epochs=None):
    """synth 61 days, train on the first 30, forecast the next 31 and validate, all through the CLI."""
    out.mkdir()

    def run(*argv):
        assert main([str(a) for a in argv]) == 0, argv

    run("synth", "--days", 61, "--out", out)
    sept = _split_month(out / "demand.csv", 0, 30, out / "sept.csv")
    octo = _split_month(out / "demand.csv", 30, 61, out / "oct.csv")
    extra = ["--epochs", epochs] if epochs else []
    run("train", "--demand", sept, "--production", out / "production.csv", "--out", out, *extra)
    run("predict", "--model", out / "model.json", "--prior", sept, "--plan", out / "production.csv", "--days", 31, "--out", out)
    run("validate", "--forecast", out / "forecast.csv", "--actual", octo, "--out", out)
    return out


@pytest.fixture
def cli_pipeline():
    return _run_pipeline
