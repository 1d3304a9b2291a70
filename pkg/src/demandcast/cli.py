"""``demandcast`` command line: synth, train, predict, validate, bill, scenario, simulate.

Exit status is 0 on success, 1 for bad input or arguments, 2 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from . import forecaster, scenario, simulator, synth, tariff
from .timeseries import load_csv, load_production_csv, write_csv, write_production_csv

EXIT_USER = 1
EXIT_INTERNAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _tariff(args) -> tariff.TariffSchedule:
    policy = tariff.ContractedFloor(args.floor_kw) if getattr(args, "floor_kw", None) is not None else tariff.MaxDemand()
    return tariff.TariffSchedule(args.demand_rate, args.energy_rate, policy)


def cmd_synth(args) -> None:
    params = synth.SynthParams(noise_kw=args.noise) if args.noise is not None else synth.SynthParams()
    demand, production = synth.synthesize(args.days, seed=args.seed, start=args.start, params=params)
    out = _out_dir(args)
    write_csv(demand, out / "demand.csv")
    write_production_csv(production, out / "production.csv")
    print(f"wrote {len(demand)} demand rows and {len(production)} production days to {out}")


def cmd_train(args) -> None:
    demand = load_csv(args.demand)
    production = load_production_csv(args.production)
    overrides = {"seed": args.seed}
    for key in ("epochs", "hidden", "learning_rate", "momentum", "batch_size"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.lags is not None:
        overrides["n_y"] = args.lags
    net = forecaster.NarxNetwork(forecaster.NarxConfig(**overrides))
    report = net.train(demand, production)
    out = _out_dir(args)
    net.save(out / "model.json")
    report.write_csv(out / "training.csv")
    print(f"epoch 0 mse {report.epoch_mse[0]:.6g}, final mse {report.final_mse:.6g}; model in {out / 'model.json'}")


def cmd_predict(args) -> None:
    net = forecaster.NarxNetwork.load(args.model)
    prior = load_csv(args.prior)
    plan = load_production_csv(args.plan)
    forecast = net.predict_month(prior, plan, args.days)
    out = _out_dir(args)
    write_csv(forecast, out / "forecast.csv")
    print(f"wrote {len(forecast)} forecast rows to {out / 'forecast.csv'}")


def cmd_validate(args) -> None:
    report = forecaster.validate(load_csv(args.forecast), load_csv(args.actual), basis=args.basis)
    out = _out_dir(args)
    text = report.to_text()
    (out / "validation.txt").write_text(text + "\n")
    report.write_csv(out / "validation.csv")
    print(text)


def cmd_bill(args) -> None:
    pf = None
    if args.active_kw is not None or args.apparent_kva is not None:
        if args.active_kw is None or args.apparent_kva is None:
            raise UsageError("--active-kw and --apparent-kva go together")
        pf = (args.active_kw, args.apparent_kva)
    bill = tariff.compute_bill(load_csv(args.series), _tariff(args), pf)
    out = _out_dir(args)
    text = bill.to_text()
    (out / "bill.txt").write_text(text + "\n")
    bill.write_csv(out / "bill.csv")
    print(text)


def cmd_scenario(args) -> None:
    measures = scenario.load_scenario(args.file) if args.file else scenario.smelter_measures()
    report = scenario.scenario_report(measures, _tariff(args))
    out = _out_dir(args)
    text = report.to_text()
    (out / "scenario.txt").write_text(text + "\n")
    report.write_csv(out / "scenario.csv")
    print(text)


def model_from_spec(spec: dict):
    """Build a model, input signal and run settings from a simulation spec document.

    ``model.type`` is ``rlc`` (``R``, ``L``, ``C``), ``state_space``
    (``A``, ``B``, ``C``, ``D``) or ``ode`` (``a`` = a_0..a_{n-1}, ``b``).
    ``input`` holds breakpoint ``times``, ``values`` and ``interpolation``.
    """
    m = spec["model"]
    kind = m.get("type")
    if kind == "rlc":
        model = simulator.rlc_model(m["R"], m["L"], m["C"])
    elif kind == "state_space":
        model = simulator.StateSpaceModel(m["A"], m["B"], m["C"], m["D"])
    elif kind == "ode":
        model = simulator.ode_to_state_space(m["a"], m.get("b", 1.0))
    else:
        raise ValueError(f"unknown model type {kind!r}; use rlc, state_space or ode")
    if "x0" in spec:
        model = model.with_x0(spec["x0"])
    u = None
    if "input" in spec:
        sig = spec["input"]
        u = simulator.InputSignal(sig["times"], sig["values"], sig.get("interpolation", "hold"))
    return model, u, float(spec["t_end"]), float(spec.get("dt", simulator.DEFAULT_DT))


def cmd_simulate(args) -> None:
    try:
        spec = json.loads(Path(args.spec).read_text())
        model, u, t_end, dt = model_from_spec(spec)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{args.spec}: bad simulation spec ({exc!r})") from None
    result = simulator.simulate(model, u, t_end, dt)
    out = _out_dir(args)
    result.write_csv(out / "trajectory.csv")
    print(f"wrote {len(result.times)} samples to {out / 'trajectory.csv'}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="demandcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        return sp

    def rates(sp):
        sp.add_argument("--demand-rate", type=float, default=tariff.SMELTER_DEMAND_RATE, help="$/kW-month")
        sp.add_argument("--energy-rate", type=float, default=tariff.SMELTER_ENERGY_RATE, help="$/kWh")

    sp = add("synth", cmd_synth, "generate synthetic demand and production CSVs")
    sp.add_argument("--seed", type=int, default=forecaster.DEFAULT_SEED)
    sp.add_argument("--days", type=int, default=30)
    sp.add_argument("--start", type=date.fromisoformat, default=date(2007, 9, 1))
    sp.add_argument("--noise", type=float, default=None, help="noise standard deviation in kW")

    sp = add("train", cmd_train, "train a forecaster on a demand month")
    sp.add_argument("--demand", required=True)
    sp.add_argument("--production", required=True)
    sp.add_argument("--seed", type=int, default=forecaster.DEFAULT_SEED)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--hidden", type=_int_list, help="hidden layer sizes, e.g. 16 or 16,8")
    sp.add_argument("--lags", type=int, help="number of fed-back demand lags")
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--momentum", type=float)
    sp.add_argument("--batch-size", type=int)

    sp = add("predict", cmd_predict, "forecast the month following a prior month")
    sp.add_argument("--model", required=True)
    sp.add_argument("--prior", required=True)
    sp.add_argument("--plan", required=True, help="production plan CSV")
    sp.add_argument("--days", type=int, required=True, choices=(28, 29, 30, 31))

    sp = add("validate", cmd_validate, "compare a forecast with measured demand")
    sp.add_argument("--forecast", required=True)
    sp.add_argument("--actual", required=True)
    sp.add_argument("--basis", choices=("predicted", "real"), default="predicted",
                    help="denominator of the percent errors")

    sp = add("bill", cmd_bill, "bill a demand series")
    sp.add_argument("--series", required=True)
    rates(sp)
    sp.add_argument("--floor-kw", type=float, help="contracted minimum billable demand")
    sp.add_argument("--active-kw", type=float)
    sp.add_argument("--apparent-kva", type=float)

    sp = add("scenario", cmd_scenario, "savings report for a list of measures")
    sp.add_argument("--file", help="scenario CSV (default: bundled smelter measures)")
    rates(sp)

    sp = add("simulate", cmd_simulate, "simulate a state-space model spec")
    sp.add_argument("--spec", required=True, help="JSON model spec")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (UsageError, ValueError, OSError, forecaster.TrainingDivergence, simulator.SimulationError) as exc:
        print(f"demandcast: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"demandcast: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
