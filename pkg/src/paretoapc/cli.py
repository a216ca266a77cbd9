"""``pareto-apc`` command line.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.
Every option may also be given in a flat ``key = value`` file passed with
``--config``; flags on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import cellnet, persist, reports
from .apc import ApcConfig, Hyperplane
from .solver import SolverOptions

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("paretoapc")


class ConfigError(Exception):
    pass


class SolverFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return vals[0], vals[1]


def _power_grid(text: str) -> list[float]:
    """``5,10,30`` or ``start:stop:step`` (stop inclusive)."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad power grid {text!r}") from None
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(round((stop - start) / step)) + 1
        return [start + k * step for k in range(count)]
    return _floats(text)


def _add_scenario_args(p):
    g = p.add_argument_group("scenario")
    g.add_argument("--seed", type=int, help="scenario seed (required unless a scenario file is given)")
    g.add_argument("--cells", type=int, default=19)
    g.add_argument("--subcarriers", type=int, default=64)
    g.add_argument("--isd", type=float, default=1000.0, help="inter-site distance, m")
    g.add_argument("--bandwidth", type=float, default=10e6, help="system bandwidth, Hz")
    g.add_argument("--p-max", type=float, default=30.0, help="per-BS power budget, W")
    g.add_argument("--noise-psd", type=float, default=-174.0, help="noise PSD, dBm/Hz")


def _add_run_args(p):
    p.add_argument("--scenario", help="scenario file from gen-scenario")
    _add_scenario_args(p)
    p.add_argument("--bs", type=int, default=0, help="index of the deciding BS")
    p.add_argument("--others-power", type=float, default=None,
                   help="total power of every other BS, spread evenly (default p_max)")
    p.add_argument("--tol", type=float, default=1e-6, help="KKT residual tolerance")
    p.add_argument("--max-iter", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pareto-apc", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value file with defaults for any option")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scenario", help="generate and save a network scenario")
    _add_scenario_args(p)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("apc", help="trace the efficient front of one BS")
    _add_run_args(p)
    p.add_argument("--alpha", type=float, default=None, help="target spacing (default span/50)")
    p.add_argument("--r", type=_pair, default=(1.0, 1.0), help="direction, e.g. 1,1")
    p.add_argument("--b", type=_pair, default=(0.0, 1.0), help="hyperplane normal")
    p.add_argument("--beta", type=int, choices=(0, 1), default=0, help="hyperplane offset")
    p.add_argument("--max-points", type=int, default=1000)
    p.add_argument("--no-prediction", action="store_true", help="warm-start from the previous point only")
    p.add_argument("-o", "--output", required=True, help="front CSV")
    p.add_argument("--summary", help="summary JSON (default: <output>.json)")

    p = sub.add_parser("baseline", help="run one baseline allocator")
    _add_run_args(p)
    p.add_argument("--scheme", choices=reports.SCHEMES[:3], required=True)
    p.add_argument("--budget", type=float, default=None, help="power budget, W (default p_max)")
    p.add_argument("-o", "--output", required=True, help="metrics JSON")

    p = sub.add_parser("sweep", help="compare schemes over a grid of power budgets")
    _add_run_args(p)
    p.add_argument("--powers", type=_power_grid, default=_power_grid("5:30:5"),
                   help="budgets, '5,10,20' or 'start:stop:step'")
    p.add_argument("--schemes", default=",".join(reports.SCHEMES))
    p.add_argument("-o", "--output", required=True, help="comparison CSV")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = persist.read_flat_config(args.config)
        except OSError as exc:
            parser.exit(EXIT_IO, f"pareto-apc: cannot read config: {exc}\n")
        except cellnet.InvalidConfigError as exc:
            parser.exit(EXIT_CONFIG, f"pareto-apc: {exc}\n")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known - {"config", "verbose"}
        if unknown:
            parser.exit(EXIT_CONFIG, f"pareto-apc: unknown config keys: {', '.join(sorted(unknown))}\n")
        flags = {a.dest for a in sub._actions if isinstance(a, argparse._StoreTrueAction)}
        defaults = {}
        for k, v in cfg.items():
            if k in flags:
                if v.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    parser.exit(EXIT_CONFIG, f"pareto-apc: {k} expects a boolean, got {v!r}\n")
                v = v.lower() in ("true", "1", "yes")
            defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _scenario_config(args) -> cellnet.ScenarioConfig:
    return cellnet.ScenarioConfig(args.cells, args.subcarriers, args.isd, args.bandwidth,
                                  args.p_max, args.noise_psd)


def _load_or_generate(args) -> cellnet.Scenario:
    if args.scenario:
        return persist.load_scenario(args.scenario)
    if args.seed is None:
        raise ConfigError("give --scenario FILE or --seed")
    return cellnet.generate_scenario(_scenario_config(args), args.seed)


def _base_powers(args, sc) -> np.ndarray:
    total = sc.p_max if args.others_power is None else args.others_power
    if not 0 <= total <= sc.p_max:
        raise ConfigError(f"--others-power must lie in [0, {sc.p_max}]")
    if not 0 <= args.bs < sc.n_cells:
        raise ConfigError(f"--bs must lie in [0, {sc.n_cells - 1}]")
    return sc.epa_powers(total)


def _solver_options(args) -> SolverOptions:
    if not args.tol > 0 or args.max_iter < 1:
        raise ConfigError("--tol must be positive and --max-iter at least 1")
    return SolverOptions(tol=args.tol, max_iter=args.max_iter)


def cmd_gen_scenario(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required")
    sc = cellnet.generate_scenario(_scenario_config(args), args.seed)
    persist.save_scenario(sc, args.output)
    log.info("wrote %s (%d cells, %d subcarriers)", args.output, sc.n_cells, sc.n_subcarriers)
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, default=_jsonable)
        fh.write("\n")


def cmd_apc(args) -> int:
    sc = _load_or_generate(args)
    base = _base_powers(args, sc)
    try:
        config = ApcConfig(r=tuple(args.r), alpha=args.alpha, hyperplane=Hyperplane(args.b, args.beta),
                           solver=_solver_options(args), max_front_points=args.max_points,
                           use_prediction=not args.no_prediction)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    start = time.perf_counter()
    front = reports.trace_front(sc, args.bs, base, config)
    runtime = time.perf_counter() - start
    rows = reports.front_rows(sc, args.bs, front, base)
    persist.write_csv(args.output, reports.FRONT_COLUMNS, rows)

    anchors, alpha = front.meta["anchors"], front.meta["alpha"]
    f = front.objectives
    ee = [row[8] for row in rows]
    thr = [row[7] for row in rows]
    unimodal, peak = reports.is_unimodal(thr, ee)
    summary = {
        "csv_schema": reports.FRONT_SCHEMA,
        "scenario_seed": sc.seed,
        "bs": args.bs,
        "points": len(front),
        "alpha": alpha,
        "m1": anchors.m1,
        "anchors": {"a1": anchors.a1, "aE": anchors.aE, "v": anchors.v,
                    "f_p1": f[-1], "f_pE": f[0], "p1_power_w": float(anchors.p1.sum())},
        "spacing": reports.spacing_stats(front, alpha),
        "max_kkt_residual": max(e.solution.kkt_residual for e in front),
        "flagged_points": len(front.meta["flagged"]),
        "marginal_gain_ratio_20w_over_10w": reports.marginal_gain_ratio(f[:, 1], -f[:, 0]),
        "energy_efficiency_unimodal": unimodal,
        "energy_efficiency_peak_index": peak,
        "runtime_s": runtime,
    }
    _write_json(args.summary or f"{args.output}.json", summary)
    if front.meta["flagged"] or not anchors.sp_start.ok:
        raise SolverFailure(f"{len(front.meta['flagged'])} front points did not converge")
    return EXIT_OK


def cmd_baseline(args) -> int:
    sc = _load_or_generate(args)
    base = _base_powers(args, sc)
    budget = sc.p_max if args.budget is None else args.budget
    if not 0 <= budget <= sc.p_max:
        raise ConfigError(f"--budget must lie in [0, {sc.p_max}]")
    report = reports.baseline_report(sc, args.bs, args.scheme, budget, base, _solver_options(args))
    _write_json(args.output, report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _load_or_generate(args)
    base = _base_powers(args, sc)
    schemes = [s for s in str(args.schemes).split(",") if s]
    bad = set(schemes) - set(reports.SCHEMES)
    if bad:
        raise ConfigError(f"unknown schemes {sorted(bad)}")
    budgets = args.powers if isinstance(args.powers, list) else _power_grid(args.powers)
    if not budgets or any(not 0 <= b <= sc.p_max for b in budgets):
        raise ConfigError(f"power grid must lie in [0, {sc.p_max}]")
    rows = reports.sweep_rows(sc, args.bs, budgets, base, schemes, _solver_options(args))
    persist.write_csv(args.output, reports.SWEEP_COLUMNS, rows)
    return EXIT_OK


COMMANDS = {"gen-scenario": cmd_gen_scenario, "apc": cmd_apc,
            "baseline": cmd_baseline, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, cellnet.InvalidConfigError, cellnet.BudgetError) as exc:
        print(f"pareto-apc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"pareto-apc: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"pareto-apc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
