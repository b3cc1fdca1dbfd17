"""Command line entry point: ``ideal synth|dataset|external|report``.

Every experiment flag can also come from a JSON config file (``--config``);
flags given on the command line win. Exit codes: 0 success, 2 bad
configuration, 3 every run failed to initialize, 4 oracle protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import ExperimentConfig, ExperimentReport, run_benchmark
from .data import DatasetError, OracleProtocolError, load_schema
from .engine import STRATEGIES

EXIT_OK, EXIT_CONFIG, EXIT_INIT, EXIT_ORACLE = 0, 2, 3, 4

log = logging.getLogger("ideal")


class ConfigError(ValueError):
    pass


# flag name -> ExperimentConfig field; strategy is handled separately
COMMON = {
    "delta": float, "omega": float, "n_init": int, "n_max": int, "batch": int,
    "runs": int, "seed": int, "noise": float, "workers": int, "pool_size": int,
    "activation": str, "max_epochs": int, "learning_rate": float, "l2": float,
    "input_half_width": float, "k_nn": int,
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with any of the flags below")
    p.add_argument("--strategy", help="comma separated subset of " + ",".join(STRATEGIES))
    for name, typ in COMMON.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--hidden", help="hidden layer widths, e.g. 5,5")
    p.add_argument("--warm-start", dest="warm_start", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--out", default=None, help="output directory (default: results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ideal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthetic benchmark problems")
    p.add_argument("--problem", choices=("quartic-sine", "circle", "circle-constrained"))
    _add_common(p)

    p = sub.add_parser("dataset", help="pool-based learning on a CSV dataset")
    p.add_argument("--csv")
    p.add_argument("--schema", help="JSON schema: target, categorical, ignore, task")
    p.add_argument("--task", choices=("regression", "classification"))
    _add_common(p)

    p = sub.add_parser("external", help="population-based learning with a child-process oracle")
    p.add_argument("--cmd", help="oracle command line")
    p.add_argument("--bounds", help="JSON file with x_min, x_max and optional n_targets")
    p.add_argument("--mode", choices=("population",), default="population")
    p.add_argument("--timeout", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("report", help="print median final metrics of saved reports")
    p.add_argument("--in", dest="in_dir", required=True)
    return parser


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None


def _strategies(value) -> list:
    if value is None:
        return list(STRATEGIES)
    items = value if isinstance(value, list) else str(value).split(",")
    out = [s.strip() for s in items if s.strip()]
    bad = [s for s in out if s not in STRATEGIES]
    if bad or not out:
        raise ConfigError(f"unknown strategy {bad or value!r}")
    return out


def _hidden(value):
    if value is None or isinstance(value, list):
        return value
    try:
        return [int(h) for h in str(value).split(",")]
    except ValueError:
        raise ConfigError(f"bad --hidden {value!r}") from None


def resolve_config(args) -> tuple:
    """Merge the config file and the flags into (ExperimentConfig, strategies, out_dir)."""
    merged = {}
    if args.config:
        doc = _read_json(args.config, "config file")
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in doc.items()})
    for key, value in vars(args).items():
        if key in ("config", "command", "verbose", "mode") or value is None:
            continue
        merged[key] = value

    problem = {"synth": merged.get("problem"), "dataset": "dataset",
               "external": "external"}[args.command]
    if args.command == "synth" and problem is None:
        raise ConfigError("synth needs --problem")
    merged["problem"] = problem
    strategies = _strategies(merged.pop("strategy", None))
    out_dir = merged.pop("out", None) or "results"
    merged["hidden"] = _hidden(merged.get("hidden"))

    if problem == "dataset":
        if not merged.get("csv") or not merged.get("schema"):
            raise ConfigError("dataset needs --csv and --schema")
        if isinstance(merged["schema"], str):
            try:
                merged["schema"] = load_schema(merged["schema"])
            except OSError as exc:
                raise ConfigError(f"cannot read schema: {exc}") from None
        if "task" not in merged and "task" in merged["schema"]:
            merged["task"] = merged["schema"]["task"]
    if problem == "external":
        if not merged.get("cmd") or not merged.get("bounds"):
            raise ConfigError("external needs --cmd and --bounds")
        if isinstance(merged["bounds"], str):
            merged["bounds"] = _read_json(merged["bounds"], "bounds file")
        b = merged["bounds"]
        if not isinstance(b, dict) or "x_min" not in b or "x_max" not in b:
            raise ConfigError("bounds need x_min and x_max")
    try:
        cfg = ExperimentConfig.from_dict({**merged, "strategy": strategies[0]})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, strategies, Path(out_dir)


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4g}"


def _experiment(args) -> int:
    cfg, strategies, out_dir = resolve_config(args)
    reports = []
    for strategy in strategies:
        report = run_benchmark(cfg.replace(strategy=strategy))
        path = report.save(out_dir, f"{cfg.problem}-{strategy}")
        reports.append(report)
        print(f"{strategy:8s} runs={len(report.runs)} init_failures={report.init_failures} "
              f"median_{report.metric}: initial={_fmt(report.median_initial)} "
              f"final={_fmt(report.median_final)}  -> {path}")
    if all(r.init_failures == len(r.runs) for r in reports):
        print("initialization failed on every run", file=sys.stderr)
        return EXIT_INIT
    return EXIT_OK


def _report(args) -> int:
    root = Path(args.in_dir)
    if not root.is_dir():
        raise ConfigError(f"no such directory {root}")
    rows = []
    for path in sorted(root.glob("*.json")):
        try:
            rep = ExperimentReport.load(path)
        except (ValueError, KeyError, json.JSONDecodeError):
            continue
        rows.append((rep.config.get("problem", "?"), rep.strategy, rep.metric,
                     len(rep.runs), rep.init_failures, rep.median_initial, rep.median_final))
    if not rows:
        raise ConfigError(f"no experiment reports in {root}")
    print(f"{'problem':20s} {'strategy':8s} {'metric':8s} {'runs':>5s} {'failed':>6s} "
          f"{'initial':>10s} {'final':>10s}")
    for prob, strat, metric, n, failed, first, last in rows:
        print(f"{prob:20s} {strat:8s} {metric:8s} {n:5d} {failed:6d} "
              f"{_fmt(first):>10s} {_fmt(last):>10s}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return _report(args)
        return _experiment(args)
    except (ConfigError, DatasetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleProtocolError as exc:
        print(f"oracle protocol error: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
