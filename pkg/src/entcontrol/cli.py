"""Command-line front end.

    entcontrol run (--config PATH | --preset nv4) [--set key=value]...
    entcontrol sweep (--config PATH | --preset nv4) --key K --values v1,v2,...
    entcontrol oracle-check [--seed S] [--cases N]

Exit codes: 0 success, 1 failed oracle check, 2 configuration error,
3 numerical-validity abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checks import run_checks
from .dynamics import Trajectory
from .entanglement import ContractError
from .quantum_core import StateValidityError
from .scenario import (
    PRESETS,
    SWEEPABLE_KEYS,
    ConfigError,
    ScenarioConfig,
    apply_sweep_value,
    serialize_config,
    simulate,
    with_overrides,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
BASE_COLUMNS = ("t_us", "tau", "tau_norm", "tau_dot", "tau_ddot", "x_norm", "purity", "trace_err")


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def trajectory_csv(traj: Trajectory, tau_ref: float) -> str:
    n_h = traj.h.shape[1]
    header = list(BASE_COLUMNS) + [f"h_{k}" for k in range(n_h)]
    lines = [",".join(header)]
    for k in range(len(traj)):
        row = [
            traj.t[k],
            traj.tau[k],
            traj.tau[k] / tau_ref,
            traj.tau_dot[k],
            traj.tau_ddot[k],
            traj.x_norm[k],
            traj.purity[k],
            traj.trace_err[k],
            *traj.h[k],
        ]
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def summarize(t: np.ndarray, tau: np.ndarray) -> dict[str, float]:
    """Peak tau, time of the (first) peak, and mean tau over the last quarter of the run."""
    k = int(np.argmax(tau))
    tail = t >= 0.75 * t[-1]
    return {"peak_tau": float(tau[k]), "t_peak": float(t[k]), "mean_tail_tau": float(np.mean(tau[tail]))}


def summary_line(summary: dict[str, float]) -> str:
    return " ".join(f"{k}={fmt(v)}" for k, v in summary.items())


def load_config(args, overrides: list[str] | None = None) -> ScenarioConfig:
    if args.preset:
        text = f"preset = {args.preset}\n"
    else:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config {args.config} is not UTF-8: {exc}") from None
    return with_overrides(text, overrides or [])


def run_one(cfg: ScenarioConfig) -> dict[str, float]:
    """Simulate, write the CSV and return the summary; picklable for worker pools."""
    traj = simulate(cfg)
    # Summarize the values as written so the CSV reproduces the report.
    csv = trajectory_csv(traj, cfg.tau_ref)
    write_atomic(cfg.output_path, csv)
    t = np.array([float(fmt(v)) for v in traj.t])
    tau = np.array([float(fmt(v)) for v in traj.tau])
    return summarize(t, tau)


def _guarded(fn):
    def wrapper(args) -> int:
        try:
            return fn(args)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (StateValidityError, ContractError, ArithmeticError) as exc:
            print(f"numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO

    return wrapper


@_guarded
def cmd_run(args) -> int:
    cfg = load_config(args, args.set)
    summary = run_one(cfg)
    print(f"wrote {cfg.output_path}")
    print(summary_line(summary))
    return EXIT_OK


def sweep_output_path(base: str, key: str, value: float) -> str:
    p = Path(base)
    return str(p.with_name(f"{p.stem}_{key}_{fmt(value)}{p.suffix or '.csv'}"))


def sweep_index_path(base: str, key: str) -> str:
    p = Path(base)
    return str(p.with_name(f"{p.stem}_{key}_index{p.suffix or '.csv'}"))


@_guarded
def cmd_sweep(args) -> int:
    cfg = load_config(args, args.set)
    if args.key not in SWEEPABLE_KEYS:
        raise ConfigError(f"{args.key!r} is not sweepable; choose from {', '.join(SWEEPABLE_KEYS)}")
    raw = [v.strip() for v in args.values.split(",") if v.strip()]
    if not raw:
        raise ConfigError("empty value list")
    try:
        values = [float(v) for v in raw]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {args.values!r}") from None
    configs = []
    for v in values:
        swept = apply_sweep_value(cfg, args.key, v)
        configs.append(replace(swept, output_path=sweep_output_path(cfg.output_path, args.key, v)))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(run_one, configs))
    else:
        summaries = [run_one(c) for c in configs]
    lines = ["value,peak_tau,t_peak,mean_tail_tau"]
    for v, s, c in zip(values, summaries, configs):
        lines.append(",".join([fmt(v), fmt(s["peak_tau"]), fmt(s["t_peak"]), fmt(s["mean_tail_tau"])]))
        print(f"{args.key}={fmt(v)} {summary_line(s)} -> {c.output_path}")
    index = sweep_index_path(cfg.output_path, args.key)
    write_atomic(index, "\n".join(lines) + "\n")
    print(f"wrote {index}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.cases < 0:
        print("config error: --cases must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    results = run_checks(args.seed, args.cases, inject_fault=args.inject_fault)
    if args.cases == 0:
        print("0 checks run")
        return EXIT_OK
    for r in results:
        print(r.line(args.seed))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


@_guarded
def cmd_show_config(args) -> int:
    sys.stdout.write(serialize_config(load_config(args, args.set)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entcontrol", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a key = value config file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in scenario")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")

    p_run = sub.add_parser("run", help="propagate one scenario and write its CSV")
    scenario_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    scenario_args(p_sweep)
    p_sweep.add_argument("--key", required=True, help=f"one of {', '.join(SWEEPABLE_KEYS)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("oracle-check", help="cross-validate against independent oracles")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--cases", type=int, default=100)
    p_check.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p_check.set_defaults(func=cmd_oracle_check)

    p_show = sub.add_parser("show-config", help="print the fully resolved configuration")
    scenario_args(p_show)
    p_show.set_defaults(func=cmd_show_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
