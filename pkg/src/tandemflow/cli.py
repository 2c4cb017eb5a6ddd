"""Command-line front end.

Four subcommands: `run` drives one closed-loop experiment and emits its
per-control-cycle series; `table1` sweeps the arrival spread over both
controller modes and summarizes each cell; `check-grad` runs the
finite-difference audit of the Jacobian estimator; `print-config` echoes
the effective configuration after file and flag overrides.

All CSV output starts with a `#`-prefixed metadata block (tool version,
mode, seed, and the full effective config), then a header row, then data
rows with floats printed to 17 significant digits, which round-trips
doubles exactly.  Reruns with the same inputs are byte-identical; there
are no timestamps.  Exit status: 0 on success, 1 when the gradient audit
finds a discrepancy, 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .oracle import (
    DEFAULT_DET_H,
    DEFAULT_DET_TOL,
    DEFAULT_STOCH_H,
    DEFAULT_STOCH_TOL,
    battery_ok,
    deterministic_scenarios,
    run_battery,
    stochastic_scenarios,
)
from .regulator import CENTRALIZED, DECENTRALIZED, CycleRecord
from .scenario import (
    ConfigError,
    ExperimentConfig,
    config_text,
    default_paper_config,
    load_config,
    run_replication,
)

DEFAULT_ZETAS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)

RUN_COLUMNS = "k,theta1,theta2,g1,g2,e1,e2,j11,j21,j22"
SUMMARY_COLUMNS = "zeta,mode,mean_err_g1,mean_err_g2,max_g1,max_g2"

# Control cycles before this index are transient and excluded from the
# summary means (maxima still cover every cycle).
TAIL_START = 10


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _metadata(cfg: ExperimentConfig, extra: list[tuple[str, object]]) -> list[str]:
    lines = [f"# tandemflow {__version__}"]
    for key, val in extra:
        lines.append(f"# {key} = {val}")
    for line in config_text(cfg).splitlines():
        lines.append(f"# {line}")
    return lines


def _series_lines(cfg: ExperimentConfig, replication: int,
                  records: list[CycleRecord]) -> list[str]:
    lines = _metadata(cfg, [("replication", replication)])
    lines.append(RUN_COLUMNS)
    for rec in records:
        row = [str(rec.k)]
        row += [_fmt(v) for v in (*rec.theta, *rec.y, *rec.e,
                                  rec.jac.j11, rec.jac.j21, rec.jac.j22)]
        lines.append(",".join(row))
    return lines


def _write(path: Path | None, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def summarize(cfg: ExperimentConfig, runs: list[list[CycleRecord]]) -> tuple[float, float, float, float]:
    """The four per-cell statistics, averaged over replications.

    Per replication: absolute deviation of the post-transient mean of each
    output from its reference, and the maximum of each output over all
    cycles.  Empty runs contribute nothing (and an all-empty cell is a
    config error upstream).
    """
    err1 = err2 = mx1 = mx2 = 0.0
    for records in runs:
        tail = records[TAIL_START - 1:]
        err1 += abs(sum(r.y[0] for r in tail) / len(tail) - cfg.r1)
        err2 += abs(sum(r.y[1] for r in tail) / len(tail) - cfg.r2)
        mx1 += max(r.y[0] for r in records)
        mx2 += max(r.y[1] for r in records)
    n = len(runs)
    return err1 / n, err2 / n, mx1 / n, mx2 / n


def cmd_run(cfg: ExperimentConfig, out: str | None) -> int:
    records = run_replication(cfg, replication=0)
    lines = _series_lines(cfg, 0, records)
    _write(Path(out) if out else None, lines)
    return 0


def cmd_table1(cfg: ExperimentConfig, out: str | None, zetas: list[float]) -> int:
    if out is None:
        print("table1 requires --out DIRECTORY", file=sys.stderr)
        return 2
    if cfg.num_control_cycles < TAIL_START:
        print(f"table1 requires num_control_cycles >= {TAIL_START}",
              file=sys.stderr)
        return 2
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = _metadata(cfg, [("zetas", ",".join(f"{z:g}" for z in zetas))])
    summary.append(SUMMARY_COLUMNS)
    for zeta in zetas:
        for mode in (CENTRALIZED, DECENTRALIZED):
            cell = dataclasses.replace(cfg, alpha1_zeta=zeta,
                                       alpha2_zeta=zeta, mode=mode)
            runs = []
            for rep in range(cell.replications):
                records = run_replication(cell, replication=rep)
                runs.append(records)
                name = f"run_z{zeta:g}_{mode}_rep{rep:02d}.csv"
                _write(outdir / name, _series_lines(cell, rep, records))
            stats = summarize(cell, runs)
            summary.append(",".join([_fmt(zeta), mode] +
                                    [_fmt(s) for s in stats]))
    _write(outdir / "summary.csv", summary)
    return 0


def cmd_check_grad(out: str | None) -> int:
    det = run_battery(deterministic_scenarios(), DEFAULT_DET_H, DEFAULT_DET_TOL)
    sto = run_battery(stochastic_scenarios(), DEFAULT_STOCH_H, DEFAULT_STOCH_TOL)
    lines = [f"# tandemflow {__version__}",
             "scenario,entry,analytic,fd,rel_err,flagged,ok"]
    for report in det + sto:
        for e in report.entries:
            ok = e.flagged or e.rel_err <= report.tol
            lines.append(",".join([report.name, e.entry, _fmt(e.analytic),
                                   _fmt(e.fd), _fmt(e.rel_err),
                                   str(int(e.flagged)), str(int(ok))]))
    passed = battery_ok(det) and battery_ok(sto)
    lines.append(f"# overall: {'PASS' if passed else 'FAIL'}")
    _write(Path(out) if out else None, lines)
    return 0 if passed else 1


def _parse_zetas(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --zeta-list: {exc}") from None
    if not vals:
        raise ConfigError("--zeta-list is empty")
    for z in vals:
        if not 0.0 <= z < 1.0:
            raise ConfigError(f"--zeta-list value {z!r} outside [0, 1)")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tandemflow",
        description="Tandem fluid-queue regulation experiments.")
    parser.add_argument("--version", action="version",
                        version=f"tandemflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
            ("run", "run one closed-loop experiment, emit its cycle series"),
            ("table1", "sweep zeta over both controller modes"),
            ("check-grad", "audit the Jacobian estimator with finite differences"),
            ("print-config", "echo the effective configuration")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--out", help="output file (directory for table1)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--mode", choices=(CENTRALIZED, DECENTRALIZED),
                       help="override the controller mode")
        p.add_argument("--replications", type=int,
                       help="override the replication count")
        if name == "table1":
            p.add_argument("--zeta-list",
                           default=",".join(f"{z:g}" for z in DEFAULT_ZETAS),
                           help="comma-separated zeta values "
                                "(default %(default)s)")
    return parser


def _effective_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_paper_config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.replications is not None:
        overrides["replications"] = args.replications
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.command == "run":
            return cmd_run(cfg, args.out)
        if args.command == "table1":
            return cmd_table1(cfg, args.out, _parse_zetas(args.zeta_list))
        if args.command == "check-grad":
            return cmd_check_grad(args.out)
        _write(Path(args.out) if args.out else None,
               config_text(cfg).splitlines())
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
