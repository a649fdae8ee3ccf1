"""Command line driver.

    tauflat fiber-count --group su 2 --surface rp2 1 --trials 50 --seed 11
    tauflat oracle --group Q8 --surface klein 1
    tauflat report a.json b.json --csv table.csv
    tauflat run --config exp.cfg

Exit status: 0 success, 2 invalid configuration, 3 failure rate above the
ceiling (the report is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace

from .config import DEFAULT, Tolerances
from .errors import InvalidConfig, SchemaMismatch, TauflatError
from .experiments import COMMANDS, ExperimentConfig, Report, rows_to_csv, rows_to_text, run, summarize
from .groups import GroupId
from .variety import SurfaceKind, SurfacePresentation

EXIT_OK, EXIT_INVALID, EXIT_FAILURES = 0, 2, 3
_TOL_FIELDS = [f.name for f in fields(Tolerances)]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", nargs="+", metavar="SPEC", help="family and rank (su 2), or a finite group name")
    p.add_argument("--surface", nargs=2, metavar=("KIND", "ELL"), help="rp2 1 or klein 1")
    p.add_argument("--twist", type=int, default=0, help="index into the center table")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path (stdout if omitted)")
    p.add_argument("--max-failure-rate", type=float, default=0.1)
    p.add_argument("--perturbations", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    for name in _TOL_FIELDS:
        p.add_argument(f"--tol-{name.replace('_', '-')}", type=float, dest=f"tol_{name}", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tauflat", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        if cmd == "report":
            continue
        _common(sub.add_parser(cmd))
    rep = sub.add_parser("report", help="summarize fiber-count reports")
    rep.add_argument("inputs", nargs="+")
    rep.add_argument("--csv", help="also write the table as CSV")
    runp = sub.add_parser("run", help="run from a key=value config file or explicit flags")
    runp.add_argument("--config", help="config file")
    runp.add_argument("--command", dest="run_command", choices=[c for c in COMMANDS if c != "report"])
    _common(runp)
    return parser


def parse_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment; keys mirror the long flags."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _tolerances(values: dict) -> Tolerances:
    changes = {k: float(v) for k, v in values.items() if v is not None}
    unknown = set(changes) - set(_TOL_FIELDS)
    if unknown:
        raise InvalidConfig(f"unknown tolerance(s): {sorted(unknown)}")
    return DEFAULT.override(**changes)


def make_config(command: str, group=None, surface=None, twist=0, trials=1, seed=0, out=None,
                max_failure_rate=0.1, perturbations=10, workers=1, tolerances=None) -> ExperimentConfig:
    """Build a validated config from loosely typed pieces (flag tokens or file strings)."""
    try:
        gid, finite = None, None
        if group:
            tokens = group.split() if isinstance(group, str) else list(group)
            if command == "oracle":
                if len(tokens) != 1:
                    raise InvalidConfig("oracle takes a single finite group name")
                finite = tokens[0]
            elif len(tokens) == 2:
                gid = GroupId.parse(*tokens)
            else:
                raise InvalidConfig(f"group spec needs family and rank, got {tokens}")
        surf = None
        if surface:
            tokens = surface.split() if isinstance(surface, str) else list(surface)
            if len(tokens) != 2:
                raise InvalidConfig(f"surface spec needs kind and ell, got {tokens}")
            surf = SurfacePresentation(SurfaceKind.parse(tokens[0]), int(tokens[1]))
        return ExperimentConfig(command, gid, finite, surf, int(twist), int(trials), int(seed),
                                tolerances or DEFAULT, out, float(max_failure_rate),
                                int(perturbations), int(workers))
    except InvalidConfig:
        raise
    except (TauflatError, ValueError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from exc


def _config_from_args(args, command: str) -> ExperimentConfig:
    tol = _tolerances({k[4:]: getattr(args, k) for k in vars(args) if k.startswith("tol_")})
    return make_config(command, args.group, args.surface, args.twist, args.trials, args.seed, args.out,
                       args.max_failure_rate, args.perturbations, args.workers, tol)


def _config_from_file(path: str) -> ExperimentConfig:
    kv = parse_config_file(path)
    tol = _tolerances({k[4:]: v for k, v in kv.items() if k.startswith("tol_")})
    kv = {k: v for k, v in kv.items() if not k.startswith("tol_")}
    if "command" not in kv:
        raise InvalidConfig(f"{path}: missing 'command'")
    known = {"command", "group", "surface", "twist", "trials", "seed", "out", "max_failure_rate",
             "perturbations", "workers"}
    extra = set(kv) - known
    if extra:
        raise InvalidConfig(f"{path}: unknown keys {sorted(extra)}")
    return make_config(tolerances=tol, **kv)


def _emit(report: Report, out: str | None) -> None:
    if out:
        report.write(out)
    else:
        sys.stdout.write(report.to_json() + "\n")


def _report(args) -> int:
    try:
        reports = [Report.load(p) for p in args.inputs]
        rows = summarize(reports)
    except (OSError, json.JSONDecodeError, KeyError, SchemaMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(rows_to_text(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv(rows))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "report":
        return _report(args)
    try:
        if args.command == "run":
            if args.config:
                cfg = _config_from_file(args.config)
                if args.out:
                    cfg = replace(cfg, out=args.out)
            elif args.run_command:
                cfg = _config_from_args(args, args.run_command)
            else:
                raise InvalidConfig("run needs --config or --command")
        else:
            cfg = _config_from_args(args, args.command)
    except (InvalidConfig, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = run(cfg)
    _emit(report, cfg.out)
    rate = report.failure_rate
    if rate > cfg.max_failure_rate:
        print(f"failure rate {rate:.2%} exceeds ceiling {cfg.max_failure_rate:.2%}", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
