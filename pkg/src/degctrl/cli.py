"""Command line entry point.

    degctrl <command> --config PATH [--out DIR] [--format csv|json] [--jobs N] [--grid name=v1,v2 ...]

Exit codes: 0 success, 2 usage, 3 invalid argument or config, 4 singular
integral, 5 hypothesis violated, 6 convergence failure, 7 singular system,
1 anything else. Failures print a one-line JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from . import commands
from .config import build_config, parse_pairs, serialize_config
from .errors import DegCtrlError, InvalidArgument
from .output import write_csv, write_json, write_meta
from .sweep import parse_grid, run_sweep

OUT_ENV = "DEGCTRL_OUT"
DEFAULT_OUT = "degctrl-out"
COMMAND_NAMES = tuple(commands.COMMANDS) + ("sweep",)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degctrl", description="Degenerate parabolic control laboratory")
    p.add_argument("command", choices=COMMAND_NAMES)
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="overrides the config format key")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    p.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2", help="sweep axis, repeatable")
    return p


def _out_dir(arg: Optional[str], cfg_out: Optional[str]) -> str:
    return arg or cfg_out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def _emit_error(exc: DegCtrlError) -> int:
    rec = {"error": exc.category, "message": str(exc), "exit_code": exc.exit_code}
    print(json.dumps(rec), file=sys.stderr)
    return exc.exit_code


def run(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise InvalidArgument("--jobs must be >= 1")
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidArgument(f"cannot read config {args.config!r}: {exc.strerror}") from None
        pairs = parse_pairs(text)
        cfg = build_config(pairs)
        fmt = args.format or cfg.format
        out = _out_dir(args.out, cfg.out)
        os.makedirs(out, exist_ok=True)
        if args.command == "sweep":
            grid = parse_grid(args.grid)
            columns, rows = run_sweep(pairs, grid, cfg.sweep_target, args.jobs)
            if fmt == "json":
                write_json(os.path.join(out, "sweep.json"), {"command": "sweep", "target": cfg.sweep_target,
                                                             "columns": columns, "rows": rows})
            else:
                write_csv(os.path.join(out, "sweep.csv"), columns, rows)
        else:
            result = commands.COMMANDS[args.command](cfg)
            stem = os.path.join(out, args.command)
            if fmt == "json" or result.json_only:
                write_json(stem + ".json", result.as_json())
            else:
                write_csv(stem + ".csv", result.columns, result.rows)
        write_meta(os.path.join(out, "meta.json"), args.command, serialize_config(cfg), argv)
    except DegCtrlError as exc:
        return _emit_error(exc)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
