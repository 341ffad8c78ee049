"""Cartesian parameter sweeps over a bounded process pool.

Cells are independent: each one re-parses the base key/value pairs with its
overrides applied, so ``auto`` defaults follow the overridden values. Rows
come back in ``itertools.product`` order whatever the worker count.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Sequence, Tuple

from . import commands
from .config import _PARSERS, build_config
from .errors import DegCtrlError, InvalidArgument

_INTERVAL_KEYS = {"omega", "omega1", "omega_prime"} | {f"b{i}{j}_support" for i in "12" for j in "12"}
_LIST_KEYS = {"variants", "epsilon", "gammas", "hardy_offsets"}


def parse_grid(entries: Sequence[str]) -> List[Tuple[str, Tuple[str, ...]]]:
    """``["name=v1,v2", ...]`` to an ordered list of (name, values)."""
    grid: List[Tuple[str, Tuple[str, ...]]] = []
    seen = set()
    for entry in entries:
        if "=" not in entry:
            raise InvalidArgument(f"grid entry {entry!r} must look like name=v1,v2")
        name, raw = entry.split("=", 1)
        if name not in _PARSERS:
            raise InvalidArgument(f"grid name {name!r} is not a config key")
        if name in _INTERVAL_KEYS:
            raise InvalidArgument(f"grid name {name!r} is interval valued and cannot be swept")
        if name in seen:
            raise InvalidArgument(f"grid name {name!r} given twice")
        seen.add(name)
        values = tuple(v for v in raw.split(",") if v)
        if not values:
            raise InvalidArgument(f"grid entry {entry!r} has no values")
        grid.append((name, values))
    return grid


def _run_cell(args):
    target, pairs = args
    try:
        metrics = commands.summarize(target, build_config(pairs))
        return "ok", metrics, ""
    except DegCtrlError as exc:
        return exc.category, {}, str(exc)


def run_sweep(
    base_pairs: Dict[str, str], grid: Sequence[Tuple[str, Sequence[str]]], target: str, jobs: int = 1
) -> Tuple[List[str], List[list]]:
    names = [n for n, _ in grid]
    columns = names + list(commands.SUMMARY_COLUMNS[target]) + ["status", "error"]
    if not grid:
        return columns, []
    cells = []
    for combo in itertools.product(*(vals for _, vals in grid)):
        pairs = dict(base_pairs)
        pairs.update(zip(names, combo))
        cells.append((target, pairs))
    if jobs <= 1 or len(cells) == 1:
        results = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    rows = []
    for (_, pairs), (status, metrics, err) in zip(cells, results):
        row = [pairs[n] for n in names]
        row += [metrics.get(c) for c in commands.SUMMARY_COLUMNS[target]]
        rows.append(row + [status, err])
    return columns, rows
