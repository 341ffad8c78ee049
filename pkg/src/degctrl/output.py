"""Deterministic CSV/JSON writers.

Floats are printed with 17 significant digits, files are UTF-8 with LF line
endings, and nothing time dependent goes into a data file; provenance lives
in the ``meta.json`` sidecar.
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import sys
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "PASS" if v else "FAIL"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with 17-digit floats; non-finite floats become strings."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return fmt_float(o) if math.isfinite(o) else json.dumps(fmt_float(o))
        if o is None:
            return "null"
        return json.dumps(str(o))

    return enc(obj, 0) + "\n"


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


def write_meta(path: str, command: str, config_text: str, argv: Sequence[str]) -> None:
    from . import __version__, _kernels

    meta = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "numba": bool(_kernels.USE_NUMBA),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": sys.platform,
        "pid": os.getpid(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config_text,
    }
    write_json(path, meta)
