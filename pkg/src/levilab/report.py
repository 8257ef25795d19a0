"""Deterministic JSON/CSV emission and atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if all(c in "-0123456789" for c in s):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys, 17 significant digits, and non-finite floats as strings."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{pad}{json.dumps(k, ensure_ascii=False)}: {dumps(v, indent, _level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(_plain(v), bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        body = ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


CSV_COLUMNS = ("check", "sample", "point", "direction", "slack", "stratum")


def _vec(v) -> str:
    if v is None:
        return ""
    return " ".join(f"{format(float(c.real), '.17g')}{'+' if c.imag >= 0 else '-'}{format(abs(float(c.imag)), '.17g')}j" for c in np.asarray(v, dtype=complex))


def slack_rows(reports) -> str:
    """CSV text, one row per (sample, direction) of every report that carries per-sample data."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        pts = getattr(rep, "points", None)
        if pts is None:
            continue
        dirs = getattr(rep, "directions", None)
        labels = getattr(rep, "labels", None)
        from .fields import to_complex

        Z = to_complex(pts)
        for i, s in enumerate(rep.slacks):
            w.writerow([
                rep.name, i, _vec(Z[i]), _vec(None if dirs is None else dirs[i]), format(float(s), ".17g"),
                "" if labels is None else int(labels[i]),
            ])
    return buf.getvalue()


def thread_count() -> int:
    env = os.environ.get("LEVI_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"LEVI_LAB_THREADS must be a positive integer, got {env!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def chunked_map(fn, X: np.ndarray, min_chunk: int = 512):
    """Apply ``fn`` to row chunks of X on a thread pool; results come back in input order."""
    n = X.shape[0]
    workers = thread_count()
    if workers == 1 or n < 2 * min_chunk:
        return [fn(X)]
    nchunks = min(workers, max(1, n // min_chunk))
    bounds = np.linspace(0, n, nchunks + 1).astype(int)
    parts = [X[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, parts))
