"""Deterministic JSON and CSV output with provenance."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__


class ArtifactIOError(OSError):
    """Reading or writing an artifact failed."""


def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, out: list, indent: int | None, level: int):
    nl = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + nl + json.dumps(str(k)) + ": ")
            _encode(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        out.append("[")
        for i, v in enumerate(seq):
            out.append(("," if i else "") + ("" if flat else nl))
            _encode(v, out, indent, level + 1)
        out.append(("" if flat else end) + "]")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_num(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        out.append(f"[{_num(obj.real)},{_num(obj.imag)}]")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (str, Path)):
        out.append(json.dumps(str(obj)))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int | None = 1) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become ``null``; complex numbers become ``[re, im]``.
    """
    out: list = []
    _encode(obj, out, indent, 0)
    return "".join(out)


def canonical(obj) -> str:
    return dumps(_sorted(obj), indent=None)


def _sorted(obj):
    if isinstance(obj, dict):
        return {k: _sorted(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_sorted(v) for v in obj]
    return obj


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config).encode()).hexdigest()[:16]


def provenance(config: dict, seed: int) -> dict:
    return {
        "config_hash": config_hash(config),
        "seed": int(seed),
        "versions": {"extremal": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }


def _atomic_write(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def save_json(path, obj) -> Path:
    _atomic_write(path, dumps(obj) + "\n")
    return Path(path)


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc


def csv_text(header, rows, meta: dict | None = None) -> str:
    """CSV with floats at 17 significant digits and an optional ``# key=value`` line."""
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def save_csv(path, header, rows, meta: dict | None = None) -> Path:
    _atomic_write(path, csv_text(header, rows, meta))
    return Path(path)


def csv_meta(prov: dict) -> dict:
    v = prov["versions"]
    return {"config_hash": prov["config_hash"], "seed": prov["seed"],
            "versions": ";".join(f"{k}-{val}" for k, val in v.items())}
