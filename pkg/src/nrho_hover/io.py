"""File output: CSV with 17 significant digits, JSON, atomic writes, manifests."""

from __future__ import annotations

import hashlib
import json
import os
import platform
import tempfile
from pathlib import Path

import numpy as np

from .constants import EARTH_MOON


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def json_text(obj) -> str:
    # repr-based float output round-trips exactly (<= 17 significant digits)
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json_text(obj))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def units_block() -> dict:
    return {"length": "LU", "time": "TU", "velocity": "LU/TU", "frame": "Earth-Moon rotating, barycentric"}


def write_trajectory(path, epochs, states, columns, sidecar: dict) -> Path:
    """CSV of ``t`` plus state columns, and a JSON sidecar next to it."""
    path = Path(path)
    rows = (np.concatenate(([t], s)) for t, s in zip(epochs, states))
    write_csv(path, ["t", *columns], rows)
    meta = {"constants": EARTH_MOON.as_dict(), "units": units_block(), **sidecar}
    write_json(path.with_suffix(".json"), meta)
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest(verb, tol, inputs: dict, outputs, status: str, wall_time: float, extra=None) -> dict:
    from . import __version__

    return {
        "tool": "nrho-hover",
        "version": __version__,
        "verb": verb,
        "constants": EARTH_MOON.as_dict(),
        "tolerances": tol.as_dict() if tol is not None else None,
        "inputs": {
            k: {"path": str(p), "sha256": sha256_file(p) if Path(p).is_file() else None}
            for k, p in inputs.items()
        },
        "outputs": sorted(str(o) for o in outputs),
        "status": status,
        "wall_time_s": wall_time,
        "python": platform.python_version(),
        **(extra or {}),
    }
