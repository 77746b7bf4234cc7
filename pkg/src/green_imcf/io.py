"""File formats: model JSON, CSV reports with a provenance header line.

All writes go through a temporary file in the target directory followed by
``os.replace``, so readers never see partial files.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .geometry import ModelManifold


class InputError(ValueError):
    """Malformed input file; ``path`` and 1-based ``line`` locate the problem."""

    def __init__(self, path, line: Optional[int], msg: str):
        loc = f"{path}:{line}" if line else str(path)
        super().__init__(f"{loc}: {msg}")
        self.path = str(path)
        self.line = line


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(config, seed) -> str:
    return f"# green_imcf {__version__} config={config_hash(config)} seed={seed}"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return x


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config=None, seed=0) -> Path:
    """CSV with a ``# green_imcf <version> config=<hash> seed=<seed>`` first line.

    Floats are written with ``repr`` so identical runs give identical bytes.
    """
    buf = io.StringIO()
    buf.write(header_line(config or {}, seed) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return atomic_write_text(path, buf.getvalue())


def write_json(path, obj) -> Path:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        return str(o)

    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n")


def read_csv(path):
    """Rows of a report CSV (comment lines skipped) as a list of dicts."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _key_line(text: str, key: str) -> Optional[int]:
    for i, ln in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in ln:
            return i
    return None


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(path, None, f"cannot read file: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(path, exc.lineno, exc.msg) from None
    if not isinstance(obj, dict):
        raise InputError(path, 1, "expected a JSON object")
    return obj


def load_model(path) -> ModelManifold:
    """Model from JSON, e.g. ``{"kind": "euclidean", "n": 3}``."""
    path = Path(path)
    obj = load_json(path)
    text = path.read_text()
    try:
        return ModelManifold.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        key = exc.args[0] if isinstance(exc, KeyError) else None
        line = _key_line(text, key) if isinstance(key, str) else None
        if line is None:
            for k in obj:
                if isinstance(k, str) and k in str(exc):
                    line = _key_line(text, k)
                    break
        raise InputError(path, line or 1, f"invalid model: {exc}") from None


def save_model(M: ModelManifold, path) -> Path:
    return write_json(path, M.to_dict())


def write_kernel_csv(path, kernel, config=None, seed=0) -> Path:
    """Columns ``r, G, dG, w_p, mu`` at the kernel samples."""
    from .kernel import mu

    M = kernel.M
    mu_vals = mu(M.n, kernel.p, kernel.r)
    rows = zip(kernel.r, kernel.G, kernel.dG, kernel.w, mu_vals)
    return write_csv(path, ["r", "G", "dG", "w_p", "mu"], rows, config, seed)


def write_field_csv(path, mesh, v, u, config=None, seed=0) -> Path:
    """Columns ``vertex, x, y, v_p, u_p``; ``v`` may be ``None`` (extrapolated fields)."""
    vv = [math.nan] * mesh.nv if v is None else np.asarray(getattr(v, "values", v))
    uu = np.asarray(getattr(u, "values", u))
    rows = ((i, x, y, a, b) for i, ((x, y), a, b) in enumerate(zip(mesh.vertices.tolist(), vv, uu)))
    return write_csv(path, ["vertex", "x", "y", "v_p", "u_p"], rows, config, seed)


def write_margin_csv(path, report, config=None, seed=0) -> Path:
    return write_csv(path, ["r", "lhs", "rhs", "margin"], report.rows(), config, seed)
