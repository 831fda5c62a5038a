"""CSV readers, bundled datasets and model persistence."""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .contingency import ContingencyTable
from .lp_basis import build
from .maxent import FitReport, MaxEntCopulaModel
from .marginals import Marginal

MODEL_FORMAT = "lpcop-model/1"
BUILTIN = ("hellman", "draft_lottery", "shunter")


class InputError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, source, message: str, line: int | None = None):
        where = f"{source}:{line}" if line is not None else str(source)
        super().__init__(f"{where}: {message}")
        self.line = line


def _open_text(path):
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in BUILTIN:
            raise InputError(path, f"unknown bundled dataset; choose from {', '.join(BUILTIN)}")
        return resources.files("lpcop").joinpath("data", f"{name}.csv").read_text(encoding="utf-8")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(path, f"cannot read input ({exc.strerror})") from None


def file_digest(path) -> str:
    return hashlib.sha256(_open_text(path).encode("utf-8")).hexdigest()


def _rows(path):
    text = _open_text(path)
    rows = [(i, r) for i, r in enumerate(csv.reader(text.splitlines()), start=1)
            if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(path, "empty file")
    return rows


def _labels(names: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Numeric labels when every name parses as a number, else ordinal codes."""
    try:
        vals = np.array([float(s) for s in names])
        if np.all(np.diff(vals) > 0):
            return vals, tuple(names)
    except ValueError:
        pass
    return np.arange(len(names), dtype=float), tuple(names)


def read_table_csv(path) -> ContingencyTable:
    """Contingency matrix CSV: header ``name,col1,col2,...``; rows ``label,counts...``."""
    rows = _rows(path)
    (_, header), body = rows[0], rows[1:]
    col_names = [c.strip() for c in header[1:]]
    if not col_names or not body:
        raise InputError(path, "table needs a header row and at least one data row", rows[0][0])
    row_names, counts = [], []
    for line, r in body:
        if len(r) != len(header):
            raise InputError(path, f"expected {len(header)} fields, found {len(r)}", line)
        row_names.append(r[0].strip())
        try:
            vals = [float(c) for c in r[1:]]
        except ValueError:
            raise InputError(path, "non-numeric cell count", line) from None
        if any(v < 0 or v != int(v) for v in vals):
            raise InputError(path, "cell counts must be nonnegative integers", line)
        counts.append(vals)
    rl, rn = _labels(row_names)
    cl, cn = _labels(col_names)
    try:
        return ContingencyTable(np.array(counts), rl, cl, rn, cn)
    except ValueError as exc:
        raise InputError(path, str(exc)) from None


def read_columns_csv(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header row; returns names and an ``(n, p)`` array."""
    rows = _rows(path)
    (_, header), body = rows[0], rows[1:]
    names = [c.strip() for c in header]
    if not body:
        raise InputError(path, "no data rows", rows[0][0])
    data = []
    for line, r in body:
        if len(r) != len(names):
            raise InputError(path, f"expected {len(names)} fields, found {len(r)}", line)
        try:
            data.append([float(c) for c in r])
        except ValueError:
            raise InputError(path, "non-numeric value", line) from None
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise InputError(path, "non-finite value in data")
    return names, arr


def read_pairs_csv(path) -> tuple[list[str], np.ndarray]:
    """Two-column observations CSV with a header row."""
    names, arr = read_columns_csv(path)
    if arr.shape[1] != 2:
        raise InputError(path, f"pairs format needs exactly 2 columns, found {arr.shape[1]}", 1)
    return names, arr


def load_dataset(name: str) -> ContingencyTable:
    """One of the bundled tables: ``hellman``, ``draft_lottery``, ``shunter``."""
    return read_table_csv(f"builtin:{name}")


def model_to_dict(m: MaxEntCopulaModel, provenance: dict | None = None) -> dict:
    r = m.fit_report
    return {
        "format": MODEL_FORMAT,
        "marginals": {"x": m.bx.marginal.to_dict(), "y": m.by.marginal.to_dict()},
        "degrees": {"x": m.bx.degree, "y": m.by.degree},
        "indices": [list(ix) for ix in m.indices],
        "theta": m.theta.tolist(),
        "targets": m.targets.tolist(),
        "log_z": m.log_z,
        "n": m.n,
        "fit_report": {"iterations": r.iterations, "grad_norm": r.grad_norm,
                       "converged": r.converged, "fallback_steps": r.fallback_steps},
        "provenance": provenance or {},
    }


def model_from_dict(d: dict) -> MaxEntCopulaModel:
    if d.get("format") != MODEL_FORMAT:
        raise InputError("model", f"unsupported model format {d.get('format')!r}")
    bx = build(Marginal.from_dict(d["marginals"]["x"]), d["degrees"]["x"])
    by = build(Marginal.from_dict(d["marginals"]["y"]), d["degrees"]["y"])
    return MaxEntCopulaModel(
        bx=bx, by=by,
        indices=tuple(tuple(ix) for ix in d["indices"]),
        theta=np.array(d["theta"], dtype=float),
        log_z=float(d["log_z"]),
        targets=np.array(d["targets"], dtype=float),
        n=int(d.get("n", 0)),
        fit_report=FitReport(**d.get("fit_report", {})),
    )


def save_model(m: MaxEntCopulaModel, path, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m, provenance), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def load_model(path) -> MaxEntCopulaModel:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(path, f"cannot load model ({exc})") from None
    return model_from_dict(d)
