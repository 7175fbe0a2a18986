"""Plain-text file formats: CSV for series and sweeps, JSON for systems and fits.

CSV numbers are written with 17 significant digits so that every float
round-trips exactly.  JSON relies on Python's shortest round-trip ``repr``
for floats.  All files use LF line endings and no timestamps, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .lstfe import TransferEstimate
from .realize import Realization
from .sim import TimeSeries
from .systems import StructuredSystem, get_family

__all__ = [
    "write_timeseries",
    "read_timeseries",
    "write_estimate",
    "read_estimate",
    "realization_to_dict",
    "write_realization",
    "read_realization",
    "write_cost_sweep",
    "write_fit",
    "write_json",
    "write_csv",
]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, columns) -> Path:
    """Write equally long numeric columns under a header row."""
    path = Path(path)
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(map(_fmt, row)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def _read_numeric_csv(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if [h.strip() for h in first.split(",")] != list(header):
            raise DomainError(f"{path}: expected header {','.join(header)!r}, got {first!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
    if data.size == 0:
        return np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise DomainError(f"{path}: expected {len(header)} columns, got {data.shape[1]}")
    return data


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8", newline="\n")
    return path


# -- time series ------------------------------------------------------------


def write_timeseries(path, ts: TimeSeries) -> Path:
    """CSV with header ``t,u,y``."""
    return write_csv(path, ("t", "u", "y"), (ts.t, ts.u, ts.y))


def read_timeseries(path, rtol: float = 1e-9) -> TimeSeries:
    """Read a ``t,u,y`` CSV; the time column must be a uniform grid starting at 0."""
    data = _read_numeric_csv(path, ("t", "u", "y"))
    if data.shape[0] < 2:
        raise DomainError(f"{path}: need at least two samples")
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (t.size - 1)
    grid = np.arange(t.size) * dt
    if abs(t[0]) > rtol * dt or np.max(np.abs(t - grid)) > rtol * max(t[-1], dt) + 1e-12:
        raise DomainError(f"{path}: time column is not a uniform grid starting at 0")
    return TimeSeries(dt, data[:, 1], data[:, 2])


# -- transfer estimates -----------------------------------------------------


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_estimate(path, est: TransferEstimate) -> Path:
    """``omega,re,im`` CSV plus a JSON sidecar holding the metadata."""
    path = Path(path)
    write_csv(path, ("omega", "re", "im"), (est.omegas, est.values.real, est.values.imag))
    write_json(_sidecar(path), _jsonable(dict(est.metadata)))
    return path


def read_estimate(path) -> TransferEstimate:
    path = Path(path)
    data = _read_numeric_csv(path, ("omega", "re", "im"))
    meta = {}
    if _sidecar(path).exists():
        meta = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    return TransferEstimate(1j * data[:, 0], data[:, 1] + 1j * data[:, 2], meta)


# -- realizations -----------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        raise DomainError("complex values cannot be serialized")
    return obj


def realization_to_dict(rz: StructuredSystem) -> dict:
    """Dictionary in the realization JSON layout (real matrices only)."""
    mats = (*rz.A, rz.B, rz.C)
    if any(np.iscomplexobj(m) and np.any(np.imag(m) != 0) for m in mats):
        raise DomainError("only real realizations can be serialized")
    real = [np.real(m) for m in mats]
    return {
        "family": rz.family.name,
        "parameters": [float(v) for v in rz.p],
        "n": int(rz.order),
        "A": [a.tolist() for a in real[:-2]],
        "B": real[-2].tolist(),
        "C": real[-1].tolist(),
        "provenance": _jsonable(getattr(rz, "provenance", {})),
    }


def write_realization(path, rz: StructuredSystem) -> Path:
    return write_json(path, realization_to_dict(rz))


def read_realization(path, bounds=None) -> Realization:
    """Load a realization JSON back into a :class:`Realization`."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        family = get_family(d["family"], bounds)
        A = tuple(np.array(a, dtype=float) for a in d["A"])
        rz = Realization(A, np.array(d["B"], float), np.array(d["C"], float), family, d["parameters"],
                         certified_real=True, provenance=d.get("provenance", {}))
    except KeyError as exc:
        raise DomainError(f"{path}: missing field {exc}") from None
    if rz.order != d.get("n", rz.order):
        raise DomainError(f"{path}: n={d['n']} does not match the matrices ({rz.order})")
    return rz


# -- parameter fits ---------------------------------------------------------


def write_cost_sweep(path, samples) -> Path:
    """``p,cost,status`` CSV; vector parameters are joined with ``;``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "cost", "status"])
        for s in samples:
            p = ";".join(_fmt(v) for v in np.atleast_1d(s.p))
            w.writerow([p, _fmt(s.cost), s.status])
    return path


def write_fit(path, fit) -> Path:
    return write_json(path, {"p_star": float(fit.p_star), "cost": float(fit.cost), "evaluations": int(fit.evaluations)})
