"""Time-domain comparison of a model against its realization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError
from .sim import TimeSeries, simulate_delay, validation_input
from .systems import StructuredSystem

__all__ = ["error_metrics", "ValidationRow", "validate_realization"]


def error_metrics(y, y_red, u, dt: float):
    """Norm of the input and output errors relative to it.

    Returns ``(||u||_L2, ||y - y_red||_Linf / ||u||_L2, ||y - y_red||_L2 / ||u||_L2)``
    with L2 norms by the trapezoidal rule on the sample grid.

    Raises
    ------
    DomainError
        For mismatched lengths, ``dt <= 0`` or a zero input.
    """
    y, y_red, u = (np.asarray(a, dtype=float) for a in (y, y_red, u))
    if not y.shape == y_red.shape == u.shape or y.ndim != 1:
        raise DomainError("y, y_red and u must be 1-D arrays of equal length")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    u_l2 = float(np.sqrt(trapezoid(u * u, dx=dt)))
    if u_l2 == 0.0:
        raise DomainError("error ratios are undefined for a zero input")
    e = y - y_red
    return u_l2, float(np.max(np.abs(e))) / u_l2, float(np.sqrt(trapezoid(e * e, dx=dt))) / u_l2


@dataclass(frozen=True)
class ValidationRow:
    """Metrics for one input plus both trajectories."""

    which: int
    u_l2: float
    linf_ratio: float
    l2_ratio: float
    full: TimeSeries
    reduced: TimeSeries

    @property
    def error(self) -> np.ndarray:
        return self.full.y - self.reduced.y


def validate_realization(model: StructuredSystem, realization: StructuredSystem, inputs=(1, 2, 3), t_f: float = 10.0, dt: float = 1e-3):
    """Simulate model and realization with the standard validation inputs."""
    rows = []
    for which in inputs:
        u = lambda t, w=which: validation_input(w, t)
        full = simulate_delay(model, u, t_f, dt)
        red = simulate_delay(realization, u, t_f, dt)
        rows.append(ValidationRow(which, *error_metrics(full.y, red.y, full.u, dt), full, red))
    return rows
