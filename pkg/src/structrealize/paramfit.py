"""Fitting free parameters of a coefficient family to held-out test data.

For a fixed parameter ``p`` the interpolation data determine a realization
``H(s, p)``.  The mismatch of that realization against separate test data,

    E(p) = sum_j |psi_j - H(zeta_j, p)|^2,

is a cheap scalar function that is minimized by a coarse grid scan followed by
golden-section search.  Parameters where no realization can be built get the
cost ``+inf`` so that sweeps and the optimizer simply route around them.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OptimizationError, StructRealizeError
from .realize import InterpolationData, Realization, structured_realization
from .systems import FunctionFamily, eval_transfer

__all__ = [
    "TestData",
    "CostSample",
    "FitResult",
    "cost",
    "evaluate_cost",
    "sample_cost",
    "golden_section",
    "minimize_cost",
    "refit_with_all_data",
    "thread_count",
]

log = logging.getLogger(__name__)

THREADS_ENV = "STRUCT_REALIZE_THREADS"
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def thread_count(default: int = 1) -> int:
    """Worker count from ``STRUCT_REALIZE_THREADS`` (at least 1)."""
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw.strip() else default
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return default


@dataclass(frozen=True)
class TestData:
    """Held-out transfer values ``psi_j`` at frequencies ``zeta_j``."""

    __test__ = False  # not a pytest class

    lambdas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=complex).ravel()
        val = np.array(self.values, dtype=complex).ravel()
        if lam.shape != val.shape:
            raise DomainError("frequencies and values must have equal length")
        if np.unique(lam).size != lam.size:
            raise DomainError("test frequencies must be pairwise distinct")
        lam.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)

    def __len__(self):
        return self.lambdas.size

    @classmethod
    def from_estimate(cls, est) -> "TestData":
        return cls(est.lambdas, est.values)


@dataclass(frozen=True)
class CostSample:
    """One evaluation of the cost.  ``status`` is ``"ok"`` or the failure reason."""

    p: np.ndarray
    cost: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _lambdas_of(data):
    return np.asarray(data.lambdas, dtype=complex)


def _values_of(data):
    # TransferEstimate calls them values, InterpolationData thetas
    vals = data.thetas if isinstance(data, InterpolationData) else data.values
    return np.asarray(vals, dtype=complex)


def _check_disjoint(interp, test: TestData):
    common = np.intersect1d(_lambdas_of(interp), test.lambdas)
    if common.size:
        raise DomainError(f"test frequencies overlap the interpolation set at {common[:3]}")


def evaluate_cost(p, interp, test: TestData, family: FunctionFamily) -> CostSample:
    """Cost at ``p`` with a status string instead of exceptions."""
    p = family.check_params(p)
    try:
        rz = structured_realization(interp, family, p)
        total = 0.0
        for z, psi in zip(test.lambdas, test.values):
            total += abs(psi - eval_transfer(rz, z)) ** 2
    except StructRealizeError as exc:
        log.debug("cost at p=%s failed: %s", p, exc)
        return CostSample(p, math.inf, f"{type(exc).__name__}: {exc}")
    if not math.isfinite(total):
        return CostSample(p, math.inf, "non-finite transfer value")
    return CostSample(p, float(total))


def cost(p, interp, test: TestData, family: FunctionFamily) -> float:
    """Squared mismatch ``sum_j |psi_j - H(zeta_j, p)|^2``; ``inf`` if no realization exists."""
    return evaluate_cost(p, interp, test, family).cost


def sample_cost(grid, interp, test: TestData, family: FunctionFamily, *, threads: int | None = None) -> list:
    """Evaluate the cost on every grid point, keeping the grid order.

    Points are independent, so they are spread over ``threads`` workers
    (default from ``STRUCT_REALIZE_THREADS``).
    """
    grid = [family.check_params(p) for p in grid]
    if not grid:
        return []
    _check_disjoint(interp, test)
    threads = thread_count() if threads is None else max(1, int(threads))

    def one(p):
        return evaluate_cost(p, interp, test, family)

    if threads == 1 or len(grid) == 1:
        return [one(p) for p in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, grid))


def golden_section(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 500):
    """Golden-section search for a minimum of ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x), (a, b), evaluations)`` where ``[a, b]`` is the final
    bracket (width at most ``2 tol``) and ``x`` the best point seen inside it.
    """
    a, b = float(lo), float(hi)
    if not a <= b:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    it = 0
    while b - a > 2.0 * tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        evals += 1
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, (a, b), evals


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`minimize_cost`."""

    p_star: float
    cost: float
    evaluations: int
    bracket: tuple
    grid: list = field(default_factory=list, compare=False)


def minimize_cost(
    bounds,
    start: float,
    interp,
    test: TestData,
    family: FunctionFamily,
    *,
    n_grid: int = 21,
    tol: float = 1e-6,
    threads: int | None = None,
) -> FitResult:
    """Minimize the cost over a scalar parameter.

    A uniform grid of ``n_grid`` points on ``bounds`` (plus ``start``) is
    scanned, the best grid point and its two neighbours form the bracket,
    and golden-section search shrinks it to width ``2 tol``.  If the search
    ends above the best grid point (the cost need not be unimodal there),
    that grid point is returned together with the grid bracket.

    Raises
    ------
    OptimizationError
        If every grid point fails.
    """
    lo, hi = (float(v) for v in bounds)
    if family.n_params != 1:
        raise DomainError("minimize_cost handles a single scalar parameter")
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    if not lo <= start <= hi:
        raise DomainError(f"start {start} outside [{lo}, {hi}]")
    family.check_params([lo])
    family.check_params([hi])

    xs = np.union1d(np.linspace(lo, hi, n_grid), [start])
    samples = sample_cost([[x] for x in xs], interp, test, family, threads=threads)
    costs = np.array([s.cost for s in samples])
    if not np.isfinite(costs).any():
        raise OptimizationError(f"no admissible parameter on the {xs.size}-point grid over [{lo}, {hi}]")
    i = int(np.argmin(costs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]

    evaluated = {}

    def f(x):
        return evaluated.setdefault(x, cost([x], interp, test, family))

    x, fx, bracket, n_gs = golden_section(f, a, b, tol)
    if costs[i] < fx:
        # a non-unimodal bracket can leave the search above its own start
        log.info("golden-section ended above the grid minimum; keeping grid point %.6g", xs[i])
        x, fx = float(xs[i]), float(costs[i])
        bracket = (float(a), float(b))
    return FitResult(float(x), float(fx), int(xs.size + n_gs), bracket, samples)


def refit_with_all_data(p_star, interp, test: TestData, family: FunctionFamily) -> Realization:
    """Realization at ``p_star`` that interpolates interpolation and test data together."""
    lam = np.concatenate([_lambdas_of(interp), test.lambdas])
    vals = np.concatenate([_values_of(interp), test.values])
    order = np.argsort(np.abs(lam.imag), kind="stable")
    merged = InterpolationData(lam[order], vals[order])
    return structured_realization(merged, family, p_star)
