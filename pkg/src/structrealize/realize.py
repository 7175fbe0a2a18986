"""Structured realizations that interpolate transfer function data.

Given points ``(lambda_i, theta_i)`` and a coefficient family ``h_1..h_K``,
the matrices ``A_k`` are defined entry-wise by ``K x K`` linear systems whose
rows pair one data point of the row index with one of the column index.
After closing the data under complex conjugation, a fixed block-diagonal
unitary ``T`` maps the resulting complex matrices to real ones.  Redundant
directions are removed afterwards by projecting onto the range and co-range
of the matrices.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    HaarViolationError,
    InsufficientDataError,
    RealnessViolationError,
    SingularPencilError,
    TruncationUnsafeError,
    VerificationError,
)
from .systems import FunctionFamily, StructuredSystem, eval_transfer

__all__ = [
    "InterpolationData",
    "Partition",
    "Realization",
    "InterpolationReport",
    "close_under_conjugation",
    "partition_data",
    "build_T",
    "solve_haar_entries",
    "realify",
    "truncate",
    "structured_realization",
    "verify_interpolation",
    "HAAR_RCOND_MIN",
    "REAL_TOL",
    "RANK_TOL",
]

log = logging.getLogger(__name__)

HAAR_RCOND_MIN = 1e-13
REAL_TOL = 1e-10
RANK_TOL = 1e-10
TRUNCATION_VERIFY_TOL = 1e-6


@dataclass(frozen=True)
class InterpolationData:
    """Interpolation points ``(lambda_i, theta_i)``.

    When ``conjugate_closed`` is set, entries ``2i`` and ``2i + 1`` (0-based)
    are exact complex conjugates of each other.
    """

    lambdas: np.ndarray
    thetas: np.ndarray
    conjugate_closed: bool = False

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=complex).ravel()
        th = np.array(self.thetas, dtype=complex).ravel()
        if lam.shape != th.shape:
            raise DomainError("frequencies and values must have equal length")
        if np.unique(lam).size != lam.size:
            raise DomainError("interpolation frequencies must be pairwise distinct")
        if np.any(th == 0):
            raise DomainError("interpolation values must be nonzero")
        if self.conjugate_closed:
            if lam.size % 2:
                raise DomainError("conjugate-closed data must have even length")
            if np.any(lam[1::2] != lam[0::2].conj()) or np.any(th[1::2] != th[0::2].conj()):
                raise DomainError("data is flagged conjugate-closed but pairs do not match")
        lam.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "thetas", th)

    def __len__(self):
        return self.lambdas.size

    @classmethod
    def from_estimate(cls, est) -> "InterpolationData":
        return cls(est.lambdas, est.values)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.lambdas).tobytes())
        h.update(np.ascontiguousarray(self.thetas).tobytes())
        return h.hexdigest()


def close_under_conjugation(data) -> InterpolationData:
    """Sort by frequency and insert each conjugate point right after its original."""
    if isinstance(data, InterpolationData):
        if data.conjugate_closed:
            raise DomainError("data is already closed under conjugation")
        lam, th = data.lambdas, data.thetas
    else:
        lam, th = np.asarray(data.lambdas, complex), np.asarray(data.values, complex)
    if np.any(lam.imag <= 0):
        raise DomainError("frequencies must have positive imaginary part before conjugate closure")
    if np.unique(lam).size != lam.size:
        raise DomainError("frequencies must be distinct")
    order = np.argsort(np.abs(lam.imag), kind="stable")
    lam, th = lam[order], th[order]
    out_l = np.empty(2 * lam.size, dtype=complex)
    out_t = np.empty(2 * lam.size, dtype=complex)
    out_l[0::2], out_l[1::2] = lam, lam.conj()
    out_t[0::2], out_t[1::2] = th, th.conj()
    return InterpolationData(out_l, out_t, conjugate_closed=True)


@dataclass(frozen=True)
class Partition:
    """Data renamed into row blocks ``(mu, f)`` and column blocks ``(sigma, g)``.

    ``mu`` and ``f`` have shape ``(Q_F, n)``, ``sigma`` and ``g`` shape
    ``(Q_G, n)`` with ``Q_F = ceil(K/2)``, ``Q_G = floor(K/2)``.
    """

    n: int
    mu: np.ndarray
    f: np.ndarray
    sigma: np.ndarray
    g: np.ndarray
    used: InterpolationData
    unused: InterpolationData


def partition_data(data: InterpolationData, K: int) -> Partition:
    """Assign the first ``K n`` points to blocks; ``n`` is the largest even order that fits."""
    M = len(data)
    if K < 1:
        raise DomainError(f"K must be positive, got {K}")
    if M < 2 * K:
        raise InsufficientDataError(f"{M} points cannot determine a structure with K={K} (need {2 * K})")
    n = (M // K) // 2 * 2
    q_f, q_g = (K + 1) // 2, K // 2
    lam, th = data.lambdas, data.thetas
    # blocks alternate mu_1, sigma_1, mu_2, sigma_2, ... in stored order
    mu = np.array([lam[2 * q * n : (2 * q + 1) * n] for q in range(q_f)]).reshape(q_f, n)
    f = np.array([th[2 * q * n : (2 * q + 1) * n] for q in range(q_f)]).reshape(q_f, n)
    sigma = np.array([lam[(2 * q + 1) * n : (2 * q + 2) * n] for q in range(q_g)]).reshape(q_g, n)
    g = np.array([th[(2 * q + 1) * n : (2 * q + 2) * n] for q in range(q_g)]).reshape(q_g, n)
    used = InterpolationData(lam[: K * n], th[: K * n], data.conjugate_closed)
    unused = InterpolationData(lam[K * n :], th[K * n :], data.conjugate_closed)
    if len(unused):
        log.info("dropping %d surplus interpolation point(s) with |Im| >= %.6g",
                 len(unused), np.abs(unused.lambdas.imag).min())
    return Partition(n, mu, f, sigma, g, used, unused)


def build_T(n: int) -> np.ndarray:
    """Block-diagonal unitary with ``n/2`` copies of ``[[1, -i], [1, i]] / sqrt(2)``."""
    if n < 2 or n % 2:
        raise DomainError(f"n must be a positive even integer, got {n}")
    block = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)
    return np.kron(np.eye(n // 2), block)


def solve_haar_entries(family: FunctionFamily, p, mu, f, sigma, g, n: int) -> np.ndarray:
    """Solve the ``n^2`` entry systems; returns complex ``A`` of shape ``(K, n, n)``.

    Entry ``(i, j)`` solves ``D_ij H_ij a = 1`` where the first ``Q_F`` rows
    use ``(f_{q,i}, h(mu_{q,i}))`` and the remaining ``Q_G`` rows use
    ``(g_{q,j}, h(sigma_{q,j}))``.
    """
    K = family.size
    mu, f = np.asarray(mu, complex), np.asarray(f, complex)
    sigma, g = np.asarray(sigma, complex), np.asarray(g, complex)
    q_f, q_g = mu.shape[0], sigma.shape[0]
    if q_f + q_g != K or mu.shape[1:] != (n,) or (q_g and sigma.shape[1:] != (n,)):
        raise DomainError("block shapes do not match the family size and order")
    if np.any(f == 0) or np.any(g == 0):
        raise DomainError("interpolation values must be nonzero")

    rows_i = f[..., None] * family.evaluate(mu, p)  # (q_f, n, K)
    rows_j = g[..., None] * family.evaluate(sigma, p)  # (q_g, n, K)
    M = np.empty((n, n, K, K), dtype=complex)
    M[:, :, :q_f, :] = np.transpose(rows_i, (1, 0, 2))[:, None, :, :]
    M[:, :, q_f:, :] = np.transpose(rows_j, (1, 0, 2))[None, :, :, :]

    with np.errstate(all="ignore"):
        rcond = 1.0 / np.linalg.cond(M)
    bad = ~(rcond >= HAAR_RCOND_MIN)
    if bad.any():
        i, j = (int(v) for v in np.argwhere(bad)[0])
        raise HaarViolationError(
            f"entry system ({i}, {j}) is singular (rcond={rcond[i, j]:.3g}); "
            "the family violates the Haar condition on this data",
            entry=(i, j),
        )
    X = np.linalg.solve(M, np.ones((n, n, K, 1), dtype=complex))[..., 0]
    return np.moveaxis(X, -1, 0)


@dataclass(frozen=True)
class Realization(StructuredSystem):
    """Structured system built from data, with provenance information."""

    certified_real: bool = False
    provenance: dict = field(default_factory=dict)
    data: InterpolationData | None = field(default=None, compare=False, repr=False)


def _certify_real(mats) -> bool:
    for a in mats:
        re = np.abs(a.real).max(initial=0.0)
        im = np.abs(a.imag).max(initial=0.0)
        if im > REAL_TOL * (1.0 + re):
            return False
    return True


def realify(A, n: int, family: FunctionFamily, p=(), *, data=None, provenance=None) -> Realization:
    """Apply ``T^* A_k T``, ``B = T^* 1``, ``C = B^T`` and certify the result real."""
    T = build_T(n)
    Th = T.conj().T
    At = [Th @ np.asarray(a, complex) @ T for a in A]
    Bt = Th @ np.ones(n, dtype=complex)
    Ct = Bt.copy()
    if not _certify_real(At + [Bt, Ct]):
        worst = max(np.abs(a.imag).max() for a in At + [Bt])
        raise RealnessViolationError(
            f"realified matrices have imaginary parts up to {worst:.3g}; "
            "the data is probably not closed under conjugation"
        )
    return Realization(
        tuple(a.real.copy() for a in At),
        Bt.real.copy(),
        Ct.real.copy(),
        family,
        p,
        certified_real=True,
        provenance=dict(provenance or {}),
        data=data,
    )


def _numerical_rank(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def truncate(
    rz: Realization,
    pivot: int = 0,
    rank_tol: float = RANK_TOL,
    data: InterpolationData | None = None,
    *,
    strict: bool = True,
) -> Realization:
    """Remove redundant directions from a realization.

    The rank of the pencil at the pivot point ``data.lambdas[pivot]`` must
    equal the ranks of ``[A_1 ... A_K]`` and ``[A_1; ...; A_K]``.  The
    projection bases are taken from those stacked matrices: under the rank
    condition they span the same spaces as the pivot's singular vectors, so
    the transfer function is the same, and they keep a real realization real.

    Parameters
    ----------
    rz : Realization
    pivot : int
        Index of the pivot point in ``data``.
    rank_tol : float
        Singular values below ``rank_tol * sigma_max`` count as zero.
    data : InterpolationData, optional
        Defaults to ``rz.data``.
    strict : bool
        With ``strict=False`` a failed rank condition is not fatal.  The
        orders ``min`` of all three ranks, ``min`` of the two stacked ranks
        and ``n`` are tried in that order, each by projecting onto the
        dominant singular subspaces of the stacked matrices, and the first
        one that still reproduces the data is returned.

    Raises
    ------
    TruncationUnsafeError
        If the rank condition fails and ``strict`` is true.
    VerificationError
        If the truncated system no longer reproduces the data to 1e-6.
    """
    data = data if data is not None else rz.data
    if data is None or len(data) == 0:
        raise DomainError("truncation needs the interpolation data of the realization")
    if not 0 <= pivot < len(data):
        raise DomainError(f"pivot index {pivot} outside [0, {len(data) - 1}]")
    n = rz.order
    K = rz.pencil(data.lambdas[pivot])
    r_piv = _numerical_rank(np.linalg.svd(K, compute_uv=False), rank_tol)
    Wall, s_h, _ = np.linalg.svd(np.hstack(rz.A))
    _, s_v, Vhall = np.linalg.svd(np.vstack(rz.A))
    r_h, r_v = _numerical_rank(s_h, rank_tol), _numerical_rank(s_v, rank_tol)
    exact = r_piv == r_h == r_v
    if not exact and strict:
        raise TruncationUnsafeError(
            f"rank condition fails: pencil rank {r_piv}, stacked ranks {r_h} and {r_v}",
            pencil_rank=r_piv,
            stacked_ranks=(r_h, r_v),
        )
    if exact:
        candidates = [r_piv]
    else:
        candidates = sorted({min(r_piv, r_h, r_v), min(r_h, r_v), n})
        log.info("rank condition fails (pencil %d, stacked %d/%d); trying orders %s", r_piv, r_h, r_v, candidates)
    prov = dict(
        rz.provenance,
        pivot=int(pivot),
        rank_tol=rank_tol,
        ranks={"pencil": r_piv, "hstack": r_h, "vstack": r_v},
        rank_condition=exact,
        order_before_truncation=n,
    )
    worst = np.inf
    for r in candidates:
        out = _project(rz, Wall[:, :r], Vhall[:r].conj().T, dict(prov, rank=r), data)
        worst = verify_interpolation(out, data).max_deviation
        if worst <= TRUNCATION_VERIFY_TOL:
            return out
        log.info("order %d misses the data by %.3g", r, worst)
    raise VerificationError(f"truncated realization misses the data by {worst:.3g} (relative)")


def _project(rz: Realization, W1, V1, prov, data) -> Realization:
    if W1.shape[1] == rz.order:
        return Realization(rz.A, rz.B, rz.C, rz.family, rz.p, rz.certified_real, prov, data)
    W1h = W1.conj().T
    A = tuple(W1h @ a @ V1 for a in rz.A)
    B = W1h @ rz.B
    C = rz.C @ V1
    real = rz.certified_real and not any(np.iscomplexobj(m) for m in (*A, B, C))
    return Realization(A, B, C, rz.family, rz.p, real, prov, data)


@dataclass(frozen=True)
class InterpolationReport:
    """Relative deviations ``|H(lambda_i) - theta_i| / |theta_i|``; ``inf`` marks singular points."""

    deviations: np.ndarray
    singular: tuple = ()

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max()) if self.deviations.size else 0.0

    def passes(self, tol: float) -> bool:
        return self.max_deviation <= tol


def verify_interpolation(rz: StructuredSystem, data: InterpolationData, tol: float | None = None) -> InterpolationReport:
    """Compare the realization's transfer function with the data point by point."""
    dev = np.empty(len(data))
    singular = []
    for i, (lam, th) in enumerate(zip(data.lambdas, data.thetas)):
        try:
            dev[i] = abs(eval_transfer(rz, lam) - th) / abs(th)
        except SingularPencilError:
            dev[i] = np.inf
            singular.append(i)
    report = InterpolationReport(dev, tuple(singular))
    if tol is not None and not report.passes(tol):
        log.warning("interpolation check failed: max deviation %.3g > %.3g", report.max_deviation, tol)
    return report


def structured_realization(
    data,
    family: FunctionFamily,
    p=(),
    *,
    pivot: int = 0,
    rank_tol: float = RANK_TOL,
) -> Realization:
    """Build a real structured realization interpolating transfer estimates.

    ``data`` is a :class:`~structrealize.lstfe.TransferEstimate` or an
    :class:`InterpolationData` on the upper imaginary half plane.  The data
    is closed under conjugation, partitioned, turned into matrices, realified
    and truncated.  Only the first ``K n`` closed points are interpolated.

    Truncation runs with ``strict=False``: estimated data close to zero
    frequency routinely give realizations whose stacked matrices have
    slightly different numerical ranks, and the final interpolation check is
    what decides whether the result is usable.
    """
    closed = close_under_conjugation(data)
    part = partition_data(closed, family.size)
    p = family.check_params(p)
    A = solve_haar_entries(family, p, part.mu, part.f, part.sigma, part.g, part.n)
    prov = {
        "data_digest": part.used.digest(),
        "points_used": len(part.used),
        "points_dropped": len(part.unused),
    }
    rz = realify(A, part.n, family, p, data=part.used, provenance=prov)
    return truncate(rz, pivot, rank_tol, part.used, strict=False)
