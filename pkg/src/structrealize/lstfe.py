"""Least-squares transfer function estimation from sampled input/output data.

The plain empirical estimate divides output by input DFT coefficients and is
exact only for periodic data.  The least-squares variant instead fits the
tail ``y_{j_min}..y_N`` of the output with the model

    y_j ~ (1/N) sum_i u_hat_{k_i} H_{k_i} q_{k_i}^j,   q_k = exp(2 pi i k / N),

which drops the periodicity assumption and only needs the transient to have
decayed by ``j_min``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateProblemError,
    DomainError,
    MissingExcitationError,
    NoExcitationError,
)
from .sim import TimeSeries, grid_size

__all__ = [
    "FrequencySelection",
    "TransferEstimate",
    "dft",
    "etfe_ratio",
    "select_frequencies",
    "assemble_F",
    "solve_regularized_ls",
    "lstfe_pipeline",
    "DEFAULT_USED_FRACTION",
    "DEFAULT_REL_THRESHOLD",
    "EXCITATION_FLOOR",
]

DEFAULT_USED_FRACTION = 0.75
DEFAULT_REL_THRESHOLD = 1e-10
#: |u_hat_k| must exceed this fraction of max |u_hat| to count as excited.
EXCITATION_FLOOR = 1e-12
#: Largest F (rows * columns) assembled densely; larger problems are streamed.
MAX_DENSE_ENTRIES = 1 << 22
#: Rows per streamed block; also the re-anchoring period of the power recursion.
CHUNK_ROWS = 1 << 16


def dft(x) -> np.ndarray:
    """``X_k = sum_j x_j exp(-2 pi i j k / N)`` for ``k = 0..N-1``."""
    x = np.asarray(x)
    if x.ndim != 1 or x.size < 1:
        raise DomainError("dft expects a non-empty 1-D sequence")
    return np.fft.fft(x)


def _excited(u_hat: np.ndarray) -> np.ndarray:
    mag = np.abs(u_hat)
    top = mag.max() if mag.size else 0.0
    return mag > EXCITATION_FLOOR * top if top > 0 else np.zeros(mag.shape, bool)


def etfe_ratio(ts: TimeSeries) -> dict:
    """Empirical transfer function estimate ``y_hat_k / u_hat_k``.

    Uses the first ``N`` samples; only indices whose input coefficient is
    above the excitation floor are returned.
    """
    N = ts.N
    u_hat = dft(ts.u[:N])
    y_hat = dft(ts.y[:N])
    mask = _excited(u_hat)
    if not mask.any():
        raise NoExcitationError("input carries no nonzero Fourier coefficient")
    idx = np.flatnonzero(mask)
    return {int(k): complex(y_hat[k] / u_hat[k]) for k in idx}


@dataclass(frozen=True)
class FrequencySelection:
    """Requested and actual estimation frequencies on the DFT grid.

    ``ks`` are the DFT indices; the actual frequencies are
    ``lambda_i = 2 pi i k_i / t_f`` and ``q_{k_i} = exp(lambda_i dt)``.
    """

    requested: np.ndarray
    ks: np.ndarray
    t_f: float
    dt: float

    @property
    def N(self) -> int:
        return grid_size(self.t_f, self.dt)

    @property
    def r(self) -> int:
        return self.ks.size

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * np.pi * self.ks / self.t_f

    @property
    def lambdas(self) -> np.ndarray:
        return 1j * self.omegas

    @property
    def q(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.ks / self.N)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def select_frequencies(f_min: float, f_max: float, r_tilde: int, t_f: float, dt: float) -> FrequencySelection:
    """Map log-spaced target frequencies in ``[i f_min, i f_max]`` onto the DFT grid.

    Each target ``lambda~`` is replaced by the nearest ``2 pi i k / t_f`` with
    integer ``k >= 1``; duplicate indices are removed.
    """
    if not (f_min > 0 and f_max > 0):
        raise DomainError("frequency bounds must be positive")
    if f_min > f_max:
        raise DomainError(f"f_min={f_min} exceeds f_max={f_max}")
    if int(r_tilde) != r_tilde or r_tilde < 1:
        raise DomainError(f"r_tilde must be a positive integer, got {r_tilde}")
    N = grid_size(t_f, dt)
    requested = 1j * np.geomspace(f_min, f_max, int(r_tilde))
    raw = _round_half_away(requested.imag * t_f / (2.0 * np.pi))
    if f_max * t_f / (2.0 * np.pi) < 1.0:
        warnings.warn(
            "all requested frequencies lie below the lowest grid frequency 2*pi/t_f; "
            "using k = 1 only",
            stacklevel=2,
        )
    ks = np.unique(np.maximum(raw, 1.0).astype(np.int64))
    if 2 * ks[-1] >= N:
        raise DomainError(
            f"frequency index {ks[-1]} is at or above the Nyquist index {N // 2}; decrease dt"
        )
    requested.setflags(write=False)
    ks.setflags(write=False)
    return FrequencySelection(requested, ks, float(t_f), float(dt))


def _unit_powers(k: int, N: int, j0: int, j1: int) -> np.ndarray:
    """``q_k^j`` for ``j = j0..j1`` (inclusive) by a running product.

    The recursion is re-anchored to the exactly reduced phase every
    ``CHUNK_ROWS`` steps so the error does not grow with ``j``.
    """
    q = np.exp(2j * np.pi * (k % N) / N)
    out = np.empty(j1 - j0 + 1, dtype=complex)
    for start in range(j0, j1 + 1, CHUNK_ROWS):
        stop = min(start + CHUNK_ROWS, j1 + 1)
        seg = np.full(stop - start, q)
        seg[0] = np.exp(2j * np.pi * ((k * start) % N) / N)
        out[start - j0 : stop - j0] = np.cumprod(seg)
    return out


def _check_excitation(u_hat: np.ndarray, ks) -> None:
    mask = _excited(u_hat)
    for k in ks:
        if not mask[k]:
            raise MissingExcitationError(f"input has no Fourier coefficient at k={k}", k=int(k))


def assemble_F(u_hat, ks, j_min: int, N: int) -> np.ndarray:
    """Fourier matrix with entries ``u_hat_{k_i} q_{k_i}^j / N``, ``j = j_min..N``.

    Parameters
    ----------
    u_hat : array_like
        Full DFT of the input (length ``N``).
    ks : sequence of int
        Column indices.
    j_min, N : int
        First row index and number of steps.
    """
    u_hat = np.asarray(u_hat, dtype=complex)
    if u_hat.shape != (N,):
        raise DomainError(f"u_hat must have length N={N}, got {u_hat.shape}")
    if not 0 <= j_min <= N:
        raise DomainError(f"j_min must lie in [0, {N}], got {j_min}")
    ks = [int(k) for k in ks]
    _check_excitation(u_hat, ks)
    F = np.empty((N - j_min + 1, len(ks)), dtype=complex)
    for col, k in enumerate(ks):
        F[:, col] = (u_hat[k] / N) * _unit_powers(k, N, j_min, N)
    return F


def _truncated_solve(U, s, Vh, Y, rel_threshold):
    if s.size == 0 or not s[0] > 0:
        raise DegenerateProblemError("least-squares matrix is zero")
    cutoff = max(rel_threshold, np.finfo(float).eps * max(U.shape[0], Vh.shape[1])) * s[0]
    keep = s > cutoff
    if not keep.any():
        raise DegenerateProblemError("all singular values were truncated")
    coef = (U[:, keep].conj().T @ Y) / s[keep]
    return Vh[keep].conj().T @ coef, int(keep.sum())


def solve_regularized_ls(F, Y, rel_threshold: float = DEFAULT_REL_THRESHOLD, *, return_rank: bool = False):
    """Minimum-norm least-squares solution with truncated singular values.

    Singular values below ``rel_threshold * sigma_max`` are discarded; the
    threshold never drops below ``eps * max(F.shape)``, the usual numerical
    rank floor, so a zero threshold still ignores round-off singular values.
    """
    F = np.asarray(F)
    Y = np.asarray(Y)
    if F.ndim != 2 or Y.shape != (F.shape[0],):
        raise DomainError(f"shape mismatch: F {F.shape}, Y {Y.shape}")
    if not 0 <= rel_threshold < 1:
        raise DomainError(f"rel_threshold must lie in [0, 1), got {rel_threshold}")
    U, s, Vh = np.linalg.svd(F, full_matrices=False)
    x, rank = _truncated_solve(U, s, Vh, Y, rel_threshold)
    return (x, rank) if return_rank else x


def _streamed_ls(u_hat, ks, j_min, N, y, rel_threshold):
    """Same solution as the dense path from a QR of row blocks of ``[F | Y]``."""
    r = len(ks)
    coef = np.array([u_hat[k] / N for k in ks])
    R = np.zeros((0, r + 1), dtype=complex)
    for start in range(j_min, N + 1, CHUNK_ROWS):
        stop = min(start + CHUNK_ROWS, N + 1) - 1
        block = np.empty((stop - start + 1, r + 1), dtype=complex)
        for col, k in enumerate(ks):
            block[:, col] = coef[col] * _unit_powers(k, N, start, stop)
        block[:, r] = y[start : stop + 1]
        R = scipy.linalg.qr(np.vstack([R, block]), mode="r")[0][: r + 1]
    U, s, Vh = np.linalg.svd(R[:r, :r])
    return _truncated_solve(U, s, Vh, R[:r, r], rel_threshold)


@dataclass(frozen=True)
class TransferEstimate:
    """Transfer estimates ``(lambda_i, H_i)`` on the positive imaginary axis."""

    lambdas: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=complex).ravel()
        val = np.array(self.values, dtype=complex).ravel()
        if lam.shape != val.shape:
            raise DomainError("frequencies and values must have equal length")
        if lam.size and (np.any(lam.imag <= 0) or np.unique(lam).size != lam.size):
            raise DomainError("estimate frequencies must be distinct with positive imaginary part")
        lam.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)

    @property
    def omegas(self) -> np.ndarray:
        return self.lambdas.imag

    def __len__(self):
        return self.lambdas.size


def lstfe_pipeline(
    ts: TimeSeries,
    sel: FrequencySelection,
    used_fraction: float = DEFAULT_USED_FRACTION,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> TransferEstimate:
    """Estimate the transfer function at the selected frequencies.

    The last ``used_fraction`` of the record enters the least-squares fit,
    i.e. ``j_min = floor((1 - used_fraction) N)``.  For real excitations the
    mirrored indices ``N - k_i`` carry the conjugate coefficients; they are
    fitted as additional columns whenever they are excited.
    """
    if not 0 < used_fraction < 1:
        raise DomainError(f"used_fraction must lie in (0, 1), got {used_fraction}")
    N = ts.N
    if N != sel.N or not math.isclose(ts.dt, sel.dt, rel_tol=1e-12):
        raise DomainError(
            f"time series (N={N}, dt={ts.dt}) does not match the selection (N={sel.N}, dt={sel.dt})"
        )
    j_min = int(math.floor((1.0 - used_fraction) * N))
    u_hat = dft(ts.u[:N])
    ks = [int(k) for k in sel.ks]
    _check_excitation(u_hat, ks)
    mask = _excited(u_hat)
    mirrors = [N - k for k in ks if mask[N - k] and (N - k) not in ks]
    cols = ks + mirrors

    if (N - j_min + 1) * len(cols) <= MAX_DENSE_ENTRIES:
        F = assemble_F(u_hat, cols, j_min, N)
        x, rank = solve_regularized_ls(F, ts.y[j_min:], rel_threshold, return_rank=True)
    else:
        x, rank = _streamed_ls(u_hat, cols, j_min, N, ts.y, rel_threshold)

    meta = {
        "t_f": ts.t_f,
        "dt": ts.dt,
        "N": N,
        "j_min": j_min,
        "threshold": rel_threshold,
        "k": ks,
        "rank": rank,
    }
    return TransferEstimate(sel.lambdas, x[: len(ks)], meta)
