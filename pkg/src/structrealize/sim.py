"""Time-domain data generation.

Discrete-time LTI recurrences and impulse responses, a fixed-step integrator
for linear delay equations, Fourier-sparse excitation signals and the
validation inputs used to compare realizations in the time domain.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg

from .errors import DomainError, FactorizationError, InstabilityError
from .systems import StructuredSystem

__all__ = [
    "TimeSeries",
    "DiscreteSystem",
    "simulate_discrete",
    "impulse_response",
    "discrete_transfer",
    "simulate_delay",
    "sparse_input",
    "make_sparse_input",
    "validation_input",
    "grid_size",
]


@dataclass(frozen=True)
class TimeSeries:
    """Input/output samples ``u_j = u(j dt)``, ``y_j = y(j dt)``, ``j = 0..N``."""

    dt: float
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        y = np.array(self.y, dtype=float)
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dt", float(self.dt))
        if u.ndim != 1 or u.shape != y.shape:
            raise DomainError(f"u and y must be 1-D of equal length, got {u.shape} and {y.shape}")
        if u.size < 2:
            raise DomainError("a time series needs at least two samples")
        if not self.dt > 0:
            raise DomainError(f"time step must be positive, got {self.dt}")

    @property
    def N(self) -> int:
        """Number of steps; there are ``N + 1`` samples."""
        return self.u.size - 1

    @property
    def t_f(self) -> float:
        return self.N * self.dt

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt


def grid_size(t_f: float, dt: float) -> int:
    """Integer ``N`` with ``t_f = N dt``; raises if the ratio is not integral."""
    if not (dt > 0 and t_f > 0):
        raise DomainError(f"t_f and dt must be positive, got t_f={t_f}, dt={dt}")
    N = round(t_f / dt)
    if N < 1 or abs(N * dt - t_f) > 1e-9 * t_f:
        raise DomainError(f"t_f={t_f} is not an integer multiple of dt={dt}")
    return int(N)


# --- discrete-time systems -------------------------------------------------


def _lu_factor(M):
    # singular factors are detected from the zero pivot below, not from the warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return scipy.linalg.lu_factor(M, check_finite=True)


@dataclass(frozen=True)
class DiscreteSystem:
    """``E x_{j+1} = A x_j + B u_j``, ``y_j = C x_j``, ``x_0 = 0``."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        E = np.array(self.E, dtype=float, ndmin=2)
        A = np.array(self.A, dtype=float, ndmin=2)
        B = np.ravel(np.array(self.B, dtype=float))
        C = np.ravel(np.array(self.C, dtype=float))
        n = E.shape[0]
        if E.shape != (n, n) or A.shape != (n, n) or B.shape != (n,) or C.shape != (n,):
            raise DomainError("inconsistent discrete system dimensions")
        for name, arr in zip("EABC", (E, A, B, C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def order(self) -> int:
        return self.B.shape[0]

    def step_matrices(self):
        """``(E^{-1} A, E^{-1} B)``; raises :class:`FactorizationError` for singular ``E``."""
        try:
            lu = _lu_factor(self.E)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise FactorizationError(f"cannot factor E: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0.0):
            raise FactorizationError("E is singular")
        M = scipy.linalg.lu_solve(lu, self.A)
        b = scipy.linalg.lu_solve(lu, self.B)
        return M, b

    def spectral_radius(self) -> float:
        M, _ = self.step_matrices()
        return float(np.max(np.abs(np.linalg.eigvals(M))))


def simulate_discrete(sys: DiscreteSystem, u) -> np.ndarray:
    """Output ``y_j = C x_j`` of the recurrence for the input sequence ``u``."""
    M, b = sys.step_matrices()
    u = np.asarray(u, dtype=float)
    y = np.zeros(u.size)
    x = np.zeros(sys.order)
    for j in range(u.size - 1):
        x = M @ x + b * u[j]
        y[j + 1] = sys.C @ x
    return y


def impulse_response(sys: DiscreteSystem, j_max: int) -> np.ndarray:
    """Markov parameters ``h_0 = 0``, ``h_i = C (E^{-1}A)^{i-1} E^{-1}B``."""
    if j_max < 0:
        raise DomainError(f"j_max must be nonnegative, got {j_max}")
    M, v = sys.step_matrices()
    h = np.zeros(j_max + 1)
    for i in range(1, j_max + 1):
        h[i] = sys.C @ v
        v = M @ v
    return h


def discrete_transfer(sys: DiscreteSystem, z: complex) -> complex:
    """``H(z) = C (z E - A)^{-1} B``, the sum of ``h_i z^{-i}`` for stable systems."""
    return complex(sys.C @ np.linalg.solve(z * sys.E - sys.A, sys.B.astype(complex)))


# --- delay integrator -----------------------------------------------------


@numba.njit(cache=True)
def _trapezoid_delay_kernel(M, D, b, c, u, m0, phi, n_steps):
    n = M.shape[0]
    L = m0 + 2
    buf = np.zeros((L, n))
    y = np.zeros(n_steps + 1)
    xd_prev = np.zeros(n)
    xd_next = np.zeros(n)
    rhs = np.zeros(n)
    for j in range(n_steps):
        cur = j % L
        nxt = (j + 1) % L
        # delayed state at t_{j+1} - tau; index j+1-m0-phi lies in the stored window
        i1 = j + 1 - m0
        i2 = i1 - 1
        for r in range(n):
            v1 = buf[i1 % L, r] if i1 >= 0 else 0.0
            v2 = buf[i2 % L, r] if i2 >= 0 else 0.0
            xd_next[r] = (1.0 - phi) * v1 + phi * v2
        us = u[j] + u[j + 1]
        for r in range(n):
            acc = b[r] * us
            for q in range(n):
                acc += M[r, q] * buf[cur, q] + D[r, q] * (xd_prev[q] + xd_next[q])
            rhs[r] = acc
        out = 0.0
        for r in range(n):
            buf[nxt, r] = rhs[r]
            xd_prev[r] = xd_next[r]
            out += c[r] * rhs[r]
        if not np.isfinite(out):
            return y, j + 1
        y[j + 1] = out
    return y, -1


def _delay_matrices(sys: StructuredSystem):
    name = sys.family.name
    if name == "delay":
        E, A1, A2 = (np.asarray(a, dtype=float) for a in sys.A)
        tau = float(sys.p[0])
    elif name == "standard":
        E, A1 = (np.asarray(a, dtype=float) for a in sys.A)
        A2 = np.zeros_like(E)
        tau = math.inf
    else:
        raise DomainError(f"simulate_delay supports the 'delay' and 'standard' families, not {name!r}")
    if any(np.iscomplexobj(a) for a in sys.A):
        raise DomainError("time integration needs real system matrices")
    return E, A1, A2, tau


def _sample_input(u, t):
    if callable(u):
        vals = np.asarray(u(t), dtype=float)
        if vals.shape != t.shape:
            vals = np.array([float(u(ti)) for ti in t])
    else:
        vals = np.asarray(u, dtype=float)
        if vals.shape != t.shape:
            raise DomainError(f"input samples have shape {vals.shape}, expected {t.shape}")
    return vals


def simulate_delay(sys: StructuredSystem, u, t_f: float, dt: float) -> TimeSeries:
    """Integrate ``E x' = A_1 x + A_2 x(t - tau) + B u`` with zero history.

    The trapezoidal rule is applied with step ``dt``; delayed states are read
    from the stored trajectory (linearly interpolated when ``tau/dt`` is not
    an integer), so the scheme stays implicit only in the current state.

    Parameters
    ----------
    sys : StructuredSystem
        System of the ``"delay"`` family (``"standard"`` is integrated with
        ``A_2 = 0``).
    u : callable or array_like
        Input, either ``u(t)`` (vectorized over a time array is preferred) or
        the samples on the grid ``t_j = j dt``.
    t_f, dt : float
        Final time and step; ``t_f / dt`` must be an integer.

    Returns
    -------
    TimeSeries
    """
    N = grid_size(t_f, dt)
    E, A1, A2, tau = _delay_matrices(sys)
    t = np.arange(N + 1) * dt
    uv = _sample_input(u, t)

    if math.isinf(tau):
        m0, phi = 1, 0.0
    else:
        ratio = tau / dt
        if abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio):
            m0, phi = int(round(ratio)), 0.0
        else:
            m0 = int(math.floor(ratio))
            phi = ratio - m0
        if m0 < 1:
            raise DomainError(f"delay tau={tau} is shorter than the step dt={dt}")

    P = E - 0.5 * dt * A1
    try:
        lu = _lu_factor(P)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FactorizationError(f"cannot factor E - dt/2 A_1: {exc}") from exc
    if np.any(np.diag(lu[0]) == 0.0):
        raise FactorizationError("E - dt/2 A_1 is singular")
    M = scipy.linalg.lu_solve(lu, E + 0.5 * dt * A1)
    D = scipy.linalg.lu_solve(lu, 0.5 * dt * A2)
    b = scipy.linalg.lu_solve(lu, 0.5 * dt * np.asarray(sys.B, dtype=float))
    c = np.asarray(sys.C, dtype=float)

    y, bad = _trapezoid_delay_kernel(M, D, b, c, uv, m0, phi, N)
    if bad >= 0:
        raise InstabilityError(f"non-finite output at step {bad} (t={bad * dt:g})", step=int(bad))
    return TimeSeries(dt, uv, y)


# --- input signals --------------------------------------------------------


def _check_ks(N: int, ks) -> np.ndarray:
    ks = np.atleast_1d(np.asarray(ks))
    if ks.size == 0:
        raise DomainError("at least one frequency index is required")
    if not np.issubdtype(ks.dtype, np.integer):
        if np.any(ks != np.round(ks)):
            raise DomainError(f"frequency indices must be integers, got {ks}")
        ks = ks.astype(np.int64)
    if np.any(ks < 1) or np.any(ks >= N):
        raise DomainError(f"frequency indices must satisfy 1 <= k < N={N}")
    if np.unique(ks).size != ks.size:
        raise DomainError("frequency indices must be distinct")
    return ks.astype(np.int64)


def sparse_input(N: int, ks, x, t_f: float | None = None, *, complex_form: bool = False):
    """Fourier-sparse excitation ``(1/N) sum_i exp(2 pi i k_i j / N)``.

    With ``t_f`` omitted, ``x`` holds integer sample indices ``j`` in
    ``[0, N]``.  With ``t_f`` given, ``x`` holds times in ``[0, t_f]`` and the
    continuous form ``(1/N) sum_i exp(2 pi i k_i t / t_f)`` is returned, which
    coincides with the discrete form at ``t = j t_f / N``.

    The real part (a sum of cosines) is returned unless ``complex_form`` is
    set.  Its DFT carries ``1/2`` at ``k_i`` and at ``N - k_i``.
    """
    N = int(N)
    ks = _check_ks(N, ks)
    x = np.asarray(x)
    if t_f is None:
        j = x
        if np.any(j != np.round(j)) or np.any(j < 0) or np.any(j > N):
            raise DomainError(f"sample indices must be integers in [0, {N}]")
        j = j.astype(np.int64)
        # exact integer phase reduction
        phase = np.remainder(np.multiply.outer(j, ks), N) / N
    else:
        if not t_f > 0:
            raise DomainError(f"t_f must be positive, got {t_f}")
        t = np.asarray(x, dtype=float)
        if np.any(t < -1e-12 * t_f) or np.any(t > t_f * (1 + 1e-12)):
            raise DomainError(f"times must lie in [0, {t_f}]")
        phase = np.remainder(np.multiply.outer(t / t_f, ks.astype(float)), 1.0)
    if complex_form:
        out = np.exp(2j * np.pi * phase).sum(axis=-1) / N
    else:
        out = np.cos(2 * np.pi * phase).sum(axis=-1) / N
    return out


def make_sparse_input(N: int, ks, t_f: float, *, complex_form: bool = False):
    """Callable ``u(t)`` of the continuous sparse excitation."""
    N = int(N)
    ks = _check_ks(N, ks)

    def u(t):
        return sparse_input(N, ks, t, t_f, complex_form=complex_form)

    return u


def validation_input(which: int, t):
    """Validation signals: ``sin t``, a triangle wave, and ``t exp(-t^2)``."""
    t = np.asarray(t, dtype=float)
    if which == 1:
        return np.sin(t)
    if which == 2:
        fl = np.floor(2.0 * t + 0.5)
        return 2.0 * (t - 0.5 * fl) * np.where(np.mod(fl, 2.0) == 0.0, 1.0, -1.0) + 1.0
    if which == 3:
        return t * np.exp(-t * t)
    raise DomainError(f"validation input must be 1, 2 or 3, got {which}")
