"""Structured LTI systems ``H(s) = C (sum_k h_k(s, p) A_k)^{-1} B``.

A structure is described by a :class:`FunctionFamily`, i.e. a list of scalar
coefficient functions ``h_k(s, p)`` that may depend on a real parameter
vector ``p`` (for instance a time delay).  :class:`StructuredSystem` pairs a
family with concrete matrices and evaluates the transfer function exactly,
which makes it the reference for every frequency-domain check in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, EvaluationError, SingularPencilError

__all__ = [
    "FunctionFamily",
    "StructuredSystem",
    "FAMILY_NAMES",
    "get_family",
    "eval_family",
    "eval_transfer",
    "transfer_response",
    "make_delay_benchmark",
    "RCOND_MIN",
]

#: Reciprocal condition estimate below which a pencil counts as singular.
RCOND_MIN = 1e-14

CoefficientFunction = Callable[[complex, np.ndarray], complex]


def _float_or_complex(a):
    return complex if np.iscomplexobj(np.asarray(a)) else float


def _readonly(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FunctionFamily:
    """Coefficient functions ``h_1..h_K`` of a structured transfer function.

    Each function is called as ``h(s, p)`` with a complex frequency ``s``
    (scalar or array) and the parameter vector ``p`` as a 1-D float array.

    Parameters
    ----------
    name : str
        Identifier used for serialization.
    functions : sequence of callables
        The coefficient functions.
    bounds : sequence of (lo, hi)
        Box bounds of the parameter set, one pair per parameter.
    param_names : sequence of str, optional
        Human-readable parameter names.
    """

    name: str
    functions: tuple
    bounds: tuple = ()
    param_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not self.param_names:
            names = tuple(f"p{i}" for i in range(len(bounds)))
            object.__setattr__(self, "param_names", names)
        if len(self.functions) < 1:
            raise DomainError("a function family needs at least one function")
        for lo, hi in bounds:
            if not lo <= hi:
                raise DomainError(f"invalid parameter bounds [{lo}, {hi}]")

    @property
    def size(self) -> int:
        return len(self.functions)

    @property
    def n_params(self) -> int:
        return len(self.bounds)

    def check_params(self, p) -> np.ndarray:
        """Return ``p`` as a float array after validating it against the bounds."""
        p = np.atleast_1d(np.asarray(p, dtype=float)) if np.size(p) else np.zeros(0)
        if p.shape != (self.n_params,):
            raise DomainError(
                f"family {self.name!r} expects {self.n_params} parameter(s), got {p.size}"
            )
        for value, (lo, hi), pname in zip(p, self.bounds, self.param_names):
            if not (lo <= value <= hi):
                raise DomainError(f"parameter {pname}={value} outside [{lo}, {hi}]")
        return p

    def with_bounds(self, bounds) -> "FunctionFamily":
        """Copy of the family with a different parameter box."""
        return FunctionFamily(self.name, self.functions, tuple(bounds), self.param_names)

    def evaluate(self, s, p) -> np.ndarray:
        """Evaluate all functions at one or many frequencies.

        Returns an array of shape ``s.shape + (K,)``.
        """
        p = self.check_params(p)
        s = np.asarray(s, dtype=complex)
        out = np.empty(s.shape + (self.size,), dtype=complex)
        with np.errstate(all="ignore"):
            for k, h in enumerate(self.functions):
                out[..., k] = h(s, p)
        bad = ~np.isfinite(out)
        if bad.any():
            k = int(np.argwhere(bad)[0][-1])
            raise EvaluationError(
                f"coefficient function h_{k + 1} of family {self.name!r} is not finite "
                f"at the requested frequency",
                index=k + 1,
            )
        return out


def _const(value):
    def h(s, p):
        return np.full(np.shape(s), value, dtype=complex)

    return h


def _standard():
    return FunctionFamily("standard", (lambda s, p: s, _const(-1.0)))


def _second_order():
    return FunctionFamily("second-order", (lambda s, p: s * s, lambda s, p: s, _const(1.0)))


def _delay():
    return FunctionFamily(
        "delay",
        (lambda s, p: s, _const(-1.0), lambda s, p: -np.exp(-p[0] * s)),
        bounds=((0.0, math.inf),),
        param_names=("tau",),
    )


def _neutral_delay():
    return FunctionFamily(
        "neutral-delay",
        (lambda s, p: s, _const(1.0), lambda s, p: s * np.exp(-p[0] * s)),
        bounds=((0.0, math.inf),),
        param_names=("tau",),
    )


_BUILTIN = {
    "standard": _standard,
    "second-order": _second_order,
    "delay": _delay,
    "neutral-delay": _neutral_delay,
}

FAMILY_NAMES = tuple(_BUILTIN)


def get_family(name: str, bounds=None) -> FunctionFamily:
    """Built-in family by name, optionally with custom parameter bounds."""
    try:
        family = _BUILTIN[name]()
    except KeyError:
        raise DomainError(
            f"unknown family {name!r}; choose one of {', '.join(FAMILY_NAMES)}"
        ) from None
    if bounds is not None:
        family = family.with_bounds(bounds)
    return family


def eval_family(family: FunctionFamily, s: complex, p=()) -> np.ndarray:
    """Values ``[h_1(s, p), ..., h_K(s, p)]`` at a single finite frequency."""
    s = complex(s)
    if not (math.isfinite(s.real) and math.isfinite(s.imag)):
        raise DomainError(f"frequency must be finite, got {s}")
    return family.evaluate(s, p)


@dataclass(frozen=True)
class StructuredSystem:
    """Matrices ``A_1..A_K, B, C`` of a SISO structured system.

    ``B`` and ``C`` are stored as 1-D arrays of length ``n``.
    """

    A: tuple
    B: np.ndarray
    C: np.ndarray
    family: FunctionFamily
    p: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        A = tuple(_readonly(a, dtype=_float_or_complex(a)) for a in self.A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", _readonly(np.ravel(self.B), dtype=_float_or_complex(self.B)))
        object.__setattr__(self, "C", _readonly(np.ravel(self.C), dtype=_float_or_complex(self.C)))
        object.__setattr__(self, "p", _readonly(self.family.check_params(self.p)))
        n = self.B.shape[0]
        if len(A) != self.family.size:
            raise DomainError(f"family {self.family.name!r} needs {self.family.size} matrices, got {len(A)}")
        for k, a in enumerate(A):
            if a.shape != (n, n):
                raise DomainError(f"A_{k + 1} has shape {a.shape}, expected {(n, n)}")
        if self.C.shape != (n,):
            raise DomainError(f"C has length {self.C.shape[0]}, expected {n}")

    @property
    def order(self) -> int:
        return self.B.shape[0]

    n = order

    def pencil(self, s) -> np.ndarray:
        """``sum_k h_k(s, p) A_k`` at a single frequency."""
        h = eval_family(self.family, s, self.p)
        return sum(hk * a for hk, a in zip(h, self.A))

    def __call__(self, s):
        return eval_transfer(self, s)


def _lu_solve_checked(M: np.ndarray, b: np.ndarray, rcond_min: float = RCOND_MIN):
    """LU solve with partial pivoting plus a LAPACK condition estimate.

    Returns ``(x, rcond)``; ``x`` is ``None`` when ``rcond < rcond_min``.
    """
    M = np.asarray(M, dtype=complex)
    getrf, getrs, gecon = lapack.get_lapack_funcs(("getrf", "getrs", "gecon"), (M,))
    anorm = np.linalg.norm(M, 1)
    lu, piv, info = getrf(M)
    if info > 0 or anorm == 0.0 or not np.isfinite(anorm):
        return None, 0.0
    rcond, _ = gecon(lu, anorm, norm="1")
    if not rcond >= rcond_min:
        return None, float(rcond)
    x, info = getrs(lu, piv, np.asarray(b, dtype=complex))
    return x, float(rcond)


def eval_transfer(system: StructuredSystem, s: complex) -> complex:
    """Transfer function value ``C (sum_k h_k(s) A_k)^{-1} B``.

    Raises
    ------
    SingularPencilError
        If the reciprocal condition estimate of the pencil is below
        :data:`RCOND_MIN`.
    """
    M = system.pencil(s)
    x, rcond = _lu_solve_checked(M, system.B)
    if x is None:
        raise SingularPencilError(
            f"pencil is singular at s={complex(s)} (rcond={rcond:.3g})", s=complex(s), rcond=rcond
        )
    return complex(system.C @ x)


def transfer_response(system: StructuredSystem, s: Sequence[complex]) -> np.ndarray:
    """Transfer values at many frequencies; singular points give ``nan``."""
    out = np.empty(len(s), dtype=complex)
    for i, si in enumerate(s):
        try:
            out[i] = eval_transfer(system, si)
        except SingularPencilError:
            out[i] = complex(np.nan, np.nan)
    return out


def _tridiag_T(N: int) -> np.ndarray:
    T = np.eye(N, k=1) + np.eye(N, k=-1)
    T[0, 0] = T[-1, -1] = 1.0
    return T


def make_delay_benchmark(
    N: int = 12, tau: float = 1.0, zeta: float = 0.01, nu: float = 5.0, gain: float = 10.0
) -> StructuredSystem:
    """Delay benchmark ``E x' = A_1 x + A_2 x(t - tau) + B u``, ``y = C x``.

    ``E = nu I + T``, ``A_1 = (1/zeta + 1)(T - nu I)/tau`` and
    ``A_2 = (1/zeta - 1)(T - nu I)/tau`` with ``T`` tridiagonal (ones on the
    off-diagonals and in the two corners).  ``B`` has ones in its first two
    entries and ``C = gain * B^T``.  The default ``gain=10`` reproduces the
    published reference transfer values and trajectories of this model;
    ``gain=1`` gives the plain ``C = B^T`` variant.

    Returned as a system of the ``"delay"`` family, so its pencil is
    ``s E - A_1 - exp(-tau s) A_2``.
    """
    if int(N) != N or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N}")
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if zeta == 0:
        raise DomainError("zeta must be nonzero")
    N = int(N)
    T = _tridiag_T(N)
    I = np.eye(N)
    E = nu * I + T
    A1 = (1.0 / tau) * (1.0 / zeta + 1.0) * (T - nu * I)
    A2 = (1.0 / tau) * (1.0 / zeta - 1.0) * (T - nu * I)
    B = np.zeros(N)
    B[:2] = 1.0
    return StructuredSystem((E, A1, A2), B, gain * B, get_family("delay"), (float(tau),))
