import numpy as np
import pytest
from hypothesis import given, strategies as st

from structrealize.errors import DomainError, EvaluationError, SingularPencilError
from structrealize.systems import (
    FAMILY_NAMES,
    FunctionFamily,
    StructuredSystem,
    eval_family,
    eval_transfer,
    get_family,
    make_delay_benchmark,
    transfer_response,
)


def test_delay_family_values():
    fam = get_family("delay")
    np.testing.assert_allclose(eval_family(fam, 0.0, [1.0]), [0, -1, -1])
    np.testing.assert_allclose(eval_family(fam, 1j * np.pi, [1.0]), [1j * np.pi, -1, 1], atol=1e-15)


def test_second_order_family():
    np.testing.assert_allclose(eval_family(get_family("second-order"), 2j), [-4, 2j, 1])


def test_neutral_and_standard_families():
    s = 0.3 + 2j
    np.testing.assert_allclose(eval_family(get_family("standard"), s), [s, -1])
    np.testing.assert_allclose(
        eval_family(get_family("neutral-delay"), s, [0.5]), [s, 1, s * np.exp(-0.5 * s)]
    )


def test_parameter_bounds_checked():
    fam = get_family("delay", [(0.5, 1.5)])
    with pytest.raises(DomainError):
        eval_family(fam, 1j, [2.0])
    with pytest.raises(DomainError):
        eval_family(fam, 1j, [])


def test_unknown_family():
    with pytest.raises(DomainError):
        get_family("viscoelastic")


def test_pole_reported_with_index():
    fam = FunctionFamily("pole", (lambda s, p: s, lambda s, p: 1.0 / s))
    with pytest.raises(EvaluationError) as info:
        eval_family(fam, 0.0)
    assert info.value.index == 2


def test_scalar_system():
    sys = StructuredSystem(([[1.0]], [[1.0]]), [1.0], [1.0], FunctionFamily("s1", (lambda s, p: s, lambda s, p: 1.0 + 0 * s)))
    assert eval_transfer(sys, 0.0) == pytest.approx(1.0)


def test_dimension_checks():
    fam = get_family("standard")
    with pytest.raises(DomainError):
        StructuredSystem((np.eye(2),), np.ones(2), np.ones(2), fam)
    with pytest.raises(DomainError):
        StructuredSystem((np.eye(2), np.eye(3)), np.ones(2), np.ones(2), fam)
    with pytest.raises(DomainError):
        StructuredSystem((np.eye(2), np.eye(2)), np.ones(2), np.ones(3), fam)


def test_singular_pencil():
    sys = StructuredSystem((np.eye(2), np.eye(2)), np.ones(2), np.ones(2), get_family("standard"))
    with pytest.raises(SingularPencilError) as info:
        eval_transfer(sys, 1.0)  # s I - I vanishes at s = 1
    assert info.value.s == 1.0
    assert np.isnan(transfer_response(sys, [1.0, 2.0])[0])
    assert transfer_response(sys, [2.0])[0] == pytest.approx(2.0)


# reference values printed with the published case study (two significant digits)
@pytest.mark.parametrize(
    "omega, expected",
    [(6.28e-4, 2.97e-2 + 9.05e-6j), (2.04, 3.26e-2 + 4.89e-2j), (1.00028, 3.01e-2 + 1.58e-2j)],
)
def test_benchmark_reference_values(omega, expected):
    val = eval_transfer(make_delay_benchmark(), 1j * omega)
    assert abs(val.real - expected.real) <= 1e-2 * abs(expected.real)
    assert abs(val.imag - expected.imag) <= 1e-2 * abs(expected.imag)


def test_benchmark_matrices():
    sys = make_delay_benchmark()
    E, A1, A2 = sys.A
    assert np.all(np.diag(E)[[0, -1]] == 6.0)
    assert np.all(np.diag(E)[1:-1] == 5.0)
    assert np.all(np.diag(E, 1) == 1.0) and np.all(np.diag(E, -1) == 1.0)
    np.testing.assert_array_equal(sys.B, [1, 1] + [0] * 10)
    np.testing.assert_array_equal(sys.C, 10 * sys.B)
    assert make_delay_benchmark(gain=1.0).C[0] == 1.0
    np.testing.assert_array_equal(make_delay_benchmark(N=2, tau=1, zeta=1, nu=0).A[2], 0.0)


def test_benchmark_invalid():
    with pytest.raises(DomainError):
        make_delay_benchmark(N=1)
    with pytest.raises(DomainError):
        make_delay_benchmark(tau=0.0)


@given(st.floats(3.01, 50.0), st.integers(2, 30))
def test_benchmark_diagonal_dominance(nu, N):
    E = make_delay_benchmark(N=N, nu=nu).A[0]
    off = np.abs(E).sum(axis=1) - np.abs(np.diag(E))
    assert np.all(np.abs(np.diag(E)) > off)


def test_conjugate_symmetry_random_systems(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        fam = get_family(str(rng.choice(FAMILY_NAMES)))
        p = [rng.uniform(0.1, 2.0)] * fam.n_params
        A = [rng.standard_normal((n, n)) for _ in range(fam.size)]
        sys = StructuredSystem(A, rng.standard_normal(n), rng.standard_normal(n), fam, p)
        s = complex(rng.uniform(-1, 1), rng.uniform(-5, 5))
        h, hc = eval_transfer(sys, s), eval_transfer(sys, s.conjugate())
        assert abs(hc - h.conjugate()) <= 1e-13 * max(1.0, abs(h))


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_family_haar_nonsingular(name, rng):
    fam = get_family(name)
    p = [0.7] * fam.n_params
    for _ in range(20):
        s = rng.uniform(-2, 2, fam.size) + 1j * rng.uniform(-5, 5, fam.size)
        M = fam.evaluate(s, p)
        assert np.isfinite(np.linalg.cond(M))
        assert np.linalg.matrix_rank(M) == fam.size


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_family_conjugate(name, rng):
    fam = get_family(name)
    s = rng.uniform(-1, 1, 10) + 1j * rng.uniform(-5, 5, 10)
    p = [1.3] * fam.n_params
    np.testing.assert_allclose(fam.evaluate(s.conj(), p), fam.evaluate(s, p).conj(), rtol=1e-15, atol=0)
