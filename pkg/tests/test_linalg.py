import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pirldc.errors import LengthMismatch, NotAPOVM, NotOrthonormal, NotPSD, NotSymmetric, PirError
from pirldc.linalg import (
    complete_to_unitary,
    from_json,
    helstrom_povm,
    is_density,
    is_psd,
    is_unitary,
    jacobi_eigh,
    measure_probability,
    phase_basis_state,
    phase_query_state,
    povm_outcome_probs,
    psd_factor,
    subset_from_index,
    subset_index,
    to_json,
    trace_norm,
    unitarity_error,
    walsh_hadamard,
)


def sym(d, seed):
    A = np.random.default_rng(seed).normal(size=(d, d))
    return (A + A.T) / 2


@pytest.mark.parametrize("d", [1, 2, 5, 16, 32])
def test_jacobi_matches_numpy(d):
    M = sym(d, d)
    w, Q = jacobi_eigh(M)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(M), atol=1e-11)
    assert np.abs(Q @ np.diag(w) @ Q.T - M).max() < 1e-11
    assert unitarity_error(Q) < 1e-12


@settings(max_examples=40)
@given(arrays(np.float64, (4, 4), elements=st.floats(-10, 10)))
def test_jacobi_property(A):
    M = (A + A.T) / 2
    w, Q = jacobi_eigh(M)
    assert np.abs(Q @ np.diag(w) @ Q.T - M).max() < 1e-9 * max(1.0, np.abs(M).max())


def test_jacobi_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        jacobi_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NotSymmetric):
        jacobi_eigh(np.zeros((2, 3)))


def test_psd_factor():
    B = np.random.default_rng(3).normal(size=(5, 3))
    M = B @ B.T  # rank 3
    A = psd_factor(M)
    assert np.abs(A.T @ A - M).max() < 1e-10
    # round-off below zero is clamped
    F = psd_factor(np.diag([1.0, -1e-10]))
    assert np.allclose(F.T @ F, np.diag([1.0, 0.0]))
    with pytest.raises(NotPSD):
        psd_factor(np.diag([1.0, -0.5]))


def test_complete_to_unitary_keeps_given_columns():
    v = np.array([1.0, 1.0, 0.0, 0.0]) / math.sqrt(2)
    w = np.array([0.0, 0.0, 1.0, -1.0]) / math.sqrt(2)
    U = complete_to_unitary({1: v, 3: w}, 4)
    assert is_unitary(U)
    assert np.array_equal(U[:, 1], v) and np.array_equal(U[:, 3], w)
    with pytest.raises(NotOrthonormal):
        complete_to_unitary({0: v, 1: v}, 4)
    with pytest.raises(LengthMismatch):
        complete_to_unitary({0: v[:3]}, 4)
    with pytest.raises(PirError):
        complete_to_unitary({5: v}, 4)


def test_complete_to_unitary_empty_is_identity():
    assert np.array_equal(complete_to_unitary({}, 3), np.eye(3))


def test_trace_norm():
    assert trace_norm(np.diag([0.5, -0.25, 0.0])) == pytest.approx(0.75)
    M = sym(6, 9)
    assert trace_norm(M) == pytest.approx(np.abs(np.linalg.eigvalsh(M)).sum(), abs=1e-11)


def test_measure_probability():
    psi = np.array([0.6, 0.8])
    assert measure_probability(psi, np.diag([1.0, 0.0])) == pytest.approx(0.36)
    with pytest.raises(PirError):
        measure_probability(psi, np.diag([0.5, 0.0]))
    with pytest.raises(LengthMismatch):
        measure_probability(psi, np.eye(3))


def test_density_and_povm():
    rho = np.diag([0.25, 0.75])
    assert is_density(rho) and is_psd(rho)
    assert not is_density(np.diag([0.5, 0.6]))
    probs = povm_outcome_probs(rho, [np.diag([1.0, 0.5]), np.diag([0.0, 0.5])])
    assert probs == pytest.approx([0.625, 0.375])
    with pytest.raises(NotAPOVM):
        povm_outcome_probs(rho, [np.diag([1.0, 0.5])])
    with pytest.raises(NotAPOVM):
        povm_outcome_probs(rho, [np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])


def test_helstrom_success_equals_trace_norm_formula():
    a = np.array([1.0, 0.0])
    b = np.array([1.0, 1.0]) / math.sqrt(2)
    rho0, rho1 = np.outer(a, a), np.outer(b, b)
    E0, E1 = helstrom_povm(rho0, rho1)
    success = 0.5 * np.trace(rho0 @ E0) + 0.5 * np.trace(rho1 @ E1)
    assert success == pytest.approx(0.5 + trace_norm(rho0 - rho1) / 4)


def test_phase_basis():
    ell = 3
    states = np.array([phase_basis_state(T, ell) for T in range(1 << ell)])
    assert np.allclose(states @ states.T, np.eye(1 << ell))
    T = subset_from_index(5, 3)
    assert list(T) == [1, 0, 1] and subset_index(T) == 5
    assert phase_query_state(np.array([1, 1, 0]), T) == -1
    assert phase_query_state(np.array([1, 0, 1]), T) == 1


def test_walsh_hadamard():
    H = walsh_hadamard(3)
    assert np.allclose(H @ H, np.eye(8))
    assert H[0, 0] == pytest.approx(1 / math.sqrt(8))


def test_json_roundtrip():
    M = sym(3, 1)
    assert np.array_equal(from_json(to_json(M)), M)
    v = np.array([0.1, 1 / 3])
    assert np.array_equal(from_json(to_json(v)), v)
    with pytest.raises(PirError):
        from_json('{"dim": 2, "entries": [1, 2, 3]}')
