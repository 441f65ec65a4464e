import math

import numpy as np
import pytest

from pirldc.bits import as_bits
from pirldc.bounds import low_weight_count
from pirldc.codes import Code, pir_to_code, smoothness_profile
from pirldc.errors import NotAPOVM
from pirldc.linalg import is_psd
from pirldc.reduction import (
    QuantumDecoder,
    default_copies,
    multi_copy_success,
    phi_states,
    quantum_decoder_from_classical,
    quantum_query_histogram,
    rac_multi_copy,
    rac_sieve,
    rac_state,
    sieve_alphas,
    sieve_povm_diagonal,
    v_state_direct,
)
from pirldc.schemes import get_scheme

INSTANCES = [("square", 4), ("cube", 8)]


@pytest.fixture(scope="module", params=INSTANCES, ids=lambda p: f"{p[0]}{p[1]}")
def derived(request):
    return pir_to_code(get_scheme(*request.param))


def predicted(p, b):
    hi = 0.5 + 0.5 ** (b + 1)
    return hi * p + (1 - hi) * (1 - p)


def flipped_code(code, positions):
    """The same code with some codeword entries complemented, so the classical decoder errs."""

    def enc(x):
        y = code.encode(x).copy()
        y[positions] ^= 1
        return y

    return Code(code.n, code.m, code.ell, enc, code.source)


def test_success_identity_every_r(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    qd = QuantumDecoder(dec, code, x)
    for i in range(code.n):
        for r in range(dec.R):
            run = qd.run(i, r)
            assert run.p == 1.0
            assert run.success == pytest.approx(predicted(run.p, dec.b), abs=1e-9)


def test_success_identity_with_wrong_classical_answers(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    bad = flipped_code(code, rng.choice(code.m, size=code.m // 4, replace=False))
    qd = QuantumDecoder(dec, bad, x)
    seen = set()
    for r in range(dec.R):
        run = qd.run(1, r)
        seen.add(run.p)
        assert run.success == pytest.approx(predicted(run.p, dec.b), abs=1e-9)
    assert seen == {0.0, 1.0}
    avg = qd.run_all(1)
    assert avg.success == pytest.approx(predicted(avg.p, dec.b), abs=1e-9)


def test_quantum_smoothness(derived):
    code, dec = derived
    c = smoothness_profile(dec).c_star
    for i in range(code.n):
        assert quantum_query_histogram(dec, i).max() <= c / code.m + 1e-12


def test_averaged_decoder(derived):
    code, dec = derived
    out = quantum_decoder_from_classical(dec, code, np.ones(code.n, dtype=np.uint8), 0)
    assert out.r is None
    assert out.success == pytest.approx(0.5 + 0.5 ** (dec.b + 1))


def test_sieve_stages(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    rac = rac_state(code, x, dec.b)
    assert np.linalg.norm(rac.vector) == pytest.approx(1.0)
    u = low_weight_count(code.ell, dec.b)
    c = smoothness_profile(dec).c_star
    for i in range(code.n):
        res = rac_sieve(rac, dec, i)
        assert res.stage1 == pytest.approx(2 / c, abs=1e-9)
        assert res.stage2 == pytest.approx(2**dec.b / u, abs=1e-9)
        assert res.success == pytest.approx(res.predicted_success, abs=1e-9)
        assert res.conditional_correct == pytest.approx(0.5 + 0.5 ** (dec.b + 1), abs=1e-9)


def test_sieve_with_loose_c(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    res = rac_sieve(rac_state(code, x, dec.b), dec, 0, c=3.0)
    assert res.stage1 == pytest.approx(2 / 3, abs=1e-9)


def test_povm_elements_are_positive(derived):
    code, dec = derived
    c = smoothness_profile(dec).c_star
    mu2 = sieve_povm_diagonal(dec, 0, c)
    # M^dagger M and I - M^dagger M are diagonal in |j>, so positivity is entrywise
    assert is_psd(np.diag(mu2)) and is_psd(np.diag(1 - mu2))
    assert sieve_alphas(dec, 0) @ sieve_alphas(dec, 0) == pytest.approx(1.0)
    with pytest.raises(NotAPOVM):
        sieve_povm_diagonal(dec, 0, 1.0)


def test_phi_states_are_normalized(derived):
    _, dec = derived
    phi = phi_states(dec, 2)
    norms = np.linalg.norm(phi, axis=1)
    assert np.allclose(norms[norms > 0], 1.0)


def test_v_state_matches_lift(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    rac = rac_state(code, x, dec.b)
    V = v_state_direct(rac, dec, 0)
    assert np.linalg.norm(V) == pytest.approx(1.0)
    # the rewrite sum_j alpha_j |phi_j>|j>|U_j> gives the same vector
    U = rac.blocks() * math.sqrt(rac.m)
    lifted = phi_states(dec, 0).T[:, :, None] * sieve_alphas(dec, 0)[None, :, None] * U[None]
    assert np.abs(lifted - V).max() < 1e-12


def test_square4_instance():
    code, dec = pir_to_code(get_scheme("square", 4))
    x = as_bits("0110")
    mc = rac_multi_copy(code, dec, x, 2)
    assert mc.sieve.success == pytest.approx(2 / 3)
    assert mc.sieve.conditional_correct == pytest.approx(0.75)
    assert mc.copies == default_copies(2, 3, 1) == 2
    # fail probability 1/3 per copy
    assert mc.overall == pytest.approx((1 - 1 / 9) * 0.75 + (1 / 9) * 0.5)
    assert rac_multi_copy(code, dec, x, 2, copies=1).overall == pytest.approx((2 / 3) * 0.75 + (1 / 3) * 0.5)


def test_multi_copy_formula():
    assert multi_copy_success(2 / 3, 0.75, 2) == pytest.approx((5 / 9) * 0.75 + (4 / 9) * 0.5)
    assert multi_copy_success(2 / 3, 0.75, 2) == pytest.approx(0.638888888888889)
    assert multi_copy_success(0.5, 0.9, 200) == pytest.approx(0.9)


def test_multi_copy_meets_the_random_access_guarantee(derived, rng):
    code, dec = derived
    x = rng.integers(0, 2, code.n)
    mc = rac_multi_copy(code, dec, x, 0)
    eps_q = mc.sieve.conditional_correct - 0.5
    assert (1 - mc.sieve.success) ** mc.copies <= 0.5
    assert mc.overall >= 0.5 + eps_q / 2 - 1e-12


def test_default_copies_rounds_up():
    assert default_copies(2, 42, 3) == math.ceil(2 * 42 / 16)
