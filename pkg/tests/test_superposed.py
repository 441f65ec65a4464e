import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pirldc.errors import PirError
from pirldc.linalg import unitarity_error
from pirldc.superposed import (
    BooleanFunction,
    bias_ceiling,
    build_decoding_unitary,
    gram_matrix,
    parity_distinguishability,
    qdecode,
    superposed_success_prob,
)


def test_hex_convention():
    xor = BooleanFunction.from_hex("6", 1)
    assert xor == BooleanFunction.parity(1)
    assert [xor(w, a) for w in (0, 1) for a in (0, 1)] == [0, 1, 1, 0]
    assert BooleanFunction.from_hex("8", 1).table == (0, 0, 0, 1)  # AND
    assert xor.to_hex() == "6"
    with pytest.raises(PirError):
        BooleanFunction.from_hex("1ffff", 2)
    with pytest.raises(PirError):
        BooleanFunction.from_hex("zz", 1)
    with pytest.raises(PirError):
        BooleanFunction(1, (0, 1))


def test_bit_string_arguments():
    f = BooleanFunction.parity(2)
    assert f(np.array([1, 0]), np.array([1, 1])) == 1


@pytest.mark.parametrize("value", range(16))
def test_b1_every_function_every_input(value):
    f = BooleanFunction.from_int(value, 1)
    for a0 in range(2):
        for a1 in range(2):
            assert superposed_success_prob(f, a0, a1) == pytest.approx(0.75, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(1, 3), st.data())
def test_success_is_half_plus_2_to_minus_b_plus_1(b, data):
    f = BooleanFunction.from_int(data.draw(st.integers(0, (1 << (1 << (2 * b))) - 1)), b)
    a0 = data.draw(st.integers(0, (1 << b) - 1))
    a1 = data.draw(st.integers(0, (1 << b) - 1))
    assert superposed_success_prob(f, a0, a1) == pytest.approx(0.5 + 0.5 ** (b + 1), abs=1e-10)


@settings(max_examples=50)
@given(st.integers(1, 3), st.data())
def test_unitary_construction(b, data):
    f = BooleanFunction.from_int(data.draw(st.integers(0, (1 << (1 << (2 * b))) - 1)), b)
    dec = build_decoding_unitary(f)
    assert unitarity_error(dec.U) <= 1e-9
    k = 1 << b
    S = f.signs()
    for a in range(k):
        assert np.array_equal(dec.U[0::2, 2 * a], S[:, a] / k)
    # junk states make the prescribed columns orthonormal
    assert np.allclose(dec.junk_states.T @ dec.junk_states, np.eye(k) - gram_matrix(f), atol=1e-12)


def test_gram_matrix_oracle():
    f = BooleanFunction.from_hex("8", 1)
    # columns of (-1)^AND: a=0 -> (1, 1), a=1 -> (1, -1)
    assert np.allclose(gram_matrix(f), [[0.5, 0.0], [0.0, 0.5]])


@pytest.mark.parametrize("b", [1, 2, 3, 4])
def test_parity_distinguishability(b):
    assert parity_distinguishability(b) == pytest.approx(2 / 2**b, abs=1e-12)


@pytest.mark.parametrize("b", [1, 2, 3])
def test_achieved_bias_meets_the_ceiling_for_parity(b):
    f = BooleanFunction.parity(b)
    ceiling = bias_ceiling(f)
    assert ceiling == pytest.approx(parity_distinguishability(b) / 4, abs=1e-12)
    assert qdecode(f, 0, 1).bias == pytest.approx(ceiling, abs=1e-12)


def test_constant_function_ceiling_is_half():
    # a constant is guessed with certainty; the ceiling reflects that
    assert bias_ceiling(BooleanFunction.constant(1, 1)) == pytest.approx(0.5)


def test_qdecode_report():
    d = qdecode(BooleanFunction.from_hex("6", 1), 0, 1).to_dict()
    assert d["prob_correct"] == pytest.approx(0.75)
    assert d["f_value"] == 1 and d["a1"] == "1"
    assert math.isclose(d["bias"], 0.25, abs_tol=1e-12)
