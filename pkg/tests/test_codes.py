import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pirldc.bits import as_bits
from pirldc.codes import (
    Code,
    code_from_dict,
    code_to_dict,
    corrupt,
    corruption_count,
    load_code,
    local_decode_trial,
    make_decoder,
    pir_to_code,
    query_histogram,
    save_code,
    smoothness_profile,
)
from pirldc.errors import EnumerationTooLarge, PirError
from pirldc.schemes import get_scheme, run_protocol
from pirldc.superposed import BooleanFunction


@pytest.fixture(scope="module")
def square16():
    return pir_to_code(get_scheme("square", 16))


@pytest.fixture(scope="module")
def cube8():
    return pir_to_code(get_scheme("cube", 8))


@pytest.mark.parametrize("name,n,m,ell", [("square", 4, 8, 2), ("square", 16, 32, 4), ("cube", 8, 128, 6), ("cube", 27, 1024, 9)])
def test_code_shape(name, n, m, ell):
    code, dec = pir_to_code(get_scheme(name, n))
    assert (code.m, code.ell, dec.R) == (m, ell, m // 2)
    y = code.encode(np.zeros(n, dtype=np.uint8))
    assert y.shape == (m, ell) and not y.any()


def test_codeword_entries_are_server_answers(square16):
    code, dec = square16
    sch = get_scheme("square", 16)
    x = as_bits("0110100110010110")
    y = code.encode(x)
    tr = run_protocol(sch, sch.database(x), 9, as_bits("1101"))
    r = 0b1101
    j0, j1 = dec.queries[9, r]
    assert np.array_equal(y[j0], tr.a0) and np.array_equal(y[j1], tr.a1)


@pytest.mark.parametrize("fixture", ["square16", "cube8"])
def test_decoding_is_perfect(fixture, request, rng):
    code, dec = request.getfixturevalue(fixture)
    for _ in range(5):
        x = rng.integers(0, 2, code.n)
        y = code.encode(x)
        for i in range(code.n):
            assert (dec.decode_all(y, i) == x[i]).all()
            assert dec.success_probability(y, i, x[i]) == 1.0


@pytest.mark.parametrize("fixture", ["square16", "cube8"])
def test_c_star_is_two(fixture, request):
    _, dec = request.getfixturevalue(fixture)
    rep = smoothness_profile(dec)
    assert rep.c_star == pytest.approx(2.0)
    assert rep.c_star <= 3
    # every half of the codeword is hit exactly once per randomness value
    hist = query_histogram(dec)
    assert np.allclose(hist.sum(axis=1), 2.0)


def test_t_cap():
    with pytest.raises(EnumerationTooLarge):
        pir_to_code(get_scheme("square", 441))


def test_decoder_validation():
    f = BooleanFunction.parity(1)
    with pytest.raises(PirError, match="distinct"):
        make_decoder(1, 2, 1, 1, [[[0, 0]]], [[[[0], [0]]]], [f])
    with pytest.raises(PirError):
        make_decoder(1, 2, 1, 1, [[[0, 1]]], [[[[0], [0]]]], [f], probs=[0.5])


def test_corruption_count():
    assert corruption_count(1 / 16, 32) == 2
    assert corruption_count(0.1, 32) == 3
    with pytest.raises(PirError):
        corruption_count(1.5, 4)


@settings(max_examples=30)
@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_random_corruption_changes_exactly_floor_delta_m_entries(delta, seed):
    y = np.zeros((32, 4), dtype=np.uint8)
    rng = np.random.default_rng(seed)
    z = corrupt(y, delta, "random", rng)
    changed = int((z != y).any(axis=1).sum())
    assert changed == corruption_count(delta, 32)


def test_hot_corruption_kills_the_decoder(square16, rng):
    code, dec = square16
    x = rng.integers(0, 2, 16)
    rate = local_decode_trial(code, dec, x, 5, 0.5, "hot", 200, rng)
    assert rate <= 0.5
    with pytest.raises(PirError):
        corrupt(code.encode(x), 0.5, "hot")
    with pytest.raises(PirError):
        corrupt(code.encode(x), 0.5, "sideways", rng)


def test_random_corruption_union_bound(square16):
    code, dec = square16
    rng = np.random.default_rng(7)
    x = rng.integers(0, 2, 16)
    rate = local_decode_trial(code, dec, x, 3, 1 / 16, "random", 3000, rng)
    assert rate >= 1 - 2 * 2 * (1 / 16) - 0.03


def test_no_corruption_is_perfect(cube8, rng):
    code, dec = cube8
    x = rng.integers(0, 2, 8)
    assert local_decode_trial(code, dec, x, 2, 0.0, "random", 50, rng) == 1.0


def test_code_json_roundtrip(cube8, tmp_path):
    code, dec = cube8
    obj = code_to_dict(code, dec)
    assert obj["schema"] == 1 and obj["decoder"][0]["i"] == 1
    assert min(min(row["S0"]) for row in obj["decoder"]) == 1
    save_code(tmp_path / "code.json", code, dec)
    code2, dec2 = load_code(tmp_path / "code.json")
    assert np.array_equal(dec2.queries, dec.queries)
    assert np.array_equal(dec2.selections, dec.selections)
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0])
    assert np.array_equal(code2.encode(x), code.encode(x))
    # the file is plain JSON
    json.loads((tmp_path / "code.json").read_text())


def test_code_json_requires_source(cube8):
    obj = code_to_dict(*cube8)
    obj["source"] = {}
    with pytest.raises(PirError):
        code_from_dict(obj)


def test_custom_code():
    # the 2-bit Hadamard-like repetition: y = (x, x) read at positions 0 and 1
    code = Code(1, 2, 1, lambda x: np.array([[x[0]], [0]], dtype=np.uint8))
    dec = make_decoder(1, 2, 1, 1, [[[0, 1]]], [[[[0], [0]]]], [BooleanFunction.parity(1)])
    assert dec.decode(code.encode(np.array([1])), 0, 0) == 1
