import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncfec.gf256 import (
    MUL_TABLE,
    FieldError,
    gf_add,
    gf_axpy,
    gf_inv,
    gf_matmul,
    gf_mul,
)
from oracles import clmul_mod, ref_combine

octet = st.integers(0, 255)


@pytest.mark.parametrize("a, b, expected", [(0, 0x5A, 0x5A), (0x5A, 0x5A, 0), (0x53, 0xCA, 0x99)])
def test_add_examples(a, b, expected):
    assert gf_add(a, b) == expected


@pytest.mark.parametrize("a, b, expected", [(0, 0x7F, 0), (1, 0x7F, 0x7F), (0x02, 0x80, 0x1B)])
def test_mul_examples(a, b, expected):
    assert gf_mul(a, b) == expected


def test_mul_table_matches_carryless_oracle_exhaustively():
    ref = np.array([[clmul_mod(a, b) for b in range(256)] for a in range(256)], dtype=np.uint8)
    assert np.array_equal(MUL_TABLE, ref)


def test_inverse_exhaustive():
    assert gf_inv(1) == 1
    for a in range(1, 256):
        assert gf_mul(a, gf_inv(a)) == 1


def test_zero_has_no_inverse():
    with pytest.raises(FieldError):
        gf_inv(0)


def test_add_axioms_exhaustive():
    a = np.arange(256)[:, None]
    b = np.arange(256)[None, :]
    s = a ^ b
    assert np.array_equal(s, s.T)
    assert np.all(s[np.arange(256), np.arange(256)] == 0)
    assert np.array_equal(s[0], np.arange(256))


def test_mul_commutative_and_identity_exhaustive():
    assert np.array_equal(MUL_TABLE, MUL_TABLE.T)
    assert np.array_equal(MUL_TABLE[1], np.arange(256))
    assert not MUL_TABLE[0].any()


@given(octet, octet, octet)
def test_mul_associative(a, b, c):
    assert gf_mul(gf_mul(a, b), c) == gf_mul(a, gf_mul(b, c))


@given(octet, octet, octet)
def test_distributive(a, b, c):
    assert gf_mul(a, gf_add(b, c)) == gf_add(gf_mul(a, b), gf_mul(a, c))


def test_axpy_examples():
    assert list(gf_axpy([0x01, 0x02], [0x03, 0x04], 0x02)) == [0x07, 0x0A]
    src = np.array([9, 8, 7], dtype=np.uint8)
    dst = np.array([1, 2, 3], dtype=np.uint8)
    assert list(gf_axpy(dst.copy(), src, 0)) == [1, 2, 3]
    assert list(gf_axpy(dst.copy(), src, 1)) == [1 ^ 9, 2 ^ 8, 3 ^ 7]


def test_axpy_in_place_on_arrays():
    dst = np.zeros(4, dtype=np.uint8)
    out = gf_axpy(dst, b"\x01\x02\x03\x04", 3)
    assert out is dst
    assert list(dst) == [clmul_mod(3, x) for x in (1, 2, 3, 4)]


def test_axpy_length_mismatch():
    with pytest.raises(ValueError):
        gf_axpy(b"\x00\x00", b"\x00", 5)


@given(st.lists(st.binary(min_size=6, max_size=6), min_size=1, max_size=5), st.data())
def test_matmul_matches_bytewise_oracle(symbols, data):
    coeffs = data.draw(st.lists(st.lists(octet, min_size=len(symbols), max_size=len(symbols)),
                                min_size=1, max_size=4))
    src = np.frombuffer(b"".join(symbols), dtype=np.uint8).reshape(len(symbols), -1)
    got = gf_matmul(np.array(coeffs, dtype=np.uint8), src)
    for row, c in zip(got, coeffs):
        assert row.tobytes() == ref_combine(c, symbols)
