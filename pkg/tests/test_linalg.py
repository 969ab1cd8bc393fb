from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acg.errors import FormatError, NotPSDError, ShapeError
from acg.linalg import (
    State,
    commutator,
    eig_herm,
    format_complex,
    format_matrix,
    herm,
    inv_sqrt_pd,
    op_norm,
    parse_complex,
    parse_matrix,
    positive_part,
    psd_cone_distance,
    sqrt_psd,
    state_expect,
)
from acg.strategy import PAULI_X, PAULI_Z
from _util import random_herm


def test_eig_diagonal():
    dec = eig_herm(np.diag([1.0, 3.0]))
    assert np.allclose(dec.eigenvalues, [3, 1])
    assert np.allclose(np.abs(dec.eigenvectors), [[0, 1], [1, 0]])


def test_eig_zero_matrix():
    assert np.allclose(eig_herm(np.zeros((4, 4))).eigenvalues, 0)


def test_eig_reconstructs_random_input():
    rng = np.random.default_rng(3)
    for d in range(1, 7):
        m = random_herm(rng, d)
        dec = eig_herm(m)
        v, w = dec.eigenvectors, dec.eigenvalues
        assert np.all(np.diff(w) <= 0)
        assert np.allclose((v * w) @ v.conj().T, m, atol=1e-10)
        assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)


def test_non_square_input_is_rejected():
    with pytest.raises(ShapeError):
        eig_herm(np.zeros((2, 3)))


@pytest.mark.parametrize("m, root", [
    (np.diag([4.0, 9.0]), np.diag([2.0, 3.0])),
    (np.eye(3), np.eye(3)),
])
def test_sqrt_examples(m, root):
    assert np.allclose(sqrt_psd(m), root)


def test_sqrt_clamps_tiny_negative_and_rejects_real_negative():
    assert np.allclose(sqrt_psd(np.diag([1.0, -1e-12])), np.diag([1.0, 0.0]))
    with pytest.raises(NotPSDError) as info:
        sqrt_psd(np.diag([1.0, -1e-3]))
    assert info.value.eigenvalue == pytest.approx(-1e-3)


def test_sqrt_squares_back():
    rng = np.random.default_rng(5)
    for d in (2, 3, 5):
        z = random_herm(rng, d)
        p = z @ z
        r = sqrt_psd(p)
        assert np.allclose(r @ r, p, atol=1e-9)
        assert np.linalg.eigvalsh(r)[0] >= -1e-12


def test_inv_sqrt():
    m = np.diag([4.0, 0.25])
    assert np.allclose(inv_sqrt_pd(m), np.diag([0.5, 2.0]))
    with pytest.raises(NotPSDError):
        inv_sqrt_pd(np.diag([1.0, 0.0]))


def test_positive_part_examples():
    assert np.allclose(positive_part(np.diag([1.0, -2.0])), np.diag([1.0, 0.0]))
    rng = np.random.default_rng(1)
    z = random_herm(rng, 3)
    p = z @ z
    assert np.allclose(positive_part(p), p, atol=1e-10)
    assert np.allclose(positive_part(-p), 0, atol=1e-10)


def test_op_norm_examples():
    assert op_norm(np.diag([1.0, -3.0])) == pytest.approx(3)
    assert op_norm(np.zeros((3, 3))) == 0
    assert op_norm(np.array([[0, 1], [0, 0]])) == pytest.approx(1)


def test_psd_cone_distance_examples():
    assert psd_cone_distance(np.diag([1.0, -0.5])) == pytest.approx(0.5)
    assert psd_cone_distance(-np.eye(2)) == pytest.approx(1)
    assert psd_cone_distance(np.diag([2.0, 0.0])) == 0


def test_psd_cone_distance_random_search_oracle():
    """No random Z*Z gets closer than the closed form; the positive part attains it."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = random_herm(rng, 2)
        closed = psd_cone_distance(m)
        z = rng.standard_normal((2000, 2, 2)) + 1j * rng.standard_normal((2000, 2, 2))
        cands = np.conj(np.swapaxes(z, 1, 2)) @ z
        best = np.linalg.norm(cands - m, ord=2, axis=(1, 2)).min()
        assert best >= closed - 1e-6
        assert op_norm(positive_part(m) - m) == pytest.approx(closed, abs=1e-12)


def test_commutator_examples():
    assert np.allclose(commutator(np.diag([1.0, 2.0]), np.diag([3.0, 4.0])), 0)
    assert op_norm(commutator(PAULI_X, PAULI_Z)) == pytest.approx(2)
    a = random_herm(np.random.default_rng(2), 3)
    assert np.allclose(commutator(a, a), 0)


def test_state_expect_examples():
    m = np.arange(9, dtype=float).reshape(3, 3)
    assert state_expect(State.maximally_mixed(3), m) == pytest.approx(np.trace(m) / 3)
    assert state_expect(State.pure([1, 0]), np.diag([5.0, 7.0])) == pytest.approx(5)
    rho = State.pure([1, 1j, 0])
    assert state_expect(rho, np.eye(3)) == pytest.approx(1)
    with pytest.raises(ShapeError):
        state_expect(rho, np.eye(2))


def test_state_rejects_bad_trace_and_negative():
    with pytest.raises(ValueError):
        State.from_rho(np.eye(2))
    with pytest.raises(NotPSDError):
        State.from_rho(np.diag([1.5, -0.5]))


@pytest.mark.parametrize("tok, expected", [
    ("1/2", (Fraction(1, 2), Fraction(0))),
    ("-3", (Fraction(-3), Fraction(0))),
    ("1/2-1/3i", (Fraction(1, 2), Fraction(-1, 3))),
    ("i", (Fraction(0), Fraction(1))),
    ("-2.5i", (Fraction(0), Fraction(-5, 2))),
    ("1e-3+2i", (Fraction(1, 1000), Fraction(2))),
])
def test_parse_complex(tok, expected):
    assert parse_complex(tok) == expected


@pytest.mark.parametrize("tok", ["", "abc", "1//2", "1+", "2j"])
def test_parse_complex_rejects(tok):
    with pytest.raises(ValueError):
        parse_complex(tok)


def test_matrix_text_roundtrip():
    rng = np.random.default_rng(8)
    m = random_herm(rng, 3) + 0.1j * np.eye(3)
    assert np.array_equal(parse_matrix(format_matrix(m)), m)


def test_matrix_text_reports_line():
    with pytest.raises(FormatError) as info:
        parse_matrix("dim 2\n1 0\n0 x\n")
    assert info.value.lineno == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(-10**6, 10**6), st.integers(1, 10**6), st.integers(-10**6, 10**6), st.integers(1, 10**6))
def test_format_complex_roundtrip(a, b, c, d):
    z = (Fraction(a, b), Fraction(c, d))
    assert parse_complex(format_complex(*z)) == z


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_sqrt_property(d, seed):
    rng = np.random.default_rng(seed)
    z = random_herm(rng, d)
    p = herm(z @ z)
    r = sqrt_psd(p)
    assert np.allclose(r @ r, p, atol=1e-8 * max(1.0, op_norm(p)))
