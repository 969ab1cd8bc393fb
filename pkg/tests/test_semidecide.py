from collections import Counter
from fractions import Fraction
from itertools import islice

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acg.errors import FormatError
from acg.game import constant_game, make_chsh
from acg.linalg import op_norm, sqrt_psd
from acg.semidecide import (
    EnumerationCursor,
    RationalMatrix,
    candidate_at,
    certify_norm,
    chsh_family,
    enumerate_rational_pairs,
    exact_bound,
    family_by_name,
    is_exact_povm,
    is_psd_exact,
    parse_witness,
    power_iteration,
    rational_root,
    replay,
    semidecide,
    serialize_witness,
    toy_language_family,
    verify_witness,
)
from acg.semidecide.certify import rational_vector
from acg.semidecide.enumeration import (
    cantor_unpair,
    iter_indices,
    iter_slots,
    pair_params,
    payload_count,
    raw_matrices,
    zigzag,
)
from acg.semidecide.exact import quartic_root_upper, sqrt_upper
from acg.semidecide.harness import parity
from acg.strategy import MeasurementFamily, game_operator, tsirelson_strategy, uniform_family

CHSH_FIRST_ACCEPT = 82


# ---------------------------------------------------------------------------
# exact arithmetic


def _rational_herm(rng, d, denom=8):
    m = rng.integers(-denom, denom + 1, (d, d)) + 1j * rng.integers(-denom, denom + 1, (d, d))
    return RationalMatrix.hermitian_from_complex((m + m.conj().T) / (2 * denom), 2 * denom)


def test_rational_matrix_algebra():
    a = RationalMatrix.from_parts([[1, 2], [3, 4]], [[0, 1], [-1, 0]])
    eye = RationalMatrix.identity(2)
    assert a @ eye == a
    assert (a - a) == RationalMatrix.zeros(2)
    assert a.scale(Fraction(1, 2)).re[0, 1] == 1
    assert a.dag().dag() == a
    assert np.allclose((a @ a.dag()).to_complex(), a.to_complex() @ a.to_complex().conj().T)


def test_hermitian_from_complex_is_hermitian():
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert RationalMatrix.hermitian_from_complex(z, 64).is_hermitian()


def test_is_psd_exact_agrees_with_eigenvalues():
    rng = np.random.default_rng(1)
    seen = Counter()
    for _ in range(200):
        m = _rational_herm(rng, int(rng.integers(1, 4)))
        lam = np.linalg.eigvalsh(m.to_complex())[0]
        if abs(lam) < 1e-9:
            continue
        seen[lam > 0] += 1
        assert is_psd_exact(m) == (lam > 0)
    assert seen[True] and seen[False]


def test_is_psd_exact_singular_cases():
    assert is_psd_exact(RationalMatrix.from_parts([[1, 1], [1, 1]]))
    assert is_psd_exact(RationalMatrix.zeros(3))
    assert not is_psd_exact(RationalMatrix.from_parts([[0, 1], [1, 0]]))
    assert not is_psd_exact(RationalMatrix.from_parts([[1, 0], [0, 0]], [[0, 1], [-1, 0]]))


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=0, max_value=10**6))
def test_sqrt_upper_is_upper(x):
    r = sqrt_upper(x)
    assert r * r >= x
    assert float(r) <= float(x) ** 0.5 * (1 + 1e-9) + 1e-15
    q = quartic_root_upper(x)
    assert q**4 >= x


def test_rational_root_error_is_certified():
    rng = np.random.default_rng(2)
    for _ in range(10):
        e = [RationalMatrix.hermitian_from_complex(x, 1024) for x in _psd_samples(rng)]
        for eff in e:
            if not is_psd_exact(eff):
                continue
            r = rational_root(eff)
            assert is_psd_exact(r.root)
            true = sqrt_psd(eff.to_complex())
            assert op_norm(r.root.to_complex() - true) <= float(r.error) + 1e-12


def _psd_samples(rng):
    z = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    return [x.conj().T @ x / 10 for x in z]


# ---------------------------------------------------------------------------
# certification


def test_certify_uniform_is_half():
    u = uniform_family(2, 2, 3)
    cert = certify_norm(make_chsh(), u, u)
    assert cert.bound == pytest.approx(0.5, abs=1e-9)
    assert cert.converged


def test_certify_zero_game():
    u = uniform_family(2, 2, 2)
    assert certify_norm(constant_game(2, 2, 0), u, u).bound == 0


def test_power_iteration_brackets_top_eigenvalue():
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        m = z.conj().T @ z
        m /= np.linalg.eigvalsh(m)[-1]
        cert = power_iteration(m, residual_tol=1e-3)
        top = np.linalg.eigvalsh(m)[-1]
        assert cert.bound <= top + 1e-12
        if cert.converged:
            assert top - cert.bound <= cert.residual + 1e-12


def _rational_family(fam, denom=2**20, mix=1e-4):
    """Nudge toward ``I/k`` so projections gain slack, round, then complete the last effect."""
    out = []
    for p in fam.povms:
        eff = (1 - mix) * p.effects + mix * np.eye(p.dim) / p.k
        head = [RationalMatrix.hermitian_from_complex(e, denom) for e in eff[:-1]]
        last = RationalMatrix.identity(p.dim)
        for h in head:
            last = last - h
        row = tuple(head + [last])
        assert is_exact_povm(row)
        out.append(row)
    return tuple(out)


def test_near_tsirelson_rational_pair_certifies_above_three_quarters():
    g = make_chsh()
    s = tsirelson_strategy()
    alice, bob = _rational_family(s.alice), _rational_family(s.bob)
    fa = MeasurementFamily.from_effects([[e.to_complex() for e in row] for row in alice])
    fb = MeasurementFamily.from_effects([[e.to_complex() for e in row] for row in bob])
    cert = certify_norm(g, fa, fb)
    assert cert.bound > 0.75
    bound = exact_bound(g, alice, bob, *rational_vector(cert.vector))
    assert bound > Fraction(3, 4)
    assert float(bound) <= np.linalg.eigvalsh(game_operator(g, fa, fb))[-1] + 1e-12


def test_exact_bound_below_float_rayleigh():
    g = make_chsh()
    c = candidate_at(g, CHSH_FIRST_ACCEPT)
    op = game_operator(g, c.alice_family, c.bob_family)
    v_re, v_im = rational_vector(np.ones(c.d))
    v = v_re.astype(float) + 1j * v_im.astype(float)
    rq = (v.conj() @ op @ v).real / (v.conj() @ v).real
    b = exact_bound(g, c.alice, c.bob, v_re, v_im)
    assert float(b) <= rq
    assert rq - float(b) < 1e-3


# ---------------------------------------------------------------------------
# enumeration


def test_cantor_unpair_bijection():
    seen = {cantor_unpair(t) for t in range(5000)}
    assert len(seen) == 5000
    assert cantor_unpair(0) == (0, 0)
    assert pair_params(0) == (1, 1)
    assert {pair_params(t) for t in range(3)} == {(1, 1), (2, 1), (1, 2)}


def test_zigzag_order():
    assert [zigzag(t) for t in range(5)] == [0, 1, -1, 2, -2]


def test_payload_count():
    assert payload_count(1, 1, 2, 2) == 3**8
    assert payload_count(2, 2, 1, 2) == 5 ** (2 * 2 * 4)


def test_slots_are_contiguous_and_disjoint():
    pos = 0
    seen = set()
    for slot in islice(iter_slots(2, 2), 300):
        assert slot.start == pos
        assert 0 < slot.size <= 256
        key = (slot.d, slot.q, slot.lo)
        assert key not in seen
        seen.add(key)
        pos += slot.size


def test_small_slot_is_exhausted_and_skipped():
    # n = k = 1, d = q = 1: 3^2 = 9 payloads, then that pair contributes nothing more
    triples = [(d, q, p) for _, d, q, p in islice(iter_indices(1, 1), 4000)]
    assert len(set(triples)) == len(triples)
    assert sorted(p for d, q, p in triples if (d, q) == (1, 1)) == list(range(9))


def test_cursor_decode_matches_iteration():
    for i, d, q, p in islice(iter_indices(2, 2, 1000), 50):
        assert EnumerationCursor(i).decode(2, 2) == (d, q, p)
    with pytest.raises(ValueError):
        EnumerationCursor(-1).decode(2, 2)


def test_first_indices_cover_small_dims_and_denominators():
    hit = Counter((d, q) for _, d, q, _ in islice(iter_indices(2, 2), 10**4))
    assert {1, 2} <= {d for d, _ in hit}
    assert {1, 2, 4} <= {q for _, q in hit}


def test_raw_matrices_on_grid_and_hermitian():
    raw = raw_matrices(2, 2, 123456789, 2, 2)
    for m in raw.ravel():
        assert m.is_hermitian()
        for v in np.concatenate([m.re.ravel(), m.im.ravel()]):
            assert abs(v) <= 1 and (v * 2).denominator == 1


def test_candidates_are_exact_povms():
    g = make_chsh()
    cands = enumerate_rational_pairs(g, 0, 40) + enumerate_rational_pairs(g, 5000, 20)
    assert cands
    for c in cands:
        for row in c.alice + c.bob:
            assert is_exact_povm(row)
    with pytest.raises(ValueError):
        enumerate_rational_pairs(g, 0, 0)


def test_enumeration_is_deterministic():
    g = make_chsh()
    a = [c.index for c in enumerate_rational_pairs(g, 300, 30)]
    b = [c.index for c in enumerate_rational_pairs(g, 300, 30)]
    assert a == b


# ---------------------------------------------------------------------------
# harness


def test_toy_family_examples():
    fam = toy_language_family()
    assert fam.game("01").D.all()
    assert not fam.game("1").D.any()
    assert fam.delta("10110") == Fraction(1, 10)
    assert parity("") == 0
    with pytest.raises(ValueError):
        fam.game("012")


def test_family_lookup():
    assert family_by_name("chsh").name == "chsh"
    assert family_by_name("toy", Fraction(1, 3)).delta("0") == Fraction(1, 3)
    with pytest.raises(ValueError):
        family_by_name("nope")


def test_toy_member_accepts_quickly():
    fam = toy_language_family()
    out = semidecide(fam, "01", 10)
    assert out.accepted
    assert float(out.witness.bound) > 0.99
    assert verify_witness(out.witness, fam, "01")


def test_toy_nonmember_times_out():
    out = semidecide(toy_language_family(), "1", 2000)
    assert not out.accepted and out.label == "timeout"
    assert out.examined == 2000


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        semidecide(toy_language_family(), "1", 0)


@pytest.fixture(scope="module")
def chsh_outcome():
    return semidecide(chsh_family(), "", CHSH_FIRST_ACCEPT + 1)


def test_chsh_accepts_at_pinned_index(chsh_outcome):
    assert chsh_outcome.accepted
    w = chsh_outcome.witness
    assert w.index == CHSH_FIRST_ACCEPT
    assert w.defect_op_max == 0
    assert w.bound > Fraction(1, 2)


def test_chsh_one_short_times_out():
    assert not semidecide(chsh_family(), "", CHSH_FIRST_ACCEPT).accepted


def test_witness_verifies_and_replays(chsh_outcome):
    w = chsh_outcome.witness
    fam = chsh_family()
    res = verify_witness(w, fam, "")
    assert res.ok, res.trail
    again = replay(fam, "", w.index)
    assert again is not None and again.same_as(w)
    assert replay(fam, "", 0) is None


def test_witness_file_roundtrip(chsh_outcome):
    w = chsh_outcome.witness
    text = serialize_witness(w)
    back = parse_witness(text)
    assert serialize_witness(back) == text
    assert verify_witness(back, chsh_family(), "")


def test_perturbed_witness_fails(chsh_outcome):
    w = parse_witness(serialize_witness(chsh_outcome.witness))
    e = w.alice[0][0]
    bumped = RationalMatrix(e.re + Fraction(3, 10), e.im)
    w.alice = ((bumped,) + w.alice[0][1:],) + w.alice[1:]
    assert not verify_witness(w, chsh_family(), "")


def test_witness_for_other_input_fails(chsh_outcome):
    assert not verify_witness(chsh_outcome.witness, toy_language_family(), "0")


def test_tampered_bound_fails(chsh_outcome):
    w = parse_witness(serialize_witness(chsh_outcome.witness))
    w.bound = Fraction(9, 10)
    assert not verify_witness(w, chsh_family(), "")


@pytest.mark.parametrize("text", ["", "witness\nfamily chsh\n", "witness\nfamily chsh\nz -\nindex x\n"])
def test_parse_witness_errors(text):
    with pytest.raises(FormatError):
        parse_witness(text)


def test_threads_do_not_change_the_outcome(monkeypatch, chsh_outcome):
    monkeypatch.setenv("ACG_THREADS", "4")
    out = semidecide(chsh_family(), "", CHSH_FIRST_ACCEPT + 1)
    assert out.witness.same_as(chsh_outcome.witness)
