"""Norm lower bounds for game operators: float power iteration and exact certificates."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..game import Game
from ..linalg import sqrt_psd
from ..strategy import MeasurementFamily, game_operator
from .exact import (
    RationalMatrix,
    apply,
    hermitian_form,
    is_psd_exact,
    norm_sq,
    quartic_root_upper,
    round_to_grid,
)

ROOT_DENOM = 2**32
VECTOR_DENOM = 2**24


@dataclass
class NormCertificate:
    bound: float  # Rayleigh quotient, a lower bound on ||G|| because G >= 0
    vector: np.ndarray
    residual: float
    converged: bool
    iterations: int


def power_iteration(op: np.ndarray, residual_tol: float = 1 / 8, max_iters: int = 500,
                    seed: int = 0, start: np.ndarray | None = None) -> NormCertificate:
    """Power iteration on a PSD matrix from ``start`` or a seeded pseudo-random vector."""
    d = op.shape[0]
    if start is None:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    else:
        v = np.asarray(start, dtype=complex).copy()
    v /= np.linalg.norm(v)
    rq, res = 0.0, np.inf
    for it in range(1, max_iters + 1):
        w = op @ v
        rq = float(np.vdot(v, w).real)
        res = float(np.linalg.norm(w - rq * v))
        if res <= residual_tol:
            return NormCertificate(rq, v, res, True, it)
        v = w / np.linalg.norm(w)
    return NormCertificate(rq, v, res, False, max_iters)


def top_eigenvector(op: np.ndarray) -> np.ndarray:
    return np.linalg.eigh((op + op.conj().T) / 2)[1][:, -1]


def certify_norm(g: Game, a: MeasurementFamily, b: MeasurementFamily,
                 residual_tol: float = 1 / 8, max_iters: int = 500) -> NormCertificate:
    """Lower bound on ``||G(A, B)||`` with the vector attaining it.

    The iteration starts at a floating-point top eigenvector, so the bound
    is close to ``lambda_max`` rather than to whichever eigenvalue a random
    start drifts toward first. When converged, ``[bound, bound + residual]``
    contains an eigenvalue and is narrower than 1/4.
    """
    op = game_operator(g, a, b)
    return power_iteration(op, residual_tol, max_iters, start=top_eigenvector(op))


def rational_vector(v: np.ndarray, denom: int = VECTOR_DENOM):
    v = np.asarray(v, dtype=complex)
    v = v / np.max(np.abs(v))
    re = np.array([round_to_grid(z.real, denom) for z in v], dtype=object)
    im = np.array([round_to_grid(z.imag, denom) for z in v], dtype=object)
    if all(x == 0 for x in re) and all(x == 0 for x in im):
        re[0] = Fraction(1)
    return re, im


@dataclass
class RootApprox:
    root: RationalMatrix  # PSD rational approximation of the square root
    error: Fraction  # >= ||root - sqrt(effect)||


def rational_root(effect: RationalMatrix, denom: int = ROOT_DENOM) -> RootApprox:
    """Rational PSD ``S`` with a certified bound on ``||S - sqrt(E)||``.

    Uses ``||sqrt(X) - sqrt(Y)|| <= ||X - Y||^(1/2)`` for PSD ``X, Y`` with
    ``X = S^2`` and ``||.|| <= ||.||_F``.
    """
    s = RationalMatrix.hermitian_from_complex(sqrt_psd(effect.to_complex()), denom)
    shift = Fraction(1, denom)
    eye = RationalMatrix.identity(effect.dim)
    while not is_psd_exact(s):
        s = s + eye.scale(shift)
        shift *= 2
    diff = s @ s - effect
    return RootApprox(s, quartic_root_upper(diff.frobenius_sq()))


def exact_coefficients(g: Game) -> dict[tuple[int, int, int, int], Fraction]:
    out = {}
    for (x, y, a, b), v in np.ndenumerate(g.D):
        if v and g.pi[x, y] != 0:
            out[(x, y, a, b)] = Fraction(g.pi[x, y]) * int(v)
    return out


def exact_bound(g: Game, alice, bob, v_re, v_im) -> Fraction:
    """Exact rational lower bound on ``v* G(A, B) v / v* v``.

    ``alice[x][a]`` and ``bob[y][b]`` are :class:`RationalMatrix` effects of
    exact POVMs (so every effect and its root has norm at most 1). Square
    roots are replaced by certified rational approximations and their error
    is subtracted in full.
    """
    roots_a = [[rational_root(e) for e in row] for row in alice]
    roots_b = [[rational_root(e) for e in row] for row in bob]
    nv = norm_sq(v_re, v_im)
    sa = [[apply(r.root, v_re, v_im) for r in row] for row in roots_a]
    sb = [[apply(r.root, v_re, v_im) for r in row] for row in roots_b]
    total = Fraction(0)
    err = Fraction(0)
    for (x, y, a, b), c in exact_coefficients(g).items():
        wa, wb = sa[x][a], sb[y][b]
        total += c * (hermitian_form(bob[y][b], *wa) + hermitian_form(alice[x][a], *wb)) / 2
        ea, eb = roots_a[x][a].error, roots_b[y][b].error
        err += c * ((2 * ea + ea * ea) + (2 * eb + eb * eb)) / 2
    return total / nv - err
