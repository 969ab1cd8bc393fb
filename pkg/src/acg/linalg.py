"""Dense Hermitian matrix calculus and the plain-text matrix format.

Matrices are ordinary complex ``numpy`` arrays. Functions that expect a
Hermitian argument symmetrize it first via :func:`herm`, which absorbs
roundoff; every tolerance below is expressed in terms of the constants at
the top of this module.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

from .errors import EigenError, FormatError, NotPSDError, ShapeError

TOL_HERM = 1e-12
TOL_RECON = 1e-10  # per unit of dimension
TOL_STATE = 1e-10
SQRT_CLAMP = 1e-9


class SpectralDecomp(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns are eigenvectors


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def herm(m) -> np.ndarray:
    """Return ``(m + m*)/2`` as a complex array."""
    m = _square(m)
    return (m + m.conj().T) / 2


def is_hermitian(m, tol: float = TOL_HERM) -> bool:
    m = _square(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def eig_herm(m) -> SpectralDecomp:
    """Eigendecomposition of a Hermitian matrix with eigenvalues in descending order.

    Raises :class:`EigenError` if LAPACK does not converge or the
    reconstruction ``V diag(w) V*`` misses ``m`` by more than ``1e-10 * dim``
    (relative to ``max(1, ||m||)``).
    """
    m = herm(m)
    d = m.shape[0]
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigenError(float("nan"), f"eigh did not converge: {exc}") from exc
    w, v = w[::-1].copy(), v[:, ::-1].copy()
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    residual = float(np.linalg.norm((v * w) @ v.conj().T - m, 2)) if d else 0.0
    if residual > TOL_RECON * max(d, 1) * scale:
        raise EigenError(residual)
    return SpectralDecomp(w, v)


def _apply(decomp: SpectralDecomp, values) -> np.ndarray:
    v = decomp.eigenvectors
    return herm((v * values) @ v.conj().T)


def sqrt_psd(m) -> np.ndarray:
    """PSD square root; eigenvalues in ``[-1e-9, 0)`` are treated as zero."""
    dec = eig_herm(m)
    lam_min = dec.eigenvalues[-1] if len(dec.eigenvalues) else 0.0
    if lam_min < -SQRT_CLAMP:
        raise NotPSDError(lam_min)
    return _apply(dec, np.sqrt(np.clip(dec.eigenvalues, 0.0, None)))


def inv_sqrt_pd(m) -> np.ndarray:
    """Inverse square root of a positive definite matrix."""
    dec = eig_herm(m)
    if dec.eigenvalues[-1] <= 0:
        raise NotPSDError(dec.eigenvalues[-1], "matrix is not positive definite")
    return _apply(dec, 1.0 / np.sqrt(dec.eigenvalues))


def positive_part(m) -> np.ndarray:
    dec = eig_herm(m)
    return _apply(dec, np.clip(dec.eigenvalues, 0.0, None))


def op_norm(m) -> float:
    """Operator (spectral) norm: largest singular value."""
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0.0
    if is_hermitian(m):
        w = np.linalg.eigvalsh(herm(m))
        return float(np.max(np.abs(w)))
    return float(np.linalg.norm(m, 2))


def lambda_min(m) -> float:
    return float(np.linalg.eigvalsh(herm(m))[0])


def lambda_max(m) -> float:
    return float(np.linalg.eigvalsh(herm(m))[-1])


def psd_cone_distance(m) -> float:
    """Operator-norm distance from a Hermitian matrix to the cone ``{Z*Z}``.

    Closed form ``max(0, -lambda_min)``: the positive part attains it, and the
    Rayleigh quotient at a bottom eigenvector rules out anything closer.
    """
    return max(0.0, -lambda_min(m))


def commutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise ShapeError(f"commutator of {a.shape} and {b.shape}")
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class State:
    """A density matrix. Built through :meth:`from_rho` to get validation."""

    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_rho(cls, rho, tol: float = TOL_STATE) -> "State":
        rho = herm(rho)
        tr = np.trace(rho).real
        if abs(tr - 1) > tol:
            raise ValueError(f"state trace is {tr}, expected 1")
        lam = lambda_min(rho)
        if lam < -tol:
            raise NotPSDError(lam, f"state is not PSD: eigenvalue {lam:.3e}")
        rho.setflags(write=False)
        return cls(rho)

    @classmethod
    def pure(cls, vec) -> "State":
        v = np.asarray(vec, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls.from_rho(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "State":
        return cls.from_rho(np.eye(dim) / dim)


def state_expect(phi: State, m) -> complex:
    m = _square(m)
    if m.shape != phi.rho.shape:
        raise ShapeError(f"state of dim {phi.dim} applied to {m.shape} matrix")
    return complex(np.sum(phi.rho.T * m))


# ---------------------------------------------------------------------------
# Matrix text format
#
#   dim <d>
#   <d lines of d whitespace-separated entries>
#
# An entry is ``re``, ``re+imi``, ``re-imi`` or ``imi``; components are
# decimals (exponents allowed) or rationals ``p/q``.

_NUM = r"(?:\d+/\d+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
_ENTRY = re.compile(rf"^(?P<re>[+-]?{_NUM})(?:(?P<im>[+-]{_NUM}?)i)?$")
_IMAG = re.compile(rf"^(?P<im>[+-]?{_NUM}?)i$")


def _component(text: str) -> Fraction:
    if text in ("", "+"):
        return Fraction(1)
    if text == "-":
        return Fraction(-1)
    return Fraction(text)


def parse_complex(token: str) -> tuple[Fraction, Fraction]:
    """Parse one entry into exact ``(re, im)``; decimals are read exactly."""
    m = _ENTRY.match(token)
    if m:
        im = m.group("im")
        return Fraction(m.group("re")), (_component(im) if im is not None else Fraction(0))
    m = _IMAG.match(token)
    if m:
        return Fraction(0), _component(m.group("im"))
    raise ValueError(f"bad complex entry {token!r}")


def format_rational(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _format_real(x) -> str:
    if isinstance(x, Fraction):
        return format_rational(x)
    return repr(float(x))


def format_complex(re_part, im_part=0) -> str:
    s = _format_real(re_part)
    if im_part == 0:
        return s
    t = _format_real(im_part)
    return f"{s}{t if t.startswith('-') else '+' + t}i"


def format_matrix(m) -> str:
    """Serialize a float complex matrix (``repr`` precision)."""
    m = _square(m)
    rows = [" ".join(format_complex(z.real, z.imag) for z in row) for row in m]
    return "\n".join([f"dim {m.shape[0]}", *rows]) + "\n"


def format_matrix_exact(re_part, im_part) -> str:
    """Serialize a matrix given as two object arrays of ``Fraction``."""
    d = re_part.shape[0]
    rows = [
        " ".join(format_complex(re_part[i, j], im_part[i, j]) for j in range(d))
        for i in range(d)
    ]
    return "\n".join([f"dim {d}", *rows]) + "\n"


def read_matrix_exact(lines: Iterator[tuple[int, str]]) -> tuple[np.ndarray, np.ndarray]:
    """Consume a matrix from numbered, comment-stripped, non-empty lines.

    Returns exact ``(re, im)`` object arrays of ``Fraction``.
    """
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise FormatError("expected 'dim <d>', got end of input") from None
    parts = line.split()
    if len(parts) != 2 or parts[0] != "dim" or not parts[1].isdigit() or int(parts[1]) < 1:
        raise FormatError(f"expected 'dim <d>', got {line!r}", lineno)
    d = int(parts[1])
    re_part = np.empty((d, d), dtype=object)
    im_part = np.empty((d, d), dtype=object)
    for i in range(d):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise FormatError(f"matrix truncated after {i} of {d} rows") from None
        tokens = line.split()
        if len(tokens) != d:
            raise FormatError(f"expected {d} entries, got {len(tokens)}", lineno)
        for j, tok in enumerate(tokens):
            try:
                re_part[i, j], im_part[i, j] = parse_complex(tok)
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from None
    return re_part, im_part


def exact_to_complex(re_part, im_part) -> np.ndarray:
    return np.asarray(re_part, dtype=float) + 1j * np.asarray(im_part, dtype=float)


def read_matrix(lines: Iterator[tuple[int, str]]) -> np.ndarray:
    return exact_to_complex(*read_matrix_exact(lines))


def numbered_lines(text: str) -> Iterator[tuple[int, str]]:
    """Yield ``(lineno, stripped line)`` skipping blanks and ``#`` comments."""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def parse_matrix(text: str) -> np.ndarray:
    lines = numbered_lines(text)
    m = read_matrix(lines)
    extra = next(lines, None)
    if extra is not None:
        raise FormatError("trailing content after matrix", extra[0])
    return m
