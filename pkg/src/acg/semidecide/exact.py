"""Exact arithmetic over the Gaussian rationals.

A :class:`RationalMatrix` keeps real and imaginary parts as ``numpy`` object
arrays of ``Fraction``; products go through ``@`` on object arrays, so every
result is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _frac_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = Fraction(v)
    return out


def round_to_grid(x: float, denom: int) -> Fraction:
    return Fraction(round(x * denom), denom)


@dataclass(frozen=True, eq=False)
class RationalMatrix:
    re: np.ndarray
    im: np.ndarray

    @classmethod
    def from_parts(cls, re, im=None) -> "RationalMatrix":
        re = _frac_array(re)
        im = _frac_array(np.zeros(re.shape, dtype=int) if im is None else im)
        if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
            raise ValueError(f"expected square parts of equal shape, got {re.shape}, {im.shape}")
        return cls(re, im)

    @classmethod
    def identity(cls, d: int) -> "RationalMatrix":
        return cls.from_parts(np.eye(d, dtype=int))

    @classmethod
    def zeros(cls, d: int) -> "RationalMatrix":
        return cls.from_parts(np.zeros((d, d), dtype=int))

    @classmethod
    def hermitian_from_complex(cls, m, denom: int) -> "RationalMatrix":
        """Round a complex matrix to the grid ``Z[i]/denom``, keeping it Hermitian.

        The upper triangle is rounded and mirrored; the diagonal is real.
        """
        m = np.asarray(m, dtype=complex)
        d = m.shape[0]
        re = np.empty((d, d), dtype=object)
        im = np.empty((d, d), dtype=object)
        for i in range(d):
            re[i, i] = round_to_grid(m[i, i].real, denom)
            im[i, i] = Fraction(0)
            for j in range(i + 1, d):
                z = (m[i, j] + np.conj(m[j, i])) / 2
                re[i, j] = re[j, i] = round_to_grid(z.real, denom)
                im[i, j] = round_to_grid(z.imag, denom)
                im[j, i] = -im[i, j]
        return cls(re, im)

    @property
    def dim(self) -> int:
        return self.re.shape[0]

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix(self.re - other.re, self.im - other.im)

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix(
            self.re @ other.re - self.im @ other.im, self.re @ other.im + self.im @ other.re
        )

    def scale(self, c) -> "RationalMatrix":
        c = Fraction(c)
        return RationalMatrix(self.re * c, self.im * c)

    def dag(self) -> "RationalMatrix":
        return RationalMatrix(self.re.T.copy(), -self.im.T)

    def __eq__(self, other):
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return bool(np.all(self.re == other.re) and np.all(self.im == other.im))

    __hash__ = None

    def is_hermitian(self) -> bool:
        return bool(np.all(self.re == self.re.T) and np.all(self.im == -self.im.T))

    def to_complex(self) -> np.ndarray:
        return self.re.astype(float) + 1j * self.im.astype(float)

    def frobenius_sq(self) -> Fraction:
        return sum((v * v for v in self.re.ravel()), Fraction(0)) + sum(
            (v * v for v in self.im.ravel()), Fraction(0)
        )

    def real_embedding(self) -> np.ndarray:
        """``[[Re, -Im], [Im, Re]]``; PSD exactly when the Hermitian matrix is."""
        top = np.concatenate([self.re, -self.im], axis=1)
        bottom = np.concatenate([self.im, self.re], axis=1)
        return np.concatenate([top, bottom], axis=0)


def rational_sum(mats) -> RationalMatrix:
    mats = list(mats)
    out = mats[0]
    for m in mats[1:]:
        out = out + m
    return out


def is_psd_exact(m: RationalMatrix) -> bool:
    """Exact positive semidefiniteness of a Hermitian Gaussian-rational matrix.

    Symmetric Gaussian elimination on the real embedding: a negative pivot, or
    a zero pivot with a nonzero row remainder, refutes positivity.
    """
    if not m.is_hermitian():
        return False
    a = m.real_embedding().copy()
    n = a.shape[0]
    for i in range(n):
        p = a[i, i]
        if p < 0:
            return False
        if p == 0:
            if any(a[i, j] != 0 for j in range(i + 1, n)):
                return False
            continue
        for j in range(i + 1, n):
            if a[j, i] == 0:
                continue
            f = a[j, i] / p
            for l in range(i + 1, n):
                a[j, l] -= f * a[i, l]
    return True


def sqrt_upper(x: Fraction) -> Fraction:
    """A rational ``r >= sqrt(x)``, tight to about 1e-12 relative."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("sqrt of a negative number")
    if x == 0:
        return Fraction(0)
    r = Fraction(math.sqrt(float(x))) * (1 + Fraction(1, 2**40))
    bump = Fraction(1, 2**60)
    while r * r < x:
        r += bump
        bump *= 2
    return r


def quartic_root_upper(x: Fraction) -> Fraction:
    return sqrt_upper(sqrt_upper(x))


def hermitian_form(m: RationalMatrix, v_re, v_im) -> Fraction:
    """``v* m v`` for Hermitian ``m`` (real by symmetry)."""
    mr = m.re @ v_re - m.im @ v_im
    mi = m.re @ v_im + m.im @ v_re
    return sum((a * b for a, b in zip(v_re, mr)), Fraction(0)) + sum(
        (a * b for a, b in zip(v_im, mi)), Fraction(0)
    )


def apply(m: RationalMatrix, v_re, v_im):
    return m.re @ v_re - m.im @ v_im, m.re @ v_im + m.im @ v_re


def norm_sq(v_re, v_im) -> Fraction:
    return sum((a * a for a in v_re), Fraction(0)) + sum((b * b for b in v_im), Fraction(0))
