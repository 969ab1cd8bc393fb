"""Deterministic enumeration of rational measurement pairs.

Cursor index ``i`` decodes to a triple ``(d, q, payload)``: dimension ``d``,
denominator bound ``q`` (a power of two) and a payload numbering one raw
tuple of Hermitian matrices with entries in ``{-q..q}/q`` (real and
imaginary parts). Payload ranges are dealt out in blocks: in round ``r`` the
``t``-th ``(d, q)`` pair (Cantor order) receives its block ``r - t``. Empty
blocks are skipped, so every triple gets exactly one index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from itertools import count, islice
from typing import Iterator

import numpy as np

from ..game import Game
from ..strategy import MeasurementFamily
from .exact import RationalMatrix, is_psd_exact, rational_sum

BLOCK = 256


def cantor_unpair(t: int) -> tuple[int, int]:
    w = (math.isqrt(8 * t + 1) - 1) // 2
    y = t - w * (w + 1) // 2
    return w - y, y


def pair_params(t: int) -> tuple[int, int]:
    """``(d, q)`` of the ``t``-th pair."""
    a, b = cantor_unpair(t)
    return a + 1, 2**b


def payload_count(d: int, q: int, n: int, k: int) -> int:
    return (2 * q + 1) ** (2 * n * k * d * d)


@dataclass(frozen=True)
class Slot:
    start: int  # first cursor index of this slot
    d: int
    q: int
    lo: int  # first payload
    size: int


def iter_slots(n: int, k: int, block: int = BLOCK) -> Iterator[Slot]:
    start = 0
    for r in count():
        for t in range(r + 1):
            d, q = pair_params(t)
            lo = (r - t) * block
            total = payload_count(d, q, n, k)
            if lo >= total:
                continue
            size = min(block, total - lo)
            yield Slot(start, d, q, lo, size)
            start += size


@dataclass(frozen=True)
class EnumerationCursor:
    index: int

    def decode(self, n: int, k: int) -> tuple[int, int, int]:
        """``(d, q, payload)`` for this index."""
        if self.index < 0:
            raise ValueError("cursor index must be nonnegative")
        for slot in iter_slots(n, k):
            if self.index < slot.start + slot.size:
                return slot.d, slot.q, slot.lo + self.index - slot.start
        raise AssertionError("unreachable")


def zigzag(t: int) -> int:
    """0, 1, -1, 2, -2, ... so small payloads mean small entries."""
    return (t + 1) // 2 if t % 2 else -(t // 2)


def _raw_povm(d: int, q: int, k: int, code: int) -> list[RationalMatrix]:
    base = 2 * q + 1
    out = []
    rest = code
    for _a in range(k):
        re = np.empty((d, d), dtype=object)
        im = np.empty((d, d), dtype=object)
        for i in range(d):
            rest, t = divmod(rest, base)
            re[i, i], im[i, i] = Fraction(zigzag(t), q), Fraction(0)
        for i in range(d):
            for j in range(i):
                rest, t = divmod(rest, base)
                rest, u = divmod(rest, base)
                re[i, j] = re[j, i] = Fraction(zigzag(t), q)
                im[i, j] = Fraction(zigzag(u), q)
                im[j, i] = -im[i, j]
        out.append(RationalMatrix(re, im))
    return out


def povm_codes(d: int, q: int, payload: int, n: int, k: int) -> list[int]:
    """Split a payload into ``2n`` per-POVM codes (Alice's ``x = 1..n``, then Bob's)."""
    width = (2 * q + 1) ** (k * d * d)
    codes = []
    for _ in range(2 * n):
        payload, c = divmod(payload, width)
        codes.append(c)
    return codes


def raw_matrices(d: int, q: int, payload: int, n: int, k: int) -> np.ndarray:
    """Decode a payload into ``(2, n, k)`` raw Hermitian :class:`RationalMatrix` tuples."""
    out = np.empty((2, n, k), dtype=object)
    for j, code in enumerate(povm_codes(d, q, payload, n, k)):
        for a, m in enumerate(_raw_povm(d, q, k, code)):
            out[j // n, j % n, a] = m
    return out


def is_exact_povm(effects) -> bool:
    d = effects[0].dim
    return rational_sum(effects) == RationalMatrix.identity(d) and all(
        is_psd_exact(e) for e in effects
    )


def _batched_apply(m: np.ndarray, fn) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    out = (v * fn(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return (out + np.conj(np.swapaxes(out, -1, -2))) / 2


def fast_round(xs: np.ndarray) -> np.ndarray:
    """Batched form of :func:`round_to_povm` on a ``(k, d, d)`` array, effects only."""
    k, d = xs.shape[0], xs.shape[-1]
    eye = np.eye(d)
    parts = _batched_apply(xs, lambda w: np.clip(w, 0.0, None))
    total = parts.sum(axis=0)
    eps = 1e-12 + max(0.0, 1.0 - float(np.linalg.eigvalsh(total)[0]))
    t = _batched_apply(total + eps * eye, lambda w: 1.0 / np.sqrt(w))
    eff = t @ (parts + (eps / k) * eye) @ t
    eff = (eff + np.conj(np.swapaxes(eff, -1, -2))) / 2
    return eff + (eye - eff.sum(axis=0)) / k


def exact_povm_from_raw(effects, q: int):
    """Exact POVM from a raw tuple, or None when re-rationalization breaks positivity.

    Exact POVMs pass through. Anything else is rounded in floating point,
    the first ``k - 1`` effects are put back on the grid with denominator
    ``2q`` and the last one is ``I`` minus their sum.
    """
    effects = list(effects)
    if is_exact_povm(effects):
        return effects
    d = effects[0].dim
    rounded = fast_round(np.array([e.to_complex() for e in effects]))
    head = [RationalMatrix.hermitian_from_complex(e, 2 * q) for e in rounded[:-1]]
    last = RationalMatrix.identity(d) - (rational_sum(head) if head else RationalMatrix.zeros(d))
    out = head + [last]
    if np.linalg.eigvalsh(np.array([e.to_complex() for e in out]))[:, 0].min() < -1e-9:
        return None
    if not all(is_psd_exact(e) for e in out):
        return None
    return out


@dataclass(frozen=True, eq=False)
class ExactPovm:
    effects: tuple  # RationalMatrix per outcome
    floats: np.ndarray  # (k, d, d) complex
    roots: np.ndarray  # (k, d, d) complex square roots


@lru_cache(maxsize=1 << 16)
def povm_for_code(d: int, q: int, k: int, code: int) -> ExactPovm | None:
    """Memoized exact POVM for one per-POVM code; payloads share codes heavily."""
    povm = exact_povm_from_raw(_raw_povm(d, q, k, code), q)
    if povm is None:
        return None
    floats = np.array([e.to_complex() for e in povm])
    roots = _batched_apply(floats, lambda w: np.sqrt(np.clip(w, 0.0, None)))
    return ExactPovm(tuple(povm), floats, roots)


@dataclass(frozen=True, eq=False)
class Candidate:
    index: int
    d: int
    q: int
    payload: int
    alice_povms: tuple  # ExactPovm per question
    bob_povms: tuple

    @property
    def alice(self) -> tuple:
        """``alice[x][a]`` as :class:`RationalMatrix`."""
        return tuple(p.effects for p in self.alice_povms)

    @property
    def bob(self) -> tuple:
        return tuple(p.effects for p in self.bob_povms)

    def arrays(self, player: str) -> tuple[np.ndarray, np.ndarray]:
        """Float effects and their roots, each of shape ``(n, k, d, d)``."""
        povms = self.alice_povms if player == "alice" else self.bob_povms
        return np.stack([p.floats for p in povms]), np.stack([p.roots for p in povms])

    @property
    def alice_family(self) -> MeasurementFamily:
        return MeasurementFamily.from_effects(self.arrays("alice")[0])

    @property
    def bob_family(self) -> MeasurementFamily:
        return MeasurementFamily.from_effects(self.arrays("bob")[0])


def build_candidate(g: Game, index: int, d: int, q: int, payload: int) -> Candidate | None:
    povms = []
    for code in povm_codes(d, q, payload, g.n, g.k):
        p = povm_for_code(d, q, g.k, code)
        if p is None:
            return None
        povms.append(p)
    return Candidate(index, d, q, payload, tuple(povms[: g.n]), tuple(povms[g.n :]))


def candidate_at(g: Game, index: int) -> Candidate | None:
    d, q, payload = EnumerationCursor(index).decode(g.n, g.k)
    return build_candidate(g, index, d, q, payload)


def enumerate_rational_pairs(g: Game, start: int, batch: int) -> list[Candidate]:
    """Candidates for cursor indices ``start .. start + batch - 1`` that survive rounding."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    out = []
    for i, d, q, payload in islice(iter_indices(g.n, g.k, start), batch):
        c = build_candidate(g, i, d, q, payload)
        if c is not None:
            out.append(c)
    return out


def iter_indices(n: int, k: int, start: int = 0) -> Iterator[tuple[int, int, int, int]]:
    """Yield ``(index, d, q, payload)`` in cursor order from ``start``."""
    for slot in iter_slots(n, k):
        end = slot.start + slot.size
        if end <= start:
            continue
        for i in range(max(start, slot.start), end):
            yield i, slot.d, slot.q, slot.lo + i - slot.start
