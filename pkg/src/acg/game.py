"""Nonlocal games: data model, canonical games, validation and file format.

Indices are 1-based in the text format and in :meth:`Game.predicate` /
:meth:`Game.weight`; the backing arrays are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import FormatError
from .linalg import format_rational, numbered_lines


@dataclass(frozen=True, eq=False)
class Game:
    """A game ``(pi, D)`` with ``n`` questions and ``k`` answers per player.

    ``pi`` is an ``(n, n)`` object array of ``Fraction`` over question pairs;
    ``D`` is an ``(n, n, k, k)`` integer array of 0/1 predicate values.
    """

    n: int
    k: int
    pi: np.ndarray
    D: np.ndarray
    name: str = "game"

    def weight(self, x: int, y: int) -> Fraction:
        return self.pi[x - 1, y - 1]

    def predicate(self, x: int, y: int, a: int, b: int) -> int:
        return int(self.D[x - 1, y - 1, a - 1, b - 1])

    @cached_property
    def pi_float(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.pi])

    @cached_property
    def coefficients(self) -> np.ndarray:
        """``pi(x,y) * D(x,y,a,b)`` as floats, shape ``(n, n, k, k)``."""
        return self.pi_float[:, :, None, None] * self.D.astype(float)

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return (
            self.name == other.name
            and self.n == other.n
            and self.k == other.k
            and self.pi.shape == other.pi.shape
            and self.D.shape == other.D.shape
            and all(p == q for p, q in zip(self.pi.ravel(), other.pi.ravel()))
            and bool(np.array_equal(self.D, other.D))
        )

    __hash__ = None


def make_game(n: int, k: int, pi, D, name: str = "game") -> Game:
    """Build a game from nested sequences, coercing ``pi`` to exact fractions."""
    pi_arr = np.empty((n, n), dtype=object)
    src = np.asarray(pi, dtype=object)
    for x in range(n):
        for y in range(n):
            pi_arr[x, y] = Fraction(src[x, y])
    return Game(n, k, pi_arr, np.asarray(D, dtype=np.int64).copy(), name)


def uniform_pi(n: int) -> np.ndarray:
    pi = np.empty((n, n), dtype=object)
    pi[:, :] = Fraction(1, n * n)
    return pi


def make_chsh() -> Game:
    """CHSH: win iff ``a XOR b == x AND y`` with 0-based questions and answers."""
    D = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    D[x, y, a, b] = int((a ^ b) == (x & y))
    return Game(2, 2, uniform_pi(2), D, "chsh")


def constant_game(n: int, k: int, value: int, name: str | None = None) -> Game:
    """Game whose predicate is identically ``value`` (0 or 1) under uniform ``pi``."""
    D = np.full((n, n, k, k), value, dtype=np.int64)
    return Game(n, k, uniform_pi(n), D, name or f"const{value}")


def random_game(seed: int, n: int, k: int, win_density: float, name: str | None = None) -> Game:
    if not 0 <= win_density <= 1:
        raise ValueError(f"win_density must lie in [0, 1], got {win_density}")
    rng = np.random.default_rng(seed)
    D = (rng.random((n, n, k, k)) < win_density).astype(np.int64)
    return Game(n, k, uniform_pi(n), D, name or f"random-{seed}")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "valid" if self.ok else "invalid: " + "; ".join(self.violations)


def validate(g: Game) -> ValidationReport:
    rep = ValidationReport()
    if not isinstance(g.n, int) or g.n < 1:
        rep.violations.append(f"n must be a positive integer, got {g.n!r}")
    if not isinstance(g.k, int) or g.k < 1:
        rep.violations.append(f"k must be a positive integer, got {g.k!r}")
    if not rep.ok:
        return rep
    if g.pi.shape != (g.n, g.n):
        rep.violations.append(f"pi has shape {g.pi.shape}, expected {(g.n, g.n)}")
    if g.D.shape != (g.n, g.n, g.k, g.k):
        rep.violations.append(f"D has shape {g.D.shape}, expected {(g.n, g.n, g.k, g.k)}")
    if not rep.ok:
        return rep
    mass = Fraction(0)
    for (x, y), p in np.ndenumerate(g.pi):
        try:
            p = Fraction(p)
        except (TypeError, ValueError):
            rep.violations.append(f"pi({x + 1},{y + 1}) is not rational: {p!r}")
            continue
        if p < 0:
            rep.violations.append(f"pi({x + 1},{y + 1}) is negative: {p}")
        mass += p
    if mass != 1:
        rep.violations.append(f"mass {format_rational(mass)}")
    for idx, v in np.ndenumerate(g.D):
        if v not in (0, 1):
            coords = ",".join(str(i + 1) for i in idx)
            rep.violations.append(f"non-binary predicate D({coords}) = {v}")
    return rep


# ---------------------------------------------------------------------------
# Game file format


def serialize_game(g: Game) -> str:
    out = [f"game {g.name}", f"n {g.n}", f"k {g.k}"]
    for (x, y), p in np.ndenumerate(g.pi):
        if p != 0:
            out.append(f"pi {x + 1} {y + 1} {format_rational(p)}")
    for (x, y, a, b), v in np.ndenumerate(g.D):
        if v:
            out.append(f"D {x + 1} {y + 1} {a + 1} {b + 1} {int(v)}")
    out.append("end")
    return "\n".join(out) + "\n"


def _int_field(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {tok!r}", lineno) from None


def _index(tok: str, bound: int, lineno: int, what: str) -> int:
    i = _int_field(tok, lineno, what)
    if not 1 <= i <= bound:
        raise FormatError(f"index out of range: {what}={i} not in 1..{bound}", lineno)
    return i - 1


def parse_game(text: str) -> Game:
    name = n = k = None
    pi = D = None
    ended = False
    for lineno, line in numbered_lines(text):
        if ended:
            raise FormatError("content after 'end'", lineno)
        tok = line.split()
        head = tok[0]
        if head == "game":
            if len(tok) != 2:
                raise FormatError("expected 'game <name>'", lineno)
            name = tok[1]
        elif head in ("n", "k"):
            if len(tok) != 2:
                raise FormatError(f"expected '{head} <int>'", lineno)
            val = _int_field(tok[1], lineno, head)
            if val < 1:
                raise FormatError(f"{head} must be positive", lineno)
            if head == "n":
                n = val
            else:
                k = val
        elif head in ("pi", "D"):
            if n is None or k is None:
                raise FormatError(f"'{head}' line before n and k are set", lineno)
            if pi is None:
                pi = uniform_pi(n)
                pi[:, :] = Fraction(0)
                D = np.zeros((n, n, k, k), dtype=np.int64)
            if head == "pi":
                if len(tok) != 4:
                    raise FormatError("expected 'pi <x> <y> <p/q>'", lineno)
                x = _index(tok[1], n, lineno, "x")
                y = _index(tok[2], n, lineno, "y")
                try:
                    p = Fraction(tok[3])
                except (ValueError, ZeroDivisionError):
                    raise FormatError(f"bad probability {tok[3]!r}", lineno) from None
                if p < 0:
                    raise FormatError(f"negative probability {tok[3]}", lineno)
                pi[x, y] = p
            else:
                if len(tok) != 6:
                    raise FormatError("expected 'D <x> <y> <a> <b> <0|1>'", lineno)
                x = _index(tok[1], n, lineno, "x")
                y = _index(tok[2], n, lineno, "y")
                a = _index(tok[3], k, lineno, "a")
                b = _index(tok[4], k, lineno, "b")
                if tok[5] not in ("0", "1"):
                    raise FormatError(f"predicate value must be 0 or 1, got {tok[5]!r}", lineno)
                D[x, y, a, b] = int(tok[5])
        elif head == "end":
            if len(tok) != 1:
                raise FormatError("unexpected tokens after 'end'", lineno)
            ended = True
        else:
            raise FormatError(f"unknown directive {head!r}", lineno)
    if name is None or n is None or k is None:
        raise FormatError("missing 'game', 'n' or 'k' header")
    if not ended:
        raise FormatError("missing 'end'")
    if pi is None:
        pi = uniform_pi(n)
        pi[:, :] = Fraction(0)
        D = np.zeros((n, n, k, k), dtype=np.int64)
    mass = sum(pi.ravel(), Fraction(0))
    if mass != 1:
        raise FormatError(f"question distribution has mass {format_rational(mass)}, expected 1")
    return Game(n, k, pi, D, name)
