"""Semidecision of almost-commuting interactive-proof languages by enumeration.

For input bits ``z`` the procedure compiles a game, walks the rational
enumeration, drops pairs whose operator defect is not below ``delta(|z|)``
and accepts on the first pair whose certified norm bound exceeds 1/2. Only
acceptance is ever reported; running out of budget is a timeout, never a
rejection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from ..errors import FormatError
from ..game import Game, constant_game, make_chsh
from ..linalg import format_complex, format_matrix_exact, format_rational, numbered_lines, parse_complex, read_matrix_exact
from ..parallel import map_ordered
from ..strategy import bullet_operator, op_defect_table
from .certify import exact_bound, power_iteration, rational_vector
from .enumeration import Candidate, build_candidate, candidate_at, is_exact_povm, iter_indices
from .exact import RationalMatrix

GUARD = 1e-9
HALF = Fraction(1, 2)


@dataclass(frozen=True)
class LanguageFamily:
    name: str
    compiler: Callable[[str], Game]
    delta_fn: Callable[[int], Fraction]

    def game(self, z: str) -> Game:
        return self.compiler(check_bits(z))

    def delta(self, z: str) -> Fraction:
        d = Fraction(self.delta_fn(len(z)))
        if not 0 <= d <= 1:
            raise ValueError(f"delta({len(z)}) = {d} outside [0, 1]")
        return d


def check_bits(z: str) -> str:
    if any(c not in "01" for c in z):
        raise ValueError(f"not a bit string: {z!r}")
    return z


def parity(z: str) -> int:
    """Parity of the number ``z`` encodes with its first bit least significant."""
    return int(z[0]) if z else 0


def toy_language_family(delta=Fraction(1, 10)) -> LanguageFamily:
    """Even ``z`` compiles to an always-win game, odd ``z`` to a never-win game."""
    delta = Fraction(delta)

    def compile_toy(z: str) -> Game:
        return constant_game(2, 2, 1 - parity(z), name=f"toy-{parity(z)}")

    return LanguageFamily("toy", compile_toy, lambda _length: delta)


def constant_family(game: Game, delta, name: str | None = None) -> LanguageFamily:
    """Every input compiles to the same game."""
    delta = Fraction(delta)
    return LanguageFamily(name or f"const-{game.name}", lambda _z: game, lambda _length: delta)


def chsh_family(delta=Fraction(1, 10)) -> LanguageFamily:
    return constant_family(make_chsh(), delta, "chsh")


FAMILIES = {"toy": toy_language_family, "chsh": chsh_family}


def family_by_name(name: str, delta=None) -> LanguageFamily:
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}")
    return FAMILIES[name]() if delta is None else FAMILIES[name](delta)


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Witness:
    family: str
    z: str
    index: int
    d: int
    q: int
    n: int
    k: int
    delta: Fraction
    alice: tuple
    bob: tuple
    vector: tuple  # (re, im) object arrays of Fraction
    bound: Fraction
    defect_op_max: float

    def same_as(self, other: "Witness") -> bool:
        return serialize_witness(self) == serialize_witness(other)


@dataclass
class Outcome:
    accepted: bool
    witness: Witness | None
    examined: int
    emitted: int = 0
    defect_rejected: int = 0

    @property
    def label(self) -> str:
        return "accept" if self.accepted else "timeout"


def _check_candidate(g: Game, delta: Fraction, c: Candidate):
    """Witness parts ``(defect, vector, bound)`` if ``c`` is accepted, ``"defect"`` or None."""
    A, RA = c.arrays("alice")
    B, RB = c.arrays("bob")
    dmax = float(op_defect_table(A, B).max()) if c.d > 1 else 0.0
    if not dmax + GUARD < delta:
        return "defect"
    coef = g.coefficients
    if not coef.any():
        return None
    op = bullet_operator(coef, A, RA, B, RB)
    w, v = np.linalg.eigh(op)
    # no vector can certify more than the top eigenvalue
    if w[-1] <= 0.5:
        return None
    cert = power_iteration(op, start=v[:, -1])
    if cert.bound <= 0.5:
        return None
    v_re, v_im = rational_vector(cert.vector)
    bound = exact_bound(g, c.alice, c.bob, v_re, v_im)
    if bound <= HALF:
        return None
    return dmax, (v_re, v_im), bound


def _witness(fam: LanguageFamily, z: str, g: Game, delta, c: Candidate, parts) -> Witness:
    dmax, vec, bound = parts
    return Witness(fam.name, z, c.index, c.d, c.q, g.n, g.k, delta, c.alice, c.bob, vec, bound, dmax)


def semidecide(fam: LanguageFamily, z: str, budget: int, batch: int = 64) -> Outcome:
    """Examine cursor indices ``0 .. budget-1``; accept on the lowest certified index."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    g = fam.game(z)
    delta = fam.delta(z)
    emitted = rejected = 0
    indices = iter_indices(g.n, g.k)
    done = 0
    while done < budget:
        chunk = []
        for _ in range(min(batch, budget - done)):
            chunk.append(next(indices))
        done += len(chunk)

        def check(item):
            i, d, q, payload = item
            c = build_candidate(g, i, d, q, payload)
            if c is None:
                return None, None
            return c, _check_candidate(g, delta, c)

        for c, res in map_ordered(check, chunk):
            if c is None:
                continue
            emitted += 1
            if res == "defect":
                rejected += 1
            elif res is not None:
                return Outcome(True, _witness(fam, z, g, delta, c, res), c.index + 1, emitted, rejected)
    return Outcome(False, None, budget, emitted, rejected)


def replay(fam: LanguageFamily, z: str, index: int) -> Witness | None:
    """Rebuild the witness for one cursor index, or None if it does not certify."""
    g = fam.game(z)
    delta = fam.delta(z)
    c = candidate_at(g, index)
    if c is None:
        return None
    res = _check_candidate(g, delta, c)
    if res is None or res == "defect":
        return None
    return _witness(fam, z, g, delta, c, res)


@dataclass
class Verification:
    ok: bool
    trail: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def verify_witness(w: Witness, fam: LanguageFamily, z: str) -> Verification:
    """Independently recheck a witness: POVMs exactly, defect, and the exact bound."""
    trail = []

    def fail(msg):
        trail.append("FAIL " + msg)
        return Verification(False, trail)

    if w.family != fam.name or w.z != z:
        return fail(f"witness is for {w.family}/{w.z!r}, not {fam.name}/{z!r}")
    g = fam.game(z)
    delta = fam.delta(z)
    trail.append(f"compiled {g.name} (n={g.n}, k={g.k}), delta={format_rational(delta)}")
    if (w.n, w.k) != (g.n, g.k) or len(w.alice) != g.n or len(w.bob) != g.n:
        return fail("measurement shape does not match the game")
    for tag, fam_effects in (("A", w.alice), ("B", w.bob)):
        for x, row in enumerate(fam_effects):
            if len(row) != g.k or any(e.dim != w.d for e in row):
                return fail(f"{tag}{x + 1}: wrong length or dimension")
            if not is_exact_povm(row):
                return fail(f"{tag}{x + 1} is not an exact POVM")
    trail.append("all POVMs exact")
    A = np.array([[e.to_complex() for e in row] for row in w.alice])
    B = np.array([[e.to_complex() for e in row] for row in w.bob])
    dmax = float(op_defect_table(A, B).max())
    if not dmax + GUARD < delta:
        return fail(f"op defect {dmax:.3e} not below delta")
    trail.append(f"op defect {dmax:.3e} < delta")
    bound = exact_bound(g, w.alice, w.bob, *w.vector)
    if bound != w.bound:
        return fail("recomputed bound differs from the stored bound")
    if bound <= HALF:
        return fail(f"bound {float(bound):.6f} does not exceed 1/2")
    trail.append(f"certified bound {float(bound):.9f} > 1/2")
    return Verification(True, trail)


# ---------------------------------------------------------------------------
# Witness file


def serialize_witness(w: Witness) -> str:
    out = [
        "witness",
        f"family {w.family}",
        f"z {w.z or '-'}",
        f"index {w.index}",
        f"dim {w.d}",
        f"q {w.q}",
        f"n {w.n}",
        f"k {w.k}",
        f"delta {format_rational(w.delta)}",
        f"bound {format_rational(w.bound)}",
        f"defect_op_max {w.defect_op_max!r}",
    ]
    for tag, fam in (("A", w.alice), ("B", w.bob)):
        for x, row in enumerate(fam):
            for a, e in enumerate(row):
                out.append(f"{tag} {x + 1} {a + 1}")
                out.append(format_matrix_exact(e.re, e.im).rstrip("\n"))
    re, im = w.vector
    out.append("vector " + " ".join(format_complex(r, i) for r, i in zip(re, im)))
    out.append("end")
    return "\n".join(out) + "\n"


_SCALARS = ("family", "z", "index", "dim", "q", "n", "k", "delta", "bound", "defect_op_max")


def parse_witness(text: str) -> Witness:
    lines = numbered_lines(text)
    first = next(lines, None)
    if first is None or first[1] != "witness":
        raise FormatError("expected 'witness' header", first[0] if first else None)
    head = {}
    for key in _SCALARS:
        lineno, line = next(lines, (None, ""))
        tok = line.split()
        if len(tok) != 2 or tok[0] != key:
            raise FormatError(f"expected '{key} <value>'", lineno)
        head[key] = (tok[1], lineno)

    def integer(key):
        tok, lineno = head[key]
        if not tok.isdigit():
            raise FormatError(f"{key} must be a nonnegative integer", lineno)
        return int(tok)

    def rational(key):
        tok, lineno = head[key]
        try:
            return Fraction(tok)
        except (ValueError, ZeroDivisionError):
            raise FormatError(f"{key} must be a rational p/q", lineno) from None

    n, k, d = integer("n"), integer("k"), integer("dim")
    blocks = {"A": {}, "B": {}}
    vector = None
    for lineno, line in lines:
        tok = line.split()
        if tok[0] in ("A", "B") and len(tok) == 3:
            x, a = int(tok[1]), int(tok[2])
            re, im = read_matrix_exact(lines)
            if re.shape[0] != d:
                raise FormatError(f"block has dim {re.shape[0]}, expected {d}", lineno)
            blocks[tok[0]][(x, a)] = RationalMatrix(re, im)
        elif tok[0] == "vector":
            if len(tok) != d + 1:
                raise FormatError(f"vector needs {d} entries", lineno)
            parts = [parse_complex(t) for t in tok[1:]]
            vector = (
                np.array([p[0] for p in parts], dtype=object),
                np.array([p[1] for p in parts], dtype=object),
            )
        elif tok == ["end"]:
            break
        else:
            raise FormatError(f"unexpected line {line!r}", lineno)
    if vector is None:
        raise FormatError("missing vector")
    fams = []
    for tag in ("A", "B"):
        try:
            fams.append(tuple(
                tuple(blocks[tag][(x, a)] for a in range(1, k + 1)) for x in range(1, n + 1)
            ))
        except KeyError as exc:
            raise FormatError(f"missing block {tag} {exc.args[0]}") from None
    z = head["z"][0]
    return Witness(
        family=head["family"][0],
        z="" if z == "-" else z,
        index=integer("index"),
        d=d,
        q=integer("q"),
        n=n,
        k=k,
        delta=rational("delta"),
        alice=fams[0],
        bob=fams[1],
        vector=vector,
        bound=rational("bound"),
        defect_op_max=float(head["defect_op_max"][0]),
    )
