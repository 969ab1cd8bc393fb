"""POVMs, strategies, the symmetrized correlation rule, game values and defects."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import FormatError, NotPSDError, ShapeError
from .game import Game
from .linalg import (
    State,
    format_matrix,
    herm,
    inv_sqrt_pd,
    lambda_min,
    numbered_lines,
    op_norm,
    positive_part,
    psd_cone_distance,
    read_matrix,
    sqrt_psd,
)

TOL_POVM = 1e-9
TOL_PROB = 1e-8


@dataclass(frozen=True, eq=False)
class Povm:
    """``k`` PSD effects of a common dimension summing to the identity."""

    effects: np.ndarray  # (k, d, d)

    @classmethod
    def from_effects(cls, effects, tol: float = TOL_POVM) -> "Povm":
        eff = np.array([herm(e) for e in effects])
        if eff.ndim != 3 or len(eff) == 0:
            raise ShapeError("a POVM needs at least one square effect")
        for a, e in enumerate(eff):
            lam = lambda_min(e)
            if lam < -tol:
                raise NotPSDError(lam, f"effect {a + 1} is not PSD: eigenvalue {lam:.3e}")
        dev = op_norm(eff.sum(axis=0) - np.eye(eff.shape[1]))
        if dev > tol:
            raise ValueError(f"effects sum to identity only within {dev:.3e}")
        eff.setflags(write=False)
        return cls(eff)

    @property
    def k(self) -> int:
        return self.effects.shape[0]

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, a: int) -> np.ndarray:
        return self.effects[a]


@dataclass(frozen=True, eq=False)
class MeasurementFamily:
    """One POVM per question, all of length ``k`` on one space."""

    povms: tuple[Povm, ...]

    def __post_init__(self):
        if not self.povms:
            raise ShapeError("a measurement family needs at least one question")
        ks = {p.k for p in self.povms}
        dims = {p.dim for p in self.povms}
        if len(ks) != 1 or len(dims) != 1:
            raise ShapeError(f"POVMs disagree in length {ks} or dimension {dims}")

    @classmethod
    def from_effects(cls, effects, tol: float = TOL_POVM) -> "MeasurementFamily":
        """``effects[x][a]`` is the effect for question ``x``, answer ``a`` (0-based)."""
        return cls(tuple(Povm.from_effects(e, tol) for e in effects))

    @property
    def n(self) -> int:
        return len(self.povms)

    @property
    def k(self) -> int:
        return self.povms[0].k

    @property
    def dim(self) -> int:
        return self.povms[0].dim

    @cached_property
    def effects(self) -> np.ndarray:
        """All effects, shape ``(n, k, d, d)``."""
        return np.array([p.effects for p in self.povms])

    @cached_property
    def roots(self) -> np.ndarray:
        return np.array([[sqrt_psd(e) for e in p.effects] for p in self.povms])


@dataclass(frozen=True, eq=False)
class Strategy:
    alice: MeasurementFamily
    bob: MeasurementFamily
    phi: State

    def __post_init__(self):
        if (self.alice.n, self.alice.k) != (self.bob.n, self.bob.k):
            raise ShapeError("Alice and Bob measurement families have different (n, k)")
        if not self.alice.dim == self.bob.dim == self.phi.dim:
            raise ShapeError(
                f"dimension mismatch: alice {self.alice.dim}, bob {self.bob.dim}, "
                f"state {self.phi.dim}"
            )

    @property
    def dim(self) -> int:
        return self.phi.dim

    @property
    def n(self) -> int:
        return self.alice.n

    @property
    def k(self) -> int:
        return self.alice.k

    @cached_property
    def defects(self) -> "DefectReport":
        return defects(self)


def _check_shapes(g: Game, a: MeasurementFamily, b: MeasurementFamily) -> None:
    if (a.n, a.k) != (g.n, g.k) or (b.n, b.k) != (g.n, g.k):
        raise ShapeError(
            f"game has (n, k) = {(g.n, g.k)}, measurements have {(a.n, a.k)} and {(b.n, b.k)}"
        )
    if a.dim != b.dim:
        raise ShapeError(f"measurement dims differ: {a.dim} vs {b.dim}")


# ---------------------------------------------------------------------------
# Bullet product, correlations and values


def bullet(a, b) -> np.ndarray:
    """Symmetrized product ``(a^1/2 b a^1/2 + b^1/2 a b^1/2) / 2`` of PSD matrices."""
    a, b = herm(a), herm(b)
    if a.shape != b.shape:
        raise ShapeError(f"bullet of {a.shape} and {b.shape}")
    ra, rb = sqrt_psd(a), sqrt_psd(b)
    return herm(ra @ b @ ra + rb @ a @ rb) / 2


def bullet_table(A, RA, B, RB) -> np.ndarray:
    """All products ``A^x_a . B^y_b`` as an ``(n, n, k, k, d, d)`` array.

    ``RA`` and ``RB`` are the square roots of the effect arrays ``A`` and ``B``.
    """
    t1 = np.einsum("xaij,ybjk,xakl->xyabil", RA, B, RA)
    t2 = np.einsum("ybij,xajk,ybkl->xyabil", RB, A, RB)
    t = (t1 + t2) / 2
    return (t + np.conj(np.swapaxes(t, -1, -2))) / 2


def bullet_operator(coef, A, RA, B, RB) -> np.ndarray:
    """``sum coef[x,y,a,b] A^x_a . B^y_b`` from effect arrays and their roots."""
    return herm(np.einsum("xyab,xyabij->ij", coef, bullet_table(A, RA, B, RB)))


def correlation_table(s: Strategy) -> np.ndarray:
    """``p[x, y, a, b] = phi(A^x_a . B^y_b)`` (0-based), clamped at zero."""
    table = bullet_table(s.alice.effects, s.alice.roots, s.bob.effects, s.bob.roots)
    p = np.einsum("ji,xyabij->xyab", s.phi.rho, table).real
    if p.min(initial=0.0) < -TOL_POVM:
        raise NotPSDError(p.min(), f"negative correlation entry {p.min():.3e}")
    return np.clip(p, 0.0, None)


def game_operator(g: Game, a: MeasurementFamily, b: MeasurementFamily) -> np.ndarray:
    _check_shapes(g, a, b)
    return bullet_operator(g.coefficients, a.effects, a.roots, b.effects, b.roots)


def game_value(g: Game, s: Strategy) -> float:
    """Winning probability, computed both as ``phi(G(A,B))`` and from the correlation table."""
    op = game_operator(g, s.alice, s.bob)
    v_op = float(np.sum(s.phi.rho.T * op).real)
    v_tab = float(np.sum(g.coefficients * correlation_table(s)))
    if abs(v_op - v_tab) > TOL_PROB:
        raise RuntimeError(f"value formulas disagree: {v_op!r} vs {v_tab!r}")
    if not -TOL_PROB <= v_op <= 1 + TOL_PROB:
        raise RuntimeError(f"value {v_op!r} outside [0, 1]")
    return min(1.0, max(0.0, v_op))


# ---------------------------------------------------------------------------
# Commutation defects


@dataclass(frozen=True, eq=False)
class DefectReport:
    """Per question pair ``(x, y)`` (0-based rows/cols) operator and state defects."""

    op: np.ndarray
    st: np.ndarray
    per_pair: bool = False

    @property
    def op_max(self) -> float:
        return float(self.op.max())

    @property
    def st_max(self) -> float:
        return float(self.st.max())

    def is_op(self, delta) -> bool:
        return self.op_max < delta

    def is_st(self, delta) -> bool:
        return self.st_max < delta


def _commutators(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``[A^x_a, B^y_b]`` for all indices, shape ``(n, n, k, k, d, d)``."""
    left = A[:, None, :, None] @ B[None, :, None, :]
    return left - B[None, :, None, :] @ A[:, None, :, None]


def op_defect_table(A: np.ndarray, B: np.ndarray, per_pair: bool = False) -> np.ndarray:
    """Operator defect per question pair from effect arrays of shape ``(n, k, d, d)``."""
    norms = np.linalg.norm(_commutators(A, B), ord=2, axis=(-2, -1))
    return norms.max(axis=(2, 3)) if per_pair else norms.sum(axis=(2, 3))


def defects(s: Strategy, per_pair: bool = False) -> DefectReport:
    """Commutator defects; ``per_pair`` takes the max over answers instead of the sum."""
    c = _commutators(s.alice.effects, s.bob.effects)
    norms = np.linalg.norm(c, ord=2, axis=(-2, -1))
    states = np.abs(np.einsum("ji,xyabij->xyab", s.phi.rho, c))
    agg = np.max if per_pair else np.sum
    return DefectReport(agg(norms, axis=(2, 3)), agg(states, axis=(2, 3)), per_pair)


# ---------------------------------------------------------------------------
# Near-POVMs


def phi_k_eval(xs: Sequence) -> float:
    """How far a tuple of Hermitian matrices is from being a POVM."""
    xs = [herm(x) for x in xs]
    if not xs:
        raise ShapeError("phi_k needs at least one matrix")
    d = xs[0].shape[0]
    worst = max(psd_cone_distance(x) for x in xs)
    return max(worst, op_norm(sum(xs) - np.eye(d)))


class Rounding(NamedTuple):
    povm: Povm
    distance: float  # max_i ||B_i - X_i||
    phi_k: float


def round_to_povm(xs: Sequence) -> Rounding:
    """Round a near-POVM to an exact one by positive parts and normalization.

    With ``P_i`` the positive parts and ``S = sum P_i + eps I``, the result is
    ``S^-1/2 (P_i + eps/k I) S^-1/2``. ``eps`` tops the spectrum of
    ``sum P_i`` up to at least 1, so ``S >= I`` and ``eps <= phi_k + 1e-12``.
    """
    xs = [herm(x) for x in xs]
    k = len(xs)
    d = xs[0].shape[0]
    phi = phi_k_eval(xs)
    parts = [positive_part(x) for x in xs]
    total = sum(parts)
    eps = 1e-12 + max(0.0, 1.0 - lambda_min(total))
    t = inv_sqrt_pd(total + eps * np.eye(d))
    eff = [herm(t @ (p + (eps / k) * np.eye(d)) @ t) for p in parts]
    # push the float residual of the completeness identity into the effects evenly
    resid = herm(np.eye(d) - sum(eff))
    eff = [e + resid / k for e in eff]
    povm = Povm.from_effects(eff)
    dist = max(op_norm(b - x) for b, x in zip(povm.effects, xs))
    return Rounding(povm, dist, phi)


# ---------------------------------------------------------------------------
# Constructors


def tensor_commuting_strategy(
    alice_local: MeasurementFamily, bob_local: MeasurementFamily, state: State
) -> Strategy:
    """Embed local measurements as ``A (x) I`` and ``I (x) B``."""
    da, db = alice_local.dim, bob_local.dim
    if state.dim != da * db:
        raise ShapeError(f"state dim {state.dim} != {da} * {db}")
    ia, ib = np.eye(da), np.eye(db)
    alice = MeasurementFamily.from_effects(
        [[np.kron(e, ib) for e in p.effects] for p in alice_local.povms]
    )
    bob = MeasurementFamily.from_effects(
        [[np.kron(ia, e) for e in p.effects] for p in bob_local.povms]
    )
    return Strategy(alice, bob, state)


def uniform_family(n: int, k: int, dim: int) -> MeasurementFamily:
    return MeasurementFamily.from_effects([[np.eye(dim) / k] * k for _ in range(n)])


def deterministic_family(answers: Sequence[int], k: int, dim: int) -> MeasurementFamily:
    """Answer ``answers[x]`` (0-based) to question ``x`` with certainty."""
    effects = []
    for ans in answers:
        effects.append([np.eye(dim) if a == ans else np.zeros((dim, dim)) for a in range(k)])
    return MeasurementFamily.from_effects(effects)


def observable_povm(obs) -> list[np.ndarray]:
    """Two-outcome POVM ``((I + O)/2, (I - O)/2)`` of a +-1 observable."""
    obs = herm(obs)
    eye = np.eye(obs.shape[0])
    return [(eye + obs) / 2, (eye - obs) / 2]


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def maximally_entangled(d: int) -> State:
    v = np.eye(d).reshape(d * d) / np.sqrt(d)
    return State.pure(v)


def tsirelson_locals() -> tuple[MeasurementFamily, MeasurementFamily]:
    """Qubit observables that reach the CHSH quantum optimum on a maximally entangled pair."""
    alice = MeasurementFamily.from_effects([observable_povm(PAULI_Z), observable_povm(PAULI_X)])
    bob = MeasurementFamily.from_effects(
        [
            observable_povm((PAULI_Z + PAULI_X) / np.sqrt(2)),
            observable_povm((PAULI_Z - PAULI_X) / np.sqrt(2)),
        ]
    )
    return alice, bob


def tsirelson_strategy() -> Strategy:
    alice, bob = tsirelson_locals()
    return tensor_commuting_strategy(alice, bob, maximally_entangled(2))


def classical_embedding(alice_answers, bob_answers, k: int, dim: int) -> Strategy:
    """Deterministic answers embedded as scalar effects on ``dim`` with a mixed state."""
    return Strategy(
        deterministic_family(alice_answers, k, dim),
        deterministic_family(bob_answers, k, dim),
        State.maximally_mixed(dim),
    )


# ---------------------------------------------------------------------------
# Strategy and POVM files


def serialize_strategy(s: Strategy) -> str:
    out = [f"strategy dim {s.dim} n {s.n} k {s.k}"]
    for tag, fam in (("A", s.alice), ("B", s.bob)):
        for x in range(fam.n):
            for a in range(fam.k):
                out.append(f"{tag} {x + 1} {a + 1}")
                out.append(format_matrix(fam.effects[x, a]).rstrip("\n"))
    out.append("rho")
    out.append(format_matrix(s.phi.rho).rstrip("\n"))
    return "\n".join(out) + "\n"


def _header(lines, keyword, keys):
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise FormatError(f"empty {keyword} file") from None
    tok = line.split()
    expected = [keyword] + [f"{key} <int>" for key in keys]
    if len(tok) != 1 + 2 * len(keys) or tok[0] != keyword or tok[1::2] != list(keys):
        raise FormatError(f"expected header '{' '.join(expected)}'", lineno)
    vals = []
    for t in tok[2::2]:
        if not t.isdigit() or int(t) < 1:
            raise FormatError(f"header values must be positive integers, got {t!r}", lineno)
        vals.append(int(t))
    return vals


def _matrix_block(lines, d, lineno):
    m = read_matrix(lines)
    if m.shape[0] != d:
        raise FormatError(f"block has dim {m.shape[0]}, header says {d}", lineno)
    return m


def parse_strategy(text: str) -> Strategy:
    lines = numbered_lines(text)
    d, n, k = _header(lines, "strategy", ("dim", "n", "k"))
    blocks = {"A": {}, "B": {}}
    rho = None
    for lineno, line in lines:
        tok = line.split()
        if tok[0] in ("A", "B"):
            if len(tok) != 3 or not all(t.isdigit() for t in tok[1:]):
                raise FormatError(f"expected '{tok[0]} <x> <a>'", lineno)
            x, a = int(tok[1]), int(tok[2])
            if not (1 <= x <= n and 1 <= a <= k):
                raise FormatError(f"index out of range: {tok[0]} {x} {a}", lineno)
            if (x, a) in blocks[tok[0]]:
                raise FormatError(f"duplicate block {tok[0]} {x} {a}", lineno)
            blocks[tok[0]][(x, a)] = _matrix_block(lines, d, lineno)
        elif tok == ["rho"]:
            if rho is not None:
                raise FormatError("duplicate rho block", lineno)
            rho = _matrix_block(lines, d, lineno)
        else:
            raise FormatError(f"unknown block {line!r}", lineno)
    fams = []
    for tag in ("A", "B"):
        missing = [(x, a) for x in range(1, n + 1) for a in range(1, k + 1) if (x, a) not in blocks[tag]]
        if missing:
            raise FormatError(f"missing {tag} blocks: {missing[:4]}")
        effects = [[blocks[tag][(x, a)] for a in range(1, k + 1)] for x in range(1, n + 1)]
        try:
            fams.append(MeasurementFamily.from_effects(effects))
        except ValueError as exc:
            raise FormatError(f"{tag} measurements invalid: {exc}") from None
    if rho is None:
        raise FormatError("missing rho block")
    try:
        phi = State.from_rho(rho)
    except ValueError as exc:
        raise FormatError(f"rho invalid: {exc}") from None
    return Strategy(fams[0], fams[1], phi)


def serialize_effects(xs: Sequence) -> str:
    xs = [np.asarray(x, dtype=complex) for x in xs]
    out = [f"povm dim {xs[0].shape[0]} k {len(xs)}"]
    for a, x in enumerate(xs):
        out.append(f"E {a + 1}")
        out.append(format_matrix(x).rstrip("\n"))
    return "\n".join(out) + "\n"


def parse_effects(text: str) -> list[np.ndarray]:
    """Read a (near-)POVM file: header ``povm dim <d> k <k>`` then ``E <a>`` blocks."""
    lines = numbered_lines(text)
    d, k = _header(lines, "povm", ("dim", "k"))
    found = {}
    for lineno, line in lines:
        tok = line.split()
        if len(tok) != 2 or tok[0] != "E" or not tok[1].isdigit() or not 1 <= int(tok[1]) <= k:
            raise FormatError(f"expected 'E <a>' with a in 1..{k}", lineno)
        found[int(tok[1])] = _matrix_block(lines, d, lineno)
    missing = [a for a in range(1, k + 1) if a not in found]
    if missing:
        raise FormatError(f"missing effects {missing}")
    return [found[a] for a in range(1, k + 1)]

