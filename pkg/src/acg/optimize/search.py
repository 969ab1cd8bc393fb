"""Lower bounds on entangled and almost-commuting values by local search."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..game import Game
from ..linalg import State, eig_herm, lambda_max, sqrt_psd
from ..parallel import map_ordered
from ..report import format_report
from ..strategy import (
    DefectReport,
    MeasurementFamily,
    Strategy,
    classical_embedding,
    defects,
    game_operator,
    game_value,
    tensor_commuting_strategy,
)
from .classical import best_deterministic
from .objective import LocalObjective, PenalizedObjective, povm_forward

MODES = ("op", "st", "unconstrained")


@dataclass
class OptimizerConfig:
    seed: int = 0
    restarts: int = 8
    max_iters: int = 2000
    step_size: float = 0.5
    penalty: float = 100.0
    dims: tuple[int, ...] = (2, 2)
    delta: Fraction | None = None
    mode: str = "unconstrained"
    tol_conv: float = 1e-9
    margin: float = 0.05
    patience: int = 25
    inner_iters: int = 20

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.delta is not None:
            self.delta = Fraction(self.delta)
            if self.delta < 0:
                raise ValueError("delta must be >= 0")
        elif self.mode != "unconstrained":
            raise ValueError(f"mode {self.mode!r} needs a delta")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")


@dataclass
class BoundReport:
    value: float
    strategy: Strategy
    defects: DefectReport
    feasible: bool
    trace: list[float] = field(default_factory=list)
    restarts_used: int = 0
    iterations: int = 0
    converged: bool = True
    delta: Fraction | None = None
    mode: str = "unconstrained"

    def lines(self):
        return [
            ("value", self.value),
            ("feasible", self.feasible),
            ("delta", self.delta),
            ("mode", self.mode),
            ("defect_op_max", self.defects.op_max),
            ("defect_st_max", self.defects.st_max),
            ("restarts_used", self.restarts_used),
            ("iterations", self.iterations),
            ("converged", self.converged),
        ]

    def render(self) -> str:
        return format_report(self.lines())


def optimal_state(g: Game, a: MeasurementFamily, b: MeasurementFamily) -> tuple[State, float]:
    """Top-eigenvector state of ``G(A, B)`` and its value ``lambda_max``."""
    dec = eig_herm(game_operator(g, a, b))
    return State.pure(dec.eigenvectors[:, 0]), float(dec.eigenvalues[0])


def _restart_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _random_complex(rng, shape, d):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * d)


def _ascend(fun, x, ev_value, ev_grad, cfg: OptimizerConfig, iters: int, step: float):
    """Gradient ascent with backtracking.

    ``fun(x)`` returns ``(value, grad, payload)``. The trial step starts at
    twice the last accepted step (capped at ``cfg.step_size``) and is halved
    until the value does not decrease.
    """
    stall = 0
    used = 0
    converged = False
    payload = None
    for _ in range(iters):
        used += 1
        s = min(cfg.step_size, 2 * step)
        while True:
            cand = x + s * ev_grad
            val, grad, pay = fun(cand)
            if val >= ev_value:
                break
            s /= 2
            if s < 1e-16:
                return x, ev_value, ev_grad, payload, used, True, step
        gain = val - ev_value
        x, ev_value, ev_grad, payload, step = cand, val, grad, pay, s
        stall = stall + 1 if gain < cfg.tol_conv else 0
        if stall >= cfg.patience:
            converged = True
            break
    return x, ev_value, ev_grad, payload, used, converged, step


# ---------------------------------------------------------------------------
# See-saw over commuting tensor strategies


def _tensor_operator(coef, A, B):
    return np.einsum("xyab,xaij,ybkl->ikjl", coef, A, B).reshape(
        A.shape[-1] * B.shape[-1], A.shape[-1] * B.shape[-1]
    )


def _seesaw_restart(g: Game, cfg: OptimizerConfig, index: int):
    da, db = cfg.dims
    rng = _restart_rng(cfg.seed, index)
    ma = _random_complex(rng, (g.n, g.k, da, da), da)
    mb = _random_complex(rng, (g.n, g.k, db, db), db)
    coef = g.coefficients.astype(complex)
    alice = LocalObjective(g, da, db, "alice")
    bob = LocalObjective(g, db, da, "bob")
    trace: list[float] = []
    iters = 0
    steps = {"alice": cfg.step_size, "bob": cfg.step_size}
    converged = False
    A, _ = povm_forward(ma)
    B, _ = povm_forward(mb)
    prev = -np.inf
    max_sweeps = max(1, cfg.max_iters // max(1, cfg.inner_iters))
    for _ in range(max_sweeps):
        op = _tensor_operator(coef, A, B)
        w, v = np.linalg.eigh((op + op.conj().T) / 2)
        vec = v[:, -1]
        rho = np.outer(vec, vec.conj())
        trace.append(float(w[-1]))
        for name, obj in (("alice", alice), ("bob", bob)):
            kmat = obj.effective(B, rho) if name == "alice" else obj.effective(A, rho)
            m = ma if name == "alice" else mb
            fun = lambda z, obj=obj, kmat=kmat: obj(z, kmat)  # noqa: E731
            val, grad, E = fun(m)
            m, val, grad, E2, used, _, steps[name] = _ascend(
                fun, m, val, grad, cfg, cfg.inner_iters, steps[name]
            )
            iters += used
            E = E if E2 is None else E2
            if name == "alice":
                ma, A = m, E
            else:
                mb, B = m, E
            trace.append(val)
        sweep_value = trace[-1]
        if sweep_value - prev < cfg.tol_conv:
            converged = True
            break
        prev = sweep_value
    alice_fam = MeasurementFamily.from_effects(A)
    bob_fam = MeasurementFamily.from_effects(B)
    op = _tensor_operator(coef, A, B)
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    state = State.pure(v[:, -1])
    strat = tensor_commuting_strategy(alice_fam, bob_fam, state)
    value = game_value(g, strat)
    return value, strat, trace, iters, converged


def seesaw_commuting(g: Game, cfg: OptimizerConfig) -> BoundReport:
    """Best tensor-product strategy found by alternating state and local ascent steps."""
    if len(cfg.dims) != 2:
        raise ValueError("seesaw needs dims (d_A, d_B)")
    runs = map_ordered(lambda i: _seesaw_restart(g, cfg, i), range(cfg.restarts))
    best = max(range(len(runs)), key=lambda i: (runs[i][0], -i))
    value, strat, trace, _, _ = runs[best]
    return BoundReport(
        value=value,
        strategy=strat,
        defects=strat.defects,
        feasible=True,
        trace=trace,
        restarts_used=len(runs),
        iterations=sum(r[3] for r in runs),
        converged=all(r[4] for r in runs),
        delta=cfg.delta,
        mode="commuting",
    )


# ---------------------------------------------------------------------------
# Almost-commuting search on a single space


def strategy_to_params(obj: PenalizedObjective, s: Strategy) -> np.ndarray:
    """Parameters whose image is (up to the ridge) the given strategy."""
    ma = np.array([[sqrt_psd(e) for e in p.effects] for p in s.alice.povms])
    mb = np.array([[sqrt_psd(e) for e in p.effects] for p in s.bob.povms])
    return obj.layout.pack(ma, mb, sqrt_psd(s.phi.rho))


def _relevant_defect(rep: DefectReport, mode: str) -> float:
    return rep.st_max if mode == "st" else rep.op_max


def _is_feasible(defect: float, cfg: OptimizerConfig) -> bool:
    return cfg.mode == "unconstrained" or defect < cfg.delta


def _delta_restart(g: Game, cfg: OptimizerConfig, obj: PenalizedObjective, index: int, start):
    if start is None:
        rng = _restart_rng(cfg.seed, index)
        d = obj.layout.d
        theta = np.concatenate([
            rng.standard_normal(obj.layout.size // 2),
            rng.standard_normal(obj.layout.size // 2),
        ]) / np.sqrt(2 * d)
    else:
        theta = start
    best = {"value": -np.inf, "eval": None}

    def fun(z):
        ev = obj(z)
        if _is_feasible(ev.defect_max, cfg) and ev.value > best["value"]:
            best["value"], best["eval"] = ev.value, ev
        return ev.objective, ev.grad, ev

    val, grad, ev0 = fun(theta)
    _, _, _, last, used, converged, _ = _ascend(
        fun, theta, val, grad, cfg, cfg.max_iters, cfg.step_size
    )
    final = best["eval"] or last or ev0
    try:
        strat = Strategy(
            MeasurementFamily.from_effects(final.A),
            MeasurementFamily.from_effects(final.B),
            State.from_rho(final.rho),
        )
    except ValueError:
        return None
    rep = defects(strat)
    feasible = _is_feasible(_relevant_defect(rep, cfg.mode), cfg)
    return game_value(g, strat), feasible, strat, rep, used, converged


def default_seeds(g: Game, d: int) -> list[Strategy]:
    """Commuting warm starts: the best deterministic strategy embedded as scalars."""
    _, fa, fb = best_deterministic(g)
    return [classical_embedding(fa, fb, g.k, d)]


def optimize_delta(g: Game, cfg: OptimizerConfig, seeds: Sequence[Strategy] | None = None) -> BoundReport:
    """Maximize the winning probability over strategies on one space of dim ``d``.

    Constrained modes add a quadratic penalty on the op or state defect. A
    strategy is reported feasible only if its exactly recomputed defect is
    strictly below ``delta``. Seed strategies (by default the best
    deterministic strategy) are optimized first, then ``cfg.restarts`` random
    starts.
    """
    if len(cfg.dims) != 1:
        raise ValueError("optimize_delta needs a single dimension")
    d = cfg.dims[0]
    obj = PenalizedObjective(g, d, cfg.delta, cfg.mode, cfg.penalty, cfg.margin)
    seeds = default_seeds(g, d) if seeds is None else list(seeds)
    starts = [strategy_to_params(obj, s) for s in seeds] + [None] * cfg.restarts
    runs = map_ordered(
        lambda i: _delta_restart(g, cfg, obj, i - len(seeds), starts[i]), range(len(starts))
    )
    good = [(i, r) for i, r in enumerate(runs) if r is not None]
    if not good:
        raise RuntimeError("no restart produced a valid strategy")
    best_i, best = max(good, key=lambda ir: (ir[1][1], ir[1][0], -ir[0]))
    value, feasible, strat, rep, _, _ = best
    return BoundReport(
        value=value,
        strategy=strat,
        defects=rep,
        feasible=feasible,
        trace=[r[0] for _, r in good],
        restarts_used=len(runs),
        iterations=sum(r[4] for _, r in good),
        converged=all(r[5] for _, r in good),
        delta=cfg.delta,
        mode=cfg.mode,
    )


# ---------------------------------------------------------------------------


@dataclass
class GradientCheck:
    max_rel_error: float
    checked: int
    failures: list[tuple[int, int, float, float]]
    tol: float

    @property
    def ok(self) -> bool:
        return not self.failures


def gradient_check(g: Game, cfg: OptimizerConfig, points: int = 50, coords: int = 4,
                   step: float = 1e-5, tol: float = 1e-4) -> GradientCheck:
    """Compare analytic and central-difference gradients of the penalized objective.

    The relative error is ``|analytic - fd| / max(|analytic|, |fd|, 1e-6)``.
    Each point also checks the directional derivative along a random direction.
    """
    d = cfg.dims[0]
    obj = PenalizedObjective(g, d, cfg.delta, cfg.mode, cfg.penalty, cfg.margin)
    rng = np.random.default_rng(cfg.seed)
    worst, checked, failures = 0.0, 0, []

    def f(z):
        return obj(z, grad=False).objective

    for p in range(points):
        theta = rng.standard_normal(obj.layout.size) / np.sqrt(2 * d)
        grad = obj(theta).grad
        directions = []
        for c in rng.choice(obj.layout.size, size=min(coords, obj.layout.size), replace=False):
            e = np.zeros_like(theta)
            e[c] = 1.0
            directions.append((int(c), e))
        u = rng.standard_normal(obj.layout.size)
        directions.append((-1, u / np.linalg.norm(u)))
        for c, e in directions:
            fd = (f(theta + step * e) - f(theta - step * e)) / (2 * step)
            an = float(grad @ e)
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
            worst = max(worst, rel)
            checked += 1
            if rel > tol:
                failures.append((p, c, an, fd))
    return GradientCheck(worst, checked, failures, tol)


def witness_bound(g: Game, s: Strategy) -> float:
    """``lambda_max`` of the game operator of a strategy's measurements."""
    return lambda_max(game_operator(g, s.alice, s.bob))
