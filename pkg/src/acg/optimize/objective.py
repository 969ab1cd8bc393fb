"""Smooth parametrizations of POVMs and states, and the penalized game objective.

Gradients are written out by hand. A real-valued ``f`` of a Hermitian matrix
``X`` is differentiated through a Hermitian cotangent ``Xbar`` with
``df = tr(Xbar dX)``; for a complex parameter ``M`` the returned gradient is
``df/dRe(M) + i df/dIm(M)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..game import Game
from ..strategy import bullet_operator

RIDGE = 1e-8
FLOOR = 1e-12


def _h(x):
    return (x + np.conj(np.swapaxes(x, -1, -2))) / 2


def _dag(x):
    return np.conj(np.swapaxes(x, -1, -2))


def _eigh(m):
    w, u = np.linalg.eigh(_h(m))
    return w, u


def _loewner_pullback(u, lmat, xbar):
    """Pull a cotangent back through ``f(S)`` given the Loewner matrix of ``f``."""
    ut = _dag(u)
    return _h(u @ (lmat * (ut @ _h(xbar) @ u)) @ ut)


def sqrt_forward(a):
    """Batched PSD square root; returns ``(root, cache)``."""
    w, u = _eigh(a)
    s = np.sqrt(np.clip(w, 0.0, None))
    root = _h((u * s[..., None, :]) @ _dag(u))
    return root, (u, s)


def sqrt_backward(cache, rbar):
    u, s = cache
    lmat = 1.0 / np.maximum(s[..., :, None] + s[..., None, :], FLOOR)
    return _loewner_pullback(u, lmat, rbar)


def povm_forward(m, eps: float = RIDGE):
    """Map unconstrained ``m`` of shape ``(..., k, d, d)`` to exact POVMs.

    ``A_a = S^-1/2 (M_a* M_a + eps/k I) S^-1/2`` with ``S = sum_a M_a* M_a + eps I``.
    """
    k, d = m.shape[-3], m.shape[-1]
    eye = np.eye(d)
    p = _dag(m) @ m
    q = p + (eps / k) * eye
    s = p.sum(axis=-3) + eps * eye
    w, u = _eigh(s)
    r = np.sqrt(w)
    t = _h((u / r[..., None, :]) @ _dag(u))
    tq = t[..., None, :, :]
    a = _h(tq @ q @ tq)
    return a, (m, q, t, u, r)


def povm_backward(cache, abar):
    m, q, t, u, r = cache
    tq = t[..., None, :, :]
    qbar = _h(tq @ abar @ tq)
    tbar = (q @ tq @ abar + abar @ tq @ q).sum(axis=-3)
    lmat = -1.0 / (r[..., :, None] * r[..., None, :] * np.maximum(r[..., :, None] + r[..., None, :], FLOOR))
    sbar = _loewner_pullback(u, lmat, tbar)
    pbar = qbar + sbar[..., None, :, :]
    return 2 * m @ pbar


def state_forward(v):
    w = _dag(v) @ v
    t = np.trace(w).real
    return _h(w / t), (v, t)


def state_backward(cache, rho, rhobar):
    v, t = cache
    d = rho.shape[0]
    wbar = (_h(rhobar) - np.sum(rho.T * rhobar).real * np.eye(d)) / t
    return 2 * v @ wbar


# ---------------------------------------------------------------------------


@dataclass
class Layout:
    """Shapes of the joint parameter vector ``(M_alice, M_bob, V)``."""

    n: int
    k: int
    d: int

    @property
    def block(self) -> int:
        return self.n * self.k * self.d * self.d

    @property
    def size(self) -> int:
        return 2 * (2 * self.block + self.d * self.d)

    def unpack(self, theta):
        n, k, d, blk = self.n, self.k, self.d, self.block
        half = self.size // 2
        z = theta[:half] + 1j * theta[half:]
        ma = z[:blk].reshape(n, k, d, d)
        mb = z[blk : 2 * blk].reshape(n, k, d, d)
        v = z[2 * blk :].reshape(d, d)
        return ma, mb, v

    def pack(self, ma, mb, v):
        z = np.concatenate([np.ravel(ma), np.ravel(mb), np.ravel(v)])
        return np.concatenate([z.real, z.imag])


def bullet_value(coef, A, RA, B, RB, rho):
    """``tr(rho G(A,B))`` and ``G`` itself from effects and their roots."""
    gop = bullet_operator(coef, A, RA, B, RB)
    return float(np.sum(rho.T * gop).real), gop


def bullet_value_backward(coef, A, RA, B, RB, rho):
    """Cotangents of ``tr(rho G)`` for ``A, RA, B, RB``."""
    ka = np.einsum("xyab,ybij->xaij", coef, B)
    kb = np.einsum("xyab,xaij->ybij", coef, A)
    ra_bar = (ka @ RA @ rho + rho @ RA @ ka) / 2
    rb_bar = (kb @ RB @ rho + rho @ RB @ kb) / 2
    b_bar = np.einsum("xyab,xaij,jk,xakl->ybil", coef, RA, rho, RA) / 2
    a_bar = np.einsum("xyab,ybij,jk,ybkl->xail", coef, RB, rho, RB) / 2
    return _h(a_bar), _h(ra_bar), _h(b_bar), _h(rb_bar)


def defect_table(A, B, rho, mode: str):
    """Per-(x, y) defect and the data needed to differentiate it.

    ``mode`` is ``"op"`` (sum of commutator spectral norms) or ``"st"``
    (sum of ``|tr(rho [A, B])|``).
    """
    c = A[:, None, :, None] @ B[None, :, None, :] - B[None, :, None, :] @ A[:, None, :, None]
    # c has shape (n, n, k, k, d, d) indexed (x, y, a, b)
    if mode == "op":
        u, s, vh = np.linalg.svd(c)
        vals = s[..., 0]
        aux = (u[..., :, 0], vh[..., 0, :])
    else:
        z = np.einsum("ji,xyabij->xyab", rho, c)
        vals = np.abs(z.imag)
        aux = (np.sign(z.imag), c)
    return vals.sum(axis=(2, 3)), vals, aux


def defect_backward(A, B, rho, mode: str, aux, x: int, y: int, scale: float):
    """Cotangents of ``scale * defect[x, y]`` for ``A``, ``B`` and ``rho``."""
    abar = np.zeros_like(A)
    bbar = np.zeros_like(B)
    rbar = np.zeros_like(rho)
    k = A.shape[1]
    for a in range(k):
        for b in range(k):
            Ax, By = A[x, a], B[y, b]
            if mode == "op":
                uu, vv = aux[0][x, y, a, b], aux[1][x, y, a, b]
                X = np.outer(np.conj(vv), np.conj(uu))  # v u*
                abar[x, a] += scale * _h(By @ X - X @ By)
                bbar[y, b] += scale * _h(X @ Ax - Ax @ X)
            else:
                sg = aux[0][x, y, a, b]
                if sg == 0:
                    continue
                cm = aux[1][x, y, a, b]
                abar[x, a] += scale * sg * _h(-1j * (By @ rho - rho @ By))
                bbar[y, b] += scale * sg * _h(-1j * (rho @ Ax - Ax @ rho))
                rbar += scale * sg * _h(-1j * cm)
    return abar, bbar, rbar


@dataclass
class Evaluation:
    objective: float
    value: float
    defect_max: float
    grad: np.ndarray | None
    A: np.ndarray
    B: np.ndarray
    rho: np.ndarray


class PenalizedObjective:
    """``value - lam * max(0, defect_max - delta (1 - margin))^2`` on one space.

    ``mode="unconstrained"`` drops the penalty; the defect is still reported
    (as the operator defect).
    """

    def __init__(self, game: Game, d: int, delta=None, mode: str = "op", penalty: float = 100.0,
                 margin: float = 0.05):
        if mode not in ("op", "st", "unconstrained"):
            raise ValueError(f"unknown mode {mode!r}")
        self.game = game
        self.coef = game.coefficients.astype(complex)
        self.layout = Layout(game.n, game.k, d)
        self.mode = mode
        self.delta = None if delta is None else float(delta)
        self.penalty = penalty
        self.margin = margin

    @property
    def defect_mode(self) -> str:
        return "op" if self.mode == "unconstrained" else self.mode

    def __call__(self, theta, grad: bool = True) -> Evaluation:
        ma, mb, v = self.layout.unpack(theta)
        A, ca = povm_forward(ma)
        B, cb = povm_forward(mb)
        rho, cr = state_forward(v)
        RA, csa = sqrt_forward(A)
        RB, csb = sqrt_forward(B)
        value, gop = bullet_value(self.coef, A, RA, B, RB, rho)
        table, _, aux = defect_table(A, B, rho, self.defect_mode)
        dmax = float(table.max())
        obj = value
        excess = 0.0
        active = self.mode != "unconstrained" and self.delta is not None
        if active:
            excess = max(0.0, dmax - self.delta * (1 - self.margin))
            obj -= self.penalty * excess**2
        if not grad:
            return Evaluation(obj, value, dmax, None, A, B, rho)
        a_bar, ra_bar, b_bar, rb_bar = bullet_value_backward(self.coef, A, RA, B, RB, rho)
        a_bar = a_bar + sqrt_backward(csa, ra_bar)
        b_bar = b_bar + sqrt_backward(csb, rb_bar)
        rho_bar = gop.copy()
        if active and excess > 0:
            x, y = np.unravel_index(int(np.argmax(table)), table.shape)
            da, db, dr = defect_backward(A, B, rho, self.defect_mode, aux, x, y,
                                         -2 * self.penalty * excess)
            a_bar += da
            b_bar += db
            rho_bar += dr
        g = self.layout.pack(
            povm_backward(ca, a_bar), povm_backward(cb, b_bar), state_backward(cr, rho, rho_bar)
        )
        return Evaluation(obj, value, dmax, g, A, B, rho)


class LocalObjective:
    """Winning probability of a tensor strategy as a function of one player's parameters."""

    def __init__(self, game: Game, d_self: int, d_other: int, player: str):
        self.coef = game.coefficients.astype(complex)
        self.n, self.k = game.n, game.k
        self.d_self, self.d_other = d_self, d_other
        self.player = player

    def effective(self, other, rho):
        """Linear functional ``K`` with value ``sum tr(K[x,a] E[x,a])`` for own effects ``E``."""
        da, db = (self.d_self, self.d_other) if self.player == "alice" else (self.d_other, self.d_self)
        r = rho.reshape(da, db, da, db)
        if self.player == "alice":
            part = np.einsum("ikjl,ylk->yij", r, other.reshape(-1, db, db))
            part = part.reshape(self.n, self.k, da, da)
            return np.einsum("xyab,ybij->xaij", self.coef, part)
        part = np.einsum("ikjl,xji->xkl", r, other.reshape(-1, da, da))
        part = part.reshape(self.n, self.k, db, db)
        # tr(rho (A (x) B)) = sum r[i,k,j,l] A[j,i] B[l,k]: cotangent of B is indexed [k, l]
        return np.einsum("xyab,xakl->ybkl", self.coef, part)

    def __call__(self, m, kmat, grad: bool = True):
        E, cache = povm_forward(m)
        val = float(np.sum(np.swapaxes(kmat, -1, -2) * E).real)
        if not grad:
            return val, None, E
        return val, povm_backward(cache, _h(kmat)), E
