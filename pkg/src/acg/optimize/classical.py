"""Exact classical value by enumerating deterministic strategies."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from ..errors import BudgetError
from ..game import Game

MAX_PAIRS = 10**7


def best_deterministic(g: Game) -> tuple[Fraction, tuple[int, ...], tuple[int, ...]]:
    """Best deterministic pair ``(value, alice answers, bob answers)``, 0-based answers.

    Every pair of answer functions ``[n] -> [k]`` is scored in integer
    arithmetic after clearing the denominators of ``pi``. Ties go to the
    lexicographically first pair.
    """
    n, k = g.n, g.k
    if k ** (2 * n) > MAX_PAIRS:
        raise BudgetError(f"k^(2n) = {k ** (2 * n)} deterministic pairs exceeds {MAX_PAIRS}")
    denom = math.lcm(*(Fraction(p).denominator for p in g.pi.ravel()))
    w = np.array([[int(Fraction(p) * denom) for p in row] for row in g.pi], dtype=np.int64)
    funcs = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)  # (k^n, n)
    ys = np.arange(n)
    best = (-1, None, None)
    for f in funcs:
        # score[y, b] = sum_x w[x, y] D[x, y, f(x), b]
        score = np.einsum("xy,xyb->yb", w, g.D[np.arange(n), :, f, :])
        totals = score[ys, funcs].sum(axis=1)  # one total per Bob function
        j = int(np.argmax(totals))
        if totals[j] > best[0]:
            best = (int(totals[j]), tuple(int(v) for v in f), tuple(int(v) for v in funcs[j]))
    return Fraction(best[0], denom), best[1], best[2]


def classical_value(g: Game) -> Fraction:
    return best_deterministic(g)[0]
