"""Random objects shared by the test modules."""

import numpy as np

from acg.linalg import State
from acg.optimize.objective import povm_forward
from acg.strategy import MeasurementFamily, Strategy


def random_herm(rng, d, scale=1.0):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (z + z.conj().T) / 2


def random_povm_effects(rng, k, d):
    m = rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))
    return povm_forward(m, eps=0.0)[0]


def random_family(rng, n, k, d):
    return MeasurementFamily.from_effects([random_povm_effects(rng, k, d) for _ in range(n)])


def random_state(rng, d):
    v = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    w = v.conj().T @ v
    return State.from_rho(w / np.trace(w).real)


def random_strategy(rng, n, k, d):
    return Strategy(random_family(rng, n, k, d), random_family(rng, n, k, d), random_state(rng, d))
