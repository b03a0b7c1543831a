import itertools

import numpy as np
import pytest

from isomwalk.isomcore import Isometry


def brute_force_law(mu, x0, steps):
    """Law of ``Y_l`` by walking every word with ``Isometry`` objects; dict point-tuple -> prob.

    Independent of ``exact_distribution``: no vectorization, no merging
    tolerance beyond rounding keys to 12 decimals.
    """
    atoms = [(w, Isometry(rot, v)) for w, rot, v in zip(mu.weights, mu.rotations, mu.translations)]
    law = {}
    x0 = np.asarray(x0, dtype=float)
    for word in itertools.product(atoms, repeat=steps):
        p = 1.0
        y = x0
        for w, g in word:
            p *= w
            y = g(y)
        key = tuple(np.round(y, 12) + 0.0)
        law[key] = law.get(key, 0.0) + p
    return law


def brute_force_charfn(law, xi):
    return sum(p * np.exp(-2j * np.pi * np.dot(pt, xi)) for pt, p in law.items())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
