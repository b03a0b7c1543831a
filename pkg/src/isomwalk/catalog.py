"""Named example measures used by the tests, the acceptance suite and the CLI."""

import numpy as np

from isomwalk.isomcore import rotation2d
from isomwalk.measure import AtomicIsometryMeasure, reverse

# Angles with pairwise irrational differences (in units of 2*pi), so the
# closure of the generated rotation group is all of SO(2).
ROTATION_RICH_ANGLES = (1.0, 1.0 + np.sqrt(2.0), 1.0 - np.sqrt(3.0), 2.2)
ROTATION_RICH_TRANSLATIONS = ((1.0, 0.0), (-0.3, 0.8), (-0.2, -0.5), (-0.5, -0.3))

# One rare long step plus short generic steps; the last short step is chosen
# so the barycenter is the origin. Many generic steps keep the support rich at
# fine scales, the rare long step makes the walk strongly skewed.
SKEW_LONG_STEP = (3.0, 0.0)
SKEW_LONG_WEIGHT = 0.05
SKEW_SHORT_STEPS = ((-0.3637, -0.2076), (-0.3449, -0.3932), (-0.2547, -0.3426), (-0.117, 0.252),
                    (-0.0875, 0.7728), (-0.0649, -0.3626))


def dirac(g):
    return AtomicIsometryMeasure.dirac(g)


def line_lattice(d=2):
    """``1/2 (I, +e1) + 1/2 (I, -e1)``: degenerate, supported on a line lattice."""
    e1 = np.eye(d)[0]
    return AtomicIsometryMeasure(np.array([np.eye(d)] * 2), np.array([e1, -e1]), [0.5, 0.5])


def square_lattice():
    """Simple random walk on Z^2: translations ``+-e1, +-e2`` with weight 1/4."""
    t = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    return AtomicIsometryMeasure(np.array([np.eye(2)] * 4), t, [0.25] * 4)


def rotation_rich():
    """Centered d = 2 measure whose rotation closure is dense in SO(2)."""
    rots = np.array([rotation2d(a) for a in ROTATION_RICH_ANGLES])
    return AtomicIsometryMeasure(rots, np.array(ROTATION_RICH_TRANSLATIONS), [0.25] * 4)


def skew_turn():
    """Centered, asymmetric: eight translations each followed by a 120 degree turn.

    All rotation parts coincide, so the closure group is trivial and the
    flip condition fails; the measure is not symmetric.
    """
    n = len(SKEW_SHORT_STEPS) + 1
    w_short = (1.0 - SKEW_LONG_WEIGHT) / n
    short = np.array(SKEW_SHORT_STEPS)
    last = -(SKEW_LONG_WEIGHT * np.array(SKEW_LONG_STEP) + w_short * short.sum(0)) / w_short
    t = np.vstack([SKEW_LONG_STEP, short, last])
    w = np.r_[SKEW_LONG_WEIGHT, np.full(n, w_short)]
    r = rotation2d(2 * np.pi / 3)
    return AtomicIsometryMeasure(np.array([r] * (n + 1)), t, w)


def skew_turn_symmetric():
    """Equal mixture of ``skew_turn`` and its reversal: centered and symmetric."""
    mu = skew_turn()
    rev = reverse(mu)
    return AtomicIsometryMeasure(np.concatenate([mu.rotations, rev.rotations]),
                                 np.concatenate([mu.translations, rev.translations]),
                                 np.concatenate([mu.weights, rev.weights]) / 2)


def half_turns(eps=0.5):
    """Two half turns about ``(1, 0)`` and ``(1, eps)``; uncentered."""
    r = -np.eye(2)
    return AtomicIsometryMeasure(np.array([r, r]), np.array([[2.0, 0.0], [2.0, 2 * eps]]), [0.5, 0.5])


CATALOG = {
    "line_lattice": line_lattice,
    "square_lattice": square_lattice,
    "rotation_rich": rotation_rich,
    "skew_turn": skew_turn,
    "skew_turn_symmetric": skew_turn_symmetric,
    "half_turns": half_turns,
}


def by_name(name):
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown example measure {name!r}; known: {sorted(CATALOG)}") from None


__all__ = ["CATALOG", "by_name", "dirac", "line_lattice", "square_lattice", "rotation_rich",
           "skew_turn", "skew_turn_symmetric", "half_turns"]
