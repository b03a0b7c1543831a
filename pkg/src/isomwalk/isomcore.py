"""Isometries of R^d and numerical tools for compact rotation groups.

Rotations are plain ``(d, d)`` float arrays. An isometry ``g = (theta, v)``
acts by ``g(x) = v + theta @ x``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from isomwalk.errors import DimensionMismatch, GroupNotFinite, InvariantSplitError

ORTHO_TOL = 1e-12
GROUP_MATCH_TOL = 1e-9


# ----------------------------------------------------------------------
# rotations

def orthonormalize(m):
    """Nearest orthogonal matrix (polar factor of the SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    return u @ vt


def orthogonality_defect(m):
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(m.T @ m - np.eye(m.shape[0]))))


def as_rotation(m, tol=1e-9):
    """Validate ``m`` as an orthogonal matrix, snapping tiny drift.

    Matrices within ``tol`` of orthogonal are re-orthonormalized so that the
    result is orthogonal to ``ORTHO_TOL``; anything further off is rejected.
    """
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"rotation must be square, got shape {m.shape}")
    defect = orthogonality_defect(m)
    if defect > tol:
        raise ValueError(f"matrix is not orthogonal (defect {defect:.3g})")
    if defect > ORTHO_TOL:
        m = orthonormalize(m)
    return m


def rotation2d(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def reflection2d(angle):
    """Reflection across the line through the origin at ``angle / 2``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [s, -c]])


def rotation3d(axis, angle):
    """Rotation by ``angle`` about ``axis`` (Rodrigues formula)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


# ----------------------------------------------------------------------
# isometries

@dataclass(frozen=True)
class Isometry:
    """The map ``x -> v + theta @ x``."""

    theta: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        theta = as_rotation(self.theta)
        v = np.array(self.v, dtype=float).reshape(-1)
        if v.shape[0] != theta.shape[0]:
            raise DimensionMismatch(
                f"translation has length {v.shape[0]}, rotation is {theta.shape[0]}x{theta.shape[0]}")
        theta.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "v", v)

    @property
    def dim(self):
        return self.v.shape[0]

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def translation(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(np.eye(v.shape[0]), v)

    def __matmul__(self, other):
        return compose(self, other)

    def __call__(self, x):
        return apply(self, x)

    def inverse(self):
        return invert(self)

    def close_to(self, other, tol=GROUP_MATCH_TOL):
        return (np.max(np.abs(self.theta - other.theta)) <= tol
                and np.max(np.abs(self.v - other.v)) <= tol)


def _check_dims(*dims):
    if len(set(dims)) != 1:
        raise DimensionMismatch(f"dimension mismatch: {dims}")


def compose(g1, g2):
    """``g1 ∘ g2``, i.e. ``(v1 + theta1 v2, theta1 theta2)``."""
    _check_dims(g1.dim, g2.dim)
    theta = g1.theta @ g2.theta
    if orthogonality_defect(theta) > ORTHO_TOL:
        theta = orthonormalize(theta)
    return Isometry(theta, g1.v + g1.theta @ g2.v)


def invert(g):
    """``(-theta^T v, theta^T)``."""
    return Isometry(g.theta.T, -(g.theta.T @ g.v))


def apply(g, x):
    """``v + theta x``; ``x`` may be a single point or an ``(n, d)`` array."""
    x = np.asarray(x, dtype=float)
    _check_dims(g.dim, x.shape[-1])
    if x.ndim == 1:
        return g.v + g.theta @ x
    return x @ g.theta.T + g.v


# ----------------------------------------------------------------------
# group models

def _fixed_space(mats, tol=1e-9):
    """Orthonormal basis (columns) of the common fixed space of ``mats``."""
    mats = list(mats)
    n = mats[0].shape[0]
    a = np.concatenate([m - np.eye(n) for m in mats], axis=0)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def _sym_basis(d):
    """Orthonormal basis of symmetric d x d matrices (Frobenius inner product)."""
    basis = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(e)
    return np.array(basis)


def symmetric_commutant(generators, tol=1e-9):
    """Orthonormal basis of symmetric matrices commuting with every generator.

    For an orthogonal action this is exactly the range of Haar averaging
    ``A -> E[sigma A sigma^T]``, so the result does not depend on sampling.
    """
    gens = [np.asarray(g, dtype=float) for g in generators]
    d = gens[0].shape[0]
    basis = _sym_basis(d)
    rows = []
    for g in gens:
        # conjugation map restricted to symmetric matrices, in the basis
        images = np.array([(g @ b @ g.T).ravel() for b in basis])
        rows.append(images.T - basis.reshape(len(basis), -1).T)
    a = np.concatenate(rows, axis=0)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    coeffs = vt[rank:]
    return np.einsum("kb,bij->kij", coeffs, basis)


@dataclass(frozen=True)
class RotationGroupModel:
    """Discrete stand-in for the Haar measure of a compact rotation group.

    ``elements`` carry uniform weights. For ``kind == "finite"`` they are the
    whole group; for ``kind == "ergodic"`` they are random words in the
    generators. ``continuous`` names the closure when it is known to be a
    full connected-or-not rotation group (``"SO2"``, ``"O2"``, ``"SO3"``,
    ``"O3"``), which lets callers use closed-form averages.
    """

    kind: str
    elements: np.ndarray
    generators: np.ndarray
    word_length: int = 0
    seed: Optional[int] = None
    continuous: Optional[str] = None
    _fixed: np.ndarray = field(default=None, repr=False, compare=False)
    _commutant: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=float)
        object.__setattr__(self, "_fixed", _fixed_space(gens))
        object.__setattr__(self, "_commutant", symmetric_commutant(gens))

    @property
    def dim(self):
        return self.elements.shape[1]

    @property
    def order(self):
        return self.elements.shape[0]

    @property
    def weights(self):
        return np.full(self.order, 1.0 / self.order)

    def average_vector(self, v):
        """Haar average of ``sigma v``: projection onto the common fixed space."""
        v = np.asarray(v, dtype=float)
        if self.kind == "finite":
            return np.einsum("nij,j->i", self.elements, v) / self.order
        f = self._fixed
        return f @ (f.T @ v)

    def average_form(self, a):
        """Haar average of ``sigma a sigma^T`` (projection onto the commutant)."""
        a = np.asarray(a, dtype=float)
        if self.kind == "finite":
            return np.einsum("nij,jk,nlk->il", self.elements, a, self.elements) / self.order
        sym = 0.5 * (a + a.T)
        c = self._commutant
        return np.einsum("k,kij->ij", np.einsum("kij,ij->k", c, sym), c)

    def fixed_space(self):
        return self._fixed.copy()


def close_finite_group(generators, max_order=1024, tol=GROUP_MATCH_TOL):
    """Enumerate the group generated by ``generators``.

    Breadth-first closure under left multiplication by generators, deduplicated
    in max-norm at ``tol``. Raises ``GroupNotFinite`` past ``max_order``.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    gens = [as_rotation(g) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    d = gens[0].shape[0]
    _check_dims(*(g.shape[0] for g in gens))
    elems = np.empty((max_order, d, d))
    elems[0] = np.eye(d)
    n = 1
    head = 0
    while head < n:
        cur = elems[head]
        head += 1
        for g in gens:
            cand = g @ cur
            if np.min(np.max(np.abs(elems[:n] - cand), axis=(1, 2))) <= tol:
                continue
            if n >= max_order:
                raise GroupNotFinite(f"closure exceeds {max_order} elements")
            elems[n] = orthonormalize(cand)
            n += 1
    return RotationGroupModel("finite", elems[:n].copy(), np.array(gens))


def ergodic_haar(generators, word_length=64, samples=4096, seed=0, closure_probe=512):
    """Approximate Haar sampling by random words in the generators and inverses.

    Each sample multiplies ``word_length`` factors drawn uniformly from the
    generators and their inverses, plus one more factor with probability
    1/2. The random parity removes the period-2 obstruction of symmetric
    words (even words in a rotation by 90 degrees never reach odd powers).
    The closure type is probed so that continuous groups in d = 2, 3 get
    tagged for closed-form averaging.
    """
    gens = [as_rotation(g) for g in generators]
    if not gens:
        raise ValueError("ergodic_haar needs at least one generator")
    if word_length < 1 or samples < 1:
        raise ValueError("word_length and samples must be >= 1")
    d = gens[0].shape[0]
    _check_dims(*(g.shape[0] for g in gens))
    pool = np.array(gens + [g.T for g in gens])
    rng = np.random.default_rng(seed)
    cur = np.broadcast_to(np.eye(d), (samples, d, d)).copy()
    for _ in range(word_length):
        idx = rng.integers(0, len(pool), size=samples)
        cur = np.einsum("nij,njk->nik", pool[idx], cur)
    extra = rng.random(samples) < 0.5
    idx = rng.integers(0, len(pool), size=samples)
    cur[extra] = np.einsum("nij,njk->nik", pool[idx[extra]], cur[extra])
    u, _, vt = np.linalg.svd(cur)
    cur = u @ vt
    continuous = _classify_closure(gens, closure_probe)
    return RotationGroupModel("ergodic", cur, np.array(gens), word_length, seed, continuous)


def _classify_closure(gens, probe):
    d = gens[0].shape[0]
    if d not in (2, 3):
        return None
    try:
        close_finite_group(gens, max_order=probe)
        return None
    except GroupNotFinite:
        pass
    has_reflection = any(np.linalg.det(g) < 0 for g in gens)
    if d == 2:
        # closed infinite subgroups of O(2) are SO(2) and O(2)
        return "O2" if has_reflection else "SO2"
    # in O(3) an infinite closed subgroup acting irreducibly contains SO(3)
    if symmetric_commutant(gens).shape[0] == 1:
        split = invariant_decomposition(gens)
        if len(split.blocks) == 1:
            return "O3" if has_reflection else "SO3"
    return None


def group_model_for(rotations, max_order=1024, word_length=64, samples=4096, seed=0):
    """Group model for the closure of ``{theta_i^T theta_j}`` over atom rotations.

    Uses the exact finite closure when it exists within ``max_order``,
    otherwise ergodic word sampling.
    """
    rots = np.asarray(rotations, dtype=float)
    d = rots.shape[1]
    gens = []
    for a in rots:
        for b in rots:
            g = a.T @ b
            if np.max(np.abs(g - np.eye(d))) <= GROUP_MATCH_TOL:
                continue
            if any(np.max(np.abs(g - h)) <= GROUP_MATCH_TOL for h in gens):
                continue
            gens.append(g)
    if not gens:
        gens = [np.eye(d)]
    try:
        return close_finite_group(gens, max_order=max_order)
    except GroupNotFinite:
        return ergodic_haar(gens, word_length=word_length, samples=samples, seed=seed)


# ----------------------------------------------------------------------
# invariant subspaces

@dataclass(frozen=True)
class InvariantSplit:
    """Orthogonal splitting of R^d into generator-invariant blocks.

    ``blocks`` is a list of ``(basis, kind)`` with ``basis`` a ``(d, k)``
    matrix of orthonormal columns and ``kind`` one of ``"trivial"``,
    ``"abelian"``, ``"other"``.
    """

    blocks: list

    @property
    def dims(self):
        return [b.shape[1] for b, _ in self.blocks]

    def projector(self, i):
        b = self.blocks[i][0]
        return b @ b.T


def _split_by_gaps(vals, gap):
    groups = [[0]]
    for k in range(1, len(vals)):
        if vals[k] - vals[k - 1] > gap:
            groups.append([k])
        else:
            groups[-1].append(k)
    return groups


def invariant_decomposition(generators, tol=1e-8, seed=0, probes=3, gap=1e-6):
    """Split R^d into blocks invariant under all generators.

    Random symmetric elements of the commutant are diagonalized; their
    eigenspaces are invariant. Each probe refines the blocks of the previous
    one, and eigenvalues closer than ``gap`` stay in one block. Blocks are
    then classified and all trivial blocks merged.
    """
    gens = [np.asarray(g, dtype=float) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    d = gens[0].shape[0]
    comm = symmetric_commutant(gens)
    rng = np.random.default_rng(seed)
    blocks = [np.eye(d)]
    for _ in range(probes):
        a = np.einsum("k,kij->ij", rng.standard_normal(comm.shape[0]), comm)
        scale = max(1.0, np.max(np.abs(a)))
        refined = []
        for b in blocks:
            sub = b.T @ a @ b
            vals, vecs = np.linalg.eigh(0.5 * (sub + sub.T))
            for idx in _split_by_gaps(vals, gap * scale):
                refined.append(b @ vecs[:, idx])
        blocks = refined

    out = []
    trivial = []
    for b in blocks:
        for g in gens:
            leak = np.linalg.norm(g @ b - b @ (b.T @ g @ b))
            if leak > tol:
                raise InvariantSplitError(f"block of dim {b.shape[1]} not invariant (leak {leak:.3g})")
        if all(np.linalg.norm(g @ b - b) <= tol for g in gens):
            trivial.append(b)
            continue
        restricted = [b.T @ g @ b for g in gens]
        commuting = all(np.linalg.norm(x @ y - y @ x) <= tol
                        for i, x in enumerate(restricted) for y in restricted[i + 1:])
        out.append((b, "abelian" if commuting else "other"))
    if trivial:
        out.append((np.concatenate(trivial, axis=1), "trivial"))
    return InvariantSplit(out)
