"""Finitely supported probability measures on the isometry group.

A measure stores its atoms as stacked arrays: ``rotations`` ``(n, d, d)``,
``translations`` ``(n, d)`` and ``weights`` ``(n,)``. Atoms closer than
``MERGE_TOL`` (max-norm over all entries) are merged on construction and the
atom list is kept in a canonical order, so equal measures compare equal
array by array.
"""

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from isomwalk.errors import AtomExplosion, DimensionMismatch, NonUniqueFixedPoint
from isomwalk.isomcore import (
    ORTHO_TOL,
    Isometry,
    RotationGroupModel,
    invariant_decomposition,
)

MERGE_TOL = 1e-9
CONVOLVE_CAP = 1_000_000
WEIGHT_TOL = 1e-9


def merge_points(points, weights, tol=MERGE_TOL):
    """Merge rows of ``points`` closer than ``tol`` in max-norm.

    Returns ``(points, weights)`` with rows in lexicographic order;
    each merged group is represented by its lexicographically first row.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = points.shape[0]
    if n == 0:
        return points, weights
    order = np.lexsort(points.T[::-1])
    points = points[order]
    weights = weights[order]
    pairs = cKDTree(points).query_pairs(tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return points, weights
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # label of each group -> first (smallest sorted index) member
    first = np.full(labels.max() + 1, n)
    np.minimum.at(first, labels, np.arange(n))
    merged_w = np.bincount(labels, weights=weights)
    keep = np.sort(first)
    lab_of_keep = labels[keep]
    return points[keep], merged_w[lab_of_keep]


class AtomicIsometryMeasure:
    """Probability measure with finitely many atoms on Isom(R^d)."""

    def __init__(self, rotations, translations, weights, merge_tol=MERGE_TOL, normalize=False):
        rot = np.array(rotations, dtype=float)
        trans = np.array(translations, dtype=float)
        w = np.array(weights, dtype=float).reshape(-1)
        if trans.ndim == 1:
            trans = trans[None, :]
        if rot.ndim == 2:
            rot = rot[None, :, :]
        n, d = trans.shape
        if rot.shape != (n, d, d):
            raise DimensionMismatch(f"rotations {rot.shape} do not match translations {trans.shape}")
        if w.shape != (n,):
            raise DimensionMismatch(f"{w.shape[0]} weights for {n} atoms")
        if n == 0:
            raise ValueError("measure needs at least one atom")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be positive")
        total = w.sum()
        if not normalize and abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        w = w / total
        defect = np.max(np.abs(np.einsum("nji,njk->nik", rot, rot) - np.eye(d)))
        if defect > 1e-9:
            raise ValueError(f"rotation parts are not orthogonal (defect {defect:.3g})")
        if defect > ORTHO_TOL:
            u, _, vt = np.linalg.svd(rot)
            rot = u @ vt
        feats, w = merge_points(np.concatenate([rot.reshape(n, d * d), trans], axis=1), w, merge_tol)
        m = feats.shape[0]
        self.rotations = feats[:, : d * d].reshape(m, d, d)
        self.translations = feats[:, d * d:].copy()
        self.weights = w
        for a in (self.rotations, self.translations, self.weights):
            a.flags.writeable = False

    @classmethod
    def from_atoms(cls, atoms, **kw):
        """Build from an iterable of ``(Isometry, weight)`` pairs."""
        atoms = list(atoms)
        return cls([g.theta for g, _ in atoms], [g.v for g, _ in atoms], [w for _, w in atoms], **kw)

    @classmethod
    def dirac(cls, g):
        return cls(g.theta[None], g.v[None], [1.0])

    @property
    def dim(self):
        return self.translations.shape[1]

    @property
    def size(self):
        return self.weights.shape[0]

    def __len__(self):
        return self.size

    def atoms(self):
        return [(Isometry(r, v), float(w)) for r, v, w in zip(self.rotations, self.translations, self.weights)]

    @property
    def cumulative(self):
        c = np.cumsum(self.weights)
        c[-1] = 1.0
        return c

    def is_translation_only(self):
        return bool(np.all(self.rotations == np.eye(self.dim)))

    def same_as(self, other, tol=1e-12):
        """Atom-by-atom equality of canonical representations."""
        return (self.dim == other.dim and self.size == other.size
                and np.max(np.abs(self.rotations - other.rotations)) <= tol
                and np.max(np.abs(self.translations - other.translations)) <= tol
                and np.max(np.abs(self.weights - other.weights)) <= tol)

    def barycenter(self):
        """``sum_i w_i v_i``, the mean image of the origin."""
        return self.weights @ self.translations

    def mean_rotation(self):
        return np.einsum("n,nij->ij", self.weights, self.rotations)

    def __repr__(self):
        return f"AtomicIsometryMeasure(d={self.dim}, atoms={self.size})"


def convolve(mu, nu, cap=CONVOLVE_CAP):
    """Law of ``g h`` with ``g ~ mu``, ``h ~ nu`` independent."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"convolving d={mu.dim} with d={nu.dim}")
    n, m = mu.size, nu.size
    if n * m > cap:
        raise AtomExplosion(f"convolution has {n * m} atom pairs, cap is {cap}")
    rot = np.einsum("aij,bjk->abik", mu.rotations, nu.rotations).reshape(n * m, mu.dim, mu.dim)
    trans = (mu.translations[:, None, :]
             + np.einsum("aij,bj->abi", mu.rotations, nu.translations)).reshape(n * m, mu.dim)
    w = (mu.weights[:, None] * nu.weights[None, :]).reshape(-1)
    return AtomicIsometryMeasure(rot, trans, w, normalize=True)


def convolution_power(mu, k, cap=CONVOLVE_CAP):
    """``mu^{*k}``; ``k = 0`` gives the Dirac mass at the identity."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out = AtomicIsometryMeasure.dirac(Isometry.identity(mu.dim))
    for _ in range(k):
        out = convolve(out, mu, cap)
    return out


def reverse(mu):
    """Pushforward under inversion ``g -> g^{-1}``."""
    rt = np.transpose(mu.rotations, (0, 2, 1))
    return AtomicIsometryMeasure(rt, -np.einsum("nij,nj->ni", rt, mu.translations), mu.weights,
                                 normalize=True)


def symmetrize(mu, cap=CONVOLVE_CAP):
    """``reverse(mu) * mu``, a symmetric measure."""
    return convolve(reverse(mu), mu, cap)


def rotation_marginal(mu):
    """Pushforward to the rotation parts as ``(rotations, weights)`` arrays."""
    d = mu.dim
    pts, w = merge_points(mu.rotations.reshape(mu.size, d * d), mu.weights)
    return pts.reshape(-1, d, d), w


def moment(mu, order):
    """``sum_i w_i |v_i|^order``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    return float(mu.weights @ np.power(np.linalg.norm(mu.translations, axis=1), order))


def conjugate_by_translation(mu, x):
    """Atoms ``g -> t_x^{-1} g t_x``: translations become ``v + theta x - x``."""
    x = np.asarray(x, dtype=float)
    trans = mu.translations + np.einsum("nij,j->ni", mu.rotations, x) - x
    return AtomicIsometryMeasure(mu.rotations, trans, mu.weights, normalize=True)


def center(mu, sv_tol=1e-10):
    """Move the origin to the unique point ``x`` with ``E[g(x)] = x``.

    Returns ``(centered_measure, x)``. Raises ``NonUniqueFixedPoint`` when the
    mean rotation fixes a nonzero vector.
    """
    a = np.eye(mu.dim) - mu.mean_rotation()
    smin = np.linalg.svd(a, compute_uv=False)[-1]
    if smin < sv_tol:
        raise NonUniqueFixedPoint(f"I - E[theta] is singular (smallest singular value {smin:.3g})")
    x = np.linalg.solve(a, mu.barycenter())
    return conjugate_by_translation(mu, x), x


@dataclass
class ConditionReport:
    condition: str
    verdict: str  # holds | fails | inconclusive
    witness: Any = None
    params: dict = field(default_factory=dict)
    level: Optional[int] = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        def conv(o):
            if isinstance(o, np.ndarray):
                return o.tolist()
            if isinstance(o, (np.floating, np.integer)):
                return o.item()
            if isinstance(o, dict):
                return {k: conv(v) for k, v in o.items()}
            if isinstance(o, (list, tuple)):
                return [conv(v) for v in o]
            return o
        return {"condition": self.condition, "verdict": self.verdict, "witness": conv(self.witness),
                "params": conv(self.params), "level": self.level, "details": conv(self.details)}


def check_condition_C(mu, tol=1e-9):
    """Barycenter of the images of the origin vanishes."""
    b = mu.barycenter()
    verdict = "holds" if np.linalg.norm(b) <= tol else "fails"
    return ConditionReport("C", verdict, witness=b, params={"tol": tol})


def _random_unit_vectors(d, n, seed):
    x = np.random.default_rng(seed).standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def check_condition_E(mu, group: RotationGroupModel, probe_count=64, tol=1e-6, seed=0):
    """Every direction is flipped by some element of the group.

    Full rotation groups in d = 2, 3 are decided exactly (a half turn about an
    axis orthogonal to ``v`` always exists). Otherwise the group elements are
    searched for each random probe; a miss is a failure for a finite group
    and inconclusive for a sampled one.
    """
    params = {"probe_count": probe_count, "tol": tol, "seed": seed, "group_kind": group.kind}
    if group.continuous is not None:
        return ConditionReport("E", "holds", params=params, details={"exact": group.continuous})
    probes = _random_unit_vectors(group.dim, probe_count, seed)
    # residual[p, n] = |sigma_n v_p + v_p|
    images = np.einsum("nij,pj->pni", group.elements, probes)
    resid = np.linalg.norm(images + probes[:, None, :], axis=2).min(axis=1)
    bad = np.flatnonzero(resid > tol)
    if bad.size == 0:
        return ConditionReport("E", "holds", params=params, details={"max_residual": float(resid.max())})
    verdict = "fails" if group.kind == "finite" else "inconclusive"
    return ConditionReport("E", verdict, witness=probes[bad[0]], params=params,
                           details={"residual": float(resid[bad[0]]), "misses": int(bad.size)})


def check_ssr_diagnostic(group: RotationGroupModel, tol=1e-8):
    """Heuristic look at the identity component of the group closure.

    A finite group has a trivial identity component, which fixes every
    vector; a closure tagged as SO(2) or O(2) has an abelian identity
    component. For other sampled groups the generator-invariant splitting is used: a
    trivial block exposes fixed vectors, an abelian block is flagged as
    inconclusive since commutation of generators is only a proxy.
    """
    d = group.dim
    if group.kind == "finite":
        return ConditionReport("SSR-diagnostic", "fails", witness=np.eye(d)[0],
                               details={"reason": "finite group: identity component is trivial"})
    if group.continuous in ("SO2", "O2"):
        return ConditionReport("SSR-diagnostic", "fails", witness=np.eye(d),
                               details={"reason": "identity component SO(2) is abelian", "exact": group.continuous})
    if group.continuous in ("SO3", "O3"):
        return ConditionReport("SSR-diagnostic", "holds", details={"exact": group.continuous})
    split = invariant_decomposition(group.generators, tol=tol)
    kinds = [k for _, k in split.blocks]
    details = {"blocks": [(b.shape[1], k) for b, k in split.blocks]}
    for b, k in split.blocks:
        if k == "trivial":
            return ConditionReport("SSR-diagnostic", "fails", witness=b[:, 0], details=details)
    if "abelian" in kinds:
        b = next(b for b, k in split.blocks if k == "abelian")
        return ConditionReport("SSR-diagnostic", "inconclusive", witness=b, details=details)
    return ConditionReport("SSR-diagnostic", "holds", details=details)


def affine_rank(points, rel_tol=1e-9):
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 2:
        return 0
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def check_almost_nondegenerate(mu, test_points=None, k_max=3, cap=CONVOLVE_CAP, rel_tol=1e-9):
    """Do the images of each test point under ``supp mu^{*k}`` affinely span R^d?

    Reports the smallest ``k <= k_max`` at which every test point passes, or
    fails with the worst point and its rank at ``k_max``.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    d = mu.dim
    pts = np.zeros((1, d)) if test_points is None else np.atleast_2d(np.asarray(test_points, dtype=float))
    params = {"k_max": k_max, "rel_tol": rel_tol, "test_points": pts}
    power = mu
    ranks = []
    for k in range(1, k_max + 1):
        if k > 1:
            power = convolve(power, mu, cap)
        ranks = [affine_rank(pts[i] @ np.transpose(power.rotations, (0, 2, 1)) + power.translations, rel_tol)
                 for i in range(len(pts))]
        if min(ranks) == d:
            return ConditionReport("almost-nondegenerate", "holds", params=params, level=k,
                                   details={"ranks": ranks})
    worst = int(np.argmin(ranks))
    return ConditionReport("almost-nondegenerate", "fails", witness=pts[worst], params=params,
                           details={"ranks": ranks, "rank": ranks[worst]})


def theta0(mu):
    """Designated rotation: the rotation part of the first atom."""
    return mu.rotations[0].copy()


def coset_defect(mu, group: RotationGroupModel):
    """Largest distance of ``theta0^T theta_i`` from the group elements.

    Zero (to matching tolerance) when all rotation parts lie in ``theta0 K``.
    For sampled groups this is only indicative.
    """
    t0 = theta0(mu)
    rel = np.einsum("ji,njk->nik", t0, mu.rotations)
    worst = 0.0
    for r in rel:
        worst = max(worst, float(np.min(np.max(np.abs(group.elements - r), axis=(1, 2)))))
    return worst


__all__ = [
    "AtomicIsometryMeasure", "ConditionReport", "MERGE_TOL", "CONVOLVE_CAP",
    "merge_points", "convolve", "convolution_power", "reverse", "symmetrize", "rotation_marginal",
    "moment", "conjugate_by_translation", "center", "check_condition_C", "check_condition_E",
    "check_ssr_diagnostic", "check_almost_nondegenerate", "affine_rank", "theta0", "coset_defect",
]
