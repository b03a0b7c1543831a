"""Fourier-side walk operator on the unit sphere.

Functions on S^{d-1} (d = 2, 3) are sampled on a quadrature grid. One walk
step acts on the restriction of a characteristic function to the radius-r
sphere by

    (S_r phi)(xi) = sum_g w_g e(r <xi, v_g>) phi(theta_g^{-1} xi),   e(x) = exp(-2 pi i x).

Rotating a sampled field uses band-limited interpolation: trigonometric
interpolation on the circle (exact node permutations when the angle is a
multiple of the grid spacing) and spherical-harmonic projection on S^2.
All operators are dense matrices in node coordinates; norms are taken in
the quadrature-weighted L^2 metric, computed in the unitary coordinates
``u = sqrt(w) * values``.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, ArpackNoConvergence, eigsh
from scipy.special import j0, sph_harm_y

from isomwalk.errors import DimensionMismatch, InterpolationOverflow, ProjectorRankError
from isomwalk.isomcore import RotationGroupModel

OVERFLOW_TOL = 1e-6
ALIGN_TOL = 1e-9
RANK_TOL = 1e-8


def e(x):
    """``exp(-2 pi i x)``."""
    return np.exp(-2j * np.pi * x)


# ----------------------------------------------------------------------
# grids and fields

@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and probability weights on S^{d-1}.

    ``band`` is the largest harmonic degree carried by interpolation and
    ``order`` the largest polynomial degree integrated exactly.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int
    band: int
    order: int
    _harmonics: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self):
        return self.nodes.shape[0]

    def integrate(self, values):
        return np.sum(self.weights * np.asarray(values))

    @property
    def sqrt_weights(self):
        return np.sqrt(self.weights)


def build_grid(d, resolution=None):
    """Circle: ``resolution`` equispaced nodes (even, >= 16, default 256).

    Sphere: Gauss-Legendre in ``cos(polar)`` with ``resolution + 1`` nodes
    times ``2 resolution + 2`` equispaced azimuths (``resolution >= 4``,
    default 24); exact to polynomial degree ``2 resolution + 1``.
    """
    if d == 2:
        n = 256 if resolution is None else int(resolution)
        if n < 16 or n % 2:
            raise ValueError("circle grid needs an even number of nodes >= 16")
        ang = 2 * np.pi * np.arange(n) / n
        nodes = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return SphereGrid(2, nodes, np.full(n, 1.0 / n), n, n // 2 - 1, n - 1)
    if d == 3:
        lmax = 24 if resolution is None else int(resolution)
        if lmax < 4:
            raise ValueError("sphere grid needs resolution >= 4")
        x, wx = np.polynomial.legendre.leggauss(lmax + 1)
        nphi = 2 * lmax + 2
        phi = 2 * np.pi * np.arange(nphi) / nphi
        polar = np.arccos(x)
        pp, ff = np.meshgrid(polar, phi, indexing="ij")
        nodes = np.stack([np.sin(pp) * np.cos(ff), np.sin(pp) * np.sin(ff), np.cos(pp)], axis=-1).reshape(-1, 3)
        weights = (np.repeat(wx, nphi) / (2.0 * nphi))
        harm = _harmonics(nodes, lmax)
        return SphereGrid(3, nodes, weights, lmax, lmax, 2 * lmax + 1, harm)
    raise DimensionMismatch(f"sphere grids exist for d = 2, 3, not d = {d}")


def _harmonics(points, lmax):
    """Complex spherical harmonics, orthonormal for the probability measure; shape (n, (lmax+1)^2)."""
    pts = np.asarray(points, dtype=float)
    polar = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
    azim = np.arctan2(pts[:, 1], pts[:, 0])
    cols = []
    for deg in range(lmax + 1):
        for m in range(-deg, deg + 1):
            cols.append(sph_harm_y(deg, m, polar, azim))
    return np.sqrt(4 * np.pi) * np.stack(cols, axis=1)


@dataclass(eq=False)
class SphericalField:
    """Complex samples of a function on the nodes of ``grid``."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if self.values.shape[0] != self.grid.size:
            raise DimensionMismatch(f"{self.values.shape[0]} values for {self.grid.size} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    def norm(self):
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))

    def inner(self, other):
        """``<self, other> = sum_k w_k conj(self_k) other_k``."""
        return complex(np.sum(self.grid.weights * np.conj(self.values) * other.values))

    def __sub__(self, other):
        return SphericalField(self.grid, self.values - other.values)

    def __add__(self, other):
        return SphericalField(self.grid, self.values + other.values)

    def scaled(self, c):
        return SphericalField(self.grid, c * self.values)


def restrict(fn, r, grid):
    """``xi -> fn(r xi)`` on the nodes; ``fn`` maps an ``(n, d)`` array to ``n`` values."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    return SphericalField(grid, np.asarray(fn(r * grid.nodes), dtype=complex))


def psi0(x0, r, grid):
    """Restriction of the characteristic function of the point mass at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    return restrict(lambda xi: e(xi @ x0), r, grid)


def random_field(grid, seed=0, band=None):
    """Random field with harmonic content up to degree ``band`` (default: a quarter of the grid band)."""
    rng = np.random.default_rng(seed)
    band = max(1, grid.band // 4) if band is None else band
    if grid.dim == 2:
        ang = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        m = np.arange(-band, band + 1)
        c = rng.standard_normal(m.size) + 1j * rng.standard_normal(m.size)
        vals = np.exp(1j * np.outer(ang, m)) @ c
    else:
        k = (band + 1) ** 2
        c = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        vals = grid._harmonics[:, :k] @ c
    return SphericalField(grid, vals)


# ----------------------------------------------------------------------
# rotation operators

def _angle_of(theta):
    return float(np.arctan2(theta[1, 0], theta[0, 0]))


def _aligned_shift(angle, n):
    s = angle * n / (2 * np.pi)
    k = np.rint(s)
    if abs(s - k) <= ALIGN_TOL * n:
        return int(k) % n
    return None


def rotation_operator(theta, grid):
    """Matrix ``T`` with ``(T f)(xi_k) ~ f(theta^{-1} xi_k)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (grid.dim, grid.dim):
        raise DimensionMismatch(f"rotation {theta.shape} on a d={grid.dim} grid")
    if grid.dim == 2:
        return _rotation_operator_2d(theta, grid.size)
    return _rotation_operator_3d(theta, grid)


def _rotation_operator_2d(theta, n):
    det = np.linalg.det(theta)
    beta = _angle_of(theta)
    k = np.arange(n)
    shift = _aligned_shift(beta, n)
    if shift is not None:
        t = np.zeros((n, n))
        # rotation: phi -> phi - beta; reflection: phi -> beta - phi
        src = (k - shift) % n if det > 0 else (shift - k) % n
        t[k, src] = 1.0
        return t
    phi = 2 * np.pi * k / n
    m = np.arange(-(n // 2) + 1, n // 2)  # Nyquist mode dropped
    target = phi - beta if det > 0 else beta - phi
    t = (np.exp(1j * np.outer(target, m)) @ np.exp(-1j * np.outer(m, phi))) / n
    return t


def _rotation_operator_3d(theta, grid):
    y = grid._harmonics
    y_rot = _harmonics(grid.nodes @ theta, grid.band)  # rows theta^{-1} xi = theta^T xi
    return y_rot @ (np.conj(y).T * grid.weights[None, :])


def band_overflow(values, grid):
    """Fraction of the squared norm outside the safe interpolation band."""
    values = np.asarray(values, dtype=complex)
    total = float(np.sum(grid.weights * np.abs(values) ** 2))
    if total == 0.0:
        return 0.0
    if grid.dim == 2:
        n = grid.size
        c = np.fft.fft(values) / n
        m = np.abs(np.fft.fftfreq(n, 1.0 / n))
        cap = n // 2 - n // 8
        return float(np.sum(np.abs(c[m > cap]) ** 2) / total)
    y = grid._harmonics
    coef = np.conj(y).T @ (grid.weights * values)
    return float(max(total - np.sum(np.abs(coef) ** 2), 0.0) / total)


def _check_overflow(values, grid):
    frac = band_overflow(values, grid)
    if frac > OVERFLOW_TOL:
        raise InterpolationOverflow(
            f"{frac:.3g} of the field energy lies above the grid band; use a finer grid")


# ----------------------------------------------------------------------
# the walk operator

_ROT_CACHE = {}


def _rotation_cached(theta, grid):
    key = (grid.dim, grid.resolution, theta.tobytes())
    t = _ROT_CACHE.get(key)
    if t is None:
        if len(_ROT_CACHE) > 256:
            _ROT_CACHE.clear()
        t = rotation_operator(theta, grid)
        _ROT_CACHE[key] = t
    return t


def s_r_matrix(mu, r, grid):
    """Dense matrix of ``S_r`` in node coordinates."""
    if mu.dim != grid.dim:
        raise DimensionMismatch(f"measure d={mu.dim}, grid d={grid.dim}")
    out = np.zeros((grid.size, grid.size), dtype=complex)
    for rot, v, w in zip(mu.rotations, mu.translations, mu.weights):
        phase = e(r * (grid.nodes @ v))
        out += w * (phase[:, None] * _rotation_cached(rot, grid))
    return out


def apply_S_r(mu, r, fld: SphericalField, check=True):
    """One walk step on a sampled field."""
    if check:
        _check_overflow(fld.values, fld.grid)
    return SphericalField(fld.grid, s_r_matrix(mu, r, fld.grid) @ fld.values)


def propagate(mu, r, start: SphericalField, steps, check=True):
    """``S_r^steps start``; large powers use repeated squaring."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if check:
        _check_overflow(start.values, start.grid)
    if steps == 0:
        return SphericalField(start.grid, start.values.copy())
    s = s_r_matrix(mu, r, start.grid)
    if steps <= 64:
        v = start.values
        for _ in range(steps):
            v = s @ v
        return SphericalField(start.grid, v)
    return SphericalField(start.grid, np.linalg.matrix_power(s, steps) @ start.values)


def unitary(mat, grid):
    """``W^{1/2} A W^{-1/2}``: the matrix in weighted-orthonormal coordinates."""
    sw = grid.sqrt_weights
    return (sw[:, None] * mat) / sw[None, :]


# ----------------------------------------------------------------------
# group averaging, multiplier F, projectors

def F_profile(mu, haar: RotationGroupModel, r, nodes):
    """``F(xi) = avg_sigma sum_g w_g e(r <sigma xi, v_g>)`` at each row of ``nodes``.

    Full rotation groups in d = 2, 3 use the closed forms ``J0(2 pi r |v||xi|)``
    and ``sinc``; other models average over their elements.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if haar.continuous in ("SO2", "O2", "SO3", "O3"):
        t = 2 * np.pi * r * np.outer(np.linalg.norm(nodes, axis=1), np.linalg.norm(mu.translations, axis=1))
        if haar.continuous in ("SO2", "O2"):
            vals = j0(t)
        else:
            vals = np.sinc(t / np.pi)
        return (vals @ mu.weights).astype(complex)
    out = np.zeros(nodes.shape[0], dtype=complex)
    for sigma in haar.elements:
        out += e(r * ((nodes @ sigma.T) @ mu.translations.T)) @ mu.weights
    return out / haar.order


def averaging_operator(haar: RotationGroupModel, grid):
    """Matrix of ``f -> avg_sigma f(sigma xi)`` and whether it is exact.

    Full rotation groups average to the grid mean; finite groups average
    their rotation operators; other sampled groups average samples.
    """
    n = grid.size
    if haar.continuous is not None and (grid.dim == 2 or haar.continuous in ("SO3", "O3")):
        return np.ones((n, 1)) @ grid.weights[None, :], True
    acc = np.zeros((n, n), dtype=complex)
    for sigma in haar.elements:
        acc += rotation_operator(sigma, grid)
    acc /= haar.order
    if np.max(np.abs(acc.imag)) < 1e-14:
        acc = acc.real
    return acc, haar.kind == "finite"


def _sphere_monomials(grid, degree):
    """Monomials of total degree exactly ``degree`` evaluated at the nodes; shape (n, count)."""
    from itertools import combinations_with_replacement
    cols = []
    for combo in combinations_with_replacement(range(grid.dim), degree):
        col = np.ones(grid.size)
        for i in combo:
            col = col * grid.nodes[:, i]
        cols.append(col)
    return np.stack(cols, axis=1)


def _expected_dims(haar, d, max_degree):
    if d == 2 and haar.continuous in ("SO2", "O2"):
        return [1] + [2] * max_degree
    if d == 3 and haar.continuous in ("SO3", "O3"):
        return [1] + [2 * k + 1 for k in range(1, max_degree + 1)]
    return None


@dataclass
class ProjectorSet:
    """Orthogonal projectors onto the invariant part and the graded pieces.

    ``mats[i]`` (``i = 0..max_degree``) and ``mats["inf"]`` act in unitary
    coordinates (see ``unitary``); ``dims[i]`` is the subspace dimension on
    the grid. ``exact_average`` is False when the group average came from
    random samples rather than an exact formula.
    """

    grid: SphereGrid
    mats: dict
    dims: dict
    bases: dict
    exact_average: bool

    def matrix(self, i):
        return self.mats[i]

    def apply(self, i, fld: SphericalField):
        sw = self.grid.sqrt_weights
        return SphericalField(self.grid, (self.mats[i] @ (sw * fld.values)) / sw)


def build_projectors(grid, haar: RotationGroupModel, max_degree=3, rank_tol=RANK_TOL):
    """``P_0`` from exact group averaging, ``P_k`` from degree-k polynomial multiples of the invariant part.

    ``H_k`` is the span of ``p phi`` (``p`` of degree <= k, ``phi`` invariant)
    with ``H_0 + ... + H_{k-1}`` removed. ``P_inf`` is the remainder.
    """
    if grid.order < 8:
        raise ValueError("projectors need a grid exact to degree >= 8")
    n = grid.size
    sw = grid.sqrt_weights
    avg, exact = averaging_operator(haar, grid)
    a_u = unitary(avg, grid)
    a_u = 0.5 * (a_u + np.conj(a_u).T)
    vals, vecs = np.linalg.eigh(a_u)
    h0 = vecs[:, vals > 0.5]  # unitary-coordinate orthonormal basis of the invariant part
    mats = {0: h0 @ np.conj(h0).T}
    dims = {0: h0.shape[1]}
    bases = {0: h0}
    covered = h0
    # invariant fields in node coordinates
    h0_nodes = h0 / sw[:, None]
    expected = _expected_dims(haar, grid.dim, max_degree)
    if expected is not None and dims[0] != expected[0]:
        raise ProjectorRankError(f"invariant part has dimension {dims[0]}, expected {expected[0]}")
    for k in range(1, max_degree + 1):
        if covered.shape[1] >= n:
            empty = np.zeros((n, 0), dtype=complex)
            mats[k], dims[k], bases[k] = np.zeros((n, n)), 0, empty
            continue
        monos = np.concatenate([_sphere_monomials(grid, j) for j in range(k + 1)], axis=1)
        prods = (monos[:, :, None] * h0_nodes[:, None, :]).reshape(n, -1)
        cand = sw[:, None] * prods
        scale = np.linalg.norm(cand, 2) if cand.size else 0.0
        resid = cand - covered @ (np.conj(covered).T @ cand)
        resid = resid - covered @ (np.conj(covered).T @ resid)
        u, s, _ = np.linalg.svd(resid, full_matrices=False)
        rank = int(np.sum(s > rank_tol * max(scale, 1e-300)))
        basis = u[:, :rank]
        if expected is not None and rank != expected[k]:
            raise ProjectorRankError(f"degree {k} piece has dimension {rank}, expected {expected[k]}")
        mats[k] = basis @ np.conj(basis).T
        dims[k] = rank
        bases[k] = basis
        covered = np.concatenate([covered, basis], axis=1)
    mats["inf"] = np.eye(n) - sum(mats[k] for k in range(max_degree + 1))
    dims["inf"] = n - covered.shape[1]
    return ProjectorSet(grid, mats, dims, bases, exact)


# ----------------------------------------------------------------------
# operator norms

@dataclass
class NormEstimate:
    value: float
    converged: bool
    iterations: int
    refined: bool = False


def operator_norm(mat, max_iter=5000, tol=1e-8, seed=0):
    """Largest singular value of a square matrix.

    Power iteration on ``A^H A`` from a seeded random start until the
    relative change of the Rayleigh quotient drops below ``tol``, then a
    Lanczos (ARPACK) refinement started from the power-iteration vector,
    which resolves nearly tied top singular values.
    """
    n = mat.shape[1]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = mat @ x
        new = float(np.vdot(y, y).real)
        z = np.conj(mat).T @ y
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return NormEstimate(0.0, True, it)
        x = z / nz
        if abs(new - lam) <= tol * max(new, 1e-300):
            lam = new
            converged = True
            break
        lam = new
    refined = False
    if n > 2:
        op = LinearOperator((n, n), matvec=lambda v: np.conj(mat).T @ (mat @ v), dtype=complex)
        try:
            top = eigsh(op, k=1, which="LA", v0=x, tol=tol * 1e-2, maxiter=max(max_iter, 1000),
                        return_eigenvectors=False)
            lam2 = float(np.real(top[0]))
            if lam2 > lam:
                lam, refined = lam2, True
            converged = True
        except ArpackNoConvergence:
            pass
    return NormEstimate(float(np.sqrt(max(lam, 0.0))), converged, it, refined)


def block_norm(mu, r, projectors: ProjectorSet, i, j, power_iters=5000, tol=1e-8, seed=0):
    """``||P_i S_r P_j||`` in the weighted L^2 norm (``i, j`` in 0..3 or ``"inf"``)."""
    grid = projectors.grid
    s_u = unitary(s_r_matrix(mu, r, grid), grid)
    mat = projectors.matrix(i) @ s_u @ projectors.matrix(j)
    return operator_norm(mat, power_iters, tol, seed)


def s_r_norm(mu, r, grid, power_iters=5000, tol=1e-8, seed=0):
    return operator_norm(unitary(s_r_matrix(mu, r, grid), grid), power_iters, tol, seed)


def spectral_gap_probe(mu, r_grid, grid, power_iters=5000, tol=1e-8, seed=0):
    """Rows ``(r, ||S_r|| estimate, converged)``."""
    rows = []
    for r in r_grid:
        est = s_r_norm(mu, float(r), grid, power_iters, tol, seed)
        rows.append((float(r), est.value, est.converged))
    return rows


# ----------------------------------------------------------------------
# dumps

def write_field_csv(path, fld: SphericalField):
    d = fld.grid.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_index"] + [f"x{i}" for i in range(d)] + ["re", "im"])
        for k, (x, v) in enumerate(zip(fld.grid.nodes, fld.values)):
            w.writerow([k] + [repr(float(c)) for c in x] + [repr(float(v.real)), repr(float(v.imag))])


def write_grid_csv(path, grid):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(grid.dim)] + ["weight"])
        for x, wt in zip(grid.nodes, grid.weights):
            w.writerow([repr(float(c)) for c in x] + [repr(float(wt))])
