"""Monte Carlo walks ``Y_l = X_l(X_{l-1}(...X_1(x0)))`` and exact enumeration.

Walk ``i`` draws its steps from a counter-based stream keyed by
``(seed, i)``, so the endpoints do not depend on how samples are split
across threads. Aggregates are reduced chunk by chunk in index order with a
fixed chunk size, which makes every reported number bitwise reproducible.

Measures made only of translations skip the step-by-step loop: the number
of times each atom is used is multinomial, and the endpoint is ``x0`` plus
the count-weighted sum of translations. This samples the same law with a
per-chunk NumPy generator instead of the per-walk stream.
"""

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from isomwalk import kernels
from isomwalk.errors import CapExceeded, DimensionMismatch
from isomwalk.measure import merge_points

CHUNK = 65536
MAX_SAMPLES = 10**9
MAX_STEPS = 10**8
MAX_WORK = 10**12
EXACT_CAP = 5_000_000
SEED_MASK = (1 << 64) - 1


@dataclass
class WalkConfig:
    """Parameters of a batch of walks.

    ``seed`` is reduced modulo 2^64. ``threads=None`` takes the value from
    ``ISOMWALK_THREADS`` (default 1); it never changes the output.
    """

    steps: int
    samples: int
    x0: Optional[np.ndarray] = None
    seed: int = 0
    store_endpoints: bool = False
    frequencies: Optional[np.ndarray] = None
    abs_orders: tuple = ()
    threads: Optional[int] = None
    backend: Optional[str] = None

    def start(self, d):
        if self.x0 is None:
            return np.zeros(d)
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != d:
            raise DimensionMismatch(f"start point has length {x0.shape[0]}, measure has d={d}")
        return x0


@dataclass
class CharFnEstimate:
    """Empirical value of ``E exp(-2 pi i <xi, Y>)``.

    ``standard_error`` combines the real and imaginary standard errors in
    quadrature.
    """

    frequency: np.ndarray
    value: complex
    standard_error: float
    se_re: float = 0.0
    se_im: float = 0.0


class _Moments:
    """Chunked mean / scatter accumulator (Chan et al. pairwise update)."""

    def __init__(self, d, freqs, abs_orders):
        self.n = 0
        self.mean = np.zeros(d)
        self.m2 = np.zeros((d, d))
        self.freqs = None if freqs is None else np.atleast_2d(np.asarray(freqs, dtype=float))
        nf = 0 if self.freqs is None else self.freqs.shape[0]
        self.cf = np.zeros((nf, 4))  # sum cos, sum sin, sum cos^2, sum sin^2
        self.abs_orders = tuple(abs_orders)
        self.abs_sums = np.zeros(len(self.abs_orders))

    def add(self, y):
        nb = y.shape[0]
        if nb == 0:
            return
        mb = y.mean(axis=0)
        dev = y - mb
        m2b = dev.T @ dev
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + np.outer(delta, delta) * (self.n * nb / n)
        self.n = n
        if self.freqs is not None:
            phase = 2 * np.pi * (y @ self.freqs.T)
            c, s = np.cos(phase), np.sin(phase)
            self.cf += np.stack([c.sum(0), s.sum(0), (c * c).sum(0), (s * s).sum(0)], axis=1)
        if self.abs_orders:
            norms = np.linalg.norm(y, axis=1)
            self.abs_sums += np.array([np.sum(norms ** a) for a in self.abs_orders])


def _charfn_from_sums(freqs, sums, n):
    out = []
    for xi, (sc, ss, scc, sss) in zip(freqs, sums):
        mc, ms = sc / n, ss / n
        var_c = max(scc / n - mc * mc, 0.0)
        var_s = max(sss / n - ms * ms, 0.0)
        se_re, se_im = np.sqrt(var_c / n), np.sqrt(var_s / n)
        # e(x) = exp(-2 pi i x): imaginary part is -sin
        out.append(CharFnEstimate(np.array(xi), complex(mc, -ms), float(np.hypot(se_re, se_im)),
                                  float(se_re), float(se_im)))
    return out


@dataclass
class WalkEnsemble:
    """Aggregates of ``N`` endpoints ``Y_l``.

    ``scatter`` is the centered sum of outer products, so ``covariance`` is
    the unbiased sample covariance and ``second_moment`` the raw mean of
    ``Y Y^T``. ``abs_moments[a]`` is the sample mean of ``|Y|^a``.
    """

    dim: int
    count: int
    steps: int
    mean: np.ndarray
    scatter: np.ndarray
    abs_moments: dict = field(default_factory=dict)
    charfn: list = field(default_factory=list)
    endpoints: Optional[np.ndarray] = None
    seed: int = 0

    @property
    def covariance(self):
        return self.scatter / max(self.count - 1, 1)

    @property
    def second_moment(self):
        return self.scatter / self.count + np.outer(self.mean, self.mean)

    def mean_standard_error(self):
        return np.sqrt(np.diag(self.covariance) / self.count)


def _validate(mu, steps, samples):
    if steps < 0 or samples < 1:
        raise ValueError("need steps >= 0 and samples >= 1")
    if steps > MAX_STEPS or samples > MAX_SAMPLES or steps * samples > MAX_WORK:
        raise CapExceeded(f"walk request {samples} x {steps} exceeds caps")
    if mu.dim > kernels.MAX_DIM:
        raise CapExceeded(f"walk kernel supports d <= {kernels.MAX_DIM}")


def iter_endpoint_chunks(mu, checkpoints, samples, x0=None, seed=0, threads=None, backend=None):
    """Yield ``(first_index, endpoints)`` with ``endpoints`` of shape ``(len(checkpoints), count, d)``.

    ``checkpoints`` must be strictly increasing step counts.
    """
    ck = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if ck.size == 0:
        raise ValueError("need at least one checkpoint")
    _validate(mu, int(ck[-1]), samples)
    d = mu.dim
    cfg_x0 = WalkConfig(0, 1, x0=x0).start(d)
    seed = int(seed) & SEED_MASK
    threads = kernels.default_threads() if threads is None else max(1, int(threads))
    impl = kernels.get_backend(backend)
    rot = np.ascontiguousarray(mu.rotations)
    trans = np.ascontiguousarray(mu.translations)
    cum = np.ascontiguousarray(mu.cumulative)
    translation_only = mu.is_translation_only()
    for c, first in enumerate(range(0, samples, CHUNK)):
        count = min(CHUNK, samples - first)
        if translation_only:
            yield first, _translation_chunk(trans, mu.weights, seed, c, count, cfg_x0, ck)
        else:
            yield first, impl.walk_chunk(rot, trans, cum, seed, first, count, cfg_x0, ck, threads)


def _translation_chunk(trans, weights, seed, chunk_index, count, x0, ck):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chunk_index, 0x7A11])))
    out = np.empty((len(ck), count, trans.shape[1]))
    counts = np.zeros((count, trans.shape[0]), dtype=np.int64)
    prev = 0
    for i, step in enumerate(ck):
        if step > prev:
            counts += rng.multinomial(int(step - prev), weights, size=count)
            prev = int(step)
        out[i] = x0 + counts @ trans
    return out


def simulate_many(mu, cfg: WalkConfig, steps_list):
    """One pass over ``N`` walks, returning a ``WalkEnsemble`` per step count."""
    steps_list = sorted(set(int(s) for s in steps_list))
    d = mu.dim
    accs = [_Moments(d, cfg.frequencies, cfg.abs_orders) for _ in steps_list]
    stored = [np.empty((cfg.samples, d)) for _ in steps_list] if cfg.store_endpoints else None
    for first, ys in iter_endpoint_chunks(mu, steps_list, cfg.samples, cfg.x0, cfg.seed,
                                          cfg.threads, cfg.backend):
        for i, acc in enumerate(accs):
            acc.add(ys[i])
            if stored is not None:
                stored[i][first:first + ys.shape[1]] = ys[i]
    out = []
    for i, (steps, acc) in enumerate(zip(steps_list, accs)):
        cf = [] if acc.freqs is None else _charfn_from_sums(acc.freqs, acc.cf, acc.n)
        absm = {a: float(s / acc.n) for a, s in zip(acc.abs_orders, acc.abs_sums)}
        out.append(WalkEnsemble(d, acc.n, steps, acc.mean, 0.5 * (acc.m2 + acc.m2.T), absm, cf,
                                None if stored is None else stored[i], int(cfg.seed) & SEED_MASK))
    return out


def simulate(mu, cfg: WalkConfig):
    """``N`` independent walks of ``l`` steps started at ``x0``."""
    return simulate_many(mu, cfg, [cfg.steps])[0]


def empirical_charfn(ensemble: WalkEnsemble, frequencies):
    """Characteristic-function estimates from stored endpoints."""
    if ensemble.endpoints is None:
        raise ValueError("ensemble was simulated without stored endpoints")
    freqs = np.atleast_2d(np.asarray(frequencies, dtype=float))
    acc = _Moments(ensemble.dim, freqs, ())
    y = ensemble.endpoints
    for s in range(0, y.shape[0], CHUNK):
        acc.add(y[s:s + CHUNK])
    return _charfn_from_sums(acc.freqs, acc.cf, acc.n)


@dataclass
class ExactLaw:
    """Finitely supported law of ``Y_l`` as ``points`` ``(m, d)`` with ``probs``."""

    points: np.ndarray
    probs: np.ndarray

    def mean(self):
        return self.probs @ self.points

    def second_moment(self):
        return np.einsum("n,ni,nj->ij", self.probs, self.points, self.points)

    def charfn(self, frequencies):
        freqs = np.atleast_2d(np.asarray(frequencies, dtype=float))
        return np.exp(-2j * np.pi * (self.points @ freqs.T)).T @ self.probs

    def expect(self, fn):
        return float(self.probs @ fn(self.points))


def exact_distribution(mu, x0, steps, cap=EXACT_CAP):
    """Law of ``Y_l`` by enumerating all step sequences, merging coincident points."""
    d = mu.dim
    pts = WalkConfig(0, 1, x0=x0).start(d)[None, :]
    probs = np.ones(1)
    for _ in range(steps):
        if pts.shape[0] * mu.size > cap:
            raise CapExceeded(f"enumeration needs {pts.shape[0] * mu.size} states, cap is {cap}")
        # new point for atom a applied to old point p: v_a + theta_a p
        new = mu.translations[:, None, :] + np.einsum("aij,pj->api", mu.rotations, pts)
        w = mu.weights[:, None] * probs[None, :]
        pts, probs = merge_points(new.reshape(-1, d), w.reshape(-1))
    return ExactLaw(pts, probs)


@dataclass
class MomentGrowth:
    rows: list  # (l, estimate, standard error)
    slope: Optional[float]
    order: float


def moment_growth(mu, order, l_list, samples, seed=0, x0=None, threads=None):
    """Centered absolute moments ``E|Y_l - E Y_l|^order`` and their log-log slope."""
    if order < 1:
        raise ValueError("order must be >= 1")
    l_list = sorted(set(int(l) for l in l_list))
    cfg = WalkConfig(0, samples, x0=x0, seed=seed, store_endpoints=True, threads=threads)
    ens = simulate_many(mu, cfg, l_list)
    rows = []
    for l, e in zip(l_list, ens):
        vals = np.linalg.norm(e.endpoints - e.mean, axis=1) ** order
        rows.append((l, float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))))
    slope = None
    usable = [(l, v) for l, v, _ in rows if l > 0 and v > 0]
    if len(usable) >= 2:
        x, y = np.log([u[0] for u in usable]), np.log([u[1] for u in usable])
        slope = float(np.polyfit(x, y, 1)[0])
    return MomentGrowth(rows, slope, order)


_MAGIC = b"IWLK"
_HEADER = struct.Struct("<4sIIQI")


def write_endpoints(path, endpoints):
    """Binary dump: 24-byte header (magic, version, d, N, zero pad) then little-endian float64."""
    y = np.ascontiguousarray(endpoints, dtype="<f8")
    n, d = y.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, d, n, 0))
        fh.write(y.tobytes())


def read_endpoints(path):
    with open(path, "rb") as fh:
        magic, version, d, n, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC or version != 1:
            raise ValueError(f"{path}: not an endpoint dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * d:
        raise ValueError(f"{path}: expected {n * d} values, found {data.size}")
    return data.reshape(n, d).astype(float)
