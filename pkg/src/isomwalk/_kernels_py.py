"""Pure NumPy walk kernel, vectorized over samples.

Reproduces the compiled kernel bit for bit: the RNG is the same SplitMix64
construction evaluated in uint64 arrays, atoms are chosen with the same
comparison against the cumulative weights, and the affine update uses the
same multiply-then-add order.
"""

import numpy as np

MAX_DIM = 16

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SALT = np.uint64(0x632BE59BD9B4E019)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_SCALE = 1.0 / 9007199254740992.0


def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_keys(seed, first, count):
    index = np.arange(count, dtype=np.uint64) + np.uint64(first)
    return mix64(np.uint64(seed) ^ mix64(index * GOLDEN + _SALT))


def walk_chunk(rot, trans, cum, seed, first, count, x0, checkpoints, threads=1):
    """Endpoints of walks ``first .. first+count-1`` at each checkpoint.

    ``threads`` is accepted for signature compatibility and ignored.
    """
    rot = np.ascontiguousarray(rot, dtype=np.float64)
    trans = np.ascontiguousarray(trans, dtype=np.float64)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    natoms, d = trans.shape
    out = np.empty((len(checkpoints), count, d))
    if count == 0:
        return out
    bounds = np.asarray(cum, dtype=np.float64)[:-1]
    with np.errstate(over="ignore"):
        state = stream_keys(seed, first, count)
    y = np.repeat(np.asarray(x0, dtype=np.float64)[None, :], count, axis=0)
    ck = 0
    while ck < len(checkpoints) and checkpoints[ck] == 0:
        out[ck] = y
        ck += 1
    lmax = int(checkpoints[-1])
    for step in range(1, lmax + 1):
        with np.errstate(over="ignore"):
            state = state + GOLDEN
            u = (mix64(state) >> _S11).astype(np.float64) * _SCALE
        a = np.searchsorted(bounds, u, side="right")
        r = rot[a]
        ynew = np.empty_like(y)
        for j in range(d):
            acc = trans[a, j].copy()
            for k in range(d):
                acc += r[:, j, k] * y[:, k]
            ynew[:, j] = acc
        y = ynew
        while ck < len(checkpoints) and checkpoints[ck] == step:
            out[ck] = y
            ck += 1
    return out
