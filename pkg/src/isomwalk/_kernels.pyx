# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk kernel.

Must stay bitwise identical to ``_kernels_py``: same RNG, same atom choice,
same operation order in the affine update (the extension is built with
``-ffp-contract=off`` so no fused multiply-adds sneak in).
"""

from cython.parallel cimport prange
from libc.stdint cimport int64_t, uint64_t

import numpy as np

cdef extern from *:
    """
    #define IW_GOLDEN 0x9E3779B97F4A7C15ULL
    #define IW_SALT 0x632BE59BD9B4E019ULL
    #define IW_MAXD 16
    static inline uint64_t iw_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline uint64_t iw_stream_key(uint64_t seed, uint64_t index) {
        return iw_mix64(seed ^ iw_mix64(index * IW_GOLDEN + IW_SALT));
    }
    #define IW_LANES 8

    /* d == 2 walk block; inlined per atom count so the selection loop
       has a compile-time trip count. */
    static inline __attribute__((always_inline)) void iw_block2_body(
            const double* rot, const double* trans, const double* cum,
            int natoms, uint64_t seed, int64_t first, int nlanes,
            const double* x0, const int64_t* ckpt, int nck, double* out,
            int64_t ck_stride) {
        double y0[IW_LANES], y1[IW_LANES];
        uint64_t state[IW_LANES];
        const double scale = 1.0 / 9007199254740992.0;
        int64_t lmax = ckpt[nck - 1], step;
        int lane, k, a, ck = 0;
        for (lane = 0; lane < IW_LANES; lane++) {
            state[lane] = iw_stream_key(seed, (uint64_t)(first + lane));
            y0[lane] = x0[0];
            y1[lane] = x0[1];
        }
        for (step = 0; step <= lmax; step++) {
            if (step > 0) {
                for (lane = 0; lane < IW_LANES; lane++) {
                    double u, t0, t1;
                    const double* r;
                    state[lane] += IW_GOLDEN;
                    u = (double)(iw_mix64(state[lane]) >> 11) * scale;
                    a = 0;
                    for (k = 0; k < natoms - 1; k++) a += u >= cum[k];
                    r = rot + a * 4;
                    t0 = trans[a * 2];
                    t0 = t0 + r[0] * y0[lane];
                    t0 = t0 + r[1] * y1[lane];
                    t1 = trans[a * 2 + 1];
                    t1 = t1 + r[2] * y0[lane];
                    t1 = t1 + r[3] * y1[lane];
                    y0[lane] = t0;
                    y1[lane] = t1;
                }
            }
            while (ck < nck && ckpt[ck] == step) {
                for (lane = 0; lane < nlanes; lane++) {
                    out[ck * ck_stride + lane * 2] = y0[lane];
                    out[ck * ck_stride + lane * 2 + 1] = y1[lane];
                }
                ck++;
            }
        }
    }

    #define IW_B2(n) iw_block2_body(rot, trans, cum, n, seed, first, nlanes, x0, ckpt, nck, out, ck_stride)
    static void iw_walk_block_2d(
            const double* rot, const double* trans, const double* cum,
            int natoms, uint64_t seed, int64_t first, int nlanes,
            const double* x0, const int64_t* ckpt, int nck, double* out,
            int64_t ck_stride) {
        switch (natoms) {
            case 1: IW_B2(1); break;
            case 2: IW_B2(2); break;
            case 3: IW_B2(3); break;
            case 4: IW_B2(4); break;
            case 5: IW_B2(5); break;
            case 6: IW_B2(6); break;
            case 7: IW_B2(7); break;
            case 8: IW_B2(8); break;
            default: IW_B2(natoms); break;
        }
    }
    """
    uint64_t IW_GOLDEN
    enum: IW_MAXD
    uint64_t iw_mix64(uint64_t z) noexcept nogil
    uint64_t iw_stream_key(uint64_t seed, uint64_t index) noexcept nogil
    void iw_walk_block_2d(const double* rot, const double* trans, const double* cum,
                          int natoms, uint64_t seed, int64_t first, int nlanes,
                          const double* x0, const int64_t* ckpt, int nck, double* out,
                          int64_t ck_stride) noexcept nogil

MAX_DIM = IW_MAXD


DEF LANES = 8


cdef void _walk_block(const double* rot, const double* trans, const double* cum,
                      int natoms, int d, uint64_t seed, int64_t first, int nlanes,
                      const double* x0, const int64_t* ckpt, int nck, double* out,
                      int64_t ck_stride) noexcept nogil:
    # Walks first .. first+nlanes-1 advanced in lockstep; lanes are
    # independent, interleaving only hides arithmetic latency.
    cdef double y[LANES * IW_MAXD]
    cdef double ynew[IW_MAXD]
    cdef uint64_t state[LANES]
    cdef double u, acc
    cdef int j, k, a, lane, lo, hi, mid, ck = 0
    cdef int64_t step, lmax = ckpt[nck - 1]
    cdef const double* r
    cdef double* yl
    cdef double scale = 1.0 / 9007199254740992.0

    for lane in range(nlanes):
        state[lane] = iw_stream_key(seed, <uint64_t>(first + lane))
        for j in range(d):
            y[lane * IW_MAXD + j] = x0[j]
    while ck < nck and ckpt[ck] == 0:
        for lane in range(nlanes):
            for j in range(d):
                out[ck * ck_stride + lane * d + j] = y[lane * IW_MAXD + j]
        ck += 1

    for step in range(1, lmax + 1):
        for lane in range(nlanes):
            state[lane] = state[lane] + IW_GOLDEN
            u = <double>(iw_mix64(state[lane]) >> 11) * scale
            if natoms <= 16:
                # branchless count of cum[k] <= u, k < natoms - 1
                a = 0
                for k in range(natoms - 1):
                    a += u >= cum[k]
            else:
                lo = 0
                hi = natoms - 1
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if u >= cum[mid]:
                        lo = mid + 1
                    else:
                        hi = mid
                a = lo
            r = rot + a * d * d
            yl = y + lane * IW_MAXD
            for j in range(d):
                acc = trans[a * d + j]
                for k in range(d):
                    acc = acc + r[j * d + k] * yl[k]
                ynew[j] = acc
            for j in range(d):
                yl[j] = ynew[j]
        while ck < nck and ckpt[ck] == step:
            for lane in range(nlanes):
                for j in range(d):
                    out[ck * ck_stride + lane * d + j] = y[lane * IW_MAXD + j]
            ck += 1


def walk_chunk(const double[:, :, ::1] rot, const double[:, ::1] trans,
               const double[::1] cum, uint64_t seed, int64_t first,
               int64_t count, const double[::1] x0,
               const int64_t[::1] checkpoints, int threads=1):
    """Endpoints of walks ``first .. first+count-1`` at each checkpoint.

    Returns an array of shape ``(len(checkpoints), count, d)``.
    """
    cdef int natoms = rot.shape[0]
    cdef int d = rot.shape[1]
    cdef int nck = checkpoints.shape[0]
    cdef int64_t b, nblocks = (count + LANES - 1) // LANES
    if d > IW_MAXD:
        raise ValueError(f"compiled kernel supports d <= {IW_MAXD}")
    out_arr = np.empty((nck, count, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    if count == 0:
        return out_arr
    cdef const double* prot = &rot[0, 0, 0]
    cdef const double* ptrans = &trans[0, 0]
    cdef const double* pcum = &cum[0]
    cdef const double* px0 = &x0[0]
    cdef const int64_t* pck = &checkpoints[0]
    cdef double* pout = &out[0, 0, 0]
    cdef int64_t stride = count * d
    if d == 2 and natoms <= 16:
        for b in prange(nblocks, nogil=True, schedule="static", num_threads=threads):
            iw_walk_block_2d(prot, ptrans, pcum, natoms, seed, first + b * LANES,
                           min(LANES, count - b * LANES), px0, pck, nck,
                           pout + b * LANES * 2, stride)
        return out_arr
    for b in prange(nblocks, nogil=True, schedule="static", num_threads=threads):
        _walk_block(prot, ptrans, pcum, natoms, d, seed, first + b * LANES,
                    min(LANES, count - b * LANES), px0, pck, nck,
                    pout + b * LANES * d, stride)
    return out_arr
