# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels: planted edge assignment and the fused propagation step.

Semantics, random stream included, are identical to ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdint cimport int64_t, uint64_t
from libcpp.unordered_set cimport unordered_set

cnp.import_array()

BACKEND = "cython"

ctypedef fused int32_or_64:
    int
    long long

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    state[0] += _GOLDEN
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline int64_t _below(uint64_t* state, int64_t bound) noexcept nogil:
    return <int64_t>(((_next(state) >> 32) * <uint64_t>bound) >> 32)


cdef inline bint _feasible(unordered_set[int64_t]& edges, int64_t n,
                           int64_t s, int64_t t, bint reciprocal) noexcept nogil:
    if s == t:
        return False
    if edges.count(s * n + t):
        return False
    if not reciprocal and edges.count(t * n + s):
        return False
    return True


cdef inline int64_t _take(int64_t[::1] stub, int64_t[::1] ptr, int64_t[::1] length,
                          int64_t c, int64_t pos) noexcept nogil:
    cdef int64_t base = ptr[c]
    cdef int64_t last = base + length[c] - 1
    cdef int64_t v = stub[base + pos]
    stub[base + pos] = stub[last]
    stub[last] = v
    length[c] -= 1
    return v


def _stubs(node_class, deg, k):
    order = np.argsort(node_class, kind="stable")
    flat = np.ascontiguousarray(np.repeat(order, deg[order]), dtype=np.int64)
    counts = np.bincount(node_class, weights=deg, minlength=k).astype(np.int64)
    ptr = np.zeros(k + 1, dtype=np.int64)
    ptr[1:] = np.cumsum(counts)
    return flat, ptr, counts.copy()


def assign_edges(node_class, out_deg, in_deg, M, uint64_t seed,
                 int max_tries=50, int repair_tries=200, bint reciprocal=False):
    node_class = np.asarray(node_class, dtype=np.int64)
    out_deg = np.asarray(out_deg, dtype=np.int64)
    in_deg = np.asarray(in_deg, dtype=np.int64)
    M = np.asarray(M, dtype=np.int64)
    cdef int64_t n = node_class.shape[0]
    cdef int64_t k = M.shape[0]
    cdef int64_t m = int(M.sum())
    cdef uint64_t state = seed

    o_stub, o_ptr, o_len = _stubs(node_class, out_deg, k)
    i_stub, i_ptr, i_len = _stubs(node_class, in_deg, k)
    cdef int64_t[::1] out_stub = o_stub, out_ptr = o_ptr, out_len = o_len
    cdef int64_t[::1] in_stub = i_stub, in_ptr = i_ptr, in_len = i_len

    cdef int64_t[::1] cells = np.ascontiguousarray(
        np.repeat(np.arange(k * k, dtype=np.int64), M.ravel()))
    cdef int64_t[::1] cell_ptr = np.zeros(k * k + 1, dtype=np.int64)
    cdef int64_t[::1] cell_fill = np.zeros(k * k, dtype=np.int64)
    cdef int64_t[::1] cell_edges = np.zeros(max(m, 1), dtype=np.int64)
    src_arr = np.zeros(m, dtype=np.int64)
    dst_arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] src = src_arr, dst = dst_arr
    cdef int64_t[::1] flatM = np.ascontiguousarray(M.ravel())

    cdef unordered_set[int64_t] edges
    edges.reserve(<size_t>(2 * m + 16))

    cdef int64_t a, b, c, e, i, j, s, t, s2, t2, q, filled, tmp, tries
    cdef bint placed, fixed, ok = True

    with nogil:
        for a in range(m - 1, 0, -1):
            b = _below(&state, a + 1)
            tmp = cells[a]
            cells[a] = cells[b]
            cells[b] = tmp
        for c in range(k * k):
            cell_ptr[c + 1] = cell_ptr[c] + flatM[c]

        for e in range(m):
            c = cells[e]
            j = c // k
            i = c - j * k
            placed = False
            a = 0
            b = 0
            for tries in range(max_tries):
                a = _below(&state, out_len[j])
                b = _below(&state, in_len[i])
                s = out_stub[out_ptr[j] + a]
                t = in_stub[in_ptr[i] + b]
                if _feasible(edges, n, s, t, reciprocal):
                    placed = True
                    break
            s = _take(out_stub, out_ptr, out_len, j, a)
            t = _take(in_stub, in_ptr, in_len, i, b)
            if placed:
                src[e] = s
                dst[e] = t
                edges.insert(s * n + t)
            else:
                filled = cell_fill[c]
                if filled == 0:
                    ok = False
                    m = e
                    break
                fixed = False
                for tries in range(repair_tries):
                    q = cell_edges[cell_ptr[c] + _below(&state, filled)]
                    s2 = src[q]
                    t2 = dst[q]
                    edges.erase(s2 * n + t2)
                    if _feasible(edges, n, s, t2, reciprocal):
                        edges.insert(s * n + t2)
                        if _feasible(edges, n, s2, t, reciprocal):
                            edges.insert(s2 * n + t)
                            src[q] = s
                            dst[q] = t2
                            src[e] = s2
                            dst[e] = t
                            fixed = True
                            break
                        edges.erase(s * n + t2)
                    edges.insert(s2 * n + t2)
                if not fixed:
                    ok = False
                    m = e
                    break
            cell_edges[cell_ptr[c] + cell_fill[c]] = e
            cell_fill[c] += 1

    return src_arr[:m], dst_arr[:m], bool(ok)


def propagate_step(const int32_or_64[::1] indptr, const int32_or_64[::1] indices,
                   const double[::1] data, const double[:, ::1] G, X,
                   const double[::1] dstar, G2, double[:, ::1] out, int threads=1):
    """out = X + A @ G - dstar * G2 in one pass over the CSR rows."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t kk = G.shape[1]
    cdef Py_ssize_t r, p, c
    cdef double w
    cdef bint has_x = X is not None
    cdef bint has_ec = G2 is not None
    cdef const double[:, ::1] Xv = X if has_x else G
    cdef const double[:, ::1] G2v = G2 if has_ec else G
    if threads < 1:
        threads = 1
    for r in prange(n, nogil=True, schedule="static", num_threads=threads):
        for c in range(kk):
            out[r, c] = 0.0
        for p in range(indptr[r], indptr[r + 1]):
            w = data[p]
            for c in range(kk):
                out[r, c] += w * G[indices[p], c]
        if has_x:
            for c in range(kk):
                out[r, c] += Xv[r, c]
        if has_ec:
            for c in range(kk):
                out[r, c] -= dstar[r] * G2v[r, c]
    return np.asarray(out)

