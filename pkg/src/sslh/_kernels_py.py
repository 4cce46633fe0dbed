"""Pure-Python reference implementations of the hot kernels.

These mirror ``_kernels.pyx`` step for step, including the random stream, so
both backends return identical edge sets for the same seed.
"""

import numpy as np
from scipy import sparse

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

BACKEND = "python"


class SplitMix64:
    """splitmix64 generator; bounded draws use the high 32 bits."""

    def __init__(self, seed):
        self.state = seed & _MASK

    def next(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, bound):
        return ((self.next() >> 32) * bound) >> 32


def assign_edges(node_class, out_deg, in_deg, M, seed, max_tries=50, repair_tries=200,
                 reciprocal=False):
    """Draw a simple directed edge set realizing the cell counts ``M``.

    Returns ``(src, dst, ok)``. ``ok`` is False when the remaining budgets
    admitted no feasible edge and the in-cell swap repair failed too.
    Feasible means no self-loop, no duplicate and, unless ``reciprocal``, no
    reverse edge.
    """
    node_class = np.asarray(node_class, dtype=np.int64)
    out_deg = np.asarray(out_deg, dtype=np.int64)
    in_deg = np.asarray(in_deg, dtype=np.int64)
    M = np.asarray(M, dtype=np.int64)
    n = node_class.shape[0]
    k = M.shape[0]
    m = int(M.sum())
    rng = SplitMix64(seed)

    # stubs grouped by class: node v appears deg[v] times
    def stubs(deg):
        order = np.argsort(node_class, kind="stable")
        flat = np.repeat(order, deg[order]).tolist()
        counts = np.bincount(node_class, weights=deg, minlength=k).astype(np.int64)
        ptr = [0] * (k + 1)
        for c in range(k):
            ptr[c + 1] = ptr[c] + int(counts[c])
        return flat, ptr, [int(x) for x in counts]

    out_stub, out_ptr, out_len = stubs(out_deg)
    in_stub, in_ptr, in_len = stubs(in_deg)

    cells = np.repeat(np.arange(k * k, dtype=np.int64), M.ravel()).tolist()
    for a in range(m - 1, 0, -1):
        b = rng.below(a + 1)
        cells[a], cells[b] = cells[b], cells[a]

    cell_ptr = [0] * (k * k + 1)
    flatM = M.ravel().tolist()
    for c in range(k * k):
        cell_ptr[c + 1] = cell_ptr[c] + flatM[c]
    cell_fill = [0] * (k * k)
    cell_edges = [0] * m

    src = [0] * m
    dst = [0] * m
    edges = set()

    def feasible(s, t):
        return s != t and (s * n + t) not in edges and (reciprocal or (t * n + s) not in edges)

    def take(stub, ptr, length, c, pos):
        base = ptr[c]
        last = base + length[c] - 1
        v = stub[base + pos]
        stub[base + pos] = stub[last]
        stub[last] = v
        length[c] -= 1
        return v

    for e in range(m):
        c = cells[e]
        j = c // k
        i = c - j * k
        placed = False
        a = b = 0
        for _ in range(max_tries):
            a = rng.below(out_len[j])
            b = rng.below(in_len[i])
            s = out_stub[out_ptr[j] + a]
            t = in_stub[in_ptr[i] + b]
            if feasible(s, t):
                placed = True
                break
        s = take(out_stub, out_ptr, out_len, j, a)
        t = take(in_stub, in_ptr, in_len, i, b)
        if placed:
            src[e] = s
            dst[e] = t
            edges.add(s * n + t)
        else:
            # swap targets with an already placed edge of the same cell
            filled = cell_fill[c]
            if filled == 0:
                return np.asarray(src[:e], dtype=np.int64), np.asarray(dst[:e], dtype=np.int64), False
            fixed = False
            for _ in range(repair_tries):
                q = cell_edges[cell_ptr[c] + rng.below(filled)]
                s2 = src[q]
                t2 = dst[q]
                edges.discard(s2 * n + t2)
                if feasible(s, t2):
                    edges.add(s * n + t2)
                    if feasible(s2, t):
                        edges.add(s2 * n + t)
                        src[q] = s
                        dst[q] = t2
                        src[e] = s2
                        dst[e] = t
                        fixed = True
                        break
                    edges.discard(s * n + t2)
                edges.add(s2 * n + t2)
            if not fixed:
                return np.asarray(src[:e], dtype=np.int64), np.asarray(dst[:e], dtype=np.int64), False
        cell_edges[cell_ptr[c] + cell_fill[c]] = e
        cell_fill[c] += 1

    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64), True


_last_csr = [None, None]


def _csr(indptr, indices, data, ncols):
    # iterative callers pass the same (read-only) arrays every step; building
    # the scipy wrapper costs more than the product on small graphs
    key, A = _last_csr
    if key is not None and key[0] is indptr and key[1] is indices and key[2] is data and A.shape[1] == ncols:
        return A
    A = sparse.csr_matrix((data, indices, indptr), shape=(indptr.shape[0] - 1, ncols))
    _last_csr[:] = [(indptr, indices, data), A]
    return A


def propagate_step(indptr, indices, data, G, X, dstar, G2, out, threads=1):
    """out = X + A @ G - dstar * G2, with A given in CSR arrays.

    ``G2`` may be None (no echo cancellation); ``X`` may be None (zero).
    """
    acc = _csr(indptr, indices, data, G.shape[0]) @ G
    if X is not None:
        acc += X
    if G2 is not None:
        acc -= dstar[:, None] * G2
    out[...] = acc
    return out
