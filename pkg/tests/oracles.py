"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical code: each oracle is a
deliberately naive, dense or exhaustive restatement of a definition.
"""

import itertools

import numpy as np


def random_connected_graph(n, extra, rng):
    """Undirected 0/1 adjacency without isolated nodes: a random tree plus ``extra`` random edges."""
    A = np.zeros((n, n))
    order = rng.permutation(n)
    for i in range(1, n):
        a, b = order[i], order[rng.integers(0, i)]
        A[a, b] = A[b, a] = 1.0
    for _ in range(extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            A[a, b] = A[b, a] = 1.0
    return A


def dense_edges(A):
    s, t = np.nonzero(np.triu(A, 1))
    return s, t


def nonbacktracking_walks(A, ell):
    """Count walks v0..v_ell with v_{t+1} != v_{t-1} by explicit enumeration."""
    n = A.shape[0]
    nbrs = [list(np.flatnonzero(A[i])) for i in range(n)]
    out = np.zeros((n, n), dtype=np.int64)

    def walk(path):
        if len(path) == ell + 1:
            out[path[0], path[-1]] += 1
            return
        for v in nbrs[path[-1]]:
            if len(path) >= 2 and v == path[-2]:
                continue
            path.append(v)
            walk(path)
            path.pop()

    for i in range(n):
        walk([i])
    return out


def kkt_projection(Ht):
    """argmin ||H - Ht||_F^2 s.t. H = H^T and H 1 = 1, via the dense KKT system."""
    k = Ht.shape[0]
    rows = []
    rhs = []
    for i in range(k):
        r = np.zeros((k, k))
        r[i, :] = 1.0
        rows.append(r.ravel())
        rhs.append(1.0)
    for i in range(k):
        for j in range(i + 1, k):
            r = np.zeros((k, k))
            r[i, j], r[j, i] = 1.0, -1.0
            rows.append(r.ravel())
            rhs.append(0.0)
    C = np.array(rows)
    q = C.shape[0]
    K = np.block([[2 * np.eye(k * k), C.T], [C, np.zeros((q, q))]])
    b = np.concatenate([2 * Ht.ravel(), rhs])
    sol = np.linalg.solve(K, b)
    return sol[: k * k].reshape(k, k)


def min_l1_rounding(profile, total):
    """Exhaustive search over floor/ceil choices; ties prefer rounding up earlier ranks."""
    choices = [(int(np.floor(x)), int(np.ceil(x))) for x in profile]
    best = None
    for combo in itertools.product(*[sorted(set(c), reverse=True) for c in choices]):
        if sum(combo) != total:
            continue
        d = float(np.abs(np.array(combo) - profile).sum())
        if best is None or d < best[0] - 1e-12:
            best = (d, combo)
    return np.array(best[1])


def w_row(A):
    return A / A.sum(axis=1, keepdims=True)


def w_col(A):
    return A / A.sum(axis=0, keepdims=True)


def w_red(A):
    d = A.sum(axis=1) ** -0.5
    return d[:, None] * A * d[None, :]


def hf_iterate(A, X, labeled, iters):
    """f <- x + S_bar W_row f, with S_bar zeroing the labeled rows."""
    S_bar = np.diag((~labeled).astype(float))
    M = S_bar @ w_row(A)
    F = np.zeros_like(X)
    for _ in range(iters):
        F = X + M @ F
    return F


def soft_closed(P, X, alpha):
    """alpha_bar (I - alpha P)^-1 X: LNP, LGC and MRW fixed points."""
    n = P.shape[0]
    return (1 - alpha) * np.linalg.solve(np.eye(n) - alpha * P, X)


def soft_iterate(P, X, alpha, iters):
    F = np.zeros_like(X)
    for _ in range(iters):
        F = (1 - alpha) * X + alpha * P @ F
    return F


def linbp_iterate(A, X, Hhat, eps, iters, ec):
    """F <- X + W F H_eps - D F H_eps^2 with H_eps = eps * Hhat."""
    D = np.diag(A.sum(axis=1))
    He = eps * Hhat
    F = np.zeros_like(X)
    for _ in range(iters):
        F = X + A @ F @ He - (D @ F @ He @ He if ec else 0.0)
    return F


def dense_propagation_matrix(A, alpha, beta, gamma, clamp):
    d = A.sum(axis=1)
    left = np.where(d > 0, d, 1.0) ** -alpha
    right = np.where(d > 0, d, 1.0) ** -beta
    c = np.zeros(A.shape[0])
    c[list(clamp)] = 1.0
    return np.diag(1 - gamma * c) @ np.diag(left) @ A @ np.diag(right)


def belief_step(A, F, X, Hhat, eps, ec):
    """One update written entry by entry."""
    n, k = F.shape
    Dstar = np.array([sum(A[i, j] * A[j, i] for j in range(n)) for i in range(n)])
    H2 = Hhat @ Hhat
    out = np.zeros_like(F)
    for i in range(n):
        for c in range(k):
            acc = X[i, c]
            for j in range(n):
                if A[i, j]:
                    acc += eps * A[i, j] * sum(F[j, a] * Hhat[a, c] for a in range(k))
            if ec:
                acc -= eps * eps * Dstar[i] * sum(F[i, a] * H2[a, c] for a in range(k))
            out[i, c] = acc
    return out
