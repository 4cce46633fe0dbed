"""Compatibility estimation from partially labeled graphs: MHE, LHE and DHE."""

from dataclasses import asdict, dataclass, field
import json
import logging
import warnings

import numpy as np
from scipy import optimize, sparse

from .compatibility import (
    CompatibilityMatrix,
    Form,
    affine_basis,
    from_h,
    grad_to_h,
    n_free_params,
    to_h,
)
from .errors import DegenerateCountsError, DimensionError, RepresentationError
from .graph import Representation, uncenter_labels

log = logging.getLogger(__name__)

ELL_CAP = 25
NB_SIZE_LIMIT = 5000


def _one_hot(X):
    if X.representation is Representation.RESIDUAL:
        X = uncenter_labels(X)
    return X.values


def nonbacktracking_matrix(g, ell, size_limit=NB_SIZE_LIMIT):
    """Explicit count matrix of non-backtracking walks of length ``ell``.

    Built from W_EC(1) = W, W_EC(2) = W^2 - D and
    W_EC(l) = W W_EC(l-1) - (D - I) W_EC(l-2). Meant for tests and small graphs.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if g.n > size_limit:
        raise DimensionError(f"n={g.n} exceeds the explicit-matrix guard {size_limit}")
    W = g.adjacency.tocsr()
    D = sparse.diags(g.degree)
    prev, cur = None, W
    if ell >= 2:
        prev, cur = W, (W @ W - D).tocsr()
    Dm1 = sparse.diags(g.degree - 1.0)
    for _ in range(3, ell + 1):
        prev, cur = cur, (W @ cur - Dm1 @ prev).tocsr()
    cur.eliminate_zeros()
    return cur


def normalize_observed(M, variant=1):
    """Observed compatibility from counts; variant 1 row-stochastic, 2 symmetric, 3 scaled."""
    M = np.asarray(M, dtype=float)
    k = M.shape[0]
    if variant == 3:
        total = M.sum()
        if total <= 0:
            raise DegenerateCountsError("no observed label pairs")
        return k * M / total
    rs = M.sum(axis=1)
    if np.any(rs <= 0):
        raise DegenerateCountsError(f"zero row sum in observed counts for classes {np.flatnonzero(rs <= 0).tolist()}")
    if variant == 1:
        return M / rs[:, None]
    if variant == 2:
        d = rs ** -0.5
        return d[:, None] * M * d[None, :]
    raise ValueError(f"unknown variant {variant}")


@dataclass(frozen=True)
class ObservedStats:
    ell_max: int
    ec: bool
    variant: int
    N: tuple
    M: tuple
    H_tilde: tuple
    dropped: tuple = ()

    def levels(self):
        """Path lengths whose normalized statistics are usable."""
        return [ell for ell in range(1, self.ell_max + 1) if self.H_tilde[ell - 1] is not None]


def neighbor_stats(g, X, ell_max=5, ec=True, variant=1, keep_N=True):
    """Labeled-neighbor counts for path lengths 1..ell_max, never forming W^l.

    With ``ec`` only non-backtracking walks are counted: N(1) = WX,
    N(2) = W N(1) - D X, N(l) = W N(l-1) - (D - I) N(l-2).
    """
    if ell_max < 1:
        raise ValueError("ell_max must be >= 1")
    Xv = _one_hot(X)
    W = g.adjacency
    deg = g.degree[:, None]
    Ns, Ms, Hs, dropped = [], [], [], []
    prev, cur = None, W @ Xv
    for ell in range(1, ell_max + 1):
        if ell == 2:
            prev, cur = cur, W @ cur - (deg * Xv if ec else 0.0)
        elif ell > 2:
            prev, cur = cur, W @ cur - ((deg - 1.0) * prev if ec else 0.0)
        M = Xv.T @ cur
        Ns.append(cur if keep_N else None)
        Ms.append(M)
        try:
            if not np.any(M):
                raise DegenerateCountsError(f"no labeled pairs at path length {ell}")
            Hs.append(normalize_observed(M, variant))
        except DegenerateCountsError as exc:
            log.info("dropping path length %d: %s", ell, exc)
            Hs.append(None)
            dropped.append(ell)
    return ObservedStats(ell_max, bool(ec), int(variant), tuple(Ns), tuple(Ms), tuple(Hs), tuple(dropped))


def _design(k):
    H0, E = affine_basis(k)
    return H0, E.reshape(E.shape[0], -1).T


def project_doubly_stochastic(H_tilde):
    """Frobenius-nearest symmetric matrix with unit row sums (entries may be negative)."""
    H_tilde = np.asarray(H_tilde, dtype=float)
    k = H_tilde.shape[0]
    if k == 1:
        return CompatibilityMatrix(np.ones((1, 1)))
    H0, B = _design(k)
    h, *_ = np.linalg.lstsq(B, (H_tilde - H0).ravel(), rcond=None)
    return CompatibilityMatrix(from_h(h, k), Form.DOUBLY_STOCHASTIC)


def mhe(g, X, variant=1):
    """Project the normalized labeled-neighbor counts onto symmetric doubly stochastic matrices."""
    Xv = _one_hot(X)
    M = Xv.T @ (g.adjacency @ Xv)
    if not np.any(M):
        raise DegenerateCountsError("no labeled node has a labeled neighbor")
    return project_doubly_stochastic(normalize_observed(M, variant))


@dataclass
class EstimationResult:
    H: CompatibilityMatrix
    objective: float
    method: str
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        d = self.H.to_dict()
        d.update(objective=float(self.objective), method=self.method, config=self.config)
        return d

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def load_compatibility(path):
    with open(path, encoding="utf-8") as fh:
        return CompatibilityMatrix.from_dict(json.load(fh))


def lhe_objective(P, X, h):
    Xv = X.values
    H = from_h(np.asarray(h, dtype=float), X.k)
    R = Xv - (P.matrix @ Xv) @ H
    return float(np.sum(R * R))


def lhe(P, X):
    """Exact minimizer of ||X - A X H(h)||^2 over the free coordinates h.

    Everything reduces to the k x k Grams G'G and G'X with G = A X, so the
    cost is one sparse product plus O(k^4) work.
    """
    if X.representation is not Representation.RESIDUAL:
        raise RepresentationError("lhe expects residual labels")
    k = X.k
    if X.labeled.sum() < k:
        raise DegenerateCountsError(f"need at least k={k} labeled nodes")
    Xv = X.values
    G = P.matrix @ Xv
    GG = G.T @ G
    GX = G.T @ Xv
    XX = float(np.sum(Xv * Xv))
    H0, E = affine_basis(k)
    p = n_free_params(k)
    GE = [GG @ E[a] for a in range(p)]
    Q = np.array([[np.sum(E[a] * GE[b]) for b in range(p)] for a in range(p)])
    rhs = np.array([np.sum(E[a] * (GX - GG @ H0)) for a in range(p)])
    rank = np.linalg.matrix_rank(Q)
    if rank < p:
        warnings.warn(f"LHE normal equations are rank deficient ({rank} < {p}); using minimum-norm solution",
                      RuntimeWarning, stacklevel=2)
        h = np.linalg.pinv(Q) @ rhs
    else:
        h = np.linalg.solve(Q, rhs)
    H = from_h(h, k)
    obj = XX - 2.0 * np.sum(H * GX) + np.sum(H * (GG @ H))
    cfg = {"alpha": P.alpha, "beta": P.beta, "gamma": P.gamma}
    return EstimationResult(CompatibilityMatrix(H), max(float(obj), 0.0), "lhe", cfg, {"rank": int(rank)})


@dataclass(frozen=True)
class DheConfig:
    ell_max: int = 5
    lam: float = 10.0
    variant: int = 1
    ec: bool = True
    max_iter: int = 500
    tol: float = 1e-8
    restarts: int = 3
    init: str = "mhe"
    seed: int = 0
    ell_cap: int = ELL_CAP

    def __post_init__(self):
        if self.ell_max < 1:
            raise ValueError("ell_max must be >= 1")
        if self.ell_max > self.ell_cap:
            raise ValueError(f"ell_max={self.ell_max} exceeds the cap {self.ell_cap}")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.init not in ("mhe", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")

    def weights(self):
        return self.lam ** np.arange(self.ell_max)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def dhe_objective(h, targets, k):
    """Weighted distance sum and its gradient in h-space.

    ``targets`` is a list of (ell, weight, H_tilde).
    """
    H = from_h(h, k)
    top = max(ell for ell, _, _ in targets)
    powers = [np.eye(k), H]
    for _ in range(2, top + 1):
        powers.append(powers[-1] @ H)
    val = 0.0
    grad = np.zeros((k, k))
    for ell, w, T in targets:
        R = powers[ell] - T
        val += w * np.sum(R * R)
        g = np.zeros((k, k))
        for i in range(ell):
            g += powers[i] @ R @ powers[ell - 1 - i]
        grad += 2.0 * w * g
    return val, grad_to_h(grad)


def _descend(h, targets, k, max_iter, tol):
    """Quasi-Newton descent (BFGS with a Wolfe line search) from ``h``.

    Every accepted step decreases the objective; ``history`` records the
    objective after each iteration.
    """
    f0, _ = dhe_objective(h, targets, k)
    history = [f0]

    def record(xk):
        history.append(dhe_objective(xk, targets, k)[0])

    res = optimize.minimize(dhe_objective, h, args=(targets, k), jac=True, method="BFGS",
                            callback=record, options={"gtol": tol, "maxiter": max_iter})
    # precision loss near the optimum is common for heavily weighted objectives
    converged = bool(res.success) or float(np.linalg.norm(res.jac)) <= 1e-5 * max(1.0, res.fun)
    return res.x, float(res.fun), converged, history


def _random_start(k, rng):
    S = rng.uniform(0.0, 2.0 / k, size=(k, k))
    return to_h(project_doubly_stochastic((S + S.T) / 2).values)


def dhe(g, X, cfg=None, stats=None):
    """Fit H so that H^l matches the observed length-l compatibilities (weighted by lambda^(l-1)).

    The first run starts from ``cfg.init``; each of ``cfg.restarts`` extra runs
    starts from a random symmetric doubly stochastic matrix. The objective is
    not convex in h, and the restarts guard against role-swapped local minima.
    """
    cfg = cfg or DheConfig()
    k = X.k
    if stats is None:
        stats = neighbor_stats(g, X, cfg.ell_max, cfg.ec, cfg.variant, keep_N=False)
    w = cfg.weights()
    targets = [(ell, w[ell - 1], stats.H_tilde[ell - 1]) for ell in stats.levels() if ell <= cfg.ell_max]
    if not targets:
        raise DegenerateCountsError("no path length has observed label pairs")
    if k == 1:
        return EstimationResult(CompatibilityMatrix(np.ones((1, 1))), 0.0, "dhe", cfg.to_dict())

    if cfg.init == "mhe":
        try:
            h0 = to_h(mhe(g, X, cfg.variant).values)
        except DegenerateCountsError:
            h0 = to_h(project_doubly_stochastic(targets[0][2]).values)
    else:
        h0 = to_h(np.full((k, k), 1.0 / k))

    rng = np.random.default_rng(cfg.seed)
    best = None
    runs = []
    for run in range(cfg.restarts + 1):
        start = h0 if run == 0 else _random_start(k, rng)
        h, f, ok, hist = _descend(start, targets, k, cfg.max_iter, cfg.tol)
        runs.append({"objective": f, "converged": ok, "iterations": len(hist) - 1})
        if best is None or f < best[1]:
            best = (h, f, ok, hist)
    h, f, ok, hist = best
    if not ok:
        log.warning("DHE optimizer stopped without meeting the gradient tolerance")
    diag = {
        "converged": ok,
        "history": hist,
        "runs": runs,
        "levels": [t[0] for t in targets],
        "dropped": list(stats.dropped),
    }
    return EstimationResult(CompatibilityMatrix(from_h(h, k)), f, "dhe", cfg.to_dict(), diag)


def estimate(method, g, X, P=None, variant=1, dhe_cfg=None):
    """Dispatch by name; always returns an EstimationResult."""
    method = method.lower()
    if method == "mhe":
        H = mhe(g, X, variant)
        Xv = _one_hot(X)
        Ht = normalize_observed(Xv.T @ (g.adjacency @ Xv), variant)
        obj = float(np.sum((H.values - Ht) ** 2))
        return EstimationResult(H, obj, "mhe", {"variant": variant})
    if method == "lhe":
        from .graph import build_propagation_matrix, center_labels
        Xr = X if X.representation is Representation.RESIDUAL else center_labels(X)
        return lhe(P if P is not None else build_propagation_matrix(g), Xr)
    if method == "dhe":
        return dhe(g, X, dhe_cfg or DheConfig(variant=variant))
    raise ValueError(f"unknown estimation method {method!r}")
