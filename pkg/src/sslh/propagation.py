"""Linear label propagation with a compatibility matrix.

The update is ``F <- X + eps * A F H - eps^2 * D* F H^2`` with the echo
cancellation term optional. ``H`` is always used in residual form internally,
which leaves results unchanged for residual beliefs and removes the
eigenvalue 1 that a stochastic H would add to the iteration operator.
"""

from dataclasses import dataclass, replace
import logging
import math

import numpy as np

from . import kernels
from .compatibility import CompatibilityMatrix, Form
from .errors import (
    DenseLimitError,
    DimensionError,
    DivergenceError,
    PowerIterationError,
    RepresentationError,
    UnknownPresetError,
)
from .graph import (
    PRESETS,
    LabelMatrix,
    Representation,
    build_propagation_matrix,
)

log = logging.getLogger(__name__)

DEFAULT_S = 0.5
DENSE_LIMIT = 5000


@dataclass(frozen=True)
class PropagationConfig:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    epsilon: float = None
    s: float = None
    r: int = 10
    ec: bool = False
    init: str = "zero"

    def __post_init__(self):
        if self.epsilon is not None and self.s is not None:
            raise ValueError("set either epsilon or s, not both")
        if self.epsilon is None and self.s is None:
            object.__setattr__(self, "s", DEFAULT_S)
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.init not in ("zero", "x_copy"):
            raise ValueError(f"unknown init {self.init!r}")

    def with_(self, **kw):
        if "epsilon" in kw and kw["epsilon"] is not None:
            kw.setdefault("s", None)
        if "s" in kw and kw["s"] is not None:
            kw.setdefault("epsilon", None)
        return replace(self, **kw)


@dataclass(frozen=True)
class ConvergenceReport:
    rho: float
    epsilon_star: float
    epsilon: float
    converges_at: bool


def residual_values(H):
    """k x k residual array from a CompatibilityMatrix or a raw array."""
    if isinstance(H, CompatibilityMatrix):
        return H.residual().values
    H = np.asarray(H, dtype=float)
    k = H.shape[0]
    rs = H.sum(axis=1)
    if np.allclose(rs, 1.0, atol=1e-9):
        return H - 1.0 / k
    return H


def _check_inputs(P, X, Hr):
    if X.representation is not Representation.RESIDUAL:
        raise RepresentationError("propagation expects residual labels; use center_labels")
    rows = X.values.sum(axis=1)
    if rows.size and np.abs(rows).max() > 1e-9:
        raise RepresentationError("label rows do not sum to zero")
    if X.n != P.n:
        raise DimensionError(f"labels have {X.n} rows, graph has {P.n} nodes")
    if Hr.shape != (X.k, X.k):
        raise DimensionError(f"H is {Hr.shape}, labels have k={X.k}")


def _csr_arrays(P):
    A = P.matrix
    return A.indptr, A.indices, A.data


def apply_operator(P, Hr, F, epsilon, ec, out=None, threads=1):
    """F -> eps A F H - eps^2 D* F H^2 (the linear part of one update)."""
    return _step(P, Hr, F, None, epsilon, ec, out, threads)


def _step(P, Hr, F, X, epsilon, ec, out, threads):
    G = np.ascontiguousarray((epsilon * F) @ Hr)
    G2 = np.ascontiguousarray((epsilon * epsilon * F) @ (Hr @ Hr)) if ec else None
    if out is None:
        out = np.empty_like(G)
    indptr, indices, data = _csr_arrays(P)
    Xv = None if X is None else np.ascontiguousarray(X)
    return kernels.propagate_step(indptr, indices, data, G, Xv, P.echo_degree, G2, out, threads)


def resolve_epsilon(P, H, cfg):
    if cfg.epsilon is not None:
        return float(cfg.epsilon)
    eps_star = convergence_boundary(P, H, cfg.ec)
    if math.isinf(eps_star):
        raise DivergenceError("convergence boundary is unbounded; set epsilon explicitly")
    return cfg.s * eps_star


def propagate(P, X, H, cfg=None, epsilon=None, threads=1, callback=None):
    """Run exactly ``cfg.r`` synchronous updates and return F (residual).

    ``P`` carries alpha/beta/gamma and the clamp set; the corresponding fields
    of ``cfg`` are ignored here. ``callback(t, F)`` is called after each
    iteration, if given.
    """
    cfg = cfg or PropagationConfig()
    Hr = residual_values(H)
    _check_inputs(P, X, Hr)
    eps = float(epsilon) if epsilon is not None else resolve_epsilon(P, H, cfg)
    Xv = np.ascontiguousarray(X.values)
    F = np.zeros_like(Xv) if cfg.init == "zero" else Xv.copy()
    buf = np.empty_like(F)
    for t in range(cfg.r):
        _step(P, Hr, F, Xv, eps, cfg.ec, buf, threads)
        F, buf = buf, F
        if callback is not None:
            callback(t, F)
    return LabelMatrix(F, Representation.RESIDUAL, np.ones(X.n, dtype=bool))


def _system_matrix(P, Hr, eps, ec):
    """Dense I - eps H (x) A + eps^2 H^2 (x) D* acting on column-stacked vec(F)."""
    n = P.n
    k = Hr.shape[0]
    A = P.toarray()
    S = np.eye(n * k) - eps * np.kron(Hr.T, A)
    if ec:
        S += eps * eps * np.kron((Hr @ Hr).T, np.diag(P.echo_degree))
    return S


def closed_form(P, X, H, cfg=None, epsilon=None, dense_limit=DENSE_LIMIT, check=True):
    """Fixed point of the update by a dense solve (small graphs only)."""
    cfg = cfg or PropagationConfig()
    Hr = residual_values(H)
    _check_inputs(P, X, Hr)
    n, k = X.n, X.k
    if n * k > dense_limit:
        raise DenseLimitError(f"n*k = {n * k} exceeds dense limit {dense_limit}")
    eps = float(epsilon) if epsilon is not None else resolve_epsilon(P, H, cfg)
    if check and eps > 0:
        rho = spectral_radius(P, Hr, cfg.ec, eps)
        if rho >= 1.0:
            raise DivergenceError(f"spectral radius {rho:.6g} >= 1 at epsilon={eps:.6g}")
    S = _system_matrix(P, Hr, eps, cfg.ec)
    vecF = np.linalg.solve(S, X.values.reshape(-1, order="F"))
    F = vecF.reshape((n, k), order="F")
    return LabelMatrix(F, Representation.RESIDUAL, np.ones(n, dtype=bool))


def energy(F, X, P, H, cfg=None, epsilon=None):
    """Squared Frobenius norm of F - X - eps A F H (+ eps^2 D* F H^2)."""
    cfg = cfg or PropagationConfig()
    Hr = residual_values(H)
    eps = float(epsilon) if epsilon is not None else resolve_epsilon(P, H, cfg)
    Fv = F.values if isinstance(F, LabelMatrix) else np.asarray(F, dtype=float)
    Xv = X.values if isinstance(X, LabelMatrix) else np.asarray(X, dtype=float)
    R = Fv - apply_operator(P, Hr, np.ascontiguousarray(Fv), eps, cfg.ec) - Xv
    return float(np.sum(R * R))


def spectral_radius(P, H, ec=False, epsilon=1.0, tol=1e-6, maxiter=1000, seed=0, threads=1):
    """Spectral radius of F -> eps A F H - eps^2 D* F H^2 by power iteration.

    Works on n x k matrices; the nk x nk Kronecker operator is never formed.
    Each step applies the operator twice and measures the growth, so real
    dominant pairs of opposite sign (bipartite structure, +-rho(H)) still
    give a converging estimate.
    """
    if epsilon == 0:
        return 0.0
    Hr = residual_values(H)
    n, k = P.n, Hr.shape[0]
    if not np.any(Hr):
        return 0.0
    rng = np.random.default_rng(seed)
    a = np.empty((n, k))
    b = np.empty((n, k))
    last = []
    for attempt in range(2):
        v = rng.standard_normal((n, k))
        v /= np.linalg.norm(v)
        prev = None
        for _ in range(maxiter):
            apply_operator(P, Hr, v, epsilon, ec, out=a, threads=threads)
            apply_operator(P, Hr, a, epsilon, ec, out=b, threads=threads)
            nb = np.linalg.norm(b)
            if nb == 0.0:
                return 0.0
            est = math.sqrt(nb)
            last = [prev, est]
            if prev is not None and abs(est - prev) <= tol * est:
                return est
            prev = est
            np.divide(b, nb, out=v)
        log.debug("power iteration stagnated at %s; re-randomizing", last)
    raise PowerIterationError("power iteration did not converge", last)


def adjacency_radius(P, tol=1e-9, maxiter=5000, seed=0):
    """rho(A) for the propagation matrix alone, by the same two-step power iteration."""
    rng = np.random.default_rng(seed)
    A = P.matrix
    v = np.abs(rng.standard_normal(P.n)) + 1.0
    v /= np.linalg.norm(v)
    prev = None
    for _ in range(maxiter):
        w = A @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = math.sqrt(nw)
        if prev is not None and abs(est - prev) <= tol * est:
            return est
        prev = est
        v = w / nw
    raise PowerIterationError("power iteration on A did not converge", [prev, est])


def kronecker_radius(P, H, epsilon=1.0):
    """eps * rho(H) * rho(A): the no-echo radius from the Kronecker eigenvalue product."""
    Hr = residual_values(H)
    return epsilon * float(np.abs(np.linalg.eigvals(Hr)).max()) * adjacency_radius(P)


def dense_radius(P, H, ec=False, epsilon=1.0):
    """Explicit nk x nk spectral radius; for cross-checks on tiny graphs."""
    Hr = residual_values(H)
    L = np.eye(P.n * Hr.shape[0]) - _system_matrix(P, Hr, epsilon, ec)
    return float(np.abs(np.linalg.eigvals(L)).max())


def convergence_boundary(P, H, ec=False, tol=1e-4, maxiter=200):
    """Scaling eps* at which the iteration operator has spectral radius 1.

    Without echo cancellation the radius is linear in eps, so eps* = 1/rho(1).
    With it, eps* is bracketed and bisected until |rho(eps) - 1| < tol.
    Returns ``inf`` for a nilpotent modulation (zero residual H).
    """
    rho1 = spectral_radius(P, H, False, 1.0)
    if rho1 == 0.0:
        return math.inf
    guess = 1.0 / rho1
    if not ec:
        return guess
    lo, hi = guess, guess
    while spectral_radius(P, H, True, lo) >= 1.0:
        lo /= 2.0
    while spectral_radius(P, H, True, hi) <= 1.0:
        hi *= 2.0
        if hi > 1e6 * guess:
            return math.inf
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        rho = spectral_radius(P, H, True, mid)
        if abs(rho - 1.0) < tol:
            return mid
        if rho < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def convergence_report(P, H, cfg):
    eps_star = convergence_boundary(P, H, cfg.ec)
    eps = cfg.epsilon if cfg.epsilon is not None else cfg.s * eps_star
    rho = spectral_radius(P, H, cfg.ec, 1.0)
    if cfg.ec:
        converges = spectral_radius(P, H, True, eps) < 1.0
    else:
        converges = eps * rho < 1.0
    return ConvergenceReport(rho=rho, epsilon_star=eps_star, epsilon=eps, converges_at=bool(converges))


def predict_labels(F):
    """Row-wise argmax; ties go to the lowest class index."""
    v = F.values if isinstance(F, LabelMatrix) else np.asarray(F)
    return np.argmax(v, axis=1)


def run_preset(name, graph, X, H=None, cfg=None, threads=1):
    """Propagate with one of the named (alpha, beta, gamma) presets.

    Homophily presets (HF, LNP, LGC, MRW) use the residual identity as H;
    LINBP uses the given H. HF hard-clamps the labeled nodes of ``X``.
    """
    key = name.upper()
    if key not in PRESETS:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    alpha, beta, gamma = PRESETS[key]
    if key == "LINBP":
        Hm = H if H is not None else CompatibilityMatrix.identity(X.k)
    else:
        Hm = CompatibilityMatrix.identity(X.k, Form.RESIDUAL)
    clamp = X.labeled_nodes if gamma > 0 else ()
    P = build_propagation_matrix(graph, alpha, beta, gamma, clamp)
    cfg = (cfg or PropagationConfig()).with_(alpha=alpha, beta=beta, gamma=gamma)
    return propagate(P, X, Hm, cfg, threads=threads)


def write_beliefs(F, dest, predicted=None):
    """TSV rows ``node, f_0..f_{k-1}, predicted`` to a path or an open text file."""
    v = F.values if isinstance(F, LabelMatrix) else np.asarray(F)
    pred = predict_labels(v) if predicted is None else np.asarray(predicted)
    k = v.shape[1]
    fh = open(dest, "w", encoding="utf-8") if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__") else dest
    try:
        fh.write("node\t" + "\t".join(f"f_{c}" for c in range(k)) + "\tpredicted\n")
        for i in range(v.shape[0]):
            fh.write(f"{i}\t" + "\t".join(repr(float(x)) for x in v[i]) + f"\t{int(pred[i])}\n")
    finally:
        if fh is not dest:
            fh.close()
