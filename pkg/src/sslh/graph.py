"""Sparse graphs, label matrices and the (alpha, beta, gamma) propagation family."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse

from .errors import (
    DimensionError,
    EdgeListParseError,
    IsolatedNodeError,
    RepresentationError,
)

TOL = 1e-12


def _frozen(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SparseGraph:
    """Unweighted graph in CSR layout with cached degree vector.

    For undirected graphs each edge is stored in both directions, so
    ``adjacency.nnz == 2 * m``.
    """

    adjacency: sparse.csr_matrix
    directed: bool = False
    degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = sparse.csr_matrix(self.adjacency, dtype=np.float64)
        A.sum_duplicates()
        A.sort_indices()
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"adjacency must be square, got {A.shape}")
        if A.nnz and not np.all(A.data == 1.0):
            raise ValueError("weighted graphs are not supported: all edge weights must be 1")
        if A.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if not self.directed and (A != A.T).nnz:
            raise ValueError("undirected graph must have a symmetric adjacency")
        deg = np.asarray(A.sum(axis=1)).ravel()
        touched = deg + (np.asarray(A.sum(axis=0)).ravel() if self.directed else 0)
        isolated = np.flatnonzero(touched == 0)
        if isolated.size:
            raise IsolatedNodeError(isolated)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "degree", _frozen(deg))

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def m(self):
        nnz = self.adjacency.nnz
        return nnz if self.directed else nnz // 2

    @classmethod
    def from_edges(cls, src, dst, n=None, directed=False):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if n is None:
            n = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        A = sparse.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
        # duplicates collapse to a single unit edge
        A.sum_duplicates()
        A.data[:] = 1.0
        return cls(A, directed=directed)

    def edges(self):
        """Directed (src, dst) arrays of all stored entries."""
        coo = self.adjacency.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64)

    def laplacian(self):
        """Unnormalized Laplacian D - W."""
        return sparse.diags(self.degree) - self.adjacency

    def normalized_laplacian(self):
        """I - D^-1/2 W D^-1/2."""
        d = self.degree ** -0.5
        return sparse.identity(self.n) - sparse.diags(d) @ self.adjacency @ sparse.diags(d)


def load_edge_list(path, directed=False):
    """Read a ``src<TAB>dst`` edge list with 0-based ids; '#' lines are comments."""
    src, dst = [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split("\t") if "\t" in text else text.split()
            if len(parts) != 2:
                raise EdgeListParseError(path, line_no, line.rstrip("\n"))
            try:
                s, t = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListParseError(path, line_no, line.rstrip("\n")) from None
            if s < 0 or t < 0 or s == t:
                raise EdgeListParseError(path, line_no, line.rstrip("\n"))
            src.append(s)
            dst.append(t)
    return SparseGraph.from_edges(src, dst, directed=directed)


def write_edge_list(graph, path):
    """Write each undirected edge once (src < dst), or every directed edge."""
    s, t = graph.edges()
    if not graph.directed:
        keep = s < t
        s, t = s[keep], t[keep]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{a}\t{b}\n" for a, b in zip(s.tolist(), t.tolist()))


class Representation(str, Enum):
    ONE_HOT = "one_hot"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class LabelMatrix:
    """n x k beliefs. Rows outside ``labeled`` are zero."""

    values: np.ndarray
    representation: Representation = Representation.ONE_HOT
    labeled: np.ndarray = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionError(f"label matrix must be 2-d, got shape {v.shape}")
        if self.labeled is None:
            lab = np.any(v != 0, axis=1)
        else:
            lab = np.zeros(v.shape[0], dtype=bool)
            given = np.asarray(self.labeled)
            if given.dtype == bool:
                lab[:] = given
            else:
                lab[given.astype(np.int64)] = True
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "labeled", _frozen(lab))
        object.__setattr__(self, "representation", Representation(self.representation))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    @property
    def labeled_nodes(self):
        return np.flatnonzero(self.labeled)

    def check(self, tol=TOL):
        v = self.values
        if np.any(v[~self.labeled] != 0):
            raise RepresentationError("unlabeled rows must be zero")
        rows = v[self.labeled]
        if self.representation is Representation.ONE_HOT:
            if not (np.all((rows == 0) | (rows == 1)) and np.all(rows.sum(axis=1) == 1)):
                raise RepresentationError("one-hot rows must contain a single 1")
        elif rows.size and np.abs(rows.sum(axis=1)).max() > tol:
            raise RepresentationError("residual rows must sum to zero")
        return self

    def classes(self):
        """Class per node, -1 for unlabeled. Only meaningful for one-hot input."""
        out = np.full(self.n, -1, dtype=np.int64)
        out[self.labeled] = np.argmax(self.values[self.labeled], axis=1)
        return out

    @classmethod
    def from_classes(cls, classes, k=None):
        """One-hot matrix from a class vector; negative entries mean unlabeled."""
        classes = np.asarray(classes, dtype=np.int64)
        if k is None:
            k = int(classes.max()) + 1
        X = np.zeros((classes.size, k))
        lab = classes >= 0
        if np.any(classes[lab] >= k):
            raise DimensionError(f"class id out of range for k={k}")
        X[np.flatnonzero(lab), classes[lab]] = 1.0
        return cls(X, Representation.ONE_HOT, lab)

    def restrict(self, nodes):
        """Same representation with only ``nodes`` kept labeled."""
        keep = np.zeros(self.n, dtype=bool)
        keep[np.asarray(nodes, dtype=np.int64)] = True
        keep &= self.labeled
        v = np.where(keep[:, None], self.values, 0.0)
        return LabelMatrix(v, self.representation, keep)


def load_labels(path, n, k=None):
    """Read ``node<TAB>class`` lines into a one-hot label matrix over n nodes."""
    classes = np.full(n, -1, dtype=np.int64)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            try:
                v, c = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise EdgeListParseError(path, line_no, line.rstrip("\n")) from None
            if v < 0 or c < 0:
                raise EdgeListParseError(path, line_no, line.rstrip("\n"))
            if v >= n:
                # a labeled node the graph never mentions has degree zero
                raise IsolatedNodeError([v])
            classes[v] = c
    if k is None:
        k = int(classes.max()) + 1
    return LabelMatrix.from_classes(classes, k)


def write_labels(labels, path):
    cls_ = labels.classes()
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{v}\t{c}\n" for v, c in enumerate(cls_.tolist()) if c >= 0)


def center_labels(x):
    """One-hot -> residual: labeled rows become e_c - 1/k."""
    if x.representation is not Representation.ONE_HOT:
        raise RepresentationError("center_labels expects one-hot labels")
    v = x.values - np.where(x.labeled[:, None], 1.0 / x.k, 0.0)
    return LabelMatrix(v, Representation.RESIDUAL, x.labeled)


def uncenter_labels(x):
    if x.representation is not Representation.RESIDUAL:
        raise RepresentationError("uncenter_labels expects residual labels")
    v = x.values + np.where(x.labeled[:, None], 1.0 / x.k, 0.0)
    return LabelMatrix(v, Representation.ONE_HOT, x.labeled)


@dataclass(frozen=True)
class PropagationMatrix:
    """W^(alpha,beta,gamma) = (I - gamma C) D^-alpha W D^-beta, materialized.

    ``echo_degree[i] = sum_j A_ij A_ji``.
    """

    matrix: sparse.csr_matrix
    alpha: float
    beta: float
    gamma: float
    clamp_set: np.ndarray
    echo_degree: np.ndarray
    graph: SparseGraph = field(repr=False, compare=False, default=None)

    @property
    def n(self):
        return self.matrix.shape[0]

    def is_symmetric(self, tol=TOL):
        diff = self.matrix - self.matrix.T
        return diff.nnz == 0 or np.abs(diff.data).max() <= tol

    def toarray(self):
        return self.matrix.toarray()


PRESETS = {
    "LINBP": (0.0, 0.0, 0.0),
    "LNP": (1.0, 0.0, 0.0),
    "HF": (1.0, 0.0, 1.0),
    "LGC": (0.5, 0.5, 0.0),
    "MRW": (0.0, 1.0, 0.0),
}


def _deg_power(deg, p):
    if p == 0:
        return np.ones_like(deg)
    out = np.zeros_like(deg)
    pos = deg > 0
    out[pos] = deg[pos] ** (-p)
    return out


def build_propagation_matrix(g, alpha=0.0, beta=0.0, gamma=0.0, clamp_set=()):
    for name, val in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {val}")
    clamp = np.zeros(g.n, dtype=bool)
    idx = np.asarray(clamp_set)
    if idx.dtype == bool:
        clamp[:] = idx
    elif idx.size:
        clamp[idx.astype(np.int64)] = True
    left = _deg_power(g.degree, alpha) * np.where(clamp, 1.0 - gamma, 1.0)
    right = _deg_power(g.degree, beta)
    A = g.adjacency.copy()
    # row scaling on data, column scaling via indices
    A.data *= np.repeat(left, np.diff(A.indptr)) * right[A.indices]
    A.eliminate_zeros()
    dstar = np.asarray(A.multiply(A.T).sum(axis=1)).ravel()
    return PropagationMatrix(
        matrix=A,
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        clamp_set=_frozen(np.flatnonzero(clamp)),
        echo_degree=_frozen(dstar),
        graph=g,
    )
