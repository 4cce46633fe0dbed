"""Planted random graphs with exact class-pair edge counts.

The generator takes (n, m, class fractions, H, degree family) and produces a
labeled graph whose directed class-to-class edge counts are exactly the
rounded ``m / sum(H) * H``. Undirected graphs are drawn as a directed graph
without reciprocal edges and then mirrored.
"""

from dataclasses import asdict, dataclass, field
import json
import logging

import numpy as np

from . import kernels
from .errors import AssignmentDeadlockError, InfeasibleSpecError
from .graph import LabelMatrix, SparseGraph, write_edge_list, write_labels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DegreeDist:
    kind: str = "uniform"
    exponent: float = 0.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("uniform", "powerlaw"):
            raise ValueError(f"unknown degree distribution {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        # "exponent -0.3" and "exponent 0.3" both mean d(v) ~ v^-0.3
        object.__setattr__(self, "exponent", abs(float(self.exponent)) if kind == "powerlaw" else 0.0)

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def powerlaw(cls, exponent):
        return cls("powerlaw", exponent)

    @classmethod
    def parse(cls, value):
        """Accept a DegreeDist, 'uniform', 'powerlaw:0.3' or a mapping."""
        if isinstance(value, DegreeDist):
            return value
        if isinstance(value, dict):
            return cls(value.get("kind", "uniform"), value.get("exponent", 0.0))
        text = str(value).strip().lower()
        if text == "uniform":
            return cls.uniform()
        if text.startswith("powerlaw"):
            _, _, exp = text.partition(":")
            return cls.powerlaw(float(exp or 0.3))
        raise ValueError(f"cannot parse degree distribution {value!r}")


@dataclass(frozen=True)
class PlantedGraphSpec:
    n: int
    m: int
    class_fractions: tuple
    H: tuple
    dist: DegreeDist = field(default_factory=DegreeDist)
    directed: bool = False
    seed: int = 0
    # directed mode only; undirected graphs never keep reciprocal pairs
    allow_2cycles: bool = False

    def __post_init__(self):
        object.__setattr__(self, "class_fractions", tuple(float(a) for a in self.class_fractions))
        object.__setattr__(self, "H", tuple(tuple(float(x) for x in row) for row in np.asarray(self.H)))
        object.__setattr__(self, "dist", DegreeDist.parse(self.dist))

    @property
    def k(self):
        return len(self.class_fractions)

    @property
    def H_array(self):
        return np.array(self.H)

    def to_dict(self):
        d = asdict(self)
        d["H"] = [list(r) for r in self.H]
        d["class_fractions"] = list(self.class_fractions)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "avg_degree" in d and "m" not in d:
            # average degree 2m/n for undirected graphs, m/n for directed ones
            d["m"] = int(round(d.pop("avg_degree") * d["n"] / (1 if d.get("directed") else 2)))
        d.pop("avg_degree", None)
        if "h" in d and "H" not in d:
            from .compatibility import planted_pattern
            d["H"] = planted_pattern(d.pop("h"))
        d.pop("h", None)
        if "class_fractions" not in d:
            k = len(d["H"])
            d["class_fractions"] = [1.0 / k] * k
        return cls(**d)


@dataclass(frozen=True)
class PlantedGraph:
    graph: SparseGraph
    labels: LabelMatrix
    M_planted: np.ndarray
    out_degree: np.ndarray
    in_degree: np.ndarray
    spec: PlantedGraphSpec
    restarts: int = 0


def largest_remainder(target, total):
    """Round ``target`` to integers summing to ``total``; biggest fractions round up.

    Ties go to the lowest flat index.
    """
    target = np.asarray(target, dtype=float)
    flat = target.ravel()
    base = np.floor(flat + 1e-9).astype(np.int64)
    rest = int(total) - int(base.sum())
    frac = flat - base
    order = np.lexsort((np.arange(flat.size), -np.round(frac, 12)))
    out = base.copy()
    if rest > 0:
        out[order[:rest]] += 1
    elif rest < 0:
        out[order[::-1][: -rest]] -= 1
    return out.reshape(target.shape)


def symmetric_rounding(target, total):
    """Largest-remainder rounding that keeps a symmetric matrix symmetric.

    Off-diagonal pairs move together (weight 2); an exact-total subset is
    chosen by a small knapsack maximizing the rounded-up fractional mass.
    """
    T = np.asarray(target, dtype=float)
    k = T.shape[0]
    base = np.floor(T + 1e-9).astype(np.int64)
    base = np.minimum(base, base.T)
    rest = int(total) - int(base.sum())
    cand = [((i, i), 1, T[i, i] - base[i, i]) for i in range(k)]
    cand += [((i, j), 2, 2 * (T[i, j] - base[i, j])) for i in range(k) for j in range(i + 1, k)]
    if rest < 0 or rest > sum(w for _, w, _ in cand):
        raise InfeasibleSpecError([f"cannot round symmetric counts to total {total}"])
    # best[w] = (score, chosen indices)
    best = {0: (0.0, ())}
    for idx, (_, w, gain) in enumerate(cand):
        for cur in sorted(best, reverse=True):
            nw = cur + w
            if nw > rest:
                continue
            score = best[cur][0] + gain
            if nw not in best or score > best[nw][0] + 1e-12:
                best[nw] = (score, best[cur][1] + (idx,))
    if rest not in best:
        raise InfeasibleSpecError([f"cannot round symmetric counts to total {total}"])
    out = base.copy()
    for idx in best[rest][1]:
        (i, j), _, _ = cand[idx]
        out[i, j] += 1
        if i != j:
            out[j, i] += 1
    return out


def class_counts(n, fractions):
    return largest_remainder(np.asarray(fractions) * n, n)


def planted_counts(spec):
    """Directed cell counts drawn before mirroring, and the planted XᵀWX."""
    H = spec.H_array
    target = spec.m / H.sum() * H
    if spec.directed:
        M_dir = largest_remainder(target, spec.m)
        return M_dir, M_dir.copy()
    M_dir = symmetric_rounding(target, spec.m)
    return M_dir, M_dir + M_dir.T


def fit_degree_sequence(n_class, m_class, dist):
    """Integer degrees (descending by rank) summing to ``m_class``, each >= 1.

    The continuous profile is ``m * v^-delta / sum`` over ranks v = 1..n; any
    entries below one are lifted to one and the remainder re-spread
    proportionally before largest-remainder rounding (ties to higher ranks).
    """
    n_class = int(n_class)
    m_class = int(m_class)
    if n_class < 1:
        raise InfeasibleSpecError(["class has no nodes"])
    if m_class < n_class:
        raise InfeasibleSpecError([f"{m_class} edges cannot give {n_class} nodes degree >= 1"])
    dist = DegreeDist.parse(dist)
    ranks = np.arange(1, n_class + 1, dtype=float)
    profile = ranks ** (-dist.exponent)
    cont = m_class * profile / profile.sum()
    floor_mask = np.zeros(n_class, dtype=bool)
    while True:
        low = (cont < 1.0) & ~floor_mask
        if not low.any():
            break
        floor_mask |= low
        free = ~floor_mask
        cont = np.where(floor_mask, 1.0, 0.0)
        if free.any():
            cont[free] = (m_class - floor_mask.sum()) * profile[free] / profile[free].sum()
    return largest_remainder(cont, m_class)


def validate_spec(spec, raise_on_error=True):
    """Check a spec for feasibility and report the implied per-class degrees."""
    violations = []
    alpha = np.asarray(spec.class_fractions, dtype=float)
    H = spec.H_array
    k = alpha.size
    if H.shape != (k, k):
        violations.append(f"H has shape {H.shape}, expected {(k, k)}")
    if abs(alpha.sum() - 1.0) > 1e-12:
        violations.append(f"class fractions sum to {alpha.sum():.15g}")
    if np.any(alpha <= 0):
        violations.append(f"zero-fraction classes {np.flatnonzero(alpha <= 0).tolist()}")
    if np.any(H < 0):
        violations.append("H has negative entries")
    if not spec.directed and H.shape == (k, k) and np.abs(H - H.T).max() > 1e-12:
        violations.append("undirected mode requires a symmetric H")
    if spec.n <= 0 or spec.m <= 0:
        violations.append("n and m must be positive")
    report = {"violations": violations}
    if violations:
        if raise_on_error:
            raise InfeasibleSpecError(violations)
        return report

    counts = class_counts(spec.n, alpha)
    M_dir, M_planted = planted_counts(spec)
    target = spec.m / H.sum() * H
    m_out = M_dir.sum(axis=1)
    m_in = M_dir.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_out = m_out / counts
        d_in = m_in / counts
    if np.abs(M_dir - target).max() > 1.0:
        violations.append("rounding drift of M exceeds one edge per cell")
    for c in range(k):
        if counts[c] == 0:
            violations.append(f"class {c} rounds to zero nodes")
            continue
        for name, tot in (("out", m_out[c]), ("in", m_in[c])):
            if tot < counts[c]:
                violations.append(
                    f"class {c} needs {counts[c]} nodes with {name}-degree >= 1 but has {tot} {name}-edges")
    if not violations:
        # a class pair cannot hold more edges than it has distinct node pairs
        reciprocal = spec.directed and spec.allow_2cycles
        for c in range(k):
            for d in range(c, k):
                if c == d:
                    need = M_dir[c, c]
                    cap = counts[c] * (counts[c] - 1) // (1 if reciprocal else 2)
                elif reciprocal:
                    need = max(M_dir[c, d], M_dir[d, c])
                    cap = counts[c] * counts[d]
                else:
                    need = M_dir[c, d] + M_dir[d, c]
                    cap = counts[c] * counts[d]
                if need > cap:
                    violations.append(f"classes ({c}, {d}) need {need} edges but admit only {cap}")
    if not violations:
        for c in range(k):
            reach_out = counts[M_dir[c] > 0].sum() - (1 if M_dir[c, c] > 0 else 0)
            reach_in = counts[M_dir[:, c] > 0].sum() - (1 if M_dir[c, c] > 0 else 0)
            top_out = fit_degree_sequence(counts[c], m_out[c], spec.dist)[0]
            top_in = fit_degree_sequence(counts[c], m_in[c], spec.dist)[0]
            if top_out > reach_out or top_in > reach_in:
                violations.append(
                    f"class {c} has fewer distinct neighbors than its largest degree "
                    f"(out {top_out} vs {reach_out}, in {top_in} vs {reach_in})")
    report.update(
        class_counts=counts, M=M_dir, M_planted=M_planted,
        m_out=m_out, m_in=m_in, d_out=d_out, d_in=d_in,
    )
    if violations and raise_on_error:
        raise InfeasibleSpecError(violations)
    return report


def generate(spec, max_restarts=20):
    """Draw a planted graph; same spec and seed give the same edge set."""
    report = validate_spec(spec)
    counts = report["class_counts"]
    M_dir = report["M"]
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n, spec.k

    node_class = rng.permutation(np.repeat(np.arange(k), counts))
    out_deg = np.zeros(n, dtype=np.int64)
    in_deg = np.zeros(n, dtype=np.int64)
    for c in range(k):
        members = np.flatnonzero(node_class == c)
        out_deg[members] = rng.permutation(fit_degree_sequence(counts[c], report["m_out"][c], spec.dist))
        in_deg[members] = rng.permutation(fit_degree_sequence(counts[c], report["m_in"][c], spec.dist))

    for attempt in range(max_restarts + 1):
        kseed = int(rng.integers(0, 2**63))
        src, dst, ok = kernels.assign_edges(
            node_class, out_deg, in_deg, M_dir, kseed,
            reciprocal=spec.directed and spec.allow_2cycles)
        if ok:
            break
        log.debug("edge assignment deadlocked after %d edges (attempt %d)", len(src), attempt)
    else:
        raise AssignmentDeadlockError(
            f"no feasible edge assignment after {max_restarts} restarts")

    graph = SparseGraph.from_edges(src, dst, n=n, directed=spec.directed)
    labels = LabelMatrix.from_classes(node_class, k)
    return PlantedGraph(
        graph=graph,
        labels=labels,
        M_planted=report["M_planted"],
        out_degree=out_deg,
        in_degree=in_deg,
        spec=spec,
        restarts=attempt,
    )


def write_planted(pg, prefix):
    """Write ``prefix.edges``, ``prefix.labels`` and the ``prefix.meta.json`` sidecar."""
    write_edge_list(pg.graph, f"{prefix}.edges")
    write_labels(pg.labels, f"{prefix}.labels")
    meta = {
        "spec": pg.spec.to_dict(),
        "seed": pg.spec.seed,
        "M_planted": pg.M_planted.tolist(),
        "n": pg.graph.n,
        "m": pg.graph.m,
        "restarts": pg.restarts,
        "backend": kernels.BACKEND,
    }
    with open(f"{prefix}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return meta
