"""Hold-out experiments over planted (or loaded) graphs.

One repetition = generate/load, split labels, estimate H, find eps*, then
propagate and score every (s, r) grid point. Each repetition derives its seeds
from ``(seed, rep)`` only, so two specs with the same seed see the same graphs
and the same splits.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import math
import time

import numpy as np

from .compatibility import CompatibilityMatrix
from .errors import DegenerateCountsError, EmptyHoldoutError
from .estimation import DheConfig, estimate, load_compatibility
from .generator import PlantedGraphSpec, generate
from .graph import build_propagation_matrix, center_labels, load_edge_list, load_labels
from .propagation import PropagationConfig, convergence_boundary, predict_labels, propagate

METHODS = ("none", "mhe", "lhe", "dhe")


def n_labeled(n, f):
    """round(f * n) with halves rounded up."""
    return int(math.floor(f * n + 0.5))


def split_labels(X_full, f, seed):
    """Keep labels on exactly round(f*n) uniformly chosen nodes; return (X_observed, holdout)."""
    if not 0.0 < f <= 1.0:
        raise ValueError(f"label fraction must lie in (0, 1], got {f}")
    n = X_full.n
    keep = n_labeled(n, f)
    if keep == 0:
        raise DegenerateCountsError(f"f={f} leaves no labeled node among n={n}")
    rng = np.random.default_rng(seed)
    labeled = np.sort(rng.choice(n, size=keep, replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[labeled] = True
    holdout = np.flatnonzero(~mask & X_full.labeled)
    return X_full.restrict(labeled), holdout


def accuracy(predicted, truth, holdout):
    holdout = np.asarray(holdout, dtype=np.int64)
    if holdout.size == 0:
        raise EmptyHoldoutError("hold-out set is empty")
    return float(np.mean(np.asarray(predicted)[holdout] == truth.classes()[holdout]))


@dataclass(frozen=True)
class ExperimentSpec:
    f: float
    graph: dict = None
    edges: str = None
    labels: str = None
    H: object = None
    method: str = "none"
    method_config: dict = field(default_factory=dict)
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    ec: bool = False
    s: tuple = (0.5,)
    r: tuple = (10,)
    repetitions: int = 1
    seed: int = 0
    workers: int = 1
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", self.method.lower())
        for key in ("f", "alpha", "beta", "gamma"):
            object.__setattr__(self, key, float(getattr(self, key)))
        object.__setattr__(self, "ec", bool(self.ec))
        object.__setattr__(self, "s", tuple(float(x) for x in np.atleast_1d(self.s)))
        object.__setattr__(self, "r", tuple(int(x) for x in np.atleast_1d(self.r)))
        self.validate()

    def validate(self):
        if not self.s or not self.r:
            raise ValueError("the (s, r) grid must be non-empty")
        if any(r < 1 for r in self.r):
            raise ValueError("iteration counts must be >= 1")
        if not 0.0 < self.f <= 1.0:
            raise ValueError(f"label fraction must lie in (0, 1], got {self.f}")
        if self.method not in METHODS:
            raise ValueError(f"unknown estimation method {self.method!r}")
        if (self.graph is None) == (self.edges is None):
            raise ValueError("give exactly one of a generator spec or an edge-list path")
        if self.edges is not None and self.labels is None:
            raise ValueError("a loaded graph needs a label file")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.graph is not None:
            gspec = self.graph_spec(0)
            if self.method != "none" and n_labeled(gspec.n, self.f) < gspec.k:
                raise ValueError("f*n must be at least k when H is estimated")
        elif self.method == "none" and self.H is None:
            raise ValueError("estimation 'none' on a loaded graph needs H")

    def graph_spec(self, seed):
        d = dict(self.graph)
        d["seed"] = int(seed)
        return PlantedGraphSpec.from_dict(d)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        prop = d.pop("propagation", {}) or {}
        est = dict(d.pop("estimation", {}) or {})
        out = dict(d)
        if "method" in est:
            out["method"] = est.pop("method")
        if est:
            out["method_config"] = est
        for key in ("alpha", "beta", "gamma", "ec", "s", "r"):
            if key in prop:
                out[key] = prop[key]
        return cls(**out)


COLUMNS = (
    "rep", "seed", "n", "m", "k", "h", "dist", "f", "n_labeled", "method",
    "alpha", "beta", "gamma", "ec", "s", "r", "epsilon_star", "epsilon",
    "accuracy", "H_error",
    "t_generate_ms", "t_estimate_ms", "t_epsilon_ms", "t_propagate_ms", "status",
)


def _rep_seeds(seed, rep):
    ss = np.random.SeedSequence([int(seed), int(rep)])
    graph_seed, split_seed, est_seed = (int(x) for x in ss.generate_state(3, dtype=np.uint64) >> np.uint64(1))
    return graph_seed, split_seed, est_seed


def _ms(t0):
    return (time.perf_counter() - t0) * 1e3


def _method_config(spec, est_seed):
    mc = dict(spec.method_config)
    if spec.method == "dhe":
        cfg = {
            "ell_max": int(mc.get("ell_max", 5)),
            "lam": float(mc.get("lambda", mc.get("lam", 10.0))),
            "variant": int(mc.get("variant", 1)),
            "ec": bool(mc.get("ec", True)),
            "restarts": int(mc.get("restarts", 3)),
            "seed": int(mc.get("seed", est_seed % (2**32))),
        }
        return {"dhe_cfg": DheConfig(**cfg)}
    if spec.method == "mhe":
        return {"variant": int(mc.get("variant", 1))}
    return {}


def _run_rep(spec, rep):
    graph_seed, split_seed, est_seed = _rep_seeds(spec.seed, rep)
    base = dict(rep=rep, seed=spec.seed, f=spec.f, method=spec.method,
                alpha=spec.alpha, beta=spec.beta, gamma=spec.gamma, ec=spec.ec)
    rows = []
    timings = dict(t_generate_ms=0.0, t_estimate_ms=0.0, t_epsilon_ms=0.0)

    def fail(stage, exc):
        for s in spec.s:
            for r in spec.r:
                rows.append({**base, **timings, "s": s, "r": r, "t_propagate_ms": 0.0,
                             "status": f"{stage}: {type(exc).__name__}: {exc}"})
        return rows

    try:
        t0 = time.perf_counter()
        H_true = None
        if spec.graph is not None:
            gspec = spec.graph_spec(graph_seed)
            pg = generate(gspec)
            g, X_full = pg.graph, pg.labels
            H_true = CompatibilityMatrix(gspec.H_array)
            base.update(h=spec.graph.get("h", ""), dist=f"{gspec.dist.kind}:{gspec.dist.exponent:g}")
        else:
            g = load_edge_list(spec.edges)
            X_full = load_labels(spec.labels, g.n)
            base.update(h="", dist="")
        if spec.H is not None:
            H_true = spec.H if isinstance(spec.H, CompatibilityMatrix) else (
                load_compatibility(spec.H) if isinstance(spec.H, str)
                else CompatibilityMatrix(np.asarray(spec.H, dtype=float)))
        timings["t_generate_ms"] = _ms(t0)
        base.update(n=g.n, m=g.m, k=X_full.k)
    except Exception as exc:  # recorded in the status column
        return fail("generate", exc)

    try:
        X_obs, holdout = split_labels(X_full, spec.f, split_seed)
        base["n_labeled"] = int(X_obs.labeled.sum())
        t0 = time.perf_counter()
        if spec.method == "none":
            H_est = H_true
        else:
            H_est = estimate(spec.method, g, X_obs, **_method_config(spec, est_seed)).H
        timings["t_estimate_ms"] = _ms(t0)
        base["H_error"] = (float(np.linalg.norm(H_est.doubly_stochastic().values - H_true.doubly_stochastic().values))
                           if H_true is not None else "")
    except Exception as exc:
        return fail("estimate", exc)

    try:
        t0 = time.perf_counter()
        P = build_propagation_matrix(g, spec.alpha, spec.beta, spec.gamma, X_obs.labeled_nodes)
        eps_star = convergence_boundary(P, H_est, spec.ec)
        timings["t_epsilon_ms"] = _ms(t0)
        base["epsilon_star"] = eps_star
    except Exception as exc:
        return fail("epsilon", exc)

    X_res = center_labels(X_obs)
    for s in spec.s:
        for r in spec.r:
            row = {**base, **timings, "s": s, "r": r}
            t0 = time.perf_counter()
            try:
                eps = s * eps_star
                F = propagate(P, X_res, H_est, PropagationConfig(r=r, ec=spec.ec),
                              epsilon=eps, threads=spec.threads)
                row["t_propagate_ms"] = _ms(t0)
                row.update(epsilon=eps, accuracy=accuracy(predict_labels(F), X_full, holdout), status="ok")
            except Exception as exc:
                row.update(t_propagate_ms=_ms(t0), status=f"propagate: {type(exc).__name__}: {exc}")
            rows.append(row)
    return rows


def run_experiment(spec):
    """Run all repetitions; returns the list of result rows (dicts keyed by COLUMNS)."""
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(lambda rep: _run_rep(spec, rep), range(spec.repetitions)))
    else:
        chunks = [_run_rep(spec, rep) for rep in range(spec.repetitions)]
    rows = [row for chunk in chunks for row in chunk]
    return [{c: row.get(c, "") for c in COLUMNS} for row in rows]


def summarize(rows):
    """Mean and standard deviation of accuracy and H error per (s, r) over successful rows."""
    groups = {}
    for row in rows:
        groups.setdefault((row["s"], row["r"]), []).append(row)
    out = []
    for (s, r), grp in groups.items():
        ok = [x for x in grp if x["status"] == "ok"]
        acc = np.array([x["accuracy"] for x in ok], dtype=float)
        err = np.array([x["H_error"] for x in ok if x["H_error"] != ""], dtype=float)
        out.append({
            "s": s, "r": r, "runs": len(grp), "ok": len(ok),
            "accuracy_mean": float(acc.mean()) if acc.size else "",
            "accuracy_std": float(acc.std()) if acc.size else "",
            "H_error_mean": float(err.mean()) if err.size else "",
            "H_error_std": float(err.std()) if err.size else "",
        })
    return out


SUMMARY_COLUMNS = ("s", "r", "runs", "ok", "accuracy_mean", "accuracy_std", "H_error_mean", "H_error_std")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_results(rows, fh, summary=True):
    """CSV rows, then a blank line and a ``# summary`` block."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in COLUMNS])
    if summary:
        fh.write("\n# summary\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summarize(rows):
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def results_to_string(rows, summary=True):
    buf = io.StringIO()
    write_results(rows, buf, summary)
    return buf.getvalue()


_INT_COLS = {"rep", "seed", "n", "m", "k", "r", "n_labeled"}
_FLOAT_COLS = {"f", "alpha", "beta", "gamma", "s", "epsilon_star", "epsilon", "accuracy", "H_error",
               "t_generate_ms", "t_estimate_ms", "t_epsilon_ms", "t_propagate_ms"}


def _parse(col, text):
    if text == "":
        return ""
    if col in _INT_COLS:
        return int(text)
    if col in _FLOAT_COLS:
        return float(text)
    if col == "ec":
        return text == "true"
    if col == "h":
        try:
            return float(text) if "." in text or "e" in text else int(text)
        except ValueError:
            return text
    return text


def read_results(fh):
    """Parse the main block written by ``write_results`` back into row dicts."""
    reader = csv.reader(fh)
    header = next(reader)
    rows = []
    for rec in reader:
        if not rec:
            break
        rows.append({c: _parse(c, v) for c, v in zip(header, rec)})
    return rows
