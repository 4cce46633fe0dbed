"""Command-line entry point: ``sslh {generate,estimate,propagate,experiment,spectral}``.

Every subcommand accepts ``--config file.toml``; explicit flags override the
file's values.
"""

import argparse
import json
import logging
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .compatibility import CompatibilityMatrix
from .errors import SSLHError
from .estimation import DheConfig, estimate, load_compatibility
from .generator import PlantedGraphSpec, generate, write_planted
from .graph import (
    PRESETS,
    build_propagation_matrix,
    center_labels,
    load_edge_list,
    load_labels,
    write_labels,
)
from .harness import ExperimentSpec, run_experiment, split_labels, write_results
from .propagation import (
    PropagationConfig,
    convergence_boundary,
    propagate,
    spectral_radius,
    write_beliefs,
)

log = logging.getLogger("sslh")


def _load_config(path):
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _merge(cfg, args, keys):
    """Config values, overridden by flags that were given explicitly."""
    out = dict(cfg)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _graph_and_labels(args, k=None):
    g = load_edge_list(args.graph, directed=bool(getattr(args, "directed", False)))
    X = load_labels(args.labels, g.n, k) if getattr(args, "labels", None) else None
    return g, X


def cmd_generate(args):
    cfg = _load_config(args.config)
    cfg = cfg.get("graph", cfg)
    over = {"n": args.n, "m": args.m, "avg_degree": args.avg_degree, "h": args.h,
            "dist": args.dist, "seed": args.seed, "directed": args.directed or None}
    d = dict(cfg)
    for key, val in over.items():
        if val is not None:
            d[key] = val
    if "m" in d and "avg_degree" in d and args.avg_degree is not None:
        d.pop("m")
    if not d.get("n"):
        raise SystemExit("generate: n is required (flag or config)")
    pg = generate(PlantedGraphSpec.from_dict(d))
    meta = write_planted(pg, args.out_prefix)
    if args.label_fraction is not None:
        X_obs, _ = split_labels(pg.labels, args.label_fraction, pg.spec.seed)
        write_labels(X_obs, f"{args.out_prefix}.obs")
    print(json.dumps({"n": meta["n"], "m": meta["m"], "M_planted": meta["M_planted"], "prefix": args.out_prefix}))


def cmd_estimate(args):
    cfg = _merge(_load_config(args.config).get("estimation", {}), args,
                 ["method", "variant", "ell_max", "lam", "restarts"])
    if args.no_ec:
        cfg["ec"] = False
    method = cfg.get("method", "dhe")
    g, X = _graph_and_labels(args, args.k)
    P = build_propagation_matrix(g, args.alpha or 0.0, args.beta or 0.0, args.gamma or 0.0)
    dcfg = DheConfig(ell_max=int(cfg.get("ell_max", 5)), lam=float(cfg.get("lam", cfg.get("lambda", 10.0))),
                     variant=int(cfg.get("variant", 1)), ec=bool(cfg.get("ec", True)),
                     restarts=int(cfg.get("restarts", 3)))
    res = estimate(method, g, X, P=P, variant=int(cfg.get("variant", 1)), dhe_cfg=dcfg)
    if args.out:
        res.save(args.out)
    print(json.dumps(res.to_dict()))


def _read_H(path):
    if path is None:
        return None
    return load_compatibility(path)


def cmd_propagate(args):
    cfg = _merge(_load_config(args.config).get("propagation", {}), args,
                 ["alpha", "beta", "gamma", "s", "epsilon", "r"])
    if args.preset:
        cfg["alpha"], cfg["beta"], cfg["gamma"] = PRESETS[args.preset.upper()]
    homophily = args.preset is not None and args.preset.upper() != "LINBP"
    H = _read_H(args.H)
    if H is None and not homophily:
        raise SystemExit("propagate: --H is required unless a homophily preset is used")
    g, X = _graph_and_labels(args, H.k if H is not None else None)
    if homophily:
        H = CompatibilityMatrix.identity(X.k)
    P = build_propagation_matrix(g, cfg.get("alpha", 0.0), cfg.get("beta", 0.0), cfg.get("gamma", 0.0),
                                 X.labeled_nodes)
    ec = bool(args.ec or cfg.get("ec", False))
    eps = cfg.get("epsilon")
    pcfg = PropagationConfig(alpha=P.alpha, beta=P.beta, gamma=P.gamma, r=int(cfg.get("r", 10)), ec=ec,
                             epsilon=eps, s=None if eps is not None else float(cfg.get("s", 0.5)))
    F = propagate(P, center_labels(X), H, pcfg, threads=args.threads)
    write_beliefs(F, args.out or sys.stdout)


def cmd_experiment(args):
    cfg = _load_config(args.config)
    cfg["seed"] = args.seed
    if args.repetitions is not None:
        cfg["repetitions"] = args.repetitions
    if args.workers is not None:
        cfg["workers"] = args.workers
    cfg["threads"] = args.threads
    spec = ExperimentSpec.from_dict(cfg)
    rows = run_experiment(spec)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_results(rows, fh)
    else:
        write_results(rows, sys.stdout)


def cmd_spectral(args):
    H = _read_H(args.H)
    if H is None:
        raise SystemExit("spectral: --H is required")
    g = load_edge_list(args.graph, directed=args.directed)
    clamp = load_labels(args.labels, g.n, H.k).labeled_nodes if args.labels else ()
    P = build_propagation_matrix(g, args.alpha or 0.0, args.beta or 0.0, args.gamma or 0.0, clamp)
    rho = spectral_radius(P, H, args.ec, 1.0)
    eps_star = convergence_boundary(P, H, args.ec)
    out = {"rho": rho, "epsilon_star": eps_star if np.isfinite(eps_star) else None}
    if args.epsilon is not None:
        rho_eps = spectral_radius(P, H, args.ec, args.epsilon)
        out.update(epsilon=args.epsilon, rho_at_epsilon=rho_eps, converges=bool(rho_eps < 1.0))
    print(json.dumps(out))


def build_parser():
    p = argparse.ArgumentParser(prog="sslh", description="Label propagation with compatibility matrices.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        sp.add_argument("--config", help="TOML file; flags override its values")
        sp.add_argument("--threads", type=int, default=1)
        if graph:
            sp.add_argument("--graph", required=True, help="edge list")
            sp.add_argument("--directed", action="store_true")

    g = sub.add_parser("generate", help="draw a planted graph")
    common(g, graph=False)
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--avg-degree", type=float)
    g.add_argument("--h", type=float, help="strength of the 3-class planted pattern")
    g.add_argument("--dist", help="'uniform' or 'powerlaw:EXP'")
    g.add_argument("--seed", type=int)
    g.add_argument("--directed", action="store_true")
    g.add_argument("--label-fraction", type=float,
                   help="also write PREFIX.obs keeping labels on this fraction of nodes")
    g.add_argument("--out-prefix", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="estimate H from a partially labeled graph")
    common(e)
    e.add_argument("--labels", required=True)
    e.add_argument("--k", type=int)
    e.add_argument("--method", choices=["mhe", "lhe", "dhe"])
    e.add_argument("--variant", type=int, choices=[1, 2, 3])
    e.add_argument("--ell-max", type=int)
    e.add_argument("--lambda", dest="lam", type=float)
    e.add_argument("--restarts", type=int)
    e.add_argument("--no-ec", action="store_true", help="count all walks, not only non-backtracking ones")
    e.add_argument("--alpha", type=float)
    e.add_argument("--beta", type=float)
    e.add_argument("--gamma", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    q = sub.add_parser("propagate", help="propagate labels with a given H")
    common(q)
    q.add_argument("--labels", required=True)
    q.add_argument("--H", help="compatibility JSON (not needed for homophily presets)")
    q.add_argument("--preset", choices=sorted(PRESETS, key=str.lower), type=str.upper)
    q.add_argument("--alpha", type=float)
    q.add_argument("--beta", type=float)
    q.add_argument("--gamma", type=float)
    group = q.add_mutually_exclusive_group()
    group.add_argument("--s", type=float)
    group.add_argument("--epsilon", type=float)
    q.add_argument("--r", type=int)
    q.add_argument("--ec", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_propagate)

    x = sub.add_parser("experiment", help="run a hold-out experiment from a TOML spec")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=int, required=True)
    x.add_argument("--repetitions", type=int)
    x.add_argument("--workers", type=int)
    x.add_argument("--threads", type=int, default=1)
    x.add_argument("--out")
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("spectral", help="spectral radius and convergence boundary")
    common(s)
    s.add_argument("--H", required=True)
    s.add_argument("--labels", help="labeled nodes form the clamp set")
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--ec", action="store_true")
    s.add_argument("--epsilon", type=float)
    s.set_defaults(func=cmd_spectral)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SSLHError as exc:
        print(f"sslh: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:  # output piped into head and friends
        sys.stderr.close()
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
