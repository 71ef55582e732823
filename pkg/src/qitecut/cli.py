"""Command-line entry point: ``qitecut {run,sweep,oracle,greedy,enumerate,itd-search}``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import SweepSpec, ground_predicate, ground_probability, parse_itd, run_sweep
from .graphio import (
    ENUMERATION_MAX_N,
    Graph,
    Graph6Error,
    GraphEnsemble,
    enumerate_connected,
    erdos_renyi,
    graph6_id,
    parse_graph6,
    random_connected_ensemble,
    read_graph6_file,
    serialize_graph6,
)
from .metrics import evaluate, round_state
from .oracles import (
    BRUTE_FORCE_CAP,
    UnsupportedSizeError,
    brute_force_maxcut,
    cut_value,
    multistart_greedy,
)
from .qite import ItdSchedule, QiteConfig, itd_pair_search, run

EXIT_INPUT = 2
EXIT_SIZE = 3

CONFIG_KEYS = {
    "max_steps", "tau_min", "tau_max", "tau_points", "refine", "refine_tol",
    "variance_tol", "stop_on_eigenstate", "keep_incumbent", "tau_mode", "fixed_tau",
}

log = logging.getLogger("qitecut")


class InputError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("steps must be positive integers")
    return vals


def _er_triple(text: str) -> tuple[int, float, int]:
    try:
        n, p, seed = text.split(",")
        return int(n), float(p), int(seed)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n,p,seed, got {text!r}")


def _er_ensemble(text: str) -> tuple[int, float, float, int]:
    try:
        n, lo, hi, count = text.split(",")
        return int(n), float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n,p_lo,p_hi,count, got {text!r}")


def _add_source(p: argparse.ArgumentParser, ensemble: bool) -> None:
    src = p.add_argument_group("graph source")
    src.add_argument("--g6", help="graph6 string")
    src.add_argument("--graphs", metavar="FILE", help="graph6 file, one graph per line")
    src.add_argument("--er", type=_er_triple, metavar="N,P,SEED", help="one Erdos-Renyi graph")
    if ensemble:
        src.add_argument("--enumerate", type=int, metavar="N", help="all connected graphs on N vertices")
        src.add_argument("--er-ensemble", type=_er_ensemble, metavar="N,PLO,PHI,COUNT",
                         help="random graphs with p ~ U(PLO, PHI); uses --seed")
        src.add_argument("--allow-disconnected", action="store_true",
                         help="keep disconnected draws in --er-ensemble")
        src.add_argument("--subsample", type=int, metavar="K",
                         help="seeded random subsample of K graphs (kept in file order)")
    else:
        src.add_argument("--index", type=int, default=0, help="record to use from --graphs")


def _add_qite(p: argparse.ArgumentParser, sweep: bool) -> None:
    q = p.add_argument_group("QITE")
    if sweep:
        q.add_argument("--steps", type=_int_list, default=[1, 4, 10], help="comma-separated step counts")
    else:
        q.add_argument("--steps", type=int, default=None, help="maximum number of QITE steps")
    q.add_argument("--tau-max", type=float)
    q.add_argument("--tau-points", type=int)
    q.add_argument("--fixed-tau", type=float, help="use this tau every step instead of the line search")
    q.add_argument("--no-stop", action="store_true", help="run all steps even at an eigenstate")
    q.add_argument("--itd", default="off", help="off | exhaustive | random:K")
    q.add_argument("--ramp", default="1.0,0.5", help="excised-edge weight factors f(1), f(2), ...")
    q.add_argument("--config", metavar="JSON", help="QITE settings file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qitecut", description="Product-state QITE for MaxCut.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run QITE on one graph and print JSON")
    _add_source(p, ensemble=False)
    _add_qite(p, sweep=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--starts", type=int, default=200, help="greedy starts for the best-known cut (n > 24)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="evaluate an ensemble, write CSV/JSON/SVG")
    _add_source(p, ensemble=True)
    _add_qite(p, sweep=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--no-reference-line", action="store_true", help="omit the 0.878 line")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact MaxCut by enumeration")
    _add_source(p, ensemble=False)
    p.add_argument("--spectrum", action="store_true", help="include the cut-value histogram")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("greedy", help="multi-start greedy cut")
    _add_source(p, ensemble=False)
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("enumerate", help="write all connected graphs on N vertices as graph6")
    p.add_argument("n", type=int)
    p.add_argument("--out", metavar="FILE", help="default: stdout")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("itd-search", help="try excising edge pairs on one graph")
    _add_source(p, ensemble=False)
    _add_qite(p, sweep=False)
    p.set_defaults(itd="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_itd_search)
    return parser


# -- helpers -----------------------------------------------------------------


def _load_file(path: str) -> list[Graph]:
    try:
        return read_graph6_file(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}")


def single_graph(args) -> tuple[str, Graph]:
    given = [x for x in (args.g6, args.graphs, args.er) if x is not None]
    if len(given) != 1:
        raise InputError("give exactly one of --g6, --graphs, --er")
    if args.g6 is not None:
        g = parse_graph6(args.g6)
        return graph6_id(g), g
    if args.er is not None:
        n, p, seed = args.er
        if n < 1:
            raise InputError("n must be at least 1")
        return f"er-{n}-{p:.6f}-{seed}", erdos_renyi(n, p, seed)
    graphs = _load_file(args.graphs)
    if not 0 <= args.index < len(graphs):
        raise InputError(f"{args.graphs} has {len(graphs)} graphs; index {args.index} out of range")
    g = graphs[args.index]
    return graph6_id(g), g


def ensemble_from_args(args) -> tuple[GraphEnsemble, dict]:
    given = [x for x in (args.g6, args.graphs, args.er, args.enumerate, args.er_ensemble) if x is not None]
    if len(given) != 1:
        raise InputError("give exactly one of --g6, --graphs, --er, --enumerate, --er-ensemble")
    if args.enumerate is not None:
        if args.enumerate > ENUMERATION_MAX_N:
            raise UnsupportedSizeError(
                f"enumeration supports n <= {ENUMERATION_MAX_N}; pass a graph6 file with --graphs"
            )
        ens = enumerate_connected(args.enumerate)
        source = {"kind": "enumerate", "n": args.enumerate}
    elif args.er_ensemble is not None:
        n, lo, hi, count = args.er_ensemble
        ens = random_connected_ensemble(n, (lo, hi), count, args.seed, connected=not args.allow_disconnected)
        source = {"kind": "erdos_renyi", **ens.params}
    elif args.graphs is not None:
        graphs = _load_file(args.graphs)
        ens = GraphEnsemble(tuple(graphs), tuple(graph6_id(g) for g in graphs), "file",
                            {"path": str(args.graphs)})
        source = {"kind": "file", "path": str(Path(args.graphs).resolve()), "records": len(graphs)}
    else:
        gid, g = single_graph(args)
        ens = GraphEnsemble((g,), (gid,), "single", {})
        source = {"kind": "single", "graph_id": gid}
    if args.subsample is not None and args.subsample < len(ens):
        keep = subsample_indices(len(ens), args.subsample, args.seed)
        ens = GraphEnsemble(tuple(ens.graphs[k] for k in keep), tuple(ens.ids[k] for k in keep),
                            ens.provenance, {**ens.params, "subsample": args.subsample})
        source["subsample"] = {"size": args.subsample, "seed": args.seed}
    return ens, source


def subsample_indices(total: int, k: int, seed: int) -> list[int]:
    """``k`` distinct indices drawn with ``default_rng(seed)``, sorted."""
    return sorted(np.random.default_rng(seed).choice(total, size=k, replace=False).tolist())


def config_from_args(args) -> QiteConfig:
    settings: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                settings = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read {args.config}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc})")
        unknown = set(settings) - CONFIG_KEYS
        if unknown:
            raise InputError(f"{args.config}: unknown keys {sorted(unknown)}")
    steps = args.steps
    if isinstance(steps, list):
        settings["max_steps"] = max(steps)
    elif steps is not None:
        settings["max_steps"] = steps
    if args.tau_max is not None:
        settings["tau_max"] = args.tau_max
    if args.tau_points is not None:
        settings["tau_points"] = args.tau_points
    if args.fixed_tau is not None:
        settings.update(tau_mode="fixed", fixed_tau=args.fixed_tau)
    if args.no_stop:
        settings["stop_on_eigenstate"] = False
    return QiteConfig(**settings)


def _ramp(args) -> tuple[float, ...]:
    try:
        ramp = tuple(float(x) for x in args.ramp.split(","))
        ItdSchedule((0, 1), ramp)
    except ValueError as exc:
        raise InputError(f"bad --ramp: {exc}")
    return ramp


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _best_known(g: Graph, res, starts: int, seed: int) -> float:
    greedy, _ = multistart_greedy(g, starts, seed)
    produced = [cut_value(g, round_state(res.state_at(s))) for s in range(1, res.steps_taken + 1)]
    return max([greedy] + produced)


# -- commands ----------------------------------------------------------------


def cmd_run(args) -> int:
    gid, g = single_graph(args)
    cfg = config_from_args(args)
    mode = parse_itd(args.itd, args.seed)
    oracle = brute_force_maxcut(g) if g.n <= BRUTE_FORCE_CAP else None
    pair: tuple[int, ...] = ()
    if mode is None:
        res = run(g, cfg)
    else:
        success = ground_predicate(oracle, g) if oracle else None
        search = itd_pair_search(g, cfg, mode, success, ramp=_ramp(args), jobs=args.jobs)
        res, pair = search.result, search.pair
    if oracle:
        c_max, exact = oracle.c_max, True
    else:
        c_max, exact = _best_known(g, res, args.starts, args.seed), False
    pg = ground_probability(res.final_state, g, oracle) if oracle else None
    report = evaluate(res.final_state, g, c_max, c_max_exact=exact, p_ground_value=pg,
                      shots=args.shots, seed=args.seed, energies=res.energies)
    _dump({
        "graph": {"id": gid, "n": g.n, "num_edges": g.m},
        "config": cfg.to_dict(),
        "seed": args.seed,
        "itd": args.itd,
        "itd_pair": list(pair),
        "run": res.to_dict(),
        "metrics": report.to_dict(),
        "rounded_bits": "".join(map(str, round_state(res.final_state))),
    })
    return 0


def cmd_sweep(args) -> int:
    ens, source = ensemble_from_args(args)
    if len(ens) == 0:
        raise InputError("empty ensemble")
    cfg = config_from_args(args)
    spec = SweepSpec(steps=tuple(args.steps), itd=args.itd, seed=args.seed,
                     greedy_starts=args.starts, shots=args.shots,
                     reference_line=not args.no_reference_line)
    summary = run_sweep(ens, cfg, spec, args.out, jobs=args.jobs, source=source, svg=not args.no_svg)
    _dump(summary)
    return 0 if summary["n_failed"] == 0 else 1


def cmd_oracle(args) -> int:
    gid, g = single_graph(args)
    res = brute_force_maxcut(g)
    out = {"graph": {"id": gid, "n": g.n, "num_edges": g.m}, **res.to_dict(g.n)}
    if not args.spectrum:
        out.pop("spectrum")
    _dump(out)
    return 0


def cmd_greedy(args) -> int:
    gid, g = single_graph(args)
    cut, side = multistart_greedy(g, args.starts, args.seed)
    _dump({
        "graph": {"id": gid, "n": g.n, "num_edges": g.m},
        "cut": cut,
        "bits": "".join(str(int(b)) for b in side),
        "starts": args.starts,
        "seed": args.seed,
        "half_weight_bound": math.ceil(float(g.weight_array.sum()) / 2) if g.m else 0,
    })
    return 0


def cmd_enumerate(args) -> int:
    if args.n > ENUMERATION_MAX_N:
        raise UnsupportedSizeError(
            f"enumeration supports n <= {ENUMERATION_MAX_N}; larger sets come from graph6 files"
        )
    ens = enumerate_connected(args.n)
    data = b"".join(serialize_graph6(g) + b"\n" for g in ens.graphs)
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"wrote {len(ens)} graphs to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(data.decode("ascii"))
    return 0


def cmd_itd_search(args) -> int:
    gid, g = single_graph(args)
    cfg = config_from_args(args)
    mode = parse_itd(args.itd, args.seed)
    if mode is None:
        raise InputError("itd-search needs --itd exhaustive or random:K")
    oracle = brute_force_maxcut(g) if g.n <= BRUTE_FORCE_CAP else None
    success = ground_predicate(oracle, g) if oracle else None
    search = itd_pair_search(g, cfg, mode, success, ramp=_ramp(args), jobs=args.jobs)
    final = search.result.final_state
    _dump({
        "graph": {"id": gid, "n": g.n, "num_edges": g.m},
        "config": cfg.to_dict(),
        "mode": args.itd,
        "seed": args.seed,
        "plain_energy": search.plain.final_energy,
        "plain_success": bool(success(search.plain)) if success else None,
        "best_pair": list(search.pair),
        "best_energy": search.result.final_energy,
        "success": search.success,
        "p_ground": ground_probability(final, g, oracle) if oracle else None,
        "c_max": oracle.c_max if oracle else None,
        "rounded_cut": cut_value(g, round_state(final)),
        "pairs_tried": len(search.table),
        "n_successful": search.n_successful if success else None,
        "table": [{"pair": list(p), "success": ok, "energy": e} for p, ok, e in search.table],
    })
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UnsupportedSizeError as exc:
        print(f"qitecut: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (InputError, Graph6Error, ValueError) as exc:
        print(f"qitecut: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
