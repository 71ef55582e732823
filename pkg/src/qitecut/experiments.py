"""Ensemble sweeps: per-graph evaluation, CSV/JSON output and SVG histograms."""
from __future__ import annotations

import csv
import json
import logging
import statistics
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graphio import Graph, GraphEnsemble
from .metrics import (
    GROUND_THRESHOLD,
    evaluate,
    p_ground,
    round_state,
    sample_state,
    steps_to_ratio,
)
from .oracles import (
    BRUTE_FORCE_CAP,
    GOEMANS_WILLIAMSON_RATIO,
    brute_force_maxcut,
    cut_value,
    ground_state_probability,
    multistart_greedy,
)
from .qite import QiteConfig, RunResult, itd_pair_search, run

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "graph_id",
    "n",
    "num_edges",
    "step",
    "energy",
    "ratio_expected",
    "ratio_rounded",
    "p_ground",
    "tau",
    "terminated_by",
    "itd_pair",
    "c_max",
    "c_max_exact",
]
HIST_BINS = 20


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep. ``itd`` is ``"off"``, ``"exhaustive"`` or ``"random:K"``."""

    steps: tuple[int, ...] = (1, 4, 10)
    itd: str = "off"
    seed: int = 0
    greedy_starts: int = 200
    shots: int = 0
    reference_line: bool = True

    def __post_init__(self):
        steps = tuple(sorted(set(int(s) for s in self.steps)))
        if not steps or steps[0] < 1:
            raise ValueError("steps must be positive integers")
        object.__setattr__(self, "steps", steps)
        parse_itd(self.itd, self.seed)


def parse_itd(text: str, seed: int = 0):
    """``off`` -> None, ``exhaustive``, or ``random:K`` -> ``("random", K, seed)``."""
    if text in ("off", "", None):
        return None
    if text == "exhaustive":
        return "exhaustive"
    if text.startswith("random:"):
        k = int(text.split(":", 1)[1])
        if k < 1:
            raise ValueError("random ITD search needs K >= 1")
        return ("random", k, seed)
    raise ValueError(f"unknown ITD mode {text!r}")


@dataclass
class GraphOutcome:
    graph_id: str
    n: int
    num_edges: int
    rows: list[dict] = field(default_factory=list)
    c_max: float = 0.0
    c_max_exact: bool = True
    itd_pair: tuple[int, ...] = ()
    steps_to_93: int | None = None
    greedy_cut: float | None = None
    n_successful_pairs: int | None = None
    pairs_tried: int = 0
    error: str | None = None


def ground_predicate(oracle, g: Graph):
    """Run counts as a success when P_ground exceeds the convergence threshold."""

    def success(res: RunResult) -> bool:
        return ground_probability(res.final_state, g, oracle) > GROUND_THRESHOLD

    return success


def ground_probability(st, g: Graph, oracle) -> float:
    """P_ground, streamed over all assignments when the ground-state list was truncated."""
    if oracle.truncated:
        return ground_state_probability(st.phi, g, oracle.c_max)
    return p_ground(st, oracle.ground_states)


def evaluate_graph(
    graph_id: str, g: Graph, cfg: QiteConfig, spec: SweepSpec
) -> GraphOutcome:
    """Run QITE (and the optional ITD search) on one graph and collect per-step metrics.

    Graphs above the brute-force cap are scored against the best known cut:
    the maximum over multi-start greedy and every cut QITE itself produced.
    """
    cfg = replace(cfg, max_steps=max(cfg.max_steps, spec.steps[-1]), itd=None)
    oracle = brute_force_maxcut(g) if g.n <= BRUTE_FORCE_CAP else None
    itd_mode = parse_itd(spec.itd, spec.seed)
    out = GraphOutcome(graph_id, g.n, g.m)
    if itd_mode is None:
        res, pair = run(g, cfg), ()
    else:
        success = ground_predicate(oracle, g) if oracle is not None else None
        search = itd_pair_search(g, cfg, itd_mode, success)
        res, pair = search.result, search.pair
        out.n_successful_pairs = search.n_successful if success else None
        out.pairs_tried = len(search.table)
    out.itd_pair = tuple(pair)
    if oracle is not None:
        c_max, exact = oracle.c_max, True
    else:
        greedy, _ = multistart_greedy(g, spec.greedy_starts, spec.seed)
        out.greedy_cut = greedy
        produced = [cut_value(g, round_state(res.state_at(s))) for s in range(1, res.steps_taken + 1)]
        if spec.shots:
            produced += [
                cut_value(g, row) for row in sample_state(res.final_state, spec.shots, spec.seed)
            ]
        c_max, exact = max([greedy] + produced), False
    out.c_max, out.c_max_exact = c_max, exact
    energies = [res.energy_at(s) for s in range(1, cfg.max_steps + 1)]
    for s in spec.steps:
        st = res.state_at(s)
        pg = ground_probability(st, g, oracle) if oracle is not None else None
        rep = evaluate(st, g, c_max, c_max_exact=exact, p_ground_value=pg)
        rec = res.trajectory[min(s, res.steps_taken) - 1] if res.trajectory else None
        out.rows.append(
            {
                "graph_id": graph_id,
                "n": g.n,
                "num_edges": g.m,
                "step": s,
                "energy": res.energy_at(s),
                "ratio_expected": rep.ratio_expected,
                "ratio_rounded": rep.ratio_rounded,
                "p_ground": pg,
                "tau": rec.tau if rec else 0.0,
                "terminated_by": res.terminated_by,
                "itd_pair": "-".join(map(str, pair)),
                "c_max": c_max,
                "c_max_exact": exact,
            }
        )
    out.steps_to_93 = steps_to_ratio(energies, g, c_max)
    return out


def _safe_evaluate(args) -> GraphOutcome:
    graph_id, g, cfg, spec = args
    try:
        return evaluate_graph(graph_id, g, cfg, spec)
    except Exception as exc:  # reported in the failure manifest
        out = GraphOutcome(graph_id, g.n, g.m)
        out.error = f"{type(exc).__name__}: {exc}"
        log.debug("graph %s failed\n%s", graph_id, traceback.format_exc())
        return out


def iter_outcomes(
    ensemble: GraphEnsemble, cfg: QiteConfig, spec: SweepSpec, jobs: int = 1
) -> Iterable[GraphOutcome]:
    """Outcomes in ensemble order, whatever order the workers finish in."""
    tasks = [(gid, g, cfg, spec) for gid, g in zip(ensemble.ids, ensemble.graphs)]
    if jobs <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield _safe_evaluate(t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_safe_evaluate, tasks, chunksize=max(1, len(tasks) // (8 * jobs)))


def summarize(outcomes: Sequence[GraphOutcome], spec: SweepSpec) -> dict:
    ok = [o for o in outcomes if o.error is None]
    per_step = {}
    for s in spec.steps:
        rows = [r for o in ok for r in o.rows if r["step"] == s]
        pgs = [r["p_ground"] for r in rows if r["p_ground"] is not None]
        per_step[str(s)] = {
            "count": len(rows),
            "mean_ratio_expected": _mean(r["ratio_expected"] for r in rows),
            "mean_ratio_rounded": _mean(r["ratio_rounded"] for r in rows),
            "min_ratio_expected": min((r["ratio_expected"] for r in rows), default=None),
            "min_ratio_rounded": min((r["ratio_rounded"] for r in rows), default=None),
            "mean_p_ground": _mean(pgs) if pgs else None,
            "ground_converged": sum(p > GROUND_THRESHOLD for p in pgs) if pgs else None,
            "p_ground_zero": sum(p < 1e-9 for p in pgs) if pgs else None,
        }
    s93 = [o.steps_to_93 for o in ok if o.steps_to_93 is not None]
    return {
        "n_graphs": len(outcomes),
        "n_failed": len(outcomes) - len(ok),
        "steps": per_step,
        "p_ground_threshold": GROUND_THRESHOLD,
        "approximate_c_max": any(not o.c_max_exact for o in ok),
        "c_max_note": (
            "ratios for graphs above the brute-force cap use the best known cut "
            "(multi-start greedy and QITE outputs) and are approximate"
        ),
        "steps_to_93": {
            "reached": len(s93),
            "mean": _mean(s93) if s93 else None,
            "median": statistics.median(s93) if s93 else None,
            "min": min(s93, default=None),
            "max": max(s93, default=None),
        },
        "itd": spec.itd,
        "itd_rescued": sum(1 for o in ok if o.itd_pair),
    }


def _mean(xs) -> float | None:
    xs = list(xs)
    return float(np.mean(xs)) if xs else None


def histogram_svg(
    values: Sequence[float],
    title: str,
    bins: int = HIST_BINS,
    reference: float | None = None,
    width: int = 480,
    height: int = 320,
) -> str:
    """Bar histogram of values on [0, 1] as a standalone SVG document."""
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    left, right, top, bottom = 50, 15, 30, 40
    pw, ph = width - left - right, height - top - bottom
    peak = max(int(counts.max()) if counts.size else 0, 1)
    bw = pw / bins
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k, c in enumerate(counts):
        h = ph * c / peak
        parts.append(
            f'<rect x="{left + k * bw + 1:.2f}" y="{top + ph - h:.2f}" width="{bw - 2:.2f}" '
            f'height="{h:.2f}" fill="#4878a8"/>'
        )
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = left + t * pw
        parts.append(f'<text x="{x:.1f}" y="{top + ph + 15}" text-anchor="middle">{t:g}</text>')
    parts.append(f'<text x="{left - 6}" y="{top + 4}" text-anchor="end">{peak}</text>')
    parts.append(f'<text x="{left - 6}" y="{top + ph}" text-anchor="end">0</text>')
    if reference is not None:
        x = left + reference * pw
        parts.append(
            f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{top + ph}" stroke="#c0392b" '
            'stroke-dasharray="4 3"/>'
        )
        parts.append(
            f'<text x="{x - 4:.2f}" y="{top + 12}" text-anchor="end" fill="#c0392b">{reference:g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_sweep(
    ensemble: GraphEnsemble,
    cfg: QiteConfig,
    spec: SweepSpec,
    out_dir: str | Path,
    jobs: int = 1,
    source: dict | None = None,
    svg: bool = True,
) -> dict:
    """Evaluate every graph, streaming rows to ``results.csv`` in ensemble order.

    Also writes ``summary.json``, ``manifest.json`` (source, config, seed and
    any failures) and one ratio and one P_ground histogram per step.
    """
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcomes: list[GraphOutcome] = []
    manifest = {
        "source": source or {"provenance": ensemble.provenance, **ensemble.params},
        "config": cfg.to_dict(),
        "sweep": {"steps": list(spec.steps), "itd": spec.itd, "seed": spec.seed,
                  "greedy_starts": spec.greedy_starts, "shots": spec.shots},
        "failures": [],
        "complete": False,
    }
    with open(out_dir / "results.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        try:
            for o in iter_outcomes(ensemble, cfg, spec, jobs):
                outcomes.append(o)
                if o.error is not None:
                    manifest["failures"].append({"graph_id": o.graph_id, "error": o.error})
                for row in o.rows:
                    writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
                fh.flush()
        finally:
            _write_json(out_dir / "manifest.json", manifest)
    manifest["complete"] = True
    _write_json(out_dir / "manifest.json", manifest)
    summary = summarize(outcomes, spec)
    _write_json(out_dir / "summary.json", summary)
    if svg:
        write_histograms(outcomes, spec, out_dir)
    return summary


def write_histograms(outcomes: Sequence[GraphOutcome], spec: SweepSpec, out_dir: Path) -> None:
    for s in spec.steps:
        rows = [r for o in outcomes if o.error is None for r in o.rows if r["step"] == s]
        ratios = [r["ratio_expected"] for r in rows]
        ref = GOEMANS_WILLIAMSON_RATIO if spec.reference_line else None
        (out_dir / f"hist_ratio_s{s}.svg").write_text(
            histogram_svg(ratios, f"C/Cmax after s={s}", reference=ref), encoding="utf-8"
        )
        pgs = [r["p_ground"] for r in rows if r["p_ground"] is not None]
        if pgs:
            (out_dir / f"hist_pground_s{s}.svg").write_text(
                histogram_svg(pgs, f"P_ground after s={s}"), encoding="utf-8"
            )


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
