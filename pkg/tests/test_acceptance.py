"""Acceptance criteria, one test each, printed as PASS/FAIL lines at the end of the run.

Set ``QITECUT_EXTENDED=1`` to run criterion 3 on all 11,117 eight-vertex
graphs instead of the 500-graph subsample.
"""
import itertools
import os
import statistics
import warnings

import numpy as np
import pytest

from qitecut.cli import subsample_indices
from qitecut.experiments import SweepSpec, iter_outcomes
from qitecut.graphio import (
    GraphEnsemble,
    enumerate_connected,
    erdos_renyi,
    graph6_id,
    parse_graph6,
    random_connected_ensemble,
    read_graph6_file,
    serialize_graph6,
)
from qitecut.metrics import GROUND_THRESHOLD, bit_probabilities
from qitecut.oracles import (
    brute_force_maxcut,
    dense_expectation,
    dense_state,
    exact_imaginary_step,
    greedy_cut,
)
from qitecut.qite import QiteConfig, run
from qitecut.state import b_vector, energy, energy_variance, initial_state, s_matrix

from conftest import CONNECTED8, random_graphs, record_criterion

pytestmark = pytest.mark.filterwarnings("ignore:graph is disconnected")

JOBS = os.cpu_count() or 1
EXTENDED = os.environ.get("QITECUT_EXTENDED") == "1"


def _ensemble(graphs, ids=None):
    ids = ids or [graph6_id(g) for g in graphs]
    return GraphEnsemble(tuple(graphs), tuple(ids), "test", {})


def _sweep(ens, spec, cfg=None):
    outs = list(iter_outcomes(ens, cfg or QiteConfig(), spec, JOBS))
    failed = [o for o in outs if o.error]
    assert not failed, failed[0].error
    return outs


def _row(outcome, step):
    return next(r for r in outcome.rows if r["step"] == step)


@pytest.fixture(scope="module")
def six_vertex():
    return _sweep(enumerate_connected(6), SweepSpec(steps=(1, 4, 10)))


def test_criterion_1_six_vertex_means(six_vertex):
    targets = {
        1: (0.73, 0.05, 0.20, 0.07),
        4: (0.99, 0.02, 0.91, 0.05),
        10: (0.99, 0.02, 0.94, 0.05),
    }
    ok, parts = True, []
    for s, (r0, rtol, p0, ptol) in targets.items():
        ratio = np.mean([_row(o, s)["ratio_expected"] for o in six_vertex])
        pg = np.mean([_row(o, s)["p_ground"] for o in six_vertex])
        ok &= abs(ratio - r0) <= rtol and abs(pg - p0) <= ptol
        parts.append(f"s={s}: ratio {ratio:.3f} (target {r0}±{rtol}), P {pg:.3f} (target {p0}±{ptol})")
    record_criterion(1, ok, "; ".join(parts))
    assert ok


def test_criterion_2_six_vertex_ground_counts(six_vertex):
    stalled = [o for o in six_vertex if _row(o, 10)["p_ground"] <= GROUND_THRESHOLD]
    converged = len(six_vertex) - len(stalled)
    rescued = _sweep(
        _ensemble([parse_graph6(o.graph_id) for o in stalled]),
        SweepSpec(steps=(10,), itd="exhaustive"),
    )
    lifted = sum(_row(o, 10)["p_ground"] > GROUND_THRESHOLD for o in rescued)
    ok = abs(converged - 101) <= 3 and lifted == len(stalled)
    record_criterion(
        2, ok, f"constant weights {converged}/112 (target 101±3); ITD lifts {lifted}/{len(stalled)}"
    )
    assert ok


@pytest.mark.skipif(not CONNECTED8.exists(), reason="eight-vertex graph6 file missing")
def test_criterion_3_eight_vertex_counts():
    graphs = read_graph6_file(CONNECTED8)
    assert len(graphs) == 11117
    if not EXTENDED:
        graphs = [graphs[k] for k in subsample_indices(len(graphs), 500, seed=0)]
    plain = _sweep(_ensemble(graphs), SweepSpec(steps=(10,)))
    stalled = [o for o in plain if _row(o, 10)["p_ground"] <= GROUND_THRESHOLD]
    frac = 1 - len(stalled) / len(plain)
    target = 8995 / 11117
    lo, hi = target * 0.98, target * 1.02
    rescued = _sweep(
        _ensemble([parse_graph6(o.graph_id) for o in stalled]),
        SweepSpec(steps=(10,), itd="exhaustive"),
    )
    lifted = sum(_row(o, 10)["p_ground"] > GROUND_THRESHOLD for o in rescued)
    recovered = lifted / len(stalled) if stalled else 1.0
    ok = lo <= frac <= hi and recovered >= 0.99
    scope = "all graphs" if EXTENDED else "500-graph subsample"
    record_criterion(
        3,
        ok,
        f"{scope}: constant weights {len(plain) - len(stalled)}/{len(plain)} = {frac:.4f} "
        f"(target {target:.4f}, band [{lo:.4f}, {hi:.4f}]); ITD recovers {lifted}/{len(stalled)}",
    )
    assert ok


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for g in random_graphs(30, (2, 10), seed=4):
        for _ in range(100):
            phi = rng.uniform(-np.pi, np.pi, g.n)
            vec = dense_state(phi)
            e = dense_expectation(vec, g, "H")
            worst = max(worst, abs(energy(phi, g) - e))
            worst = max(worst, abs(energy_variance(phi, g) - (dense_expectation(vec, g, "H2") - e * e)))
            b = b_vector(phi, g)
            worst = max(worst, max(abs(b[j] - dense_expectation(vec, g, ("b", j))) for j in range(g.n)))
            s = s_matrix(phi)
            for i, j in itertools.combinations(range(g.n), 2):
                worst = max(worst, abs(s[i, j] - dense_expectation(vec, g, ("YY", i, j))))
            worst = max(worst, float(np.abs(np.diag(s) - 1).max()))
    ok = worst <= 1e-10
    record_criterion(4, ok, f"max abs deviation {worst:.2e} over 30 graphs x 100 states (tol 1e-10)")
    assert ok


def test_criterion_5_exact_evolution():
    worst_e, worst_d = 0.0, 0.0
    h = 1e-5
    for g in random_graphs(20, (3, 12), seed=5):
        e0 = brute_force_maxcut(g).e0
        start = dense_state(initial_state(g).phi)
        vec, prev = start, np.inf
        for _ in range(500):
            vec = exact_imaginary_step(vec, g, tau=1.0)
            e = dense_expectation(vec, g, "H")
            if abs(prev - e) < 1e-14:
                break
            prev = e
        worst_e = max(worst_e, abs(e - e0))
        var = energy_variance(initial_state(g), g)
        up = dense_expectation(exact_imaginary_step(start, g, tau=h), g, "H")
        down = dense_expectation(exact_imaginary_step(start, g, tau=-h), g, "H")
        worst_d = max(worst_d, abs((up - down) / (2 * h) + 2 * var) / (2 * var))
    ok = worst_e <= 1e-6 and worst_d <= 1e-6
    record_criterion(
        5, ok, f"max |E - E0| {worst_e:.2e} (tol 1e-6); max rel. derivative error {worst_d:.2e} (tol 1e-6)"
    )
    assert ok


def test_criterion_6_monotone_energies():
    rng = np.random.default_rng(6)
    increases, bad_eigen, eigen_runs = 0, 0, 0
    for k in range(200):
        n = int(rng.integers(2, 21))
        g = erdos_renyi(n, float(rng.uniform(0.09, 0.99)), int(rng.integers(2**31)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run(g)
        es = [res.initial_energy] + res.energies
        increases += sum(y > x + 1e-12 for x, y in zip(es, es[1:]))
        if res.terminated_by == "eigenstate":
            eigen_runs += 1
            var = res.trajectory[-1].variance if res.trajectory else energy_variance(res.final_state, g)
            bad_eigen += var >= 1e-8
    ok = increases == 0 and bad_eigen == 0
    record_criterion(
        6, ok, f"{increases} energy increases over 200 runs; {bad_eigen}/{eigen_runs} eigenstate stops with variance >= 1e-8"
    )
    assert ok


def test_criterion_7_large_graph_itd():
    rng = np.random.default_rng(7)
    graphs, ids = [], []
    for k in range(50):
        n = int(rng.integers(25, 51))
        ens = random_connected_ensemble(n, (0.09, 0.99), 1, seed=int(rng.integers(2**31)))
        graphs.append(ens.graphs[0])
        ids.append(ens.ids[0])
    outs = _sweep(
        _ensemble(graphs, ids),
        SweepSpec(steps=(15,), itd="random:100", seed=7),
        QiteConfig(max_steps=15),
    )
    ratios = [_row(o, 15)["ratio_rounded"] for o in outs]
    steps = [o.steps_to_93 for o in outs]
    reached = [s for s in steps if s is not None]
    med = statistics.median(reached) if reached else None
    ok = (
        min(ratios) >= 0.93
        and len(reached) == len(steps)
        and all(5 <= s <= 15 for s in reached)
        and med is not None
        and 9 <= med <= 11
    )
    record_criterion(
        7,
        ok,
        f"min ratio_rounded {min(ratios):.4f} (need >= 0.93, best-known Cmax, approximate); "
        f"steps-to-93% range [{min(reached, default=None)}, {max(reached, default=None)}] (need [5, 15]), "
        f"median {med} (need [9, 11]), unreached {len(steps) - len(reached)}",
    )
    assert ok


def test_criterion_8_greedy_comparison():
    ok, parts = True, []
    for n in (20, 25, 30, 35, 40):
        ens = random_connected_ensemble(n, (0.035, 0.045), 25, seed=n, connected=False)
        outs = _sweep(ens, SweepSpec(steps=(10,), itd="random:100", seed=n))
        qite_ratio = np.mean([_row(o, 10)["ratio_expected"] for o in outs])
        greedy = [
            1.0 if o.c_max == 0 else greedy_cut(g, k)[0] / o.c_max
            for k, (g, o) in enumerate(zip(ens.graphs, outs))
        ]
        diff = abs(qite_ratio - np.mean(greedy))
        part = f"n={n}: QITE {qite_ratio:.3f} vs greedy {np.mean(greedy):.3f}"
        ok &= diff <= 0.05
        if n <= 24:
            zero = sum(_row(o, 10)["p_ground"] < 1e-9 for o in outs)
            ok &= zero <= 7
            part += f", P_ground=0 on {zero}/25"
        parts.append(part)
    record_criterion(8, ok, "; ".join(parts) + " (need |diff| <= 0.05, zeros <= 7/25)")
    assert ok


def test_criterion_9_metric_identities():
    checked = 0
    bad = 0
    graphs = list(enumerate_connected(6)) + random_graphs(40, (2, 14), seed=9)
    for g in graphs:
        res = brute_force_maxcut(g)
        z = res.ground_states[0]
        phi = np.array([(z >> j) & 1 for j in range(g.n)]) * np.pi / 2
        e0 = float(np.round(energy(phi, g), 9))
        bad += res.c_max != (g.m - e0) / 2 or res.e0 != e0
        checked += 1
    prob_bad = 0
    rng = np.random.default_rng(9)
    for n in range(1, 11):
        for _ in range(5):
            p1 = bit_probabilities(rng.uniform(-np.pi, np.pi, n))
            total = sum(
                np.prod([p1[j] if b else 1 - p1[j] for j, b in enumerate(bits)])
                for bits in itertools.product([0, 1], repeat=n)
            )
            prob_bad += abs(total - 1) > 1e-12
    pool = [g for k in range(1, 7) for g in enumerate_connected(k)]
    pool += [erdos_renyi(int(n), 0.3, s) for s, n in enumerate(range(1, 63, 3))]
    if CONNECTED8.exists():
        pool += read_graph6_file(CONNECTED8)
    rt_bad = sum(parse_graph6(serialize_graph6(g)) != g for g in pool)
    ok = bad == 0 and prob_bad == 0 and rt_bad == 0
    record_criterion(
        9,
        ok,
        f"Cmax identity failures {bad}/{checked}; probability-sum failures {prob_bad}/50; "
        f"graph6 round-trip failures {rt_bad}/{len(pool)}",
    )
    assert ok
