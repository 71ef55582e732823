import itertools
import warnings
from dataclasses import replace

import numpy as np
import pytest

from qitecut import qite
from qitecut.graphio import Graph, parse_graph6
from qitecut.metrics import expected_cut, p_ground, round_state
from qitecut.oracles import apply_single, brute_force_maxcut, cut_value, dense_expectation, dense_state
from qitecut.qite import (
    InvariantViolation,
    ItdSchedule,
    QiteConfig,
    candidate_pairs,
    golden_section,
    itd_pair_search,
    qite_step,
    rounded_reaches,
    run,
    weights_at_step,
)
from qitecut.state import ProductState, energy, initial_state

from conftest import complete, cycle, random_graphs

Q = np.pi / 4


def test_weights_at_step():
    g = complete(4)
    assert np.array_equal(weights_at_step(g, None, 7), np.ones(6))
    sched = ItdSchedule((1, 4))
    assert weights_at_step(g, sched, 1).tolist() == [1, 0, 1, 1, 0, 1]
    assert weights_at_step(g, sched, 2).tolist() == [1, 0.5, 1, 1, 0.5, 1]
    assert np.array_equal(weights_at_step(g, sched, 3), np.ones(6))
    with pytest.raises(ValueError):
        weights_at_step(g, ItdSchedule((0, 6)), 1)
    with pytest.raises(ValueError):
        weights_at_step(g, sched, 0)


@pytest.mark.parametrize("ramp", [(0.5,), (1.0, 0.7, 0.8), (1.0, 1.5)])
def test_bad_ramps(ramp):
    with pytest.raises(ValueError):
        ItdSchedule((0, 1), ramp)


def test_config_validation():
    with pytest.raises(ValueError):
        QiteConfig(max_steps=0)
    with pytest.raises(ValueError):
        QiteConfig(tau_min=0.1)
    with pytest.raises(ValueError):
        QiteConfig(tau_mode="adaptive")
    assert QiteConfig().tau_grid[0] == 0.0


def test_qite_step_k2():
    g = complete(2)
    a = qite_step(g, initial_state(g))
    assert np.allclose(a, [0.0, -1.0])
    vec = dense_state(initial_state(g).phi)
    assert dense_expectation(vec, g, ("comm", 1)) == pytest.approx(-1.0)


def test_qite_step_fixpoints():
    g = random_graphs(1, (6, 6), seed=5)[0]
    assert np.allclose(qite_step(g, np.full(6, Q)), 0.0)
    assert np.allclose(qite_step(g, np.array([0, 1, 1, 0, 1, 0]) * np.pi / 2), 0.0, atol=1e-15)


def test_qite_step_guards_identity(monkeypatch):
    monkeypatch.setattr(qite, "s_matrix", lambda st: 2 * np.eye(len(st)))
    with pytest.raises(InvariantViolation):
        qite_step(complete(3), np.zeros(3))


def test_update_direction_is_imaginary_time_projection(rng):
    # least-squares fit of -(H - E)|psi> onto the tangent vectors d|psi>/dphi_j
    for g in random_graphs(6, (2, 7), seed=8):
        phi = rng.uniform(-np.pi, np.pi, g.n)
        vec = dense_state(phi)
        e = dense_expectation(vec, g, "H")
        diag = np.array([dense_expectation(np.eye(1 << g.n)[k], g, "H") for k in range(1 << g.n)])
        target = -(diag - e) * vec
        tangents = np.stack([dense_state(phi + np.pi / 2 * (np.arange(g.n) == j)) for j in range(g.n)], 1)
        x, *_ = np.linalg.lstsq(tangents.real, target.real, rcond=None)
        # the step moves phi by -tau * a
        assert np.allclose(x, -qite_step(g, phi), atol=1e-10)


def test_k2_converges():
    res = run(complete(2))
    assert res.steps_taken <= 3
    assert res.final_energy == pytest.approx(-1.0, abs=1e-9)
    assert cut_value(complete(2), round_state(res.final_state)) == 1
    assert res.terminated_by == "eigenstate"


def test_k3_frustrated():
    g = complete(3)
    res = run(g)
    assert res.final_energy == pytest.approx(-1.0, abs=1e-6)
    assert cut_value(g, round_state(res.final_state)) == brute_force_maxcut(g).c_max == 2


def test_basis_state_is_a_fixpoint():
    # bipartite star starts on a basis-reachable path and ends at an eigenstate
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    res = run(g, QiteConfig(max_steps=20))
    assert res.terminated_by == "eigenstate"
    assert res.trajectory[-1].variance < 1e-8
    assert np.allclose(qite_step(g, np.round(res.final_state.phi / (np.pi / 2)) * np.pi / 2), 0.0)


def test_reach_grows_one_hop_per_step():
    g = Graph.from_edges(7, [(k, k + 1) for k in range(6)])  # path, hub at vertex 1
    res = run(g, QiteConfig(max_steps=5, stop_on_eigenstate=False))
    k = 1
    dist = np.abs(np.arange(7) - k)
    for s in range(1, 6):
        moved = np.flatnonzero(np.abs(res.state_at(s).phi - initial_state(g).phi) > 1e-9)
        assert set(moved) <= set(np.flatnonzero(dist <= s))


def test_energies_monotone_and_deterministic():
    for g in random_graphs(15, (3, 12), seed=13):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a, b = run(g), run(g)
        es = [a.initial_energy] + a.energies
        assert all(y <= x + 1e-12 for x, y in zip(es, es[1:]))
        assert a.to_dict() == b.to_dict()


def test_trajectory_bookkeeping():
    g = random_graphs(1, (8, 8), seed=17)[0]
    res = run(g, QiteConfig(stop_on_eigenstate=False))
    init = initial_state(g).phi
    for rec, st in zip(res.trajectory, res.states):
        if not rec.kept_incumbent:
            assert np.allclose(st.phi, init - rec.tau * rec.cumulative)
        assert rec.energy == pytest.approx(energy(st, g))
    assert res.state_at(99) == res.final_state
    assert res.state_at(0) == res.initial_state


def test_fixed_tau_mode():
    g = cycle(5)
    res = run(g, QiteConfig(tau_mode="fixed", fixed_tau=0.3, stop_on_eigenstate=False))
    assert all(r.tau in (0.0, 0.3) for r in res.trajectory)


def test_empty_ramp_matches_plain_run():
    g = random_graphs(1, (7, 7), seed=19)[0]
    plain = run(g)
    itd = run(g, QiteConfig(itd=ItdSchedule((0, 1), ())))
    assert np.allclose(plain.final_state.phi, itd.final_state.phi)
    assert plain.energies == pytest.approx(itd.energies)


def test_itd_reaches_full_hamiltonian():
    g = cycle(6)
    cfg = QiteConfig(itd=ItdSchedule((0, 3)), stop_on_eigenstate=False)
    res = run(g, cfg)
    for rec in res.trajectory[2:]:
        assert rec.step_energy == pytest.approx(rec.energy)
    es = [r.energy for r in res.trajectory[2:]]
    assert all(y <= x + 1e-12 for x, y in zip(es, es[1:]))


def test_disconnected_runs_per_component():
    g = Graph.from_edges(6, [(0, 1), (2, 3), (3, 4), (2, 4)])
    with pytest.warns(UserWarning, match="disconnected"):
        res = run(g)
    left = run(complete(2))
    assert np.allclose(res.final_state.phi[:2], left.final_state.phi)
    assert res.final_state.phi[5] == 0.0  # isolated vertex is its own component
    assert res.final_energy == pytest.approx(-2.0, abs=1e-6)


def test_edgeless_graph():
    res = run(Graph(3))
    assert res.steps_taken == 0 and res.terminated_by == "eigenstate"
    assert res.final_energy == 0.0


def test_golden_section():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-7) and fx < 1e-14


def test_candidate_pairs():
    assert candidate_pairs(4, "exhaustive") == list(itertools.combinations(range(4), 2))
    pairs = candidate_pairs(30, ("random", 100, 3))
    assert len(pairs) == len(set(pairs)) == 100
    assert pairs == candidate_pairs(30, ("random", 100, 3))
    assert len(candidate_pairs(4, ("random", 100, 0))) == 6
    with pytest.raises(ValueError):
        candidate_pairs(4, ("sobol", 3, 0))


def test_pair_search_short_circuits():
    g = cycle(6)
    oracle = brute_force_maxcut(g)
    found = itd_pair_search(g, QiteConfig(), "exhaustive", rounded_reaches(oracle, g))
    assert found.pair == () and found.success and found.table == []


@pytest.mark.parametrize("gid", ["EBjG", "ELvw"])
def test_pair_search_rescues_stalled_graph(gid):
    g = parse_graph6(gid)
    oracle = brute_force_maxcut(g)
    ok = lambda r: p_ground(r.final_state, oracle.ground_states) > 0.5
    assert not ok(run(g))
    found = itd_pair_search(g, QiteConfig(), "exhaustive", ok)
    assert found.success and len(found.pair) == 2
    assert 1 <= found.n_successful <= len(list(itertools.combinations(range(g.m), 2)))
    assert len(found.table) == g.m * (g.m - 1) // 2
    again = run(g, replace(QiteConfig(), itd=ItdSchedule(found.pair)))
    assert np.array_equal(again.final_state.phi, found.result.final_state.phi)


def test_pair_search_parallel_matches_serial():
    g = parse_graph6("EBjG")
    a = itd_pair_search(g, QiteConfig(), "exhaustive")
    b = itd_pair_search(g, QiteConfig(), "exhaustive", jobs=2)
    assert a.pair == b.pair and a.table == b.table


def test_expected_cut_improves_over_initial():
    for g in random_graphs(10, (4, 10), seed=23):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run(g)
        assert expected_cut(res.final_state, g) >= expected_cut(res.initial_state, g) - 1e-12
