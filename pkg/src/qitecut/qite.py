"""Linear-Ansatz quantum imaginary time evolution on real product states.

Step ``s`` solves ``S a = b`` on the previous state and accumulates
``A[s] = a[1] + ... + a[s]``. The state after ``s`` steps is the initial state
rotated by ``exp(+i tau A[s] . Y)``, where one ``tau`` is shared by the whole
trajectory and re-optimised at every ``s`` by minimising the energy.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .graphio import Graph, is_connected
from .oracles import CutOracleResult, cut_value
from .metrics import round_state
from .state import (
    ProductState,
    apply_y_rotations,
    b_vector,
    energy,
    energy_variance,
    initial_state,
    s_matrix,
    weighted_adjacency,
)

S_IDENTITY_TOL = 1e-9
INCUMBENT_TOL = 1e-12
INV_PHI = (math.sqrt(5) - 1) / 2


class InvariantViolation(RuntimeError):
    """The product-state assumptions behind the update no longer hold."""


@dataclass(frozen=True)
class ItdSchedule:
    """Excised edges switched back on by the ramp ``f``.

    ``ramp`` lists ``f(1), f(2), ...``; ``f(s) = 0`` past its end. Excised
    edges carry weight ``1 - f(s)`` times their base weight.
    """

    excised_edges: tuple[int, ...]
    ramp: tuple[float, ...] = (1.0, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "excised_edges", tuple(int(k) for k in self.excised_edges))
        ramp = tuple(float(x) for x in self.ramp)
        object.__setattr__(self, "ramp", ramp)
        if ramp and ramp[0] != 1.0:
            raise ValueError("ramp must start at f(1) = 1")
        if any(b > a for a, b in zip(ramp, ramp[1:])):
            raise ValueError("ramp must be non-increasing")
        if any(not 0.0 <= x <= 1.0 for x in ramp):
            raise ValueError("ramp values must lie in [0, 1]")

    def f(self, s: int) -> float:
        return self.ramp[s - 1] if s - 1 < len(self.ramp) else 0.0

    @property
    def s0(self) -> int:
        """First step at which every edge has its full weight."""
        return len(self.ramp) + 1


@dataclass(frozen=True)
class QiteConfig:
    max_steps: int = 10
    tau_min: float = 0.0
    tau_max: float = 2.0
    tau_points: int = 201
    refine: bool = True
    refine_tol: float = 1e-6
    variance_tol: float = 1e-8
    stop_on_eigenstate: bool = True
    keep_incumbent: bool = True
    tau_mode: str = "per_step_reoptimized"
    fixed_tau: float = 0.5
    itd: ItdSchedule | None = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.tau_points < 2 or self.tau_max <= self.tau_min:
            raise ValueError("tau grid needs at least two points on a non-empty interval")
        if self.tau_min != 0.0:
            raise ValueError("the tau grid must start at 0")
        if self.tau_mode not in ("per_step_reoptimized", "fixed"):
            raise ValueError(f"unknown tau_mode {self.tau_mode!r}")

    @property
    def tau_grid(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.tau_points)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "itd"}
        d["itd"] = (
            None
            if self.itd is None
            else {"excised_edges": list(self.itd.excised_edges), "ramp": list(self.itd.ramp)}
        )
        return d


@dataclass
class StepRecord:
    step: int
    energy: float
    step_energy: float
    tau: float
    a: np.ndarray
    cumulative: np.ndarray
    variance: float
    kept_incumbent: bool = False

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "energy": self.energy,
            "step_energy": self.step_energy,
            "tau": self.tau,
            "variance": self.variance,
            "kept_incumbent": self.kept_incumbent,
            "a": self.a.tolist(),
            "cumulative": self.cumulative.tolist(),
        }


@dataclass
class RunResult:
    trajectory: list[StepRecord]
    initial_state: ProductState
    final_state: ProductState
    steps_taken: int
    terminated_by: str
    initial_energy: float
    states: list[ProductState] = field(default_factory=list, repr=False)

    @property
    def energies(self) -> list[float]:
        return [r.energy for r in self.trajectory]

    @property
    def final_energy(self) -> float:
        return self.trajectory[-1].energy if self.trajectory else self.initial_energy

    def state_at(self, s: int) -> ProductState:
        """State after ``s`` steps; past early termination this is the final state."""
        if s <= 0 or not self.states:
            return self.initial_state
        return self.states[min(s, len(self.states)) - 1]

    def energy_at(self, s: int) -> float:
        if s <= 0 or not self.trajectory:
            return self.initial_energy
        return self.trajectory[min(s, len(self.trajectory)) - 1].energy

    def to_dict(self) -> dict:
        return {
            "steps_taken": self.steps_taken,
            "terminated_by": self.terminated_by,
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "initial_phi": self.initial_state.phi.tolist(),
            "final_phi": self.final_state.phi.tolist(),
            "trajectory": [r.to_dict() for r in self.trajectory],
        }


def weights_at_step(g: Graph, sched: ItdSchedule | None, s: int) -> np.ndarray:
    """Effective edge couplings ``h_ij[s]`` times base weight at step ``s >= 1``."""
    if s < 1:
        raise ValueError("steps are counted from 1")
    w = g.weight_array.copy()
    if sched is None:
        return w
    for k in sched.excised_edges:
        if not 0 <= k < g.m:
            raise ValueError(f"excised edge index {k} out of range for {g.m} edges")
    idx = list(sched.excised_edges)
    w[idx] = w[idx] * (1.0 - sched.f(s))
    return w


def _check_identity(s: np.ndarray) -> None:
    dev = np.abs(s - np.eye(s.shape[0])).max() if s.size else 0.0
    if dev > S_IDENTITY_TOL:
        raise InvariantViolation(f"S deviates from the identity by {dev:.3e}")


def qite_step(g: Graph, state_prev, w=None) -> np.ndarray:
    """Coefficients ``a`` of the linear Ansatz, solving ``S a = b``."""
    s = s_matrix(state_prev)
    _check_identity(s)
    return np.linalg.solve(s, b_vector(state_prev, g, w))


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Minimise ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


class _Engine:
    """Per-graph precomputation for trajectories at many ``tau`` at once."""

    def __init__(self, g: Graph, cfg: QiteConfig):
        self.g = g
        self.cfg = cfg
        self.phi0 = initial_state(g).phi
        self.final_w = g.weight_array
        self._w = {}
        self._adj = {}

    def w(self, s: int) -> np.ndarray:
        key = min(s, self.cfg.itd.s0 if self.cfg.itd else 1)
        if key not in self._w:
            self._w[key] = weights_at_step(self.g, self.cfg.itd, key)
            self._adj[key] = weighted_adjacency(self.g, self._w[key])
        return self._w[key]

    def adj(self, s: int) -> np.ndarray:
        self.w(s)
        return self._adj[min(s, self.cfg.itd.s0 if self.cfg.itd else 1)]

    def coefficients(self, phi: np.ndarray, s: int) -> np.ndarray:
        # batch form of qite_step; the realised state is checked through qite_step
        z = np.cos(2 * phi)
        return -np.sin(2 * phi) * (z @ self.adj(s))

    def trajectory(self, tau: float, s: int) -> np.ndarray:
        phi = self.phi0.copy()
        for k in range(1, s + 1):
            phi = phi - tau * self.coefficients(phi, k)
        return phi

    def step_energy(self, phi, s: int):
        return energy(phi, self.g, self.w(s))


def _run_connected(g: Graph, cfg: QiteConfig) -> RunResult:
    eng = _Engine(g, cfg)
    phi0 = eng.phi0
    init = ProductState(phi0)
    records: list[StepRecord] = []
    states: list[ProductState] = []
    terminated_by = "step_budget"
    taus = cfg.tau_grid if cfg.tau_mode == "per_step_reoptimized" else np.array([cfg.fixed_tau])
    grid_phi = np.tile(phi0, (taus.shape[0], 1))
    current = init
    cum = np.zeros(g.n)
    tau_cur = 0.0
    for s in range(1, cfg.max_steps + 1):
        grid_phi = grid_phi - taus[:, None] * eng.coefficients(grid_phi, s)
        grid_e = eng.step_energy(grid_phi, s)
        best = int(np.argmin(grid_e))
        tau_s, e_s = float(taus[best]), float(grid_e[best])
        if cfg.refine and taus.shape[0] > 1:
            lo = float(taus[max(best - 1, 0)])
            hi = float(taus[min(best + 1, taus.shape[0] - 1)])
            t, e = golden_section(
                lambda t: float(eng.step_energy(eng.trajectory(t, s), s)), lo, hi, cfg.refine_tol
            )
            if e < e_s:
                tau_s, e_s = t, e
        incumbent_e = float(eng.step_energy(current.phi, s))
        if cfg.keep_incumbent and e_s > incumbent_e + INCUMBENT_TOL:
            a_s = np.zeros(g.n)
            new_state = current
            kept = True
            tau_s = tau_cur
        else:
            # realise the chosen trajectory through the general solver
            phi = phi0.copy()
            cum = np.zeros(g.n)
            for k in range(1, s + 1):
                a_s = qite_step(g, phi, eng.w(k))
                cum = cum + a_s
                phi = phi0 - tau_s * cum
            new_state = apply_y_rotations(init, -tau_s * cum)
            kept = False
            tau_cur = tau_s
        current = new_state
        var = energy_variance(current.phi, g, eng.final_w)
        records.append(
            StepRecord(
                step=s,
                energy=float(energy(current.phi, g, eng.final_w)),
                step_energy=float(eng.step_energy(current.phi, s)),
                tau=tau_s,
                a=a_s,
                cumulative=cum.copy(),
                variance=var,
                kept_incumbent=kept,
            )
        )
        states.append(current)
        ramp_done = cfg.itd is None or s + 1 >= cfg.itd.s0
        progress = (records[-2].energy if s > 1 else float(energy(phi0, g, eng.final_w))) - records[-1].energy
        if cfg.stop_on_eigenstate and ramp_done and var < cfg.variance_tol and progress < cfg.variance_tol:
            terminated_by = "eigenstate"
            break
    return RunResult(
        trajectory=records,
        initial_state=init,
        final_state=current,
        steps_taken=len(records),
        terminated_by=terminated_by,
        initial_energy=float(energy(phi0, g, eng.final_w)),
        states=states,
    )


def run(g: Graph, cfg: QiteConfig | None = None) -> RunResult:
    """Run linear QITE on ``g``.

    A disconnected graph is split into components that run independently (the
    Hamiltonian separates); their steps are merged, and ``tau`` in the merged
    trajectory is that of the component with the most edges.
    """
    cfg = cfg or QiteConfig()
    if g.m == 0:
        init = initial_state(g)
        return RunResult([], init, init, 0, "eigenstate", 0.0, [])
    if is_connected(g):
        return _run_connected(g, cfg)
    warnings.warn("graph is disconnected; running each component separately", stacklevel=2)
    parts = []
    for comp in g.components():
        sub, kept = g.subgraph(comp)
        if sub.m == 0:
            continue
        sub_cfg = cfg
        if cfg.itd is not None:
            local = {k: pos for pos, k in enumerate(kept)}
            sub_cfg = replace(
                cfg,
                itd=ItdSchedule(
                    tuple(local[k] for k in cfg.itd.excised_edges if k in local), cfg.itd.ramp
                ),
            )
        parts.append((comp, sub, _run_connected(sub, sub_cfg)))
    return _merge(g, parts)


def _merge(g: Graph, parts) -> RunResult:
    init_phi = initial_state(g).phi
    steps = max(p[2].steps_taken for p in parts)
    lead = max(parts, key=lambda p: p[1].m)
    records, states = [], []
    for s in range(1, steps + 1):
        phi = init_phi.copy()
        a = np.zeros(g.n)
        cum = np.zeros(g.n)
        e = se = var = 0.0
        kept = True
        for comp, _, res in parts:
            rec = res.trajectory[min(s, res.steps_taken) - 1]
            idx = np.array(comp)
            phi[idx] = res.state_at(s).phi
            if s <= res.steps_taken:
                a[idx] = rec.a
                kept = kept and rec.kept_incumbent
            cum[idx] = rec.cumulative
            e += rec.energy
            se += rec.step_energy
            var += rec.variance  # variances of independent blocks add
        tau = lead[2].trajectory[min(s, lead[2].steps_taken) - 1].tau
        records.append(StepRecord(s, e, se, tau, a, cum, var, kept))
        states.append(ProductState(phi))
    eig = all(p[2].terminated_by == "eigenstate" for p in parts)
    return RunResult(
        trajectory=records,
        initial_state=ProductState(init_phi),
        final_state=states[-1],
        steps_taken=steps,
        terminated_by="eigenstate" if eig else "step_budget",
        initial_energy=float(energy(init_phi, g)),
        states=states,
    )


# -- ITD pair search ---------------------------------------------------------


@dataclass
class PairSearchResult:
    pair: tuple[int, ...]
    result: RunResult
    success: bool
    plain: RunResult
    table: list[tuple[tuple[int, ...], bool, float]] = field(default_factory=list)

    @property
    def n_successful(self) -> int:
        return sum(1 for _, ok, _ in self.table if ok)


def rounded_reaches(oracle: CutOracleResult, g: Graph) -> Callable[[RunResult], bool]:
    """Success when the rounded final state attains the exact maximum cut."""

    def success(res: RunResult) -> bool:
        return cut_value(g, round_state(res.final_state)) >= oracle.c_max - 1e-9

    return success


def candidate_pairs(m: int, mode) -> list[tuple[int, int]]:
    """All edge pairs, or ``k`` distinct seeded random pairs in draw order."""
    if mode == "exhaustive":
        return list(itertools.combinations(range(m), 2))
    kind, k, seed = mode
    if kind != "random":
        raise ValueError(f"unknown search mode {mode!r}")
    total = m * (m - 1) // 2
    k = min(k, total)
    rng = np.random.default_rng(seed)
    seen: dict[tuple[int, int], None] = {}
    while len(seen) < k:
        i, j = sorted(int(x) for x in rng.choice(m, 2, replace=False))
        seen.setdefault((i, j), None)
    return list(seen)


def _run_pair(args):
    g, cfg, pair = args
    return run(g, cfg if pair is None else replace(cfg, itd=ItdSchedule(pair, cfg.itd.ramp)))


def itd_pair_search(
    g: Graph,
    cfg: QiteConfig | None = None,
    mode="exhaustive",
    success: Callable[[RunResult], bool] | None = None,
    ramp: Sequence[float] = (1.0, 0.5),
    jobs: int = 1,
    stop_at_first: bool = False,
) -> PairSearchResult:
    """Try excising pairs of edges and keep the best run.

    Ranking: successful first, then lowest final energy, then pair order (the
    plain run, with the empty pair, wins ties). Without a ``success``
    predicate only energy counts. ``mode`` is ``"exhaustive"`` or
    ``("random", k, seed)``.
    """
    cfg = replace(cfg or QiteConfig(), itd=None)
    plain = run(g, cfg)
    ok_plain = bool(success(plain)) if success else False
    if ok_plain:
        return PairSearchResult((), plain, True, plain, [])
    if g.m < 2:
        return PairSearchResult((), plain, False, plain, [])
    pairs = candidate_pairs(g.m, mode)
    itd_cfg = replace(cfg, itd=ItdSchedule((0, 1), tuple(ramp)))
    tasks = [(g, itd_cfg, p) for p in pairs]
    if jobs > 1 and len(tasks) > 1:
        results = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_pair, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = []
        for t in tasks:
            results.append(_run_pair(t))
            if stop_at_first and success and success(results[-1]):
                break
    table = []
    best_key, best = ((not ok_plain), plain.final_energy, ()), ((), plain, ok_plain)
    for pair, res in zip(pairs, results):
        ok = bool(success(res)) if success else False
        table.append((pair, ok, res.final_energy))
        key = ((not ok), res.final_energy, pair)
        if key < best_key:
            best_key, best = key, (pair, res, ok)
    return PairSearchResult(best[0], best[1], best[2], plain, table)
