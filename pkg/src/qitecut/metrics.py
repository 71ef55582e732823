"""Approximation ratio, ground-state probability, rounding and sampling."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .graphio import Graph
from .oracles import cut_value
from .state import energy

GROUND_THRESHOLD = 0.5
RATIO_TARGET = 0.93


@dataclass
class MetricsReport:
    expected_cut: float
    rounded_cut: float
    best_sampled_cut: float | None
    c_max: float
    c_max_exact: bool
    ratio_expected: float
    ratio_rounded: float
    ratio_sampled: float | None = None
    p_ground: float | None = None
    steps_to_93: int | None = None

    @property
    def converged_to_ground(self) -> bool | None:
        return None if self.p_ground is None else self.p_ground > GROUND_THRESHOLD

    def to_dict(self) -> dict:
        out = asdict(self)
        out["converged_to_ground"] = self.converged_to_ground
        return out


def _phi(st) -> np.ndarray:
    return np.asarray(getattr(st, "phi", st), dtype=float)


def expected_cut(st, g: Graph) -> float:
    """``(W - <H>) / 2`` with ``W`` the total base weight (``|E|`` for unit weights)."""
    return float((g.weight_array.sum() - energy(_phi(st), g)) / 2.0)


def bit_probabilities(st) -> np.ndarray:
    """Probability of measuring 1 on each qubit."""
    return np.sin(_phi(st)) ** 2


def p_ground(st, ground_states: Sequence[int]) -> float:
    """Total probability of the listed basis states (ints, bit j = vertex j)."""
    if len(ground_states) == 0:
        raise ValueError("ground-state list is empty")
    p1 = bit_probabilities(st)
    n = p1.shape[0]
    z = np.asarray(ground_states, dtype=np.int64)
    bits = (z[:, None] >> np.arange(n)) & 1
    probs = np.where(bits == 1, p1, 1.0 - p1).prod(axis=1)
    return float(min(probs.sum(), 1.0))


def round_state(st) -> np.ndarray:
    """Most likely bit per qubit: 0 when ``cos^2(phi) >= 1/2`` (ties go to 0)."""
    phi = _phi(st)
    return (np.cos(phi) ** 2 < 0.5).astype(np.int64)


def sample_state(st, shots: int, seed: int) -> np.ndarray:
    """``shots`` independent measurements, one row per shot."""
    p1 = bit_probabilities(st)
    rng = np.random.default_rng(seed)
    return (rng.random((shots, p1.shape[0])) < p1).astype(np.int64)


def steps_to_ratio(
    energies: Sequence[float], g: Graph, c_max: float, target: float = RATIO_TARGET
) -> int | None:
    """First step ``s`` (1-based) whose expected-cut ratio reaches ``target``."""
    total = g.weight_array.sum()
    for s, e in enumerate(energies, 1):
        if c_max > 0 and (total - e) / 2.0 / c_max >= target - 1e-12:
            return s
    return None


def evaluate(
    st,
    g: Graph,
    c_max: float,
    *,
    c_max_exact: bool = True,
    ground_states: Sequence[int] | None = None,
    p_ground_value: float | None = None,
    shots: int = 0,
    seed: int = 0,
    energies: Sequence[float] | None = None,
) -> MetricsReport:
    """Collect every metric for one final state.

    ``p_ground_value`` overrides the list-based computation (used when the
    ground-state list is truncated and the probability was streamed).
    """
    exp_cut = expected_cut(st, g)
    rounded = cut_value(g, round_state(st))
    sampled = None
    if shots > 0:
        sampled = max(cut_value(g, row) for row in sample_state(st, shots, seed))
    if p_ground_value is None and ground_states is not None:
        p_ground_value = p_ground(st, ground_states)

    def ratio(c):
        return 1.0 if c_max == 0 else c / c_max

    return MetricsReport(
        expected_cut=exp_cut,
        rounded_cut=rounded,
        best_sampled_cut=sampled,
        c_max=c_max,
        c_max_exact=c_max_exact,
        ratio_expected=ratio(exp_cut),
        ratio_rounded=ratio(rounded),
        ratio_sampled=None if sampled is None else ratio(sampled),
        p_ground=p_ground_value,
        steps_to_93=None if energies is None else steps_to_ratio(energies, g, c_max),
    )
