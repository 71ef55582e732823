"""Ground truth for validation: exhaustive MaxCut, dense statevectors, exact
imaginary-time evolution, and the greedy baseline.

Basis index convention: bit ``j`` of the integer index is the state of the
qubit on vertex ``j`` (0 = ``|0>``, 1 = ``|1>``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphio import Graph

BRUTE_FORCE_CAP = 24
DENSE_CAP = 12
EXACT_QITE_CAP = 20
GROUND_STATE_LIST_CAP = 1024
GOEMANS_WILLIAMSON_RATIO = 0.878
_CHUNK = 1 << 18


class UnsupportedSizeError(ValueError):
    """Graph too large for an exhaustive method."""


@dataclass
class CutOracleResult:
    c_max: float
    e0: float
    ground_states: list[int]
    truncated: bool = False
    n_ground_states: int = 0
    spectrum: dict[float, int] = field(default_factory=dict)

    def to_dict(self, n: int) -> dict:
        return {
            "c_max": _num(self.c_max),
            "e0": _num(self.e0),
            "n_ground_states": self.n_ground_states,
            "truncated": self.truncated,
            "ground_states": [bitstring(z, n) for z in self.ground_states],
            "spectrum": {str(_num(k)): v for k, v in sorted(self.spectrum.items())},
        }


def _num(x: float):
    return int(round(x)) if abs(x - round(x)) < 1e-9 else float(x)


def bitstring(z: int, n: int) -> str:
    """Vertex 0 first."""
    return "".join(str((z >> j) & 1) for j in range(n))


def bits_to_int(bits) -> int:
    return sum(int(b) << j for j, b in enumerate(bits))


def cut_value(g: Graph, bits) -> float:
    """Total weight of edges whose endpoints sit on different sides."""
    bits = np.asarray(bits)
    if g.m == 0:
        return 0.0
    e = g.edge_array
    return float((g.weight_array * (bits[e[:, 0]] != bits[e[:, 1]])).sum())


def _spins(z: np.ndarray, n: int) -> np.ndarray:
    bits = (z[:, None] >> np.arange(n)) & 1
    return 1.0 - 2.0 * bits


def _enumerate_cuts(g: Graph):
    """Yield ``(indices, cut values)`` chunks over all assignments with vertex 0 on side 0."""
    n = g.n
    w_mat = np.zeros((n, n))
    e = g.edge_array
    w_mat[e[:, 0], e[:, 1]] = g.weight_array
    total = float(g.weight_array.sum())
    count = 1 << max(n - 1, 0)
    for start in range(0, count, _CHUNK):
        t = np.arange(start, min(start + _CHUNK, count), dtype=np.int64)
        z = t << 1
        s = _spins(z, n)
        ising = np.einsum("ki,ki->k", s @ w_mat, s)
        yield z, (total - ising) / 2.0


def brute_force_maxcut(g: Graph, cap: int = BRUTE_FORCE_CAP) -> CutOracleResult:
    """Exact MaxCut by enumerating ``2^(n-1)`` assignments.

    Every optimum is returned together with its global flip. The list stops
    at 1024 entries; ``n_ground_states`` still counts all of them.
    """
    if g.n > cap:
        raise UnsupportedSizeError(f"brute force limited to n <= {cap} (got n={g.n})")
    if g.n == 0:
        return CutOracleResult(0.0, 0.0, [0], False, 1, {0.0: 1})
    full = (1 << g.n) - 1
    best = -np.inf
    ground: list[int] = []
    n_ground = 0
    spectrum: dict[float, int] = {}
    for z, cuts in _enumerate_cuts(g):
        rounded = np.round(cuts, 9)
        vals, counts = np.unique(rounded, return_counts=True)
        for v, c in zip(vals.tolist(), counts.tolist()):
            spectrum[v] = spectrum.get(v, 0) + 2 * c
        top = rounded.max()
        if top > best + 1e-9:
            best, ground, n_ground = top, [], 0
        if abs(top - best) <= 1e-9:
            hits = z[np.abs(rounded - best) <= 1e-9]
            n_ground += 2 * len(hits)
            for h in hits.tolist():
                if len(ground) >= GROUND_STATE_LIST_CAP:
                    break
                ground.extend((h, full ^ h))
    ground = sorted(ground[:GROUND_STATE_LIST_CAP])
    total = float(g.weight_array.sum())
    return CutOracleResult(
        c_max=float(best),
        e0=total - 2.0 * float(best),
        ground_states=ground,
        truncated=n_ground > len(ground),
        n_ground_states=n_ground,
        spectrum=spectrum,
    )


def ground_state_probability(phi, g: Graph, c_max: float) -> float:
    """Measurement probability of any maximum cut, streamed over all ``2^n``
    assignments (no ground-state list needed)."""
    phi = np.asarray(phi, dtype=float)
    p1 = np.sin(phi) ** 2
    log0 = np.log(np.clip(1.0 - p1, 1e-300, None))
    log1 = np.log(np.clip(p1, 1e-300, None))
    full = (1 << g.n) - 1
    total = 0.0
    for z, cuts in _enumerate_cuts(g):
        hits = z[np.abs(cuts - c_max) <= 1e-9]
        for zz in (hits, full ^ hits):
            if zz.size == 0:
                continue
            bits = (zz[:, None] >> np.arange(g.n)) & 1
            total += float(np.exp(np.where(bits == 1, log1, log0).sum(axis=1)).sum())
    return min(total, 1.0)


# -- dense statevector oracle -------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_PAULI = {"X": _X, "Y": _Y, "Z": _Z, "H": _HAD}


def dense_state(phi, cap: int = DENSE_CAP) -> np.ndarray:
    """Full ``2^n`` amplitude vector of a product state."""
    phi = np.asarray(getattr(phi, "phi", phi), dtype=float)
    n = phi.shape[0]
    if n > cap:
        raise UnsupportedSizeError(f"dense oracle limited to n <= {cap}")
    vec = np.ones(1, dtype=complex)
    # kron(later, earlier) keeps bit j of the index on qubit j
    for p in phi:
        vec = np.kron(np.array([np.cos(p), np.sin(p)], dtype=complex), vec)
    return vec


def apply_single(vec: np.ndarray, n: int, qubit: int, op) -> np.ndarray:
    """Apply a 2x2 matrix (or Pauli/Hadamard label) to one qubit."""
    mat = _PAULI[op] if isinstance(op, str) else np.asarray(op)
    t = vec.reshape((2,) * n)
    axis = n - 1 - qubit
    t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def ising_diagonal(g: Graph, w=None, edges=None) -> np.ndarray:
    """Diagonal of ``sum h_ij Z_i Z_j`` (optionally restricted to edge indices)."""
    h = g.weight_array if w is None else np.asarray(w, dtype=float)
    z = np.arange(1 << g.n)
    diag = np.zeros(z.shape)
    idx = range(g.m) if edges is None else edges
    for k in idx:
        i, j = g.edges[k]
        si = 1 - 2 * ((z >> i) & 1)
        sj = 1 - 2 * ((z >> j) & 1)
        diag += h[k] * si * sj
    return diag


def dense_expectation(vec: np.ndarray, g: Graph, observable, w=None) -> float:
    """Expectation of an observable on a dense state.

    ``observable`` is ``"H"``, ``"H2"``, ``("YY", i, j)``, ``("b", j)`` for
    ``-<H_j H_{G_j} H_j>`` with the Hadamard sandwich, or ``("comm", j)`` for
    ``-(i/2) <[H, Y_j]>`` built from explicit Y action.
    """
    n = g.n
    diag = ising_diagonal(g, w)
    if observable == "H":
        return float(np.real(np.vdot(vec, diag * vec)))
    if observable == "H2":
        return float(np.real(np.vdot(vec, diag**2 * vec)))
    kind = observable[0]
    if kind == "YY":
        _, i, j = observable
        out = apply_single(apply_single(vec, n, j, "Y"), n, i, "Y")
        return float(np.real(np.vdot(vec, out)))
    if kind == "b":
        j = observable[1]
        star = [k for k, (a, b) in enumerate(g.edges) if j in (a, b)]
        hv = apply_single(vec, n, j, "H")
        hv = ising_diagonal(g, w, star) * hv
        hv = apply_single(hv, n, j, "H")
        return float(-np.real(np.vdot(vec, hv)))
    if kind == "comm":
        j = observable[1]
        hy = diag * apply_single(vec, n, j, "Y")
        yh = apply_single(diag * vec, n, j, "Y")
        return float(np.real(-0.5j * np.vdot(vec, hy - yh)))
    raise ValueError(f"unknown observable {observable!r}")


def exact_imaginary_step(vec: np.ndarray, g: Graph, w=None, tau: float = 0.1) -> np.ndarray:
    """``exp(-tau H) |v> / ||exp(-tau H) |v>||``; H is diagonal so this is an
    elementwise rescaling."""
    if g.n > EXACT_QITE_CAP:
        raise UnsupportedSizeError(f"exact evolution limited to n <= {EXACT_QITE_CAP}")
    diag = ising_diagonal(g, w)
    # shift by the minimum so large tau does not underflow every amplitude
    out = np.exp(-tau * (diag - diag.min())) * vec
    norm = np.linalg.norm(out)
    if norm == 0.0:
        raise ValueError("state has zero norm")
    return out / norm


# -- greedy baseline --------------------------------------------------------


def greedy_cut(g: Graph, seed: int) -> tuple[float, np.ndarray]:
    """Place vertices one by one in a seeded random order on the side that cuts
    more weight towards already placed neighbours; ties go to side 0."""
    order = np.random.default_rng(seed).permutation(g.n)
    side = np.full(g.n, -1, dtype=int)
    adj = g.adjacency
    wmap = dict(zip(g.edges, g.weights))
    for v in order:
        gain = [0.0, 0.0]
        for u in adj[v]:
            if side[u] >= 0:
                w = wmap[(min(u, v), max(u, v))]
                gain[1 - side[u]] += w
        side[v] = 1 if gain[1] > gain[0] else 0
    return cut_value(g, side), side


def multistart_greedy(g: Graph, starts: int, seed: int = 0) -> tuple[float, np.ndarray]:
    """Best greedy cut over seeds ``seed, seed+1, ..., seed+starts-1``."""
    if starts < 1:
        raise ValueError("need at least one start")
    best = None
    for k in range(starts):
        cut, side = greedy_cut(g, seed + k)
        if best is None or cut > best[0]:
            best = (cut, side)
    return best
