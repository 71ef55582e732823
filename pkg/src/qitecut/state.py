"""Real product states and closed-form expectation values.

Qubit ``j`` is ``cos(phi_j)|0> + sin(phi_j)|1>``, so ``<Z_j> = cos(2 phi_j)``,
``<X_j> = sin(2 phi_j)`` and ``<Y_j> = 0``. Functions taking angles accept either
a single vector of shape ``(n,)`` or a batch ``(..., n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphio import Graph, is_connected, max_degree_vertex

VARIANCE_CLAMP = 1e-12


@dataclass(frozen=True)
class ProductState:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).reshape(-1)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    def z(self) -> np.ndarray:
        return np.cos(2 * self.phi)

    def x(self) -> np.ndarray:
        return np.sin(2 * self.phi)

    def __eq__(self, other):
        return isinstance(other, ProductState) and np.array_equal(self.phi, other.phi)

    def __hash__(self):
        return hash(self.phi.tobytes())


def _angles(st) -> np.ndarray:
    return st.phi if isinstance(st, ProductState) else np.asarray(st, dtype=float)


def _weights(g: Graph, w) -> np.ndarray:
    if w is None:
        return g.weight_array
    w = np.asarray(w, dtype=float)
    if w.shape != (g.m,):
        raise ValueError(f"expected {g.m} edge weights, got shape {w.shape}")
    return w


def initial_state(g: Graph) -> ProductState:
    """All qubits ``|+>`` except ``|0>`` on the highest-degree vertex.

    A disconnected graph gets one ``|0>`` qubit per component (the component's
    own highest-degree vertex), otherwise components without it never move.
    """
    if g.n < 1:
        raise ValueError("graph has no vertices")
    phi = np.full(g.n, np.pi / 4)
    if is_connected(g):
        phi[max_degree_vertex(g)] = 0.0
    else:
        for comp in g.components():
            sub, _ = g.subgraph(comp)
            phi[comp[max_degree_vertex(sub)]] = 0.0
    return ProductState(phi)


def energy(st, g: Graph, w=None):
    """``sum_(ij) h_ij cos(2 phi_i) cos(2 phi_j)``; ``w`` defaults to the base weights."""
    z = np.cos(2 * _angles(st))
    e = g.edge_array
    return (_weights(g, w) * z[..., e[:, 0]] * z[..., e[:, 1]]).sum(axis=-1)


def b_vector(st, g: Graph, w=None) -> np.ndarray:
    """``b_j = -sin(2 phi_j) sum_i h_ij cos(2 phi_i)``.

    This is ``-(i/2) <[H, Y_j]>`` evaluated on a real product state.
    """
    phi = _angles(st)
    h = _weights(g, w)
    if g.m == 0:
        return np.zeros_like(phi)
    z = np.cos(2 * phi)
    if phi.ndim == 1:
        e = g.edge_array
        field = np.bincount(e[:, 0], h * z[e[:, 1]], minlength=g.n)
        field += np.bincount(e[:, 1], h * z[e[:, 0]], minlength=g.n)
    else:
        field = _batched_fields(z, g, h)
    return -np.sin(2 * phi) * field


def _batched_fields(z: np.ndarray, g: Graph, h: np.ndarray) -> np.ndarray:
    return z @ weighted_adjacency(g, h)


def weighted_adjacency(g: Graph, h: np.ndarray) -> np.ndarray:
    mat = np.zeros((g.n, g.n))
    e = g.edge_array
    np.add.at(mat, (e[:, 0], e[:, 1]), h)
    np.add.at(mat, (e[:, 1], e[:, 0]), h)
    return mat


def energy_variance(st, g: Graph, w=None) -> float:
    """``<H^2> - <H>^2`` from the Pauli-Z monomial expansion of ``H^2``.

    Each term ``h_e h_f <Z_i Z_j Z_k Z_l>`` reduces with ``Z^2 = I``. For edges
    with no common vertex it factorises and cancels against ``<H>^2``, which
    leaves the diagonal terms ``h_e^2 (1 - z_i^2 z_j^2)`` and, for two edges
    ``(v, a)``, ``(v, b)`` meeting at ``v``, ``h_va h_vb z_a z_b (1 - z_v^2)``.
    Round-off below ``1e-12`` is clamped to zero.
    """
    phi = _angles(st)
    h = _weights(g, w)
    if g.m == 0:
        return 0.0
    z = np.cos(2 * phi)
    e = g.edge_array
    zi, zj = z[e[:, 0]], z[e[:, 1]]
    diagonal = float((h**2 * (1.0 - (zi * zj) ** 2)).sum())
    field = np.bincount(e[:, 0], h * zj, minlength=g.n) + np.bincount(
        e[:, 1], h * zi, minlength=g.n
    )
    field_sq = np.bincount(e[:, 0], (h * zj) ** 2, minlength=g.n) + np.bincount(
        e[:, 1], (h * zi) ** 2, minlength=g.n
    )
    shared = float(((1.0 - z**2) * (field**2 - field_sq)).sum())
    var = diagonal + shared
    if -VARIANCE_CLAMP * max(1.0, float(h @ h)) < var < 0.0:
        return 0.0
    return var


def s_matrix(st) -> np.ndarray:
    """``S_ij = <Y_i Y_j>``; on a real product state ``<Y_j> = 0`` so this is the identity."""
    phi = _angles(st)
    y = np.zeros(phi.shape[-1])  # <Y_j> vanishes for real amplitudes
    s = np.outer(y, y)
    np.fill_diagonal(s, 1.0)
    return s


def apply_y_rotations(st, theta) -> ProductState:
    """Apply ``prod_j exp(-i theta_j Y_j)``, which advances each angle by ``theta_j``."""
    phi = _angles(st)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != phi.shape:
        raise ValueError("rotation vector length must match the number of qubits")
    return ProductState(phi + theta)
