"""Graphs, graph6 interchange, random ensembles and small-n enumeration.

Vertices are 0-indexed everywhere, including file formats and CLI output.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

GRAPH6_MAX_N = 62
ENUMERATION_MAX_N = 6


class Graph6Error(ValueError):
    """Malformed or unsupported graph6 record."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    ``edges`` is kept sorted and duplicate-free with ``i < j`` for every pair;
    ``weights`` holds one base weight per edge, aligned with ``edges``.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        weights = self.weights or (1.0,) * len(self.edges)
        if len(weights) != len(self.edges):
            raise ValueError("one weight per edge required")
        pairs = {}
        for (i, j), w in zip(self.edges, weights):
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            if (i, j) in pairs:
                raise ValueError(f"duplicate edge ({i}, {j})")
            pairs[(i, j)] = float(w)
        ordered = sorted(pairs)
        object.__setattr__(self, "edges", tuple(ordered))
        object.__setattr__(self, "weights", tuple(pairs[e] for e in ordered))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        return cls(n, tuple(tuple(e) for e in edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` integer array."""
        return np.array(self.edges, dtype=np.intp).reshape(-1, 2)

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edge_array.ravel(), minlength=self.n)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(x)) for x in nbrs)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def edge_index(self, i: int, j: int) -> int:
        return self.edges.index((min(i, j), max(i, j)))

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists, ordered by smallest vertex."""
        seen = [False] * self.n
        comps = []
        for start in range(self.n):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                v = stack.pop()
                comp.append(v)
                for u in self.adjacency[v]:
                    if not seen[u]:
                        seen[u] = True
                        stack.append(u)
            comps.append(sorted(comp))
        return comps

    def subgraph(self, vertices: Sequence[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph on ``vertices`` relabelled to ``0..k-1`` in sorted
        order; also returns the parent indices of the kept edges, aligned with
        the subgraph's edge order."""
        vertices = sorted(vertices)
        relabel = {v: k for k, v in enumerate(vertices)}
        kept = [
            idx for idx, (i, j) in enumerate(self.edges) if i in relabel and j in relabel
        ]
        sub = Graph(
            len(vertices),
            tuple((relabel[self.edges[k][0]], relabel[self.edges[k][1]]) for k in kept),
            tuple(self.weights[k] for k in kept),
        )
        # relabelling is monotone, so the subgraph's sorted edge order matches `kept`
        return sub, kept


def is_connected(g: Graph) -> bool:
    return g.n <= 1 or len(g.components()) == 1


def max_degree_vertex(g: Graph) -> int:
    """Lowest-index vertex among those of maximum degree."""
    if g.n < 1:
        raise ValueError("empty graph has no vertices")
    return int(np.argmax(g.degrees))


# -- graph6 ----------------------------------------------------------------


def _upper_pairs(n: int) -> Iterator[tuple[int, int]]:
    # column order: x(0,1), x(0,2), x(1,2), x(0,3), ...
    for j in range(1, n):
        for i in range(j):
            yield i, j


def parse_graph6(line: bytes | str) -> Graph:
    """Decode one graph6 record (``n <= 62``, no header)."""
    if isinstance(line, str):
        line = line.encode("ascii", errors="strict")
    data = bytes(line).rstrip(b"\r\n")
    if not data:
        raise Graph6Error("empty graph6 record")
    bad = [b for b in data if not 63 <= b <= 126]
    if bad:
        raise Graph6Error(f"byte {bad[0]} outside the graph6 range [63, 126]")
    n = data[0] - 63
    if n > GRAPH6_MAX_N:
        raise Graph6Error("only graphs with n <= 62 are supported")
    nbits = n * (n - 1) // 2
    nbytes = -(-nbits // 6)
    body = data[1:]
    if len(body) < nbytes:
        raise Graph6Error(f"truncated record: expected {nbytes} data bytes, got {len(body)}")
    if len(body) > nbytes:
        raise Graph6Error("trailing bytes after graph6 record")
    bits = []
    for b in body:
        v = b - 63
        bits.extend((v >> k) & 1 for k in range(5, -1, -1))
    edges = [p for p, bit in zip(_upper_pairs(n), bits) if bit]
    return Graph(n, tuple(edges))


def serialize_graph6(g: Graph) -> bytes:
    if g.n > GRAPH6_MAX_N:
        raise Graph6Error("only graphs with n <= 62 are supported")
    present = set(g.edges)
    bits = [1 if p in present else 0 for p in _upper_pairs(g.n)]
    bits += [0] * (-len(bits) % 6)
    out = bytearray([g.n + 63])
    for k in range(0, len(bits), 6):
        v = 0
        for bit in bits[k : k + 6]:
            v = (v << 1) | bit
        out.append(v + 63)
    return bytes(out)


def graph6_id(g: Graph) -> str:
    return serialize_graph6(g).decode("ascii")


def read_graph6_file(path: str | Path) -> list[Graph]:
    graphs = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(b">>graph6<<"):
                line = line[len(b">>graph6<<") :]
            try:
                graphs.append(parse_graph6(line))
            except Graph6Error as exc:
                raise Graph6Error(f"{path}:{lineno}: {exc}") from None
    return graphs


def write_graph6_file(path: str | Path, graphs: Iterable[Graph]) -> None:
    with open(path, "wb") as fh:
        for g in graphs:
            fh.write(serialize_graph6(g) + b"\n")


# -- generators ------------------------------------------------------------


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p): every pair kept independently with probability ``p``.

    Pairs are drawn in graph6 column order from ``numpy.random.default_rng(seed)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    pairs = list(_upper_pairs(n))
    draws = np.random.default_rng(seed).random(len(pairs))
    return Graph(n, tuple(pr for pr, u in zip(pairs, draws) if u < p))


@dataclass(frozen=True)
class GraphEnsemble:
    """Ordered graphs plus where they came from.

    ``provenance`` is one of ``"enumerated"``, ``"erdos_renyi"`` or ``"file"``;
    ``params`` records what is needed to regenerate the ensemble.
    """

    graphs: tuple[Graph, ...]
    ids: tuple[str, ...]
    provenance: str
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, k):
        return self.graphs[k]


def random_connected_ensemble(
    n: int,
    p_range: tuple[float, float],
    count: int,
    seed: int,
    connected: bool = True,
    max_tries: int = 10_000,
) -> GraphEnsemble:
    """``count`` Erdos-Renyi graphs with ``p ~ U(p_range)`` per graph.

    With ``connected=True`` each draw (fresh p and sub-seed) is rejected until
    connected. Ids are ``er-<n>-<p>-<seed>-<index>``.
    """
    lo, hi = p_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("p_range must satisfy 0 <= lo <= hi <= 1")
    rng = np.random.default_rng(seed)
    graphs, ids = [], []
    for index in range(count):
        for _ in range(max_tries):
            p = float(rng.uniform(lo, hi))
            g = erdos_renyi(n, p, int(rng.integers(2**63 - 1)))
            if not connected or is_connected(g):
                break
        else:
            raise RuntimeError(
                f"no connected G({n}, p) with p in [{lo}, {hi}] after {max_tries} draws"
            )
        graphs.append(g)
        ids.append(f"er-{n}-{p:.6f}-{seed}-{index}")
    return GraphEnsemble(
        tuple(graphs),
        tuple(ids),
        "erdos_renyi",
        {"n": n, "p_range": [lo, hi], "count": count, "seed": seed, "connected": connected},
    )


def canonical_code(g: Graph) -> int:
    """Smallest upper-triangle adjacency bitstring (first pair = most significant
    bit) over all vertex relabellings. Brute force; intended for small n."""
    best = None
    pairs = list(_upper_pairs(g.n))
    present = set(g.edges)
    for perm in itertools.permutations(range(g.n)):
        code = 0
        for i, j in pairs:
            a, b = perm[i], perm[j]
            code = (code << 1) | ((min(a, b), max(a, b)) in present)
        if best is None or code < best:
            best = code
    return best if best is not None else 0


def _graph_from_code(n: int, code: int) -> Graph:
    pairs = list(_upper_pairs(n))
    m = len(pairs)
    return Graph(n, tuple(p for k, p in enumerate(pairs) if (code >> (m - 1 - k)) & 1))


def enumerate_connected(n: int) -> GraphEnsemble:
    """One representative per isomorphism class of connected graphs on ``n``
    vertices, ordered by canonical code. Capped at n = 6; larger enumerations
    should be read from a graph6 file."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > ENUMERATION_MAX_N:
        raise ValueError(
            f"enumeration supports n <= {ENUMERATION_MAX_N}; "
            "load larger enumerations with read_graph6_file"
        )
    pairs = list(_upper_pairs(n))
    m = len(pairs)
    index = {p: k for k, p in enumerate(pairs)}
    codes = np.arange(1 << m, dtype=np.int64)
    bits = [(codes >> (m - 1 - k)) & 1 for k in range(m)]
    canon = np.full(codes.shape, np.iinfo(np.int64).max)
    for perm in itertools.permutations(range(n)):
        # bit k of the relabelled graph is the original bit of the preimage pair
        inv = [0] * n
        for v, pv in enumerate(perm):
            inv[pv] = v
        permuted = np.zeros_like(codes)
        for k, (i, j) in enumerate(pairs):
            a, b = inv[i], inv[j]
            permuted |= bits[index[(min(a, b), max(a, b))]] << (m - 1 - k)
        np.minimum(canon, permuted, out=canon)
    graphs = [_graph_from_code(n, int(c)) for c in np.unique(canon)]
    graphs = [g for g in graphs if is_connected(g)]
    return GraphEnsemble(
        tuple(graphs), tuple(graph6_id(g) for g in graphs), "enumerated", {"n": n}
    )
