"""Write every connected graph on n vertices (n <= 8) as sorted graph6 lines.

Each graph on n - 1 vertices from the networkx atlas is extended by one new
vertex in every possible way; isomorphic duplicates are removed within
Weisfeiler-Lehman hash buckets. n = 8 takes about a minute and a half.

    python scripts/gen_connected_graph6.py 8 tests/data/connected8.g6
"""
import argparse

import networkx as nx

from qitecut.graphio import Graph, graph6_id


def connected_graphs(n):
    if n <= 7:
        return [G for G in nx.graph_atlas_g() if G.number_of_nodes() == n and nx.is_connected(G)]
    smaller = [G for G in nx.graph_atlas_g() if G.number_of_nodes() == n - 1]
    buckets = {}
    out = []
    for G in smaller:
        for mask in range(1, 1 << (n - 1)):
            H = G.copy()
            H.add_node(n - 1)
            H.add_edges_from((n - 1, v) for v in range(n - 1) if mask >> v & 1)
            if not nx.is_connected(H):
                continue
            key = (
                nx.weisfeiler_lehman_graph_hash(H, iterations=3),
                tuple(sorted(d for _, d in H.degree())),
            )
            seen = buckets.setdefault(key, [])
            if any(nx.is_isomorphic(H, K) for K in seen):
                continue
            seen.append(H)
            out.append(H)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("n", type=int)
    parser.add_argument("out")
    args = parser.parse_args()
    if args.n > 8:
        parser.error("n > 8 is out of reach for this generator")
    lines = sorted(
        graph6_id(Graph.from_edges(args.n, G.edges())) for G in connected_graphs(args.n)
    )
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(lines)} graphs -> {args.out}")


if __name__ == "__main__":
    main()
