"""Aggregated call graph: one node per method name, one edge per distinct
caller-name -> callee-name pair."""

from __future__ import annotations

from bisect import bisect_left
from typing import IO, Iterable, Optional

import numpy as np

from .corpus import MethodRecord


class UnknownNodeError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown node: {self.name!r}"


class AggregatedCallGraph:
    """Immutable directed graph over method names.

    Nodes are kept in lexicographic order; ``index`` maps a name to its
    position, which is also the row used by embedding tables.
    """

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]]):
        edge_set = frozenset(edges)
        node_set = set(nodes)
        for a, b in edge_set:
            node_set.add(a)
            node_set.add(b)
        self.nodes: tuple[str, ...] = tuple(sorted(node_set))
        self.edges = edge_set
        self.index = {name: i for i, name in enumerate(self.nodes)}

        out: dict[str, list[str]] = {v: [] for v in self.nodes}
        inc: dict[str, list[str]] = {v: [] for v in self.nodes}
        for a, b in sorted(edge_set):
            out[a].append(b)
            inc[b].append(a)
        for v in self.nodes:
            inc[v].sort()
        self._out = {v: tuple(cs) for v, cs in out.items()}
        self._in = {v: tuple(ps) for v, ps in inc.items()}
        self._csr: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AggregatedCallGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"AggregatedCallGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def callees(self, name: str) -> tuple[str, ...]:
        try:
            return self._out[name]
        except KeyError:
            raise UnknownNodeError(name) from None

    def callers(self, name: str) -> tuple[str, ...]:
        try:
            return self._in[name]
        except KeyError:
            raise UnknownNodeError(name) from None

    def isolated(self) -> list[str]:
        return [v for v in self.nodes if not self._out[v] and not self._in[v]]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Callee adjacency as ``(indptr, indices)`` over node positions."""
        if self._csr is None:
            indptr = np.zeros(len(self.nodes) + 1, dtype=np.int64)
            indices = []
            for i, v in enumerate(self.nodes):
                cs = self._out[v]
                indices.extend(self.index[c] for c in cs)
                indptr[i + 1] = indptr[i] + len(cs)
            self._csr = (indptr, np.asarray(indices, dtype=np.int64))
        return self._csr

    def has_edge(self, a: str, b: str) -> bool:
        cs = self._out.get(a, ())
        j = bisect_left(cs, b)
        return j < len(cs) and cs[j] == b


def build_acg(records: Iterable[MethodRecord]) -> AggregatedCallGraph:
    """Build the graph: nodes are all definition and callee names, edges
    link each definition name to each of its callees.  Same-named
    definitions merge into one node."""
    nodes = set()
    edges = set()
    for r in records:
        nodes.add(r.name)
        for c in r.callees:
            nodes.add(c)
            edges.add((r.name, c))
    return AggregatedCallGraph(nodes, edges)


def callees(g: AggregatedCallGraph, name: str) -> tuple[str, ...]:
    return g.callees(name)


def callers(g: AggregatedCallGraph, name: str) -> tuple[str, ...]:
    return g.callers(name)


def write_graph(g: AggregatedCallGraph, fp: IO[str]) -> None:
    fp.write(f"#nodes {len(g.nodes)} #edges {len(g.edges)}\n")
    for a, b in sorted(g.edges):
        fp.write(f"{a}\t{b}\n")
    for v in g.isolated():
        fp.write(f"#leaf {v}\n")


def read_graph(fp: IO[str]) -> AggregatedCallGraph:
    header = fp.readline()
    parts = header.split()
    if len(parts) != 4 or parts[0] != "#nodes" or parts[2] != "#edges":
        raise ValueError(f"line 1: bad graph header {header.rstrip()!r}")
    try:
        n_nodes, n_edges = int(parts[1]), int(parts[3])
    except ValueError:
        raise ValueError(f"line 1: bad graph header {header.rstrip()!r}") from None
    nodes = []
    edges = []
    for lineno, line in enumerate(fp, 2):
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#leaf "):
            nodes.append(line[len("#leaf "):])
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise ValueError(f"line {lineno}: expected 'caller<TAB>callee', got {line!r}")
        edges.append((fields[0], fields[1]))
    g = AggregatedCallGraph(nodes, edges)
    if len(g.nodes) != n_nodes or len(g.edges) != n_edges:
        raise ValueError(
            f"graph body has {len(g.nodes)} nodes / {len(g.edges)} edges, "
            f"header declares {n_nodes} / {n_edges}"
        )
    return g
