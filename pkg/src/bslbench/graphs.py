"""Directed, partially directed, and undirected graph primitives.

Graphs are immutable value objects over the node set ``{0, ..., n_nodes-1}``.
The module provides the structural operations the rest of the package is
built on: topological ordering, skeletons, moralization, CPDAG construction
(v-structures plus Meek closure), d-separation queries, in-degree
histograms, and a line-oriented text format for interchange.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator

__all__ = [
    "GraphError",
    "CycleError",
    "Dag",
    "Pdag",
    "UndirectedGraph",
    "DegreeHistogram",
    "topological_order",
    "skeleton",
    "moralize",
    "moralize_pdag",
    "cpdag_of_dag",
    "meek_closure",
    "d_separated",
    "in_degree_histogram",
    "graph_to_text",
    "graph_from_text",
    "write_graph",
    "read_graph",
    "to_dot",
]


class GraphError(ValueError):
    """Raised when a graph violates a structural precondition."""


class CycleError(GraphError):
    """Raised when an edge set that must be acyclic contains a cycle."""


def _check_node(i: int, n_nodes: int) -> int:
    i = int(i)
    if not 0 <= i < n_nodes:
        raise GraphError(f"node {i} out of range for {n_nodes} nodes")
    return i


def _normalize_directed(edges: Iterable[tuple[int, int]], n_nodes: int) -> frozenset[tuple[int, int]]:
    out = set()
    for u, v in edges:
        u = _check_node(u, n_nodes)
        v = _check_node(v, n_nodes)
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        out.add((u, v))
    return frozenset(out)


def _normalize_undirected(edges: Iterable[tuple[int, int]], n_nodes: int) -> frozenset[tuple[int, int]]:
    out = set()
    for a, b in edges:
        a = _check_node(a, n_nodes)
        b = _check_node(b, n_nodes)
        if a == b:
            raise GraphError(f"self-loop at node {a}")
        out.add((min(a, b), max(a, b)))
    return frozenset(out)


def _kahn_order(n_nodes: int, edges: frozenset[tuple[int, int]]) -> tuple[int, ...]:
    """Topological order via Kahn's algorithm, smallest ready node first."""
    children: list[list[int]] = [[] for _ in range(n_nodes)]
    in_deg = [0] * n_nodes
    for u, v in edges:
        children[u].append(v)
        in_deg[v] += 1
    ready = [i for i in range(n_nodes) if in_deg[i] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in children[u]:
            in_deg[v] -= 1
            if in_deg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != n_nodes:
        raise CycleError("edge set contains a directed cycle")
    return tuple(order)


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph on nodes ``0..n_nodes-1``.

    Parameters
    ----------
    n_nodes : int
        Number of nodes; must be >= 1.
    edges : frozenset of (int, int)
        Directed edges ``(parent, child)``.  Validated for range,
        self-loops, and acyclicity at construction time.
    """

    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if int(self.n_nodes) < 1:
            raise GraphError("a graph needs at least one node")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        norm = _normalize_directed(self.edges, self.n_nodes)
        object.__setattr__(self, "edges", norm)
        object.__setattr__(self, "_order", _kahn_order(self.n_nodes, norm))

    @cached_property
    def parent_sets(self) -> tuple[frozenset, ...]:
        ps: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges:
            ps[v].add(u)
        return tuple(frozenset(s) for s in ps)

    @cached_property
    def child_sets(self) -> tuple[frozenset, ...]:
        cs: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges:
            cs[u].add(v)
        return tuple(frozenset(s) for s in cs)

    def parents(self, i: int) -> frozenset:
        return self.parent_sets[_check_node(i, self.n_nodes)]

    def children(self, i: int) -> frozenset:
        return self.child_sets[_check_node(i, self.n_nodes)]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Pdag:
    """Immutable partially directed graph.

    A node pair may appear in at most one of the two edge sets; undirected
    edges are stored with the smaller endpoint first.
    """

    n_nodes: int
    directed_edges: frozenset = field(default_factory=frozenset)
    undirected_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if int(self.n_nodes) < 1:
            raise GraphError("a graph needs at least one node")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        directed = _normalize_directed(self.directed_edges, self.n_nodes)
        undirected = _normalize_undirected(self.undirected_edges, self.n_nodes)
        pairs: set[tuple[int, int]] = set()
        for u, v in directed:
            key = (min(u, v), max(u, v))
            if key in pairs:
                raise GraphError(f"pair {key} appears more than once")
            pairs.add(key)
        for key in undirected:
            if key in pairs:
                raise GraphError(f"pair {key} appears in both edge sets")
            pairs.add(key)
        object.__setattr__(self, "directed_edges", directed)
        object.__setattr__(self, "undirected_edges", undirected)

    @cached_property
    def adjacency_sets(self) -> tuple[frozenset, ...]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.directed_edges:
            adj[u].add(v)
            adj[v].add(u)
        for a, b in self.undirected_edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(frozenset(s) for s in adj)

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.adjacency_sets[_check_node(a, self.n_nodes)]


@dataclass(frozen=True)
class UndirectedGraph:
    """Immutable undirected graph; edges stored with smaller endpoint first."""

    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if int(self.n_nodes) < 1:
            raise GraphError("a graph needs at least one node")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        object.__setattr__(self, "edges", _normalize_undirected(self.edges, self.n_nodes))

    @cached_property
    def neighbor_sets(self) -> tuple[frozenset, ...]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(frozenset(s) for s in adj)

    def has_edge(self, a: int, b: int) -> bool:
        a = _check_node(a, self.n_nodes)
        b = _check_node(b, self.n_nodes)
        return (min(a, b), max(a, b)) in self.edges

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=True)
class DegreeHistogram:
    """In-degree histogram of a DAG: ``counts[d]`` nodes have in-degree d."""

    n_nodes: int
    counts: tuple = ()

    @property
    def max_in_degree(self) -> int:
        return max((d for d, c in self.counts if c > 0), default=0)

    def as_dict(self) -> dict[int, int]:
        return {d: c for d, c in self.counts}


def topological_order(g: Dag) -> list[int]:
    """Return a deterministic topological order (smallest node first among ties)."""
    return list(g._order)  # computed and cached at construction


def skeleton(g: Dag | Pdag) -> UndirectedGraph:
    """Drop edge orientations, returning the adjacency structure."""
    if isinstance(g, Dag):
        return UndirectedGraph(g.n_nodes, frozenset(g.edges))
    return UndirectedGraph(g.n_nodes, frozenset(g.directed_edges) | g.undirected_edges)


def moralize(g: Dag) -> UndirectedGraph:
    """Return the moral graph: skeleton plus marriages between co-parents.

    For every node, all pairs of its parents are connected, then all edges
    are disoriented.
    """
    edges = {(min(u, v), max(u, v)) for u, v in g.edges}
    for w in range(g.n_nodes):
        for u, v in combinations(sorted(g.parent_sets[w]), 2):
            edges.add((u, v))
    return UndirectedGraph(g.n_nodes, frozenset(edges))


def moralize_pdag(p: Pdag) -> UndirectedGraph:
    """Moralize a partially directed graph.

    Only directed edges contribute parentage: two nodes are married when
    both point at a common child via directed edges.  Undirected edges
    contribute adjacency only.
    """
    edges = {(min(u, v), max(u, v)) for u, v in p.directed_edges}
    edges |= p.undirected_edges
    parents: list[set[int]] = [set() for _ in range(p.n_nodes)]
    for u, v in p.directed_edges:
        parents[v].add(u)
    for w in range(p.n_nodes):
        for u, v in combinations(sorted(parents[w]), 2):
            edges.add((min(u, v), max(u, v)))
    return UndirectedGraph(p.n_nodes, frozenset(edges))


def _meek_fixpoint(
    n_nodes: int,
    directed: set[tuple[int, int]],
    undirected: set[tuple[int, int]],
) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Apply Meek rules R1-R4 to a fixpoint, mutating and returning the sets."""
    parents: list[set[int]] = [set() for _ in range(n_nodes)]
    children: list[set[int]] = [set() for _ in range(n_nodes)]
    neighbors: list[set[int]] = [set() for _ in range(n_nodes)]  # undirected only
    adjacent: list[set[int]] = [set() for _ in range(n_nodes)]
    for u, v in directed:
        parents[v].add(u)
        children[u].add(v)
        adjacent[u].add(v)
        adjacent[v].add(u)
    for a, b in undirected:
        neighbors[a].add(b)
        neighbors[b].add(a)
        adjacent[a].add(b)
        adjacent[b].add(a)

    def orientable(x: int, y: int) -> bool:
        # R1: some c -> x with c, y non-adjacent.
        for c in parents[x]:
            if y not in adjacent[c]:
                return True
        # R2: a directed path x -> c -> y.
        if children[x] & parents[y]:
            return True
        # R3: two non-adjacent undirected neighbors c, d of x with c -> y, d -> y.
        cands = sorted(neighbors[x] & parents[y])
        for i, c in enumerate(cands):
            for d in cands[i + 1 :]:
                if d not in adjacent[c]:
                    return True
        # R4: x - c undirected, c -> d, d -> y, with x, d adjacent and c, y
        # non-adjacent.
        for c in neighbors[x]:
            if c == y or y in adjacent[c]:
                continue
            for d in children[c] & parents[y]:
                if d in adjacent[x]:
                    return True
        return False

    changed = True
    while changed:
        changed = False
        for a, b in sorted(undirected):
            for x, y in ((a, b), (b, a)):
                if orientable(x, y):
                    undirected.discard((a, b))
                    neighbors[a].discard(b)
                    neighbors[b].discard(a)
                    directed.add((x, y))
                    parents[y].add(x)
                    children[x].add(y)
                    changed = True
                    break
    return directed, undirected


def meek_closure(p: Pdag) -> Pdag:
    """Return the maximally oriented graph under Meek rules R1-R4.

    The rules are applied to a fixpoint:

    * R1: orient x - y as x -> y when some c -> x exists with c, y
      non-adjacent (avoids a new v-structure at x).
    * R2: orient x - y as x -> y when a directed path x -> c -> y exists
      (avoids a cycle).
    * R3: orient x - y as x -> y when two non-adjacent c, d are undirected
      neighbors of x and both point at y.
    * R4: orient x - y as x -> y when an undirected neighbor c of x starts
      a chain c -> d -> y with x, d adjacent and c, y non-adjacent.

    The closure is confluent, so the scan order does not affect the result.
    """
    directed, undirected = _meek_fixpoint(
        p.n_nodes, set(p.directed_edges), set(p.undirected_edges)
    )
    return Pdag(p.n_nodes, frozenset(directed), frozenset(undirected))


def cpdag_of_dag(g: Dag) -> Pdag:
    """Return the CPDAG (essential graph) of the Markov equivalence class of g.

    V-structures of the DAG are kept directed; every other compelled
    orientation is recovered by Meek closure; the remaining edges are
    undirected.
    """
    directed: set[tuple[int, int]] = set()
    for w in range(g.n_nodes):
        for u, v in combinations(sorted(g.parent_sets[w]), 2):
            if v not in g.parent_sets[u] and u not in g.parent_sets[v]:
                directed.add((u, w))
                directed.add((v, w))
    undirected = {
        (min(u, v), max(u, v)) for u, v in g.edges if (u, v) not in directed
    }
    directed, undirected = _meek_fixpoint(g.n_nodes, directed, undirected)
    return Pdag(g.n_nodes, frozenset(directed), frozenset(undirected))


def d_separated(g: Dag, x: int, y: int, z: Iterable[int] = ()) -> bool:
    """Decide whether z d-separates x from y in g.

    Uses ball-passing reachability: a trail is traced through the DAG,
    tracking whether each node is entered through a parent edge or a child
    edge, with colliders opened only when the node is in z or has a
    descendant in z.

    Raises
    ------
    GraphError
        If x == y, or x or y is contained in z, or a node is out of range.
    """
    x = _check_node(x, g.n_nodes)
    y = _check_node(y, g.n_nodes)
    zset = frozenset(_check_node(i, g.n_nodes) for i in z)
    if x == y:
        raise GraphError("x and y must be distinct")
    if x in zset or y in zset:
        raise GraphError("x and y must not be members of z")

    # Nodes in z together with their ancestors: the set at which colliders
    # pass the ball upward.
    an_z = set(zset)
    stack = list(zset)
    while stack:
        u = stack.pop()
        for p in g.parent_sets[u]:
            if p not in an_z:
                an_z.add(p)
                stack.append(p)

    # (node, direction): direction True when entered from a child (moving up),
    # False when entered from a parent (moving down).
    visited: set[tuple[int, bool]] = set()
    frontier: list[tuple[int, bool]] = [(x, True)]
    while frontier:
        v, up = frontier.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == y:
            return False
        if up:
            if v not in zset:
                for p in g.parent_sets[v]:
                    frontier.append((p, True))
                for c in g.child_sets[v]:
                    frontier.append((c, False))
        else:
            if v not in zset:
                for c in g.child_sets[v]:
                    frontier.append((c, False))
            if v in an_z:
                for p in g.parent_sets[v]:
                    frontier.append((p, True))
    return True


def in_degree_histogram(g: Dag) -> DegreeHistogram:
    """Return the in-degree histogram of g."""
    counts: dict[int, int] = {}
    for i in range(g.n_nodes):
        d = len(g.parent_sets[i])
        counts[d] = counts.get(d, 0) + 1
    return DegreeHistogram(g.n_nodes, tuple(sorted(counts.items())))


# ---------------------------------------------------------------------------
# Text interchange format
#
# Header line "dag <n>" or "pdag <n>", then one edge per line:
#   d <src> <dst>   directed edge
#   u <a> <b>       undirected edge (pdag only)
# Blank lines and lines starting with '#' are ignored.
# ---------------------------------------------------------------------------


def graph_to_text(g: Dag | Pdag) -> str:
    """Serialize a graph to the line-oriented text format."""
    lines: list[str] = []
    if isinstance(g, Dag):
        lines.append(f"dag {g.n_nodes}")
        for u, v in sorted(g.edges):
            lines.append(f"d {u} {v}")
    elif isinstance(g, Pdag):
        lines.append(f"pdag {g.n_nodes}")
        for u, v in sorted(g.directed_edges):
            lines.append(f"d {u} {v}")
        for a, b in sorted(g.undirected_edges):
            lines.append(f"u {a} {b}")
    else:
        raise GraphError(f"cannot serialize {type(g).__name__}")
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> Iterator[str]:
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line


def graph_from_text(text: str) -> Dag | Pdag:
    """Parse a graph from the line-oriented text format."""
    lines = list(_content_lines(text))
    if not lines:
        raise GraphError("empty graph text")
    header = lines[0].split()
    if len(header) != 2 or header[0] not in ("dag", "pdag"):
        raise GraphError(f"bad header line: {lines[0]!r}")
    try:
        n_nodes = int(header[1])
    except ValueError as exc:
        raise GraphError(f"bad node count: {header[1]!r}") from exc
    directed: list[tuple[int, int]] = []
    undirected: list[tuple[int, int]] = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("d", "u"):
            raise GraphError(f"bad edge line: {line!r}")
        try:
            a, b = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise GraphError(f"bad edge line: {line!r}") from exc
        if parts[0] == "d":
            directed.append((a, b))
        else:
            undirected.append((a, b))
    if header[0] == "dag":
        if undirected:
            raise GraphError("undirected edge in a dag block")
        return Dag(n_nodes, frozenset(directed))
    return Pdag(n_nodes, frozenset(directed), frozenset(undirected))


def write_graph(path: str | Path, g: Dag | Pdag) -> None:
    Path(path).write_text(graph_to_text(g), encoding="utf-8")


def read_graph(path: str | Path) -> Dag | Pdag:
    return graph_from_text(Path(path).read_text(encoding="utf-8"))


def to_dot(g: Dag | Pdag, name: str = "G") -> str:
    """Render a graph in Graphviz DOT syntax (undirected edges use dir=none)."""
    lines = [f"digraph {name} {{"]
    for i in range(g.n_nodes):
        lines.append(f"  {i};")
    if isinstance(g, Dag):
        for u, v in sorted(g.edges):
            lines.append(f"  {u} -> {v};")
    else:
        for u, v in sorted(g.directed_edges):
            lines.append(f"  {u} -> {v};")
        for a, b in sorted(g.undirected_edges):
            lines.append(f"  {a} -> {b} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"
