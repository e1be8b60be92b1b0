"""Matrix-induced graphs and tree decompositions.

A bipartite graph G(U, A, X) has an edge (a, x) whenever U[a, x] is nonzero;
a symmetric graph G(B, X) has an edge {i, j} whenever B[i, j] is nonzero, with
loops {i, i} recorded for nonzero diagonal entries.

Tree decompositions are rooted at node 0.  Bipartite decompositions store a
row bag and a column bag per node; symmetric decompositions leave the row bags
empty.  Internally both kinds of graph are handled through "vertex keys":
bipartite rows map to ``("r", a)`` and columns to ``("c", x)`` while symmetric
vertices are their own keys.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import networkx as nx
import numpy as np
from networkx.algorithms.approximation import (
    treewidth_min_degree,
    treewidth_min_fill_in,
)

ROW = "r"
COL = "c"

# Above this many vertices the min-fill heuristic (cubic per step) is replaced
# by the cheaper min-degree rule.
MIN_FILL_VERTEX_LIMIT = 400

# Multiplicities of rows, columns or modes (photon numbers), one per label.
WeightVector = tuple


def weight_vector(entries) -> WeightVector:
    """Validate and freeze a vector of nonnegative integer multiplicities."""
    out = []
    for v in entries:
        iv = int(v)
        if iv != v or iv < 0:
            raise ValueError(f"weights must be nonnegative integers, got {v!r}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph with ordered row and column labels."""

    rows: tuple
    cols: tuple
    edges: frozenset

    def __post_init__(self):
        rows, cols = set(self.rows), set(self.cols)
        for a, x in self.edges:
            if a not in rows or x not in cols:
                raise ValueError(f"edge {(a, x)} has an endpoint outside the vertex lists")

    @property
    def bipartite(self) -> bool:
        return True

    def vertex_keys(self) -> list:
        return [(ROW, a) for a in self.rows] + [(COL, x) for x in self.cols]

    def edge_keys(self) -> list:
        return [((ROW, a), (COL, x)) for a, x in sorted(self.edges)]

    def to_dict(self) -> dict:
        return {
            "rows": list(self.rows),
            "cols": list(self.cols),
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BipartiteGraph":
        return cls(tuple(data["rows"]), tuple(data["cols"]),
                   frozenset(tuple(e) for e in data["edges"]))


@dataclass(frozen=True)
class SymmetricGraph:
    """Undirected graph whose edges are sorted pairs (i, j), loops (i, i) allowed."""

    vertices: tuple
    edges: frozenset

    def __post_init__(self):
        vs = set(self.vertices)
        for i, j in self.edges:
            if i not in vs or j not in vs:
                raise ValueError(f"edge {(i, j)} has an endpoint outside the vertex list")

    @property
    def bipartite(self) -> bool:
        return False

    @property
    def loops(self) -> frozenset:
        return frozenset(i for i, j in self.edges if i == j)

    def vertex_keys(self) -> list:
        return list(self.vertices)

    def edge_keys(self) -> list:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {
            "rows": [],
            "cols": list(self.vertices),
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SymmetricGraph":
        return cls(tuple(data["cols"]), frozenset(tuple(e) for e in data["edges"]))


def _pair(i, j) -> tuple:
    return (i, j) if i <= j else (j, i)


def build_bipartite_graph(matrix, rows: Sequence[int] | None = None,
                          cols: Sequence[int] | None = None,
                          zero_tol: float = 0.0) -> BipartiteGraph:
    """Build the bipartite graph of a matrix.

    Args:
        matrix: Complex matrix U.
        rows: Row labels (indices into ``matrix``).  Defaults to all rows.
        cols: Column labels.  Defaults to all columns.
        zero_tol: Entries with magnitude at most this value count as zero.

    Returns:
        BipartiteGraph with an edge (a, x) iff |U[a, x]| > zero_tol.
    """
    U = np.asarray(matrix)
    rows = tuple(range(U.shape[0])) if rows is None else tuple(int(a) for a in rows)
    cols = tuple(range(U.shape[1])) if cols is None else tuple(int(x) for x in cols)
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    for a in rows:
        if not 0 <= a < U.shape[0]:
            raise IndexError(f"row label {a} out of range")
    for x in cols:
        if not 0 <= x < U.shape[1]:
            raise IndexError(f"column label {x} out of range")
    if rows and cols:
        mask = np.abs(U[np.ix_(rows, cols)]) > zero_tol
        edges = frozenset((rows[i], cols[j]) for i, j in zip(*np.nonzero(mask)))
    else:
        edges = frozenset()
    return BipartiteGraph(rows, cols, edges)


def build_symmetric_graph(B, labels: Sequence[int] | None = None,
                          zero_tol: float = 0.0, sym_tol: float = 1e-10,
                          loops=None) -> SymmetricGraph:
    """Build the graph of a symmetric matrix.

    Args:
        B: Complex symmetric matrix.
        labels: Vertex labels (indices into ``B``).  Defaults to all.
        zero_tol: Entries with magnitude at most this value count as zero.
        sym_tol: Allowed asymmetry max|B - B^T| relative to max|B|.
        loops: Optional vector of loop weights overriding the diagonal when
            deciding which loops exist.

    Returns:
        SymmetricGraph with an edge {i, j} iff |B[i, j]| > zero_tol.
    """
    B = np.asarray(B)
    labels = tuple(range(B.shape[0])) if labels is None else tuple(int(i) for i in labels)
    scale = max(float(np.max(np.abs(B))) if B.size else 0.0, 1.0)
    if B.size and np.max(np.abs(B - B.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    for i in labels:
        if not 0 <= i < B.shape[0]:
            raise IndexError(f"label {i} out of range")
    edges = set()
    if labels:
        sub = np.abs(B[np.ix_(labels, labels)]) > zero_tol
        for p, q in zip(*np.nonzero(np.triu(sub, 1))):
            edges.add(_pair(labels[p], labels[q]))
        diag = np.abs(np.diag(B)) if loops is None else np.abs(np.asarray(loops))
        for i in labels:
            if diag[i] > zero_tol:
                edges.add((i, i))
    return SymmetricGraph(labels, frozenset(edges))


class Violation(NamedTuple):
    """One failed decomposition condition."""

    kind: str  # "structure", "unknown-vertex", "coverage", "edge-coverage", "connectivity"
    item: object

    def __str__(self) -> str:
        return f"{self.kind}: {self.item!r}"


@dataclass(frozen=True)
class TreeDecomposition:
    """Rooted tree decomposition (node 0 is the root).

    Attributes:
        parent: Parent id per node; ``None`` for the root.
        bag_rows: Sorted row labels per node (empty for symmetric graphs).
        bag_cols: Sorted column labels per node.
        bipartite: Whether the decomposition is of a bipartite graph.
    """

    parent: tuple
    bag_rows: tuple
    bag_cols: tuple
    bipartite: bool
    children: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kids = [[] for _ in self.parent]
        for t, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(t)
        object.__setattr__(self, "children", tuple(tuple(sorted(k)) for k in kids))

    def __len__(self) -> int:
        return len(self.parent)

    @property
    def width(self) -> int:
        if not self.parent:
            return -1
        return max(len(r) + len(c) for r, c in zip(self.bag_rows, self.bag_cols)) - 1

    def bag_keys(self, t: int) -> list:
        """Vertex keys of node t, rows first for bipartite decompositions."""
        if self.bipartite:
            return [(ROW, a) for a in self.bag_rows[t]] + [(COL, x) for x in self.bag_cols[t]]
        return list(self.bag_cols[t])

    def postorder(self) -> list:
        """Node ids with every child listed before its parent."""
        order, stack = [], [(0, False)] if self.parent else []
        while stack:
            t, done = stack.pop()
            if done:
                order.append(t)
                continue
            stack.append((t, True))
            for c in reversed(self.children[t]):
                stack.append((c, False))
        return order

    def rerooted(self, key) -> "TreeDecomposition":
        """Return the same decomposition rooted at the first bag containing ``key``."""
        for t in range(len(self)):
            if key in self.bag_keys(t):
                break
        else:
            raise KeyError(f"vertex {key!r} is in no bag")
        if t == 0:
            return self
        bags = [set(self.bag_keys(s)) for s in range(len(self))]
        adj = [[] for _ in self.parent]
        for s, p in enumerate(self.parent):
            if p is not None:
                adj[s].append(p)
                adj[p].append(s)
        return _assemble(bags, adj, t, self.bipartite)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": t, "parent": p, "bag_rows": list(r), "bag_cols": list(c)}
                for t, (p, r, c) in enumerate(zip(self.parent, self.bag_rows, self.bag_cols))
            ],
            "width": self.width,
            "bipartite": self.bipartite,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeDecomposition":
        nodes = sorted(data["nodes"], key=lambda n: n["id"])
        return cls(
            tuple(n["parent"] for n in nodes),
            tuple(tuple(n["bag_rows"]) for n in nodes),
            tuple(tuple(n["bag_cols"]) for n in nodes),
            bool(data.get("bipartite", any(n["bag_rows"] for n in nodes))),
        )


def _split_bag(keys: Iterable, bipartite: bool) -> tuple[tuple, tuple]:
    if bipartite:
        rows = tuple(sorted(v for k, v in keys if k == ROW))
        cols = tuple(sorted(v for k, v in keys if k == COL))
        return rows, cols
    return (), tuple(sorted(keys))


def _assemble(bags: list, adj: list, root: int, bipartite: bool) -> TreeDecomposition:
    """Number a tree breadth-first from ``root`` and build the decomposition.

    Children are visited in order of their sorted bag contents so that the
    numbering only depends on the bags, not on incidental ids.
    """
    def sort_key(s):
        return tuple(sorted(map(repr, bags[s])))

    order, parent_of, seen = [root], {root: None}, {root}
    head = 0
    while head < len(order):
        t = order[head]
        head += 1
        for s in sorted((s for s in adj[t] if s not in seen), key=sort_key):
            seen.add(s)
            parent_of[s] = t
            order.append(s)
    new_id = {t: i for i, t in enumerate(order)}
    parent = tuple(None if parent_of[t] is None else new_id[parent_of[t]] for t in order)
    split = [_split_bag(bags[t], bipartite) for t in order]
    return TreeDecomposition(parent, tuple(r for r, _ in split), tuple(c for _, c in split),
                             bipartite)


def _contract(bags: list, edges: list) -> tuple[list, list]:
    """Merge every bag into a neighbour that contains it.

    Args:
        bags: Vertex-key sets per node.
        edges: Tree edges as (s, t) pairs.

    Returns:
        (bags, adjacency) of the contracted tree.
    """
    bags = [set(b) for b in bags]
    adj = [set() for _ in bags]
    for s, t in edges:
        adj[s].add(t)
        adj[t].add(s)
    alive = set(range(len(bags)))
    changed = True
    while changed and len(alive) > 1:
        changed = False
        for s in sorted(alive):
            for t in sorted(adj[s]):
                if bags[s] <= bags[t]:
                    for u in adj[s] - {t}:
                        adj[u].discard(s)
                        adj[u].add(t)
                        adj[t].add(u)
                    adj[t].discard(s)
                    adj[s] = set()
                    alive.discard(s)
                    changed = True
                    break
    ids = sorted(alive)
    remap = {t: i for i, t in enumerate(ids)}
    return [bags[t] for t in ids], [[remap[u] for u in adj[t]] for t in ids]


def _nx_graph(graph) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(graph.vertex_keys())
    G.add_edges_from((u, v) for u, v in graph.edge_keys() if u != v)
    return G


@dataclass(frozen=True)
class Band:
    """Sliding-window strategy over a vertex order.

    Consecutive windows of ``halfwidth + 1`` vertices along ``order`` form a
    path decomposition.  The half-width used is at least the largest position
    gap spanned by an edge, so every edge falls inside some window.  Connected
    components are handled separately.

    Attributes:
        order: Vertex keys in band order (for bipartite graphs use
            ``("r", a)`` / ``("c", x)`` keys).
        halfwidth: Requested half-width; ``None`` means the minimal valid one.
    """

    order: tuple
    halfwidth: int | None = None


def _band_bags(graph, band: Band) -> tuple[list, list]:
    keys = graph.vertex_keys()
    order = [k for k in band.order if k in set(keys)]
    missing = [k for k in keys if k not in set(order)]
    if missing:
        raise ValueError(f"band order misses vertices {missing}")
    G = _nx_graph(graph)
    bags, edges = [], []
    pos = {k: i for i, k in enumerate(order)}
    comps = sorted((sorted(c, key=pos.get) for c in nx.connected_components(G)),
                   key=lambda c: pos[c[0]])
    prev_last = None
    for comp in comps:
        local = {k: i for i, k in enumerate(comp)}
        span = max((abs(local[u] - local[v]) for u, v in G.subgraph(comp).edges()), default=0)
        h = max(span, band.halfwidth or 0)
        n_windows = max(len(comp) - h, 1)
        first = len(bags)
        for i in range(n_windows):
            bags.append(set(comp[i:i + h + 1]))
            if i > 0:
                edges.append((len(bags) - 2, len(bags) - 1))
        if prev_last is not None:
            edges.append((prev_last, first))
        prev_last = len(bags) - 1
    return bags, edges


@lru_cache(maxsize=4096)
def cached_tree_decompose(graph, strategy="min_fill") -> TreeDecomposition:
    """Memoised :func:`tree_decompose` (graphs and strategies are immutable)."""
    return tree_decompose(graph, strategy)


def tree_decompose(graph, strategy="min_fill") -> TreeDecomposition:
    """Construct a tree decomposition with a heuristic or a band order.

    Args:
        graph: BipartiteGraph or SymmetricGraph.
        strategy: ``"min_fill"`` (default; switches to min-degree above
            ``MIN_FILL_VERTEX_LIMIT`` vertices), ``"min_degree"``, or a
            :class:`Band` instance.

    Returns:
        A valid TreeDecomposition rooted at node 0.
    """
    keys = graph.vertex_keys()
    if not keys:
        raise ValueError("graph has no vertices")
    if isinstance(strategy, Band):
        bags, tree_edges = _band_bags(graph, strategy)
    else:
        G = _nx_graph(graph)
        if strategy == "min_fill" and G.number_of_nodes() <= MIN_FILL_VERTEX_LIMIT:
            _, T = treewidth_min_fill_in(G)
        elif strategy in ("min_fill", "min_degree"):
            _, T = treewidth_min_degree(G)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        nodes = list(T.nodes())
        index = {b: i for i, b in enumerate(nodes)}
        bags = [set(b) for b in nodes]
        tree_edges = [(index[u], index[v]) for u, v in T.edges()]
        # networkx joins components already; guard against a forest anyway.
        comps = list(nx.connected_components(T)) if nodes else []
        for c1, c2 in zip(comps, comps[1:]):
            tree_edges.append((index[next(iter(c1))], index[next(iter(c2))]))
    bags, adj = _contract(bags, tree_edges)
    first = keys[0]
    root = min(t for t, b in enumerate(bags) if first in b)
    return _assemble(bags, adj, root, graph.bipartite)


def single_bag_decomposition(graph) -> TreeDecomposition:
    """The trivial one-node decomposition holding every vertex."""
    rows, cols = _split_bag(graph.vertex_keys(), graph.bipartite)
    return TreeDecomposition((None,), (rows,), (cols,), graph.bipartite)


def validate_decomposition(graph, td: TreeDecomposition) -> list[Violation]:
    """Check the three tree-decomposition conditions.

    Args:
        graph: The graph the decomposition claims to cover.
        td: Candidate decomposition.

    Returns:
        List of violations; empty when ``td`` is valid.
    """
    out: list[Violation] = []
    n = len(td)
    if td.bipartite != graph.bipartite:
        out.append(Violation("structure", "graph and decomposition kinds differ"))
        return out
    if n == 0:
        out.append(Violation("structure", "decomposition has no nodes"))
        return out
    roots = [t for t, p in enumerate(td.parent) if p is None]
    if roots != [0]:
        out.append(Violation("structure", f"roots {roots} (expected only node 0)"))
    for t, p in enumerate(td.parent):
        if p is not None and not 0 <= p < n:
            out.append(Violation("structure", f"node {t} has invalid parent {p}"))
    # Every node must reach the root without cycles.
    for t in range(n):
        seen, s = set(), t
        while s is not None and 0 <= s < n and s not in seen:
            seen.add(s)
            s = td.parent[s]
        if s is not None:
            out.append(Violation("structure", f"node {t} does not reach a root"))
    if any(v.kind == "structure" for v in out):
        return out

    keys = graph.vertex_keys()
    key_set = set(keys)
    holders: dict = {k: [] for k in keys}
    for t in range(n):
        bag = td.bag_keys(t)
        for k in bag:
            if k not in key_set:
                out.append(Violation("unknown-vertex", (t, k)))
            else:
                holders[k].append(t)
    for k in keys:
        if not holders[k]:
            out.append(Violation("coverage", k))
    bag_sets = [set(td.bag_keys(t)) for t in range(n)]
    for u, v in graph.edge_keys():
        if not any(u in b and v in b for b in bag_sets):
            out.append(Violation("edge-coverage", (u, v)))
    for k in keys:
        nodes = set(holders[k])
        if len(nodes) <= 1:
            continue
        # A set of tree nodes is connected iff exactly one of them has its
        # parent outside the set.
        tops = [t for t in nodes if td.parent[t] not in nodes]
        if len(tops) != 1:
            out.append(Violation("connectivity", k))
    return out


def lattice_distance(p, q, metric: str = "linf") -> float:
    """Distance between lattice coordinates under ``"linf"`` or ``"l1"``."""
    diff = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    if metric == "linf":
        return float(diff.max(initial=0.0))
    if metric == "l1":
        return float(diff.sum())
    raise ValueError(f"unknown metric {metric!r}")


def _distance_matrix(P, Q, metric: str) -> np.ndarray:
    diff = np.abs(P[:, None, :] - Q[None, :, :])
    if metric == "linf":
        return diff.max(axis=-1)
    if metric == "l1":
        return diff.sum(axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


def band_decomposition(layout, outcome, kappa: float, kind: str = "symmetric",
                       metric: str | None = None) -> TreeDecomposition:
    """Band-shaped path decomposition for an outcome on a lattice circuit.

    Vertices are the occupied output modes (and, for ``kind="bipartite"``, the
    source modes).  Two vertices may share an edge in the kappa-truncated
    circuit only when they are within reach: an output and a source within
    ``kappa * L``, or two outputs that both lie within ``kappa * L`` of a
    common source.  Vertices are sorted along the first lattice axis, ties
    broken by the remaining coordinates (sources before outputs), and the
    band strategy is applied to the resulting reach graph.

    Args:
        layout: Object with ``coords`` (M x d array), ``sources`` and ``L``,
            e.g. a ``CircuitSpec``.
        outcome: Occupation vector over the M modes, an ``OutcomeRecord`` or
            an explicit list of occupied modes.
        kappa: Propagation radius in units of the sublattice length L.
        kind: ``"symmetric"`` (GBS graph of B) or ``"bipartite"`` (SPBS graph).
        metric: Lattice metric, defaults to ``layout.metric`` or ``"linf"``.

    Returns:
        A TreeDecomposition valid for every circuit whose entries vanish
        beyond the reach radius.
    """
    if kappa < 0.5:
        raise ValueError("kappa must be at least 1/2")
    metric = metric or getattr(layout, "metric", "linf")
    coords = np.asarray(layout.coords, dtype=float)
    M = coords.shape[0]
    occupied = _occupied_modes(outcome, M)
    sources = [int(s) for s in layout.sources]
    reach = kappa * layout.L + 1e-9
    occ = np.array(occupied, dtype=int)
    src = np.array(sources, dtype=int)
    d_os = _distance_matrix(coords[occ], coords[src], metric) if len(occ) and len(src) else \
        np.zeros((len(occ), len(src)))
    near = d_os <= reach

    def coord_key(mode, tag):
        return tuple(coords[mode]) + (tag,)

    if kind == "symmetric":
        edges = set()
        for a in range(len(occ)):
            for b in range(a, len(occ)):
                if np.any(near[a] & near[b]):
                    edges.add(_pair(int(occ[a]), int(occ[b])))
        graph = SymmetricGraph(tuple(occupied), frozenset(edges))
        order = tuple(sorted(occupied, key=lambda i: coord_key(i, 1)))
    elif kind == "bipartite":
        edges = {(int(src[s]), int(occ[o])) for o, s in zip(*np.nonzero(near))}
        graph = BipartiteGraph(tuple(sources), tuple(occupied), frozenset(edges))
        keyed = [((ROW, s), coord_key(s, 0)) for s in sources] + \
                [((COL, o), coord_key(o, 1)) for o in occupied]
        order = tuple(k for k, _ in sorted(keyed, key=lambda kv: kv[1]))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if not graph.vertex_keys():
        raise ValueError("outcome has no occupied modes")
    return tree_decompose(graph, Band(order))


def _occupied_modes(outcome, M: int) -> list[int]:
    """Occupied modes of an occupation vector (length M) or an explicit mode list."""
    m = getattr(outcome, "m", outcome)
    if m is None:
        raise ValueError("outcome carries no occupation vector")
    m = [int(v) for v in m]
    if len(m) == M:
        if min(m, default=0) < 0:
            raise ValueError("occupation numbers must be nonnegative")
        return [i for i, v in enumerate(m) if v > 0]
    modes = sorted(set(m))
    for i in modes:
        if not 0 <= i < M:
            raise ValueError(f"mode {i} is not on the lattice")
    return modes


def band_width_bound(d: int, M: int, N: int, kappa: float, cap: int = 1) -> float:
    """Upper bound M^{(d-1)/d} (2 kappa + 1) L / L^d * cap on band bag sizes."""
    L = (M / N) ** (1.0 / d)
    return M ** ((d - 1) / d) * (2 * kappa + 1) * L / L ** d * cap


def ceil_half_width(kappa: float, L: int) -> int:
    """Spatial half-width ceil(kappa * L) of a band."""
    return int(math.ceil(kappa * L - 1e-12))
