"""Loop hafnians: matching enumeration and tree-decomposition dynamic programs.

The loop hafnian of a symmetric matrix B sums, over all perfect matchings of
the complete graph with self-loops, the product of the matched entries; a
loop on vertex i contributes B[i, i].  With a zero diagonal it reduces to the
ordinary hafnian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._treedp import DEFAULT_MAX_BAG, popcounts, run_subset_dp, run_weighted_dp, shift
from .graphs import TreeDecomposition, build_symmetric_graph, cached_tree_decompose, \
    validate_decomposition, weight_vector

__all__ = [
    "BRUTEFORCE_MAX_N",
    "PartialLhafTable",
    "base_partial_lhaf",
    "base_weighted_lhaf",
    "loop_hafnian_bruteforce",
    "loop_hafnian_treedp",
    "loop_hafnian_treedp_weighted",
    "repeat_matrix",
    "t_poly",
]

BRUTEFORCE_MAX_N = 12


def loop_hafnian_bruteforce(B) -> complex:
    """Loop hafnian by enumerating every perfect matching with loops.

    Args:
        B: Symmetric complex matrix with at most ``BRUTEFORCE_MAX_N`` rows.

    Returns:
        lHaf(B).
    """
    B = np.asarray(B, dtype=complex)
    n = B.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(f"n={n} exceeds the oracle budget of {BRUTEFORCE_MAX_N}")

    def rec(remaining: tuple) -> complex:
        if not remaining:
            return 1.0 + 0j
        i, rest = remaining[0], remaining[1:]
        total = B[i, i] * rec(rest)
        for pos, j in enumerate(rest):
            total += B[i, j] * rec(rest[:pos] + rest[pos + 1:])
        return total

    return complex(rec(tuple(range(n))))


def t_poly(k: int, a: complex, pair: complex | None = None) -> complex:
    """Loop hafnian of the k x k constant matrix.

    Follows T_0 = 1, T_1 = a, T_k = a T_{k-1} + (k - 1) b T_{k-2}.  With
    ``pair`` omitted b = a, which gives T_k = a (T_{k-1} + (k - 1) T_{k-2}).
    A separate ``pair`` weight b covers matrices whose diagonal (loop weight)
    differs from the off-diagonal entries.

    Args:
        k: Size, k >= 0.
        a: Loop weight.
        pair: Off-diagonal weight; defaults to ``a``.

    Returns:
        T_k.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    b = a if pair is None else pair
    prev, cur = 1.0 + 0j, complex(a)
    if k == 0:
        return prev
    for j in range(2, k + 1):
        prev, cur = cur, a * cur + (j - 1) * b * prev
    return cur


@dataclass(frozen=True)
class PartialLhafTable:
    """Partial loop hafnians lhaf(Y) for every vertex subset Y (bitmask indexed)."""

    labels: tuple
    values: np.ndarray

    def __getitem__(self, subset) -> complex:
        index = {v: i for i, v in enumerate(self.labels)}
        return complex(self.values[sum(1 << index[v] for v in subset)])


def _lhaf_base_array(B: np.ndarray) -> np.ndarray:
    """All partial loop hafnians of B, layer by layer in |Y|.

    lhaf(Y) = B[a0, a0] lhaf(Y - a0) + sum over x in Y - a0 of
    B[a0, x] lhaf(Y - a0 - x) with a0 the smallest vertex of Y.
    """
    n = B.shape[0]
    L = np.zeros(1 << n, dtype=complex)
    L[0] = 1.0
    pc = popcounts(n)
    diag = np.diag(B)
    for k in range(1, n + 1):
        Ys = np.nonzero(pc == k)[0]
        low = Ys & -Ys
        a0 = np.log2(low).astype(np.intp)
        rest = Ys ^ low
        vals = diag[a0] * L[rest]
        if k >= 2:
            for x in range(n):
                has = (rest >> x) & 1 == 1
                if has.any():
                    vals[has] += B[a0[has], x] * L[rest[has] ^ (1 << x)]
        L[Ys] = vals
    return L


def base_partial_lhaf(B, labels=None, max_bag: int = DEFAULT_MAX_BAG) -> PartialLhafTable:
    """Tabulate lhaf(Y) for every subset Y of the labels in O(n^2 2^n).

    Args:
        B: Symmetric complex matrix.
        labels: Vertex labels (default all).
        max_bag: Largest admissible number of labels.

    Returns:
        PartialLhafTable.
    """
    B = np.asarray(B, dtype=complex)
    labels = tuple(range(B.shape[0])) if labels is None else tuple(labels)
    if len(labels) > max_bag:
        raise ValueError(f"{len(labels)} vertices exceed the bag cap of {max_bag}")
    sub = B[np.ix_(labels, labels)] if labels else np.zeros((0, 0))
    return PartialLhafTable(labels, _lhaf_base_array(sub))


def _resolve_td(graph, td, strategy):
    if td is None:
        return cached_tree_decompose(graph, strategy)
    violations = validate_decomposition(graph, td)
    if violations:
        raise ValueError("invalid tree decomposition: " + "; ".join(map(str, violations)))
    return td


def loop_hafnian_treedp(B, td: TreeDecomposition | None = None, strategy="min_fill",
                        zero_tol: float = 0.0, max_bag: int = DEFAULT_MAX_BAG,
                        labels=None) -> complex:
    """Loop hafnian by dynamic programming over a tree decomposition.

    Args:
        B: Symmetric complex matrix.
        td: Decomposition of ``build_symmetric_graph(B)``; built with
            ``strategy`` when omitted, validated when supplied.
        strategy: Heuristic passed to ``tree_decompose``.
        zero_tol: Threshold used when building the graph.
        max_bag: Largest admissible bag size.
        labels: Optional subset of vertices (principal submatrix).

    Returns:
        lHaf(B[labels, labels]).
    """
    B = np.asarray(B, dtype=complex)
    graph = build_symmetric_graph(B, labels, zero_tol)
    if not graph.vertices:
        return 1.0 + 0j
    td = _resolve_td(graph, td, strategy)
    if zero_tol > 0:
        B = np.where(np.abs(B) > zero_tol, B, 0)

    def base(keys, sign=1.0):
        return _lhaf_base_array(sign * B[np.ix_(keys, keys)])

    return run_subset_dp(td, base, lambda keys: base(keys, -1.0), max_bag)


def base_weighted_lhaf(B, caps, loops=None) -> np.ndarray:
    """Scaled partial loop hafnians lhaf(y) = lHaf(B_y) / y! for all y up to the caps.

    Vertex a repeated y_a times contributes loops weighted by ``loops[a]`` and
    pairs between its copies weighted by B[a, a].  With a the first vertex of
    positive weight,

        lhaf(y) = [g_a lhaf(y - e_a) + B_aa lhaf(y - 2 e_a)
                   + sum over x != a of B_ax lhaf(y - e_a - e_x)] / y_a.

    Args:
        B: n x n symmetric complex matrix.
        caps: Maximal weight per vertex.
        loops: Loop weights g; defaults to the diagonal of B.

    Returns:
        Array of shape (caps + 1).
    """
    B = np.asarray(B, dtype=complex)
    n = len(caps)
    g = np.diag(B) if loops is None else np.asarray(loops, dtype=complex)
    T = np.ones((), dtype=complex)
    for a in reversed(range(n)):
        new = np.zeros((caps[a] + 1,) + T.shape, dtype=complex)
        new[0] = T
        for j in range(1, caps[a] + 1):
            acc = g[a] * new[j - 1]
            if j >= 2:
                acc = acc + B[a, a] * new[j - 2]
            for x in range(a + 1, n):
                if B[a, x] != 0:
                    acc = acc + B[a, x] * shift(new[j - 1], x - a - 1)
            new[j] = acc / j
        T = new
    return T


def repeat_matrix(B, m, loops=None) -> np.ndarray:
    """Explicit matrix B_m with vertex i repeated m[i] times.

    Copies of vertex i are joined by B[i, i]; the diagonal of the result holds
    the loop weights (``loops`` or, by default, the diagonal of B).
    """
    B = np.asarray(B, dtype=complex)
    g = np.diag(B) if loops is None else np.asarray(loops, dtype=complex)
    idx = np.repeat(np.arange(B.shape[0]), np.asarray(m, dtype=int))
    R = B[np.ix_(idx, idx)].copy()
    np.fill_diagonal(R, g[idx])
    return R


def loop_hafnian_treedp_weighted(B, m, td: TreeDecomposition | None = None,
                                 cap: int | None = None, loops=None,
                                 strategy="min_fill", zero_tol: float = 0.0,
                                 open_vertex: int | None = None,
                                 open_cap: int | None = None):
    """Loop hafnian of the repeated matrix B_m.

    Args:
        B: Symmetric complex matrix.
        m: Weight vector; vertex i is repeated m[i] times.
        td: Decomposition of the graph on vertices with m > 0; built with
            ``strategy`` when omitted.
        cap: Optional cap on the weights (raises when exceeded).
        loops: Loop weights; defaults to the diagonal of B.
        strategy: Heuristic passed to ``tree_decompose``.
        zero_tol: Threshold used when building the graph.
        open_vertex: Optional vertex whose weight is left open; the result is
            then the vector of lHaf(B_m) over its weight 0..open_cap.
        open_cap: Largest weight of ``open_vertex``.

    Returns:
        lHaf(B_m) (a vector when ``open_vertex`` is given).
    """
    B = np.asarray(B, dtype=complex)
    m = list(weight_vector(m))
    if len(m) != B.shape[0]:
        raise ValueError("weight vector must match the matrix size")
    if min(m, default=0) < 0:
        raise ValueError("weights must be nonnegative")
    if cap is not None and max(m, default=0) > cap:
        raise ValueError(f"collision cap {cap} exceeded (overload)")
    g = np.diag(B) if loops is None else np.asarray(loops, dtype=complex)
    if open_vertex is not None:
        m = list(m)
        m[open_vertex] = max(m[open_vertex], 1)
    labels = [i for i, v in enumerate(m) if v > 0]
    if not labels:
        return 1.0 + 0j
    loop_test = np.abs(g) + np.abs(np.diag(B))
    graph = build_symmetric_graph(B, labels, zero_tol, loops=loop_test)
    td = _resolve_td(graph, td, strategy)
    if zero_tol > 0:
        B = np.where(np.abs(B) > zero_tol, B, 0)
        g = np.where(np.abs(g) > zero_tol, g, 0)
    caps = {i: m[i] for i in labels}
    if open_vertex is not None:
        caps[open_vertex] = open_cap

    def base(keys, shape, sign=1.0):
        return base_weighted_lhaf(sign * B[np.ix_(keys, keys)], [s - 1 for s in shape],
                                  sign * g[keys])

    value = run_weighted_dp(td, caps, base, lambda k, s: base(k, s, -1.0),
                            open_key=open_vertex)
    if open_vertex is None:
        return complex(value * math.prod(math.factorial(v) for v in m))
    fixed = math.prod(math.factorial(v) for i, v in enumerate(m) if i != open_vertex)
    facts = np.array([math.factorial(j) for j in range(open_cap + 1)], dtype=float)
    return value * fixed * facts

