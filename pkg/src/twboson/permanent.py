"""Matrix permanents: Ryser's formula and tree-decomposition dynamic programs.

The tree-decomposition engines cost O(k w^2 2^w) for a k x k matrix whose
bipartite graph has a decomposition of width w, so sparse, banded or
geometrically local matrices are cheap even when k is large.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._treedp import (
    DEFAULT_MAX_BAG,
    popcounts,
    run_subset_dp,
    run_weighted_dp,
    shift,
    subset_convolution,
)
from .graphs import (
    COL,
    ROW,
    BipartiteGraph,
    TreeDecomposition,
    build_bipartite_graph,
    cached_tree_decompose,
    validate_decomposition,
    weight_vector,
)

__all__ = [
    "PartialPermanentTable",
    "RYSER_MAX_N",
    "base_partial_permanents",
    "base_weighted_permanents",
    "permanent_ryser",
    "permanent_treedp",
    "permanent_treedp_weighted",
    "subset_convolution",
    "weighted_bipartite_graph",
]

RYSER_MAX_N = 20
DEFAULT_COLLISION_CAP = 4


def permanent_ryser(U) -> complex:
    """Permanent by Ryser's inclusion-exclusion over column subsets.

    Args:
        U: Square complex matrix with at most ``RYSER_MAX_N`` rows.

    Returns:
        Per(U).
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("permanent needs a square matrix")
    n = U.shape[0]
    if n > RYSER_MAX_N:
        raise ValueError(f"n={n} exceeds the oracle budget of {RYSER_MAX_N}")
    if n == 0:
        return 1.0 + 0j
    # Gray-code walk over column subsets, row sums updated one column at a time.
    total = 0j
    row_sums = np.zeros(n, dtype=complex)
    subset = 0
    for g in range(1, 1 << n):
        flip = (g & -g).bit_length() - 1
        if subset >> flip & 1:
            row_sums -= U[:, flip]
        else:
            row_sums += U[:, flip]
        subset ^= 1 << flip
        size = bin(subset).count("1")
        total += (-1) ** size * np.prod(row_sums)
    return complex((-1) ** n * total)


@dataclass(frozen=True)
class PartialPermanentTable:
    """Partial permanents per(D, Y) for all row subsets D and column subsets Y.

    ``values[D, Y]`` holds the permanent of U restricted to rows D and columns
    Y, both given as bitmasks over ``rows`` and ``cols`` (zero unless
    |D| = |Y|; the empty pair has value 1).
    """

    rows: tuple
    cols: tuple
    values: np.ndarray

    def _mask(self, labels, order) -> int:
        index = {v: i for i, v in enumerate(order)}
        return sum(1 << index[v] for v in labels)

    def __getitem__(self, key) -> complex:
        D, Y = key
        return complex(self.values[self._mask(D, self.rows), self._mask(Y, self.cols)])


def _perm_base_array(U: np.ndarray) -> np.ndarray:
    """All partial permanents of U as an array indexed [row mask, col mask]."""
    n1, n2 = U.shape
    P = np.zeros((1 << n1, 1 << n2), dtype=complex)
    P[0, 0] = 1.0
    pr, pcol = popcounts(n1), popcounts(n2)
    for k in range(1, min(n1, n2) + 1):
        Ds = np.nonzero(pr == k)[0]
        low = Ds & -Ds
        a0 = np.log2(low).astype(np.intp)
        rest = Ds ^ low
        Ys = np.nonzero(pcol == k)[0]
        block = np.zeros((len(Ds), len(Ys)), dtype=complex)
        for x in range(n2):
            has = (Ys >> x) & 1 == 1
            if not has.any():
                continue
            Yx = Ys[has]
            block[:, has] += U[a0, x][:, None] * P[np.ix_(rest, Yx ^ (1 << x))]
        P[np.ix_(Ds, Ys)] = block
    return P


def base_partial_permanents(U, rows=None, cols=None,
                            max_bag: int = DEFAULT_MAX_BAG) -> PartialPermanentTable:
    """Tabulate per(D, Y) over every pair of row and column subsets.

    Uses per(D, Y) = sum over x in Y of U[a0, x] per(D - a0, Y - x) with a0 the
    first row of D, evaluated layer by layer in |D|.

    Args:
        U: Complex matrix.
        rows: Row labels (default all rows).
        cols: Column labels (default all columns).
        max_bag: Largest admissible ``len(rows) + len(cols)``.

    Returns:
        PartialPermanentTable.
    """
    U = np.asarray(U, dtype=complex)
    rows = tuple(range(U.shape[0])) if rows is None else tuple(rows)
    cols = tuple(range(U.shape[1])) if cols is None else tuple(cols)
    if len(rows) + len(cols) > max_bag:
        raise ValueError(f"{len(rows) + len(cols)} vertices exceed the bag cap of {max_bag}")
    sub = U[np.ix_(rows, cols)] if rows and cols else np.zeros((len(rows), len(cols)))
    return PartialPermanentTable(rows, cols, _perm_base_array(sub))


def _joint_table(U: np.ndarray, keys: list, sign: float = 1.0) -> np.ndarray:
    """Base table over a bag in joint bitmask order (row bits, then column bits)."""
    rows = [v for k, v in keys if k == ROW]
    cols = [v for k, v in keys if k == COL]
    sub = U[np.ix_(rows, cols)] if rows and cols else np.zeros((len(rows), len(cols)))
    P = _perm_base_array(sign * sub)
    # Joint index D + Y * 2^n1 is the Fortran-order flattening of P[D, Y].
    return P.ravel(order="F")


def _resolve_td(graph, td, strategy):
    if td is None:
        return cached_tree_decompose(graph, strategy)
    violations = validate_decomposition(graph, td)
    if violations:
        raise ValueError("invalid tree decomposition: " + "; ".join(map(str, violations)))
    return td


def permanent_treedp(U, rows=None, cols=None, td: TreeDecomposition | None = None,
                     strategy="min_fill", zero_tol: float = 0.0,
                     max_bag: int = DEFAULT_MAX_BAG) -> complex:
    """Permanent of U[rows, cols] by dynamic programming over a tree decomposition.

    Args:
        U: Complex matrix.
        rows: Row labels A (default all rows).
        cols: Column labels X with len(cols) == len(rows).
        td: Decomposition of the bipartite graph; built with ``strategy``
            when omitted, validated when supplied.
        strategy: Heuristic passed to ``tree_decompose``.
        zero_tol: Threshold used when building the graph.
        max_bag: Largest admissible bag size.

    Returns:
        Per(U[rows, cols]).
    """
    U = np.asarray(U, dtype=complex)
    rows = tuple(range(U.shape[0])) if rows is None else tuple(int(a) for a in rows)
    cols = tuple(range(U.shape[1])) if cols is None else tuple(int(x) for x in cols)
    if len(rows) != len(cols):
        raise ValueError(f"size mismatch: {len(rows)} rows, {len(cols)} columns")
    if not rows:
        return 1.0 + 0j
    graph = build_bipartite_graph(U, rows, cols, zero_tol)
    td = _resolve_td(graph, td, strategy)
    if zero_tol > 0:
        U = np.where(np.abs(U) > zero_tol, U, 0)
    return run_subset_dp(
        td,
        lambda keys: _joint_table(U, keys),
        lambda keys: _joint_table(U, keys, -1.0),
        max_bag,
    )


def weighted_bipartite_graph(U, n, m, zero_tol: float = 0.0) -> BipartiteGraph:
    """Bipartite graph over the rows with n > 0 and the columns with m > 0."""
    rows = [a for a, v in enumerate(n) if v > 0]
    cols = [x for x, v in enumerate(m) if v > 0]
    return build_bipartite_graph(U, rows, cols, zero_tol)


def base_weighted_permanents(U, caps_rows, caps_cols) -> np.ndarray:
    """Scaled partial permanents per(d, y) = Per(U^d_y) / (d! y!) for all d, y up to the caps.

    Uses per(d, y) = (1/d_a) sum over x of U[a, x] per(d - e_a, y - e_x) with a
    the first row of positive weight.

    Args:
        U: n1 x n2 complex matrix.
        caps_rows: Maximal weight per row.
        caps_cols: Maximal weight per column.

    Returns:
        Array of shape (caps_rows + 1) + (caps_cols + 1), row axes first.
    """
    U = np.asarray(U, dtype=complex)
    n1, n2 = len(caps_rows), len(caps_cols)
    T = np.zeros(tuple(c + 1 for c in caps_cols), dtype=complex)
    T[(0,) * n2] = 1.0
    for a in reversed(range(n1)):
        new = np.zeros((caps_rows[a] + 1,) + T.shape, dtype=complex)
        new[0] = T
        offset = n1 - a - 1
        for j in range(1, caps_rows[a] + 1):
            acc = np.zeros(T.shape, dtype=complex)
            for x in range(n2):
                if U[a, x] != 0:
                    acc += U[a, x] * shift(new[j - 1], offset + x)
            new[j] = acc / j
        T = new
    return T


def _weighted_table(U: np.ndarray, keys: list, shape: tuple, sign: float = 1.0) -> np.ndarray:
    rows = [v for k, v in keys if k == ROW]
    cols = [v for k, v in keys if k == COL]
    sub = U[np.ix_(rows, cols)] if rows and cols else np.zeros((len(rows), len(cols)))
    caps = [s - 1 for s in shape]
    return base_weighted_permanents(sign * sub, caps[: len(rows)], caps[len(rows):])


def permanent_treedp_weighted(U, n, m, td: TreeDecomposition | None = None,
                              cap: int | None = DEFAULT_COLLISION_CAP,
                              strategy="min_fill", zero_tol: float = 0.0,
                              open_col: int | None = None, open_cap: int | None = None):
    """Permanent of the row/column-repeated matrix U^n_m.

    Row a is repeated n[a] times and column x is repeated m[x] times.  Tables
    are indexed by weight vectors, so repeated vertices cost a factor
    (c + 1) per bag vertex instead of 2 per copy.

    Args:
        U: Complex matrix.
        n: Row weights, one per row of U.
        m: Column weights, one per column of U.
        td: Decomposition of the graph over rows with n > 0 and columns with
            m > 0; built with ``strategy`` when omitted.
        cap: Collision cap c; weights above it raise.  ``None`` disables it.
        strategy: Heuristic passed to ``tree_decompose``.
        zero_tol: Threshold used when building the graph.
        open_col: Optional column whose weight is left open; the result is
            then the vector over its weight 0..open_cap (other weights fixed).
        open_cap: Largest weight of ``open_col``.

    Returns:
        Per(U^n_m), or a vector of such permanents when ``open_col`` is set.
    """
    U = np.asarray(U, dtype=complex)
    n = list(weight_vector(n))
    m = list(weight_vector(m))
    if len(n) != U.shape[0] or len(m) != U.shape[1]:
        raise ValueError("weight vectors must match the matrix shape")
    if min(n + m, default=0) < 0:
        raise ValueError("weights must be nonnegative")
    if cap is not None and max(n + m, default=0) > cap:
        raise ValueError(f"collision cap {cap} exceeded (overload)")
    if open_col is None and sum(n) != sum(m):
        raise ValueError(f"|n|={sum(n)} differs from |m|={sum(m)}")
    if open_col is not None:
        m = list(m)
        m[open_col] = max(m[open_col], 1)
    graph = weighted_bipartite_graph(U, n, m, zero_tol)
    if not graph.rows and not graph.cols:
        return 1.0 + 0j
    td = _resolve_td(graph, td, strategy)
    if zero_tol > 0:
        U = np.where(np.abs(U) > zero_tol, U, 0)
    caps = {(ROW, a): n[a] for a in graph.rows}
    caps.update({(COL, x): m[x] for x in graph.cols})
    if open_col is not None:
        caps[(COL, open_col)] = open_cap
    value = run_weighted_dp(
        td, caps,
        lambda keys, shape: _weighted_table(U, keys, shape),
        lambda keys, shape: _weighted_table(U, keys, shape, -1.0),
        open_key=None if open_col is None else (COL, open_col),
    )
    scale = math.prod(math.factorial(v) for v in n)
    if open_col is None:
        return complex(value * scale * math.prod(math.factorial(v) for v in m))
    fixed = math.prod(math.factorial(v) for x, v in enumerate(m) if x != open_col)
    facts = np.array([math.factorial(j) for j in range(open_cap + 1)], dtype=float)
    return value * scale * fixed * facts


def _permanent_by_permutations(U) -> complex:
    """Direct sum over permutations; used only in tests of tiny matrices."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    return complex(sum(np.prod(U[np.arange(n), list(p)]) for p in itertools.permutations(range(n))))
