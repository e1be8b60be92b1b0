"""Generic dynamic programming over tree decompositions.

Both the permanent and the loop hafnian fit one scheme.  Each node t owns a
base table: the partial permanent (or partial loop hafnian) restricted to the
vertices of its bag, using only matrix entries between bag vertices.  The
table at t combines its base table with one message per child through subset
products.  A child message is the child table with the forgotten vertices
saturated, convolved with the base table of the negated matrix on the shared
vertices; by inclusion-exclusion this removes every matching that uses an
edge already counted at t, so each edge is counted at exactly one node.

Two table representations are supported:

* collision-free tables indexed by bitmasks over the bag, merged with ranked
  zeta/Moebius subset convolution in O(w^2 2^w);
* weighted tables (photon collisions) stored as ndarrays with one axis per
  bag vertex, merged by truncated additive convolution.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

DEFAULT_MAX_BAG = 26


def popcounts(w: int) -> np.ndarray:
    """Popcount of every mask below 2**w."""
    return np.bitwise_count(np.arange(1 << w, dtype=np.uint64)).astype(np.intp)


def scatter_masks(positions: Sequence[int]) -> np.ndarray:
    """Map every subset of ``len(positions)`` local bits onto target bit positions.

    Args:
        positions: Target bit position of each local bit.

    Returns:
        Integer array ``out`` with ``out[s]`` the target mask of local subset s.
    """
    k = len(positions)
    local = np.arange(1 << k, dtype=np.int64)
    out = np.zeros(1 << k, dtype=np.int64)
    for j, p in enumerate(positions):
        out |= ((local >> j) & 1) << p
    return out


def _ranked_zeta(f: np.ndarray, w: int, pc: np.ndarray) -> np.ndarray:
    F = np.zeros((w + 1, 1 << w), dtype=complex)
    F[pc, np.arange(1 << w)] = f
    for i in range(w):
        v = F.reshape(w + 1, -1, 2, 1 << i)
        v[:, :, 1, :] += v[:, :, 0, :]
    return F


def _ranked_moebius(F: np.ndarray, w: int) -> np.ndarray:
    for i in range(w):
        v = F.reshape(w + 1, -1, 2, 1 << i)
        v[:, :, 1, :] -= v[:, :, 0, :]
    return F


def _ranked_product(F: np.ndarray, G: np.ndarray, w: int,
                    g_ranks: Sequence[int] | None = None) -> np.ndarray:
    H = np.zeros_like(F)
    ranks = range(w + 1) if g_ranks is None else g_ranks
    for j in ranks:
        H[j:] += F[: w + 1 - j] * G[j]
    return H


def subset_product(tables: Sequence[np.ndarray], w: int) -> np.ndarray:
    """Subset convolution of several tables over the same ground set of size w."""
    tables = list(tables)
    if len(tables) == 1:
        return np.asarray(tables[0], dtype=complex).copy()
    pc = popcounts(w)
    acc = _ranked_zeta(np.asarray(tables[0], dtype=complex), w, pc)
    for t in tables[1:]:
        t = np.asarray(t, dtype=complex)
        ranks = np.unique(pc[np.nonzero(t)[0]])
        acc = _ranked_product(acc, _ranked_zeta(t, w, pc), w, ranks)
    _ranked_moebius(acc, w)
    return acc[pc, np.arange(1 << w)]


def subset_convolution(f, g) -> np.ndarray:
    """Subset convolution h(S) = sum over T subset of S of f(T) g(S minus T).

    Tables are indexed by bitmask, so both must have length 2**w.  The ranked
    zeta/Moebius transform gives O(w^2 2^w) arithmetic.

    Args:
        f: Table of length 2**w.
        g: Table of length 2**w.

    Returns:
        Complex table h of length 2**w.
    """
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if f.shape != g.shape or f.ndim != 1:
        raise ValueError("tables must be one-dimensional with equal length")
    w = int(f.shape[0]).bit_length() - 1
    if f.shape[0] != 1 << w:
        raise ValueError("table length must be a power of two")
    return subset_product([f, g], w)


def run_subset_dp(td, base_fn: Callable, neg_base_fn: Callable,
                  max_bag: int = DEFAULT_MAX_BAG) -> complex:
    """Evaluate a collision-free matching sum over a tree decomposition.

    Args:
        td: TreeDecomposition.
        base_fn: ``base_fn(keys)`` returns the base table over the bag
            (bitmask indexed, bit i for ``keys[i]``).
        neg_base_fn: Same for the negated matrix.
        max_bag: Largest admissible bag size.

    Returns:
        Table value at the root with every root-bag vertex saturated.
    """
    tables: dict = {}
    for t in td.postorder():
        keys = td.bag_keys(t)
        w = len(keys)
        if w > max_bag:
            raise ValueError(f"bag of size {w} exceeds the cap of {max_bag}")
        pos = {k: i for i, k in enumerate(keys)}
        factors = [base_fn(keys)]
        neg = None
        for c in td.children[t]:
            ckeys, cf = tables.pop(c)
            shared = [k for k in ckeys if k in pos]
            forgotten = sum(1 << i for i, k in enumerate(ckeys) if k not in pos)
            cidx = {k: i for i, k in enumerate(ckeys)}
            g = cf[scatter_masks([cidx[k] for k in shared]) | forgotten]
            pidx = scatter_masks([pos[k] for k in shared])
            if neg is None:
                neg = neg_base_fn(keys)
            msg = subset_product([neg[pidx], g], len(shared))
            lifted = np.zeros(1 << w, dtype=complex)
            lifted[pidx] = msg
            factors.append(lifted)
        tables[t] = (keys, subset_product(factors, w))
    _, root = tables[0]
    return complex(root[-1])


def shift(T: np.ndarray, axis: int, by: int = 1) -> np.ndarray:
    """Shift a table by ``by`` along ``axis`` (zero fill), i.e. T[y - by e_axis]."""
    out = np.zeros_like(T)
    n = T.shape[axis]
    if by < n:
        dst = [slice(None)] * T.ndim
        src = [slice(None)] * T.ndim
        dst[axis] = slice(by, None)
        src[axis] = slice(0, n - by)
        out[tuple(dst)] = T[tuple(src)]
    return out


def truncated_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Additive convolution of two tables of equal shape, truncated to that shape.

    out[k] = sum over i + j = k of a[i] b[j], for every index k inside the
    shape.  The loop runs over the nonzero entries of the sparser operand.
    """
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.ndim == 0:
        return np.asarray(a * b, dtype=complex)
    if np.count_nonzero(a) > np.count_nonzero(b):
        a, b = b, a
    out = np.zeros(a.shape, dtype=complex)
    for idx in zip(*np.nonzero(a)):
        dst = tuple(slice(i, None) for i in idx)
        src = tuple(slice(0, s - i) for i, s in zip(idx, a.shape))
        out[dst] += a[idx] * b[src]
    return out


def run_weighted_dp(td, caps: dict, base_fn: Callable, neg_base_fn: Callable,
                    open_key=None, max_entries: int = 1 << 24):
    """Evaluate a weighted (collision) matching sum over a tree decomposition.

    Args:
        td: TreeDecomposition.
        caps: Maximal weight of each vertex key.
        base_fn: ``base_fn(keys, shape)`` returns the scaled base table.
        neg_base_fn: Same for the negated matrix.
        open_key: When given, the root is moved to a bag containing this key
            and the result is the vector over all of its weights 0..cap.
        max_entries: Largest admissible table size.

    Returns:
        Scaled value at full weight, or a vector over the open key's weight.
    """
    if open_key is not None:
        td = td.rerooted(open_key)
    tables: dict = {}
    for t in td.postorder():
        keys = td.bag_keys(t)
        shape = tuple(int(caps[k]) + 1 for k in keys)
        if int(np.prod(shape, dtype=float)) > max_entries:
            raise ValueError(f"weighted table of shape {shape} exceeds the size cap")
        pos = {k: i for i, k in enumerate(keys)}
        acc = base_fn(keys, shape)
        neg = None
        for c in td.children[t]:
            ckeys, cf = tables.pop(c)
            shared = sorted((k for k in ckeys if k in pos), key=pos.get)
            sel = tuple(slice(None) if k in pos else int(caps[k]) for k in ckeys)
            g = cf[sel]
            # Axes of g follow the child's order of the shared keys.
            kept = [k for k in ckeys if k in pos]
            g = np.transpose(g, [kept.index(k) for k in shared])
            if neg is None:
                neg = neg_base_fn(keys, shape)
            nsel = tuple(slice(None) if k in set(shared) else 0 for k in keys)
            msg = truncated_convolve(neg[nsel], g)
            lifted = np.zeros(shape, dtype=complex)
            lifted[nsel] = msg
            acc = truncated_convolve(acc, lifted)
        tables[t] = (keys, acc)
    keys, root = tables[0]
    if open_key is None:
        return complex(root[tuple(int(caps[k]) for k in keys)])
    sel = tuple(slice(None) if k == open_key else int(caps[k]) for k in keys)
    return np.asarray(root[sel], dtype=complex)
