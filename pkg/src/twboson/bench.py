"""Runtime scaling benchmark for the permanent engines.

Two matrix families are timed: banded matrices (nonzeros within a fixed
distance of the diagonal, so the treewidth stays constant) and dense
matrices (complete bipartite graph, width growing with the size).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .graphs import build_bipartite_graph, tree_decompose
from .permanent import permanent_ryser, permanent_treedp
from .rng import stream

__all__ = ["BenchRow", "banded_matrix", "dense_matrix", "fit_exponent", "fit_log2_slope", "run_bench"]


@dataclass(frozen=True)
class BenchRow:
    """One benchmark measurement."""

    family: str
    n: int
    seconds: float
    width: int


def banded_matrix(n: int, bandwidth: int, seed: int = 0) -> np.ndarray:
    """Random complex n x n matrix with U[i, j] = 0 when |i - j| > bandwidth."""
    rng = stream(seed, "bench", "banded", n)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    i, j = np.indices((n, n))
    return np.where(np.abs(i - j) <= bandwidth, A, 0) / math.sqrt(2 * bandwidth + 1)


def dense_matrix(n: int, seed: int = 0) -> np.ndarray:
    """Random complex dense n x n matrix."""
    rng = stream(seed, "bench", "dense", n)
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)


def run_bench(family: str, sizes, engine: str = "treedp", bandwidth: int = 3,
              repeats: int = 1, seed: int = 0, strategy: str = "min_fill") -> list:
    """Time one permanent per size (best of ``repeats``).

    Args:
        family: ``"banded"`` or ``"dense"``.
        sizes: Matrix sizes.
        engine: ``"treedp"`` or ``"ryser"``.
        bandwidth: Band half-width for the banded family.
        repeats: Timings per size; the minimum is kept.
        seed: Matrix seed.
        strategy: Decomposition heuristic.

    Returns:
        List of BenchRow (width is -1 for Ryser).
    """
    rows = []
    for n in sizes:
        if family == "banded":
            U = banded_matrix(n, bandwidth, seed)
        elif family == "dense":
            U = dense_matrix(n, seed)
        else:
            raise ValueError(f"unknown family {family!r}")
        best = math.inf
        width = -1
        for _ in range(repeats):
            t0 = time.perf_counter()
            if engine == "treedp":
                td = tree_decompose(build_bipartite_graph(U), strategy)
                permanent_treedp(U, td=td)
                width = td.width
            elif engine == "ryser":
                permanent_ryser(U)
            else:
                raise ValueError(f"unknown engine {engine!r}")
            best = min(best, time.perf_counter() - t0)
        rows.append(BenchRow(family, int(n), best, width))
    return rows


def fit_exponent(rows) -> float:
    """Slope of log(seconds) against log(n): the polynomial degree."""
    x = np.log([r.n for r in rows])
    y = np.log([r.seconds for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def fit_log2_slope(rows) -> float:
    """Slope of log2(seconds) against n (1.0 for 2^n growth)."""
    x = np.array([r.n for r in rows], dtype=float)
    y = np.log2([r.seconds for r in rows])
    return float(np.polyfit(x, y, 1)[0])
