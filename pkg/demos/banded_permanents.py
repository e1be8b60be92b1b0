"""Exact permanents of banded matrices: treewidth DP against Ryser.

Run with ``python3 demos/banded_permanents.py``.
"""

import time

from twboson.bench import banded_matrix
from twboson.graphs import build_bipartite_graph, tree_decompose
from twboson.permanent import permanent_ryser, permanent_treedp


def main() -> None:
    print(f"{'n':>3} {'width':>5} {'treedp s':>9} {'ryser s':>9} {'rel diff':>9}")
    for n in (8, 12, 16, 18):
        U = banded_matrix(n, bandwidth=2, seed=n)
        td = tree_decompose(build_bipartite_graph(U))
        t0 = time.perf_counter()
        fast = permanent_treedp(U, td=td)
        t1 = time.perf_counter()
        slow = permanent_ryser(U)
        t2 = time.perf_counter()
        diff = abs(fast - slow) / max(abs(slow), 1.0)
        print(f"{n:>3} {td.width:>5} {t1 - t0:>9.4f} {t2 - t1:>9.4f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
