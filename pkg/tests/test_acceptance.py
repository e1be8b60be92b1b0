"""Acceptance criteria C1-C10.

Each test prints a single ``C<n> PASS|FAIL: <detail>`` line to the terminal
(bypassing output capture) and then asserts the criterion.
"""

import math
import time

import numpy as np
import pytest

from conftest import haar_unitary, random_complex, random_symmetric, rel_err
from twboson.approx import (
    approx_gbs_sample_batch,
    approx_spbs_distribution,
    dw_bound,
    extend_to_unitary,
    leakage_bound,
    mirsky_holds,
    spbs_tvd_bound,
    truncate_unitary,
    tvd,
)
from twboson.bench import fit_exponent, fit_log2_slope, run_bench
from twboson.gaussian import negative_binomial_tail, photon_truncation_threshold
from twboson.graphs import (
    Band,
    SymmetricGraph,
    band_decomposition,
    build_bipartite_graph,
    build_symmetric_graph,
    single_bag_decomposition,
    tree_decompose,
    validate_decomposition,
)
from twboson.hafnian import (
    loop_hafnian_bruteforce,
    loop_hafnian_treedp,
    loop_hafnian_treedp_weighted,
    repeat_matrix,
)
from twboson.lattice import CircuitSpec, build_local_haar_circuit, diffusion_check
from twboson.likelihood import GBSModel, compensate_photon_number, log_likelihood_ratio
from twboson.oracles import OracleBudgetError
from twboson.permanent import permanent_ryser, permanent_treedp
from twboson.samplers import (
    SamplerConfig,
    empirical_tvd,
    gbs_exact_distribution,
    gbs_sample_batch,
    spbs_exact_distribution,
    spbs_sample_batch,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(label: str, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\n{label} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def random_decomposition(graph, rng):
    """A valid decomposition from a randomly chosen construction."""
    choice = rng.integers(4)
    if choice == 0:
        return tree_decompose(graph, "min_fill")
    if choice == 1:
        return tree_decompose(graph, "min_degree")
    if choice == 2:
        return single_bag_decomposition(graph)
    keys = graph.vertex_keys()
    order = tuple(keys[i] for i in rng.permutation(len(keys)))
    return tree_decompose(graph, Band(order))


def test_c1_permanent_oracle(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst, invalid = 0.0, 0
    for _ in range(500):
        n = int(rng.integers(2, 9))
        U = random_complex((n, n), rng, density=float(rng.uniform(0.2, 1.0)))
        g = build_bipartite_graph(U)
        td = random_decomposition(g, rng)
        invalid += bool(validate_decomposition(g, td))
        worst = max(worst, rel_err(permanent_treedp(U, td=td), permanent_ryser(U)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60 and invalid == 0
    report("C1", ok, f"500 permanents, max rel err {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_c2_hafnian_oracle(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(500):
        n = int(rng.integers(2, 9))
        B = random_symmetric(n, rng, float(rng.uniform(0.2, 1.0)), diagonal=bool(i % 2))
        g = build_symmetric_graph(B)
        td = random_decomposition(g, rng)
        worst = max(worst, rel_err(loop_hafnian_treedp(B, td=td), loop_hafnian_bruteforce(B)))
    worst_w = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        B = random_symmetric(n, rng, diagonal=bool(rng.integers(2)))
        m = [int(k) for k in rng.integers(0, 4, size=n)]
        expect = loop_hafnian_bruteforce(repeat_matrix(B, m))
        worst_w = max(worst_w, rel_err(loop_hafnian_treedp_weighted(B, m), expect))
    ok = worst <= 1e-9 and worst_w <= 1e-9
    report("C2", ok, f"500 loop hafnians max rel err {worst:.2e}; weighted {worst_w:.2e}")
    assert ok


def test_c3_scaling(report):
    t0 = time.perf_counter()
    banded = run_bench("banded", range(8, 25, 2), bandwidth=3, repeats=3)
    dense = run_bench("dense", range(8, 19), repeats=1)
    elapsed = time.perf_counter() - t0
    exponent = fit_exponent(banded)
    slope = fit_log2_slope(dense)
    ok = exponent <= 1.5 and abs(slope - 1) <= 0.3 and elapsed < 600
    report("C3", ok, f"banded exponent {exponent:.2f}, dense log2 slope {slope:.2f}, "
                     f"{elapsed:.0f} s")
    assert ok


def test_c4_spbs_sampler(report):
    results = []
    for M, N, seed in ((4, 2, 41), (5, 3, 42), (6, 2, 43), (6, 3, 44)):
        U = haar_unitary(M, seed)
        src = list(range(N))
        recs = spbs_sample_batch(U, src, 100_000, SamplerConfig(seed=seed))
        results.append((M, N, empirical_tvd(recs, spbs_exact_distribution(U, src))))
    ok = all(t < 0.02 for *_, t in results)
    report("C4", ok, "TVD " + ", ".join(f"M={M} N={N}: {t:.4f}" for M, N, t in results))
    assert ok


def test_c5_gbs_sampler(report):
    n = 100_000
    recs = gbs_sample_batch(np.eye(1), [0], 1.0, n, SamplerConfig(seed=5))
    counts = [sum(r.m == (k,) for r in recs) / n for k in (0, 2)]
    expect = [1 / math.cosh(1), math.tanh(1) ** 2 / (2 * math.cosh(1))]
    z = [abs(c - p) / math.sqrt(p * (1 - p) / n) for c, p in zip(counts, expect)]
    U = haar_unitary(4, 51)
    exact = gbs_exact_distribution(U, [0, 1], 0.5, 4)
    many = gbs_sample_batch(U, [0, 1], 0.5, n, SamplerConfig(seed=6, m_max=4,
                                                              track_truncation=False))
    t = empirical_tvd(many, exact)
    ok = max(z) <= 3 and t < 0.03
    report("C5", ok, f"single mode z-scores P(0) {z[0]:.2f}, P(2) {z[1]:.2f}; "
                     f"M=4 N=2 TVD {t:.4f}")
    assert ok


def test_c6_truncation_threshold(report):
    tails, rates = [], []
    for N in (2, 4, 8):
        # Dense circuits for N = 8 exceed the weighted-table cap once the
        # truncation is tracked, so the eight sources are left decoupled.
        U = haar_unitary(N, N) if N < 8 else np.eye(8)
        for r in (0.5, 1.0):
            for eps in (1e-3, 1e-6):
                m_max = photon_truncation_threshold(r, eps)
                tails.append((N, r, eps, negative_binomial_tail(N, r, m_max)))
                recs = gbs_sample_batch(U, list(range(N)), r, 100,
                                        SamplerConfig(seed=N, epsilon=eps))
                rates.append((N, r, eps, float(np.mean([x.truncated_mass for x in recs]))))
    bad_tail = [t for t in tails if t[3] > t[2]]
    bad_rate = [t for t in rates if t[3] > 2 * t[2]]
    ok = not bad_tail and not bad_rate
    detail = (f"{len(tails) - len(bad_tail)}/{len(tails)} tails <= eps, "
              f"{len(rates) - len(bad_rate)}/{len(rates)} overload rates <= 2 eps")
    if not ok:
        worst = max(bad_tail + bad_rate, key=lambda t: t[3] / t[2])
        detail += f"; worst N={worst[0]} r={worst[1]} eps={worst[2]:g}: {worst[3]:.2e}"
    report("C6", ok, detail)
    assert ok


def test_c7_approximation_bounds(report):
    rng = np.random.default_rng(7)
    mirsky = dw = tv = checked = 0
    worst_margin = math.inf
    for i in range(100):
        M = int(rng.integers(6, 11))
        N = 2 if M % 2 == 0 else 1
        spec = CircuitSpec(1, M, N, depth=int(rng.integers(1, 7)), seed=i)
        U = build_local_haar_circuit(spec).U
        kappa = float(rng.uniform(0.0, 1.0))
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, kappa).U_tilde, U)
        mirsky += mirsky_holds(c)
        dw += c.dW_norm ** 2 <= dw_bound(M, c.dU_norm) + 1e-12
        try:
            exact = spbs_exact_distribution(U, spec.sources).pmf
        except OracleBudgetError:
            continue
        dist = tvd(approx_spbs_distribution(c, spec.sources), exact)
        bound = spbs_tvd_bound(N, c.dW_norm)
        checked += 1
        tv += dist <= bound + 1e-12
        worst_margin = min(worst_margin, bound - dist)
    ok = mirsky == dw == 100 and tv == checked > 0
    report("C7", ok, f"Mirsky {mirsky}/100, dW bound {dw}/100, TVD bound {tv}/{checked} "
                     f"(smallest margin {worst_margin:.3g})")
    assert ok


def test_c8_diffusion(report):
    # A 1D round applies two brickwork layers, so the walker has taken
    # t = 2 D unit steps after D rounds.
    spec = CircuitSpec(1, 32, 2, depth=16)
    half = spec.L / 2
    distances = (2, 4, 6, half, 10, 12)
    rep = diffusion_check(spec, n_circuits=1000, distances=distances)
    depths = range(1, spec.depth + 1)
    violations = [(l, D) for l in distances for D in depths
                  if rep.mean_leakage[l][D] > leakage_bound(1, l, 2 * D)]
    boundary = [D for D in depths if rep.mean_leakage[half][D] > leakage_bound(1, half, D / spec.d)]
    ok = not violations and not boundary and rep.r_squared > 0.95
    report("C8", ok, f"bound violations {len(violations)} (t = walk steps), "
                     f"{len(boundary)} at l = L/2 (t = D/d), "
                     f"variance slope {rep.slope:.3f}, R^2 {rep.r_squared:.4f}")
    assert ok


def test_c9_treewidth_structure(report):
    grid = SymmetricGraph(tuple(range(9)), frozenset(
        (a, b) for a in range(9) for b in range(a + 1, 9)
        if (b - a == 1 and a % 3 != 2) or b - a == 3))
    td = tree_decompose(grid, Band(tuple(range(9))))
    grid_w = td.width if not validate_decomposition(grid, td) else -1
    confined = [band_decomposition(s, list(s.sources), 0.5, kind="bipartite").width
                for s in (CircuitSpec(1, 16, 4), CircuitSpec(2, 64, 4), CircuitSpec(2, 144, 16))]
    spec = CircuitSpec(2, 144, 16, metric="l1")
    sym = band_decomposition(spec, list(spec.sources), 1.0, kind="symmetric").width
    bip = band_decomposition(spec, list(spec.sources), 1.0, kind="bipartite").width
    ok = grid_w == 3 and set(confined) == {1} and sym <= 8 and bip <= 9
    report("C9", ok, f"grid width {grid_w}, confined widths {confined}, "
                     f"S-band symmetric {sym} bipartite {bip}")
    assert ok


def test_c10_likelihood(report):
    spec = CircuitSpec(1, 6, 2, depth=4, seed=11)
    U = build_local_haar_circuit(spec).U
    src = list(spec.sources)
    r, n = 0.6, 1000
    cfg = SamplerConfig(seed=1, track_truncation=False)
    exact = gbs_sample_batch(U, src, r, n, cfg)
    c = extend_to_unitary(truncate_unitary(U, src, spec, 0.0).U_tilde, U)
    comp = compensate_photon_number(c, src, r)
    approx, start = [], 0
    while len(approx) < n:
        batch = approx_gbs_sample_batch(c, src, comp.r, 2000,
                                        SamplerConfig(seed=2, track_truncation=False), start)
        approx += [x for x in batch if x.flag != "out"]
        start += 2000
    approx = approx[:n]
    model = GBSModel(U, src, r)
    rep = log_likelihood_ratio(exact, approx, model)
    swapped = log_likelihood_ratio(approx, exact, model)
    half = n // 2
    parts = [log_likelihood_ratio(exact[s], approx[s], model).ratio
             for s in (slice(0, half), slice(half, n))]
    other = gbs_sample_batch(U, src, r, n, SamplerConfig(seed=3, track_truncation=False))
    null = log_likelihood_ratio(exact, other, model)
    diff = null.logp_a - null.logp_b
    sigma = float(np.std(diff, ddof=1) / math.sqrt(n))
    z = abs(null.ratio / n) / sigma
    ok = (rep.ratio < 0 and swapped.ratio == -rep.ratio
          and math.isclose(sum(parts), rep.ratio, rel_tol=1e-12, abs_tol=1e-9) and z < 3)
    report("C10", ok, f"exact-vs-approx ratio {rep.ratio:.1f} over {n} samples, "
                      f"exact-vs-exact ratio/N {null.ratio / n:.3f} ({z:.2f} sigma)")
    assert ok
