"""Truncation, unitary extension, error bounds and approximate samplers."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import haar_unitary
from twboson.approx import (
    ApproxCircuit,
    approx_gbs_distribution,
    approx_gbs_sample_batch,
    approx_spbs_distribution,
    approx_spbs_sample_batch,
    covariance_distance,
    covariance_distance_bound,
    dw_bound,
    extend_to_unitary,
    gbs_tvd_bound,
    leakage_bound,
    leakage_rate,
    mirsky_holds,
    spbs_tvd_bound,
    truncate_unitary,
    tvd,
)
from twboson.lattice import CircuitSpec, build_local_haar_circuit, mode_distances
from twboson.samplers import (
    SamplerConfig,
    empirical_tvd,
    gbs_exact_distribution,
    gbs_sample_batch,
    spbs_exact_distribution,
    spbs_sample_batch,
)


def local_circuit(M=8, N=2, depth=4, seed=0):
    spec = CircuitSpec(1, M, N, depth=depth, seed=seed)
    return spec, build_local_haar_circuit(spec).U


class TestTruncation:
    def test_large_kappa_is_exact(self):
        spec, U = local_circuit()
        res = truncate_unitary(U, spec.sources, spec, kappa=10)
        assert res.dU_norm == 0 and np.array_equal(res.U_tilde, U)

    def test_identity_untouched(self):
        spec = CircuitSpec(1, 8, 2)
        for kappa in (0.0, 0.5, 2.0):
            assert truncate_unitary(np.eye(8), spec.sources, spec, kappa).dU_norm == 0

    def test_norm_matches_removed_entries(self):
        # [DERIVED] Entry-by-entry summation of the removed magnitudes.
        spec, U = local_circuit(16, 2, depth=3, seed=5)
        res = truncate_unitary(U, spec.sources, spec, kappa=0.25)
        removed = 0.0
        for s in spec.sources:
            for j in range(16):
                if abs(j - s) > 0.25 * spec.L:
                    removed += abs(U[j, s]) ** 2
                    assert res.U_tilde[j, s] == 0
                else:
                    assert res.U_tilde[j, s] == U[j, s]
        assert res.dU_norm ** 2 == pytest.approx(removed)
        assert res.dU_norm ** 2 == pytest.approx(sum(res.leakage.values()))
        others = [c for c in range(16) if c not in spec.sources]
        assert np.array_equal(res.U_tilde[:, others], U[:, others])

    def test_leakage_monotone(self):
        spec, U = local_circuit(16, 2, depth=6, seed=1)
        s = spec.sources[0]
        vals = [leakage_rate(U, s, t, spec) for t in range(0, 10)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_leakage_identity(self):
        spec = CircuitSpec(1, 8, 2)
        assert leakage_rate(np.eye(8), spec.sources[0], 0.5, spec) == 0

    def test_errors(self):
        spec, U = local_circuit()
        with pytest.raises(ValueError):
            truncate_unitary(U, [99], spec, 1.0)
        with pytest.raises(ValueError):
            truncate_unitary(U, spec.sources, spec, -1.0)


class TestLeakageBound:
    def test_saturation_point(self):
        d, t = 2, 3.0
        l = math.sqrt(2 * t * math.log(2 * d))
        assert leakage_bound(d, l, t) == pytest.approx(1)
        assert leakage_bound(d, 0.5 * l, t) == 1
        assert leakage_bound(d, 2 * l, t) < 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            leakage_bound(1, 1.0, 0.0)

    def test_ensemble_mean_below_bound(self):
        # [DERIVED] Monte Carlo over 200 circuits, 1D M=64, N=4, kappa = 1/2.
        base = CircuitSpec(1, 64, 4)
        s = base.sources[1]
        l = base.L / 2
        for depth in (2, 4, 8, 12):
            etas = []
            for seed in range(200):
                spec = CircuitSpec(1, 64, 4, depth=depth, seed=seed)
                col = build_local_haar_circuit(spec, columns=[s]).U[:, 0]
                etas.append(float(np.sum(np.abs(col[mode_distances(spec, s) > l]) ** 2)))
            assert np.mean(etas) <= leakage_bound(1, l, depth)


class TestExtension:
    def test_unitary_input(self):
        U = haar_unitary(4, 0)
        c = extend_to_unitary(U)
        assert c.mu == pytest.approx(0, abs=1e-12)
        Z = np.zeros((4, 4))
        assert np.allclose(c.W, np.block([[U, Z], [Z, -U]]), atol=1e-7)
        assert c.dW_norm < 1e-6

    def test_zero_input(self):
        c = extend_to_unitary(np.zeros((3, 3)))
        assert np.allclose(c.W[:3, :3], 0) and np.allclose(c.W[3:, 3:], 0)
        assert np.allclose(c.W[:3, 3:] @ c.W[:3, 3:].conj().T, np.eye(3))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            extend_to_unitary(np.full((2, 2), np.nan))

    def test_clamp_variant(self):
        spec, U = local_circuit(8, 2, depth=5, seed=2)
        Ut = truncate_unitary(U, spec.sources, spec, 0.0).U_tilde
        c = extend_to_unitary(Ut * 1.2, U, clamp=True)
        assert np.allclose(c.W.conj().T @ c.W, np.eye(16), atol=1e-10)
        assert np.linalg.svd(c.U_bar, compute_uv=False).max() <= 1 + 1e-12

    def test_roundtrip(self):
        spec, U = local_circuit()
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, 0.5).U_tilde, U)
        again = ApproxCircuit.from_dict(c.to_dict())
        assert np.allclose(again.W, c.W) and again.dW_norm == pytest.approx(c.dW_norm)

    @given(st.integers(6, 10), st.integers(1, 8), st.integers(0, 10_000),
           st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    def test_invariants(self, M, depth, seed, kappa):
        # [PAPER] Mirsky inequality and the dW bound on random truncations.
        spec = CircuitSpec(1, M, 2 if M % 2 == 0 else 1, depth=depth, seed=seed)
        U = build_local_haar_circuit(spec).U
        t = truncate_unitary(U, spec.sources, spec, kappa)
        c = extend_to_unitary(t.U_tilde, U)
        assert np.allclose(c.W.conj().T @ c.W, np.eye(2 * M), atol=1e-10)
        assert np.allclose(c.U_bar, t.U_tilde / c.kappa_scale)
        assert mirsky_holds(c)
        assert c.dW_norm ** 2 <= dw_bound(M, c.dU_norm) + 1e-12


class TestApproxSpbs:
    def test_no_truncation_matches_exact(self):
        spec, U = local_circuit(6, 2, depth=3, seed=1)
        c = extend_to_unitary(U)
        cfg = SamplerConfig(seed=7)
        a = approx_spbs_sample_batch(c, spec.sources, 200, cfg)
        b = spbs_sample_batch(U, spec.sources, 200, cfg)
        assert [r.m for r in a] == [r.m for r in b]
        assert approx_spbs_distribution(c, spec.sources).pmf["out"] == pytest.approx(0, abs=1e-12)

    def test_distribution_bound(self):
        # [PAPER] TVD <= N/2 ||dW||_F against the oracle distribution.
        spec, U = local_circuit(6, 2, depth=4, seed=3)
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, 0.0).U_tilde, U)
        approx = approx_spbs_distribution(c, spec.sources)
        exact = spbs_exact_distribution(U, spec.sources)
        assert sum(approx.pmf.values()) == pytest.approx(1)
        assert tvd(approx, exact) <= spbs_tvd_bound(2, c.dW_norm)

    def test_sampled_out_rate(self):
        # [DERIVED] Out-rate equals the oracle's missing first-M mass.
        spec, U = local_circuit(6, 2, depth=4, seed=3)
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, 0.0).U_tilde, U)
        p_out = approx_spbs_distribution(c, spec.sources).pmf["out"]
        n = 6000
        recs = approx_spbs_sample_batch(c, spec.sources, n, SamplerConfig(seed=2))
        rate = sum(r.flag == "out" for r in recs) / n
        assert abs(rate - p_out) < 4 * math.sqrt(p_out * (1 - p_out) / n)
        assert all(r.m is None for r in recs if r.flag == "out")
        assert empirical_tvd(recs, approx_spbs_distribution(c, spec.sources)) < 0.05


class TestApproxGbs:
    def test_no_truncation_matches_exact(self):
        U = haar_unitary(3, 4)
        c = extend_to_unitary(U)
        cfg = SamplerConfig(seed=1, m_max=4)
        a = approx_gbs_sample_batch(c, [0, 1], 0.5, 100, cfg)
        b = gbs_sample_batch(U, [0, 1], 0.5, 100, cfg)
        assert [r.m for r in a] == [r.m for r in b]
        assert all(r.flag == "ok" for r in a)

    def test_no_truncation_distribution(self):
        U = haar_unitary(2, 4)
        d = approx_gbs_distribution(extend_to_unitary(U), [0], 0.5, 4)
        e = gbs_exact_distribution(U, [0], 0.5, 4)
        assert d.pmf["out"] == pytest.approx(0, abs=1e-12)
        assert tvd(d, e) < 1e-10

    @pytest.mark.parametrize("r", [0.3, 0.6])
    def test_two_mode_bounds(self, r):
        # [PAPER] Covariance distance and TVD bounds on a truncated M=2 circuit.
        spec = CircuitSpec(1, 2, 1, depth=1, seed=4)
        U = build_local_haar_circuit(spec).U
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, 0.0).U_tilde, U)
        dV = covariance_distance(c, spec.sources, r)
        assert dV <= covariance_distance_bound(c.dW_norm, 2, 1, r)
        approx = approx_gbs_distribution(c, spec.sources, r, 4)
        exact = gbs_exact_distribution(U, spec.sources, r, 4)
        assert tvd(approx, exact) <= gbs_tvd_bound(1, r, dV)

    def test_sampled_out_rate(self):
        spec = CircuitSpec(1, 2, 1, depth=1, seed=4)
        U = build_local_haar_circuit(spec).U
        c = extend_to_unitary(truncate_unitary(U, spec.sources, spec, 0.0).U_tilde, U)
        p_out = approx_gbs_distribution(c, spec.sources, 0.6, 4).pmf["out"]
        n = 3000
        recs = approx_gbs_sample_batch(c, spec.sources, 0.6, n, SamplerConfig(seed=5, m_max=4))
        rate = sum(x.flag == "out" for x in recs) / n
        assert abs(rate - p_out) < 4 * math.sqrt(p_out * (1 - p_out) / n) + 1e-3
