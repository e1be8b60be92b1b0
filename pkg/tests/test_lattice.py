"""Local Haar-random lattice circuits, depth thresholds and diffusion."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twboson.approx import leakage_bound
from twboson.lattice import (
    Circuit,
    CircuitSpec,
    build_local_haar_circuit,
    diffusion_check,
    easy_depth,
    gate_matrix,
    mode_distances,
    schedule,
    width_forecast,
)


def unitarity_error(U):
    return np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]))


def expected_profile(spec, source):
    """Mean |U[:, s]|^2 per round from the pairwise averaging identity."""
    p = np.zeros(spec.M)
    p[source] = 1.0
    out = [p.copy()]
    for rnd, s, pairs in schedule(spec):
        for i, j in pairs:
            p[i] = p[j] = (p[i] + p[j]) / 2
        if s == 2 * spec.d - 1:
            out.append(p.copy())
    return np.array(out)


class TestSpec:
    def test_derived_quantities(self):
        spec = CircuitSpec(2, 144, 16)
        assert spec.side == 12 and spec.L == 3
        assert len(spec.sources) == 16
        assert spec.k == pytest.approx(1.0)

    def test_sources_centered_in_sublattices(self):
        spec = CircuitSpec(1, 16, 4)
        assert spec.sources == (2, 6, 10, 14)

    @pytest.mark.parametrize("args", [(1, 10, 3), (2, 10, 2), (2, 36, 2), (0, 4, 1)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            CircuitSpec(*args)

    def test_invalid_metric(self):
        with pytest.raises(ValueError):
            CircuitSpec(1, 4, 2, metric="l2")

    def test_distances(self):
        spec = CircuitSpec(2, 16, 4)
        d = mode_distances(spec, 0)
        assert d[5] == 1 and d[15] == 3
        assert mode_distances(spec, 0, "l1")[15] == 6


class TestCircuits:
    def test_zero_depth_identity(self):
        assert np.allclose(build_local_haar_circuit(CircuitSpec(1, 8, 2)).U, np.eye(8))

    def test_gate_at_zero_angle(self):
        assert np.allclose(gate_matrix(0.0, 0.3, 0.5, 0.9), np.diag(np.exp([0.5j, 0.9j])))

    def test_single_gate_circuit(self):
        c = build_local_haar_circuit(CircuitSpec(1, 2, 1, depth=1, seed=4))
        assert len(c.gates) == 1
        assert np.allclose(c.U, c.gates[0].matrix())

    @given(st.sampled_from([(1, 8, 2), (1, 16, 4), (2, 16, 4), (2, 36, 4), (3, 8, 1)]),
           st.integers(0, 6), st.integers(0, 1000))
    def test_unitary_and_local(self, dims, depth, seed):
        spec = CircuitSpec(*dims, depth=depth, seed=seed)
        c = build_local_haar_circuit(spec)
        assert unitarity_error(c.U) <= 1e-10
        for g in c.gates:
            assert mode_distances(spec, g.i, "l1")[g.j] == 1
            assert all(0 <= a < 2 * math.pi for a in (g.theta, g.phi0, g.phi1, g.phi2))

    def test_steps_per_round(self):
        spec = CircuitSpec(2, 16, 4, depth=3)
        steps = schedule(spec)
        assert len(steps) == 3 * 4
        # Step order: even then odd pairs along the first coordinate, then
        # along the second (modes are indexed row-major, first coordinate slowest).
        assert [s for _, s, _ in steps[:4]] == [0, 1, 2, 3]
        assert all(j - i == 4 for i, j in steps[0][2])
        assert all(j - i == 1 for i, j in steps[2][2])
        coords = spec.coords
        assert all(coords[i][0] % 2 == 0 for i, _ in steps[0][2])
        assert all(coords[i][0] % 2 == 1 for i, _ in steps[1][2])

    def test_deterministic(self):
        spec = CircuitSpec(1, 8, 2, depth=4, seed=9)
        assert np.array_equal(build_local_haar_circuit(spec).U, build_local_haar_circuit(spec).U)
        other = build_local_haar_circuit(CircuitSpec(1, 8, 2, depth=4, seed=10)).U
        assert not np.allclose(build_local_haar_circuit(spec).U, other)

    def test_roundtrip_and_columns(self):
        spec = CircuitSpec(2, 16, 4, depth=2, seed=3)
        c = build_local_haar_circuit(spec)
        again = Circuit.from_dict(c.to_dict())
        assert np.allclose(again.U, c.U)
        cols = build_local_haar_circuit(spec, columns=[1, 5]).U
        assert np.allclose(cols, c.U[:, [1, 5]])


class TestThresholds:
    def test_easy_depth_1d(self):
        assert easy_depth(CircuitSpec(1, 256, 16), 0.0) == pytest.approx(32)

    def test_easy_depth_2d(self):
        assert easy_depth(CircuitSpec(2, 256, 16), 0.0) == pytest.approx(4)

    def test_easy_depth_log_variant(self):
        spec = CircuitSpec(1, 256, 16)
        expect = 0.25 * 16 ** 2 * math.log(16) ** 2 / 2
        assert easy_depth(spec, 0.0, "1d_log", kappa=0.5) == pytest.approx(expect)

    def test_width_forecast_full_propagation(self):
        for N in (4, 16, 64):
            assert width_forecast(2, N, 1.0) == pytest.approx(N)

    def test_invalid_variant(self):
        with pytest.raises(ValueError):
            easy_depth(CircuitSpec(1, 16, 4), 0.1, "other")


class TestDiffusion:
    def test_single_gate_halves(self):
        spec = CircuitSpec(1, 2, 1, depth=1)
        rep = diffusion_check(spec, source=0, n_circuits=2000)
        # Mass after the first gate: E|U_00|^2 = E|U_10|^2 = 1/2.
        assert rep.mean_profile[1] == pytest.approx([0.5, 0.5], abs=0.03)

    def test_profile_matches_random_walk(self):
        # [DERIVED] Explicit convolution of the pairwise averaging map.
        spec = CircuitSpec(1, 16, 2, depth=3)
        source = spec.sources[0]
        rep = diffusion_check(spec, n_circuits=1000)
        assert np.abs(rep.mean_profile - expected_profile(spec, source)).max() < 0.05

    def test_gate_identity_within_five_sigma(self):
        rep = diffusion_check(CircuitSpec(1, 16, 2, depth=2), n_circuits=500)
        for pred, obs, sigma in rep.gate_checks:
            assert abs(pred - obs) <= 5 * sigma + 1e-12

    def test_variance_linear(self):
        rep = diffusion_check(CircuitSpec(1, 32, 2, depth=10), n_circuits=300)
        assert rep.r_squared > 0.95 and rep.slope > 0

    def test_leakage_bound_2d_below_easy_depth(self):
        spec = CircuitSpec(2, 64, 4, depth=4)
        assert spec.depth <= easy_depth(spec, 0.0)
        l = spec.L / 2
        rep = diffusion_check(spec, n_circuits=300, distances=(l,))
        for D in range(1, spec.depth + 1):
            assert rep.mean_leakage[l][D] <= leakage_bound(spec.d, l, D / spec.d)

    def test_needs_ensemble(self):
        with pytest.raises(ValueError):
            diffusion_check(CircuitSpec(1, 8, 2, depth=1), n_circuits=10)
