import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kraichnan_ns.errors import ConfigurationError
from kraichnan_ns.spaces import (
    ParameterTuple, WeightedTimeGrid, besov_norm, bessel_norm, critical_besov_smoothness,
    kappa_critical, lebesgue_norm_coeffs, littlewood_paley_blocks, lp_block_count,
    lp_block_symbol, serrin_exponents, scaling_transform, validate_parameters,
    weighted_time_norm)
from kraichnan_ns.spectral import (TorusGrid, forward_scalar, forward_transform, inverse_array,
                                   random_field)


def cos_field(g, k):
    return forward_scalar(g, np.cos(k * g.x[0]))


class TestBesselNorm:
    def test_cosine_h1(self):
        g = TorusGrid(2, 16)
        f = cos_field(g, 1)
        assert bessel_norm(f, 1.0, 2.0) ** 2 == pytest.approx(2 * bessel_norm(f, 0.0, 2.0) ** 2)

    def test_s_zero_is_lebesgue(self):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(0))
        vals = inverse_array(g, f.coeffs)
        mag = np.sqrt(np.sum(vals**2, axis=0))
        assert bessel_norm(f, 0.0, 4.0) == pytest.approx(np.mean(mag**4) ** 0.25, rel=1e-12)
        assert bessel_norm(f, 0.0, math.inf) == pytest.approx(mag.max(), rel=1e-12)

    def test_constant_any_s(self):
        g = TorusGrid(2, 16)
        f = forward_scalar(g, np.full(g.shape, -2.5))
        for s in (-1.0, 0.5, 3.0):
            assert bessel_norm(f, s, 3.0) == pytest.approx(2.5)

    def test_l2_norm_of_cosine(self):
        g = TorusGrid(2, 16)
        assert bessel_norm(cos_field(g, 3), 0.0, 2.0) == pytest.approx(math.sqrt(0.5))

    def test_rejects_q_below_one(self):
        g = TorusGrid(2, 16)
        with pytest.raises(ConfigurationError):
            lebesgue_norm_coeffs(g, cos_field(g, 1).coeffs, 0.5, vector=False)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-1.0, 2.0), st.floats(0.1, 1.5))
    def test_monotone_in_s(self, seed, s, ds):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(seed))
        assert bessel_norm(f, s, 2.0) <= bessel_norm(f, s + ds, 2.0) * (1 + 1e-12)


class TestBesovNorm:
    def test_partition_of_unity(self):
        g = TorusGrid(2, 32)
        total = sum(lp_block_symbol(g.kmag, j) for j in range(-1, lp_block_count(g)))
        assert np.max(np.abs(total - 1.0)) < 1e-14

    def test_single_mode_in_one_block(self):
        g = TorusGrid(2, 32)
        f = cos_field(g, 4)
        blocks = [(j, c) for j, c in littlewood_paley_blocks(f) if np.max(np.abs(c)) > 1e-14]
        assert [j for j, _ in blocks] == [2]
        assert besov_norm(f, 0.5, 2.0, 2.0) == pytest.approx(2.0 * math.sqrt(0.5), rel=1e-12)

    def test_constant_low_block(self):
        g = TorusGrid(2, 16)
        f = forward_scalar(g, np.full(g.shape, 1.5))
        assert besov_norm(f, 2.0, 2.0, 1.0) == pytest.approx(1.5)

    def test_frame_bounds_against_parseval(self):
        g = TorusGrid(2, 32)
        rng = np.random.default_rng(1)
        ratios = []
        for _ in range(20):
            f = random_field(g, rng)
            ratios.append(besov_norm(f, 0.0, 2.0, 2.0) / bessel_norm(f, 0.0, 2.0))
        # B^0_{2,2} and L^2 are equivalent; the frame constants here lie in [1/sqrt 2, 1]
        assert 1 / math.sqrt(2) - 1e-12 <= min(ratios) <= max(ratios) <= 1 + 1e-12

    def test_batched(self):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(2), batch=(3,))
        out = besov_norm(f, 0.5, 2.0, 2.0)
        assert out.shape == (3,)


class TestWeightedTimeNorm:
    def test_constant_unweighted(self):
        tg = WeightedTimeGrid.uniform(0.0, 1.0, 0.0, 50)
        assert weighted_time_norm(np.full(50, 3.0), tg, 2.0) == pytest.approx(3.0)

    def test_constant_weighted(self):
        tg = WeightedTimeGrid.uniform(0.0, 1.0, 1.0, 50)
        assert weighted_time_norm(np.full(50, 3.0), tg, 2.0) == pytest.approx(3.0 * math.sqrt(0.5))

    def test_singular_series(self):
        tg = WeightedTimeGrid.graded(0.0, 1.0, 1.0)
        val = weighted_time_norm(tg.times ** -0.25, tg, 2.0)
        assert val == pytest.approx(math.sqrt(2.0 / 3.0), rel=0.01)

    def test_sup_norm(self):
        tg = WeightedTimeGrid.uniform(0.0, 1.0, 0.0, 4)
        assert weighted_time_norm(np.array([1.0, -5.0, 2.0, 0.0]), tg, math.inf) == 5.0

    def test_length_mismatch(self):
        tg = WeightedTimeGrid.uniform(0.0, 1.0, 0.0, 4)
        with pytest.raises(ConfigurationError):
            weighted_time_norm(np.ones(5), tg, 2.0)


class TestExponents:
    def test_kappa_critical_planar_energy_space(self):
        kc = kappa_critical(2, 2.0, 2.0, 0.0)
        assert kc.value == 0.0 and kc.admissible

    def test_kappa_critical_lebesgue_data_needs_negative_delta(self):
        kc = kappa_critical(3, 4.0, 3.0, 0.0)
        assert kc.value == 1.0 and not kc.admissible
        kc = kappa_critical(3, 4.0, 3.0, -0.25)
        assert kc.value == 0.5 and kc.admissible

    def test_planar_energy_tuple(self):
        r = validate_parameters(ParameterTuple(2, 2.0, 2.0, 0.0, 0.0))
        assert r.admissible and r.critical and r.trace_smoothness == 0.0

    def test_trace_smoothness_at_critical_weight(self):
        t = ParameterTuple(2, 8.0, 4.0, -0.5, kappa_critical(2, 8.0, 4.0, -0.5).value)
        r = validate_parameters(t)
        assert r.critical
        assert r.trace_smoothness == pytest.approx(critical_besov_smoothness(2, 4.0))
        assert r.trace_smoothness == -0.5

    def test_boundary_weight_rejected(self):
        r = validate_parameters(ParameterTuple(3, 6.0, 3.0, 0.0, 2.0))
        assert not r.admissible
        assert any("header" in s for s in r.reasons)

    def test_q_outside_window(self):
        r = validate_parameters(ParameterTuple(3, 4.0, 1.2, -0.5, 0.0))
        assert not r.admissible

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from([2, 3]), st.floats(2.05, 12.0), st.floats(2.0, 12.0), st.floats(-0.9, 0.0))
    def test_critical_weight_makes_trace_critical(self, d, p, q, delta):
        kc = kappa_critical(d, p, q, delta).value
        t = ParameterTuple(d, p, q, delta, kc)
        assert t.trace_smoothness == pytest.approx(d / q - 1.0, abs=1e-12)

    def test_serrin_classic_equality(self):
        pair = serrin_exponents(3, 4.0, 6.0)
        assert pair.gamma0 == 0.0 and pair.classic

    def test_serrin_planar_energy_pair(self):
        pair = serrin_exponents(2, 2.0, 2.0)
        assert pair.gamma0 == 1.0 and pair.admissible

    def test_serrin_probe_formula(self):
        pair = serrin_exponents(2, 100.0, 100.0, -0.5)
        assert pair.gamma0 == pytest.approx(-0.96, abs=1e-15)
        assert not pair.admissible  # q0 beyond d/(1+delta0)

    def test_serrin_negative_frontier(self):
        pair = serrin_exponents(2, 1e8, 4.0 - 1e-8, -0.5)
        assert pair.admissible
        assert pair.gamma0 == pytest.approx(-0.5, abs=1e-7)


class TestScaling:
    def test_identity(self):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(3))
        out, t = scaling_transform(f, 1.0, 0.7)
        assert np.array_equal(out.coeffs, f.coeffs) and t == 0.7

    def test_single_mode(self):
        g = TorusGrid(2, 16)
        u = forward_transform(g, np.stack([0 * g.x[0], np.cos(g.x[0])]))
        out, t = scaling_transform(u, 4.0, 1.0)
        ref = np.stack([0 * out.grid.x[0], 2 * np.cos(2 * out.grid.x[0])])
        assert out.grid.n == 32 and t == 0.25
        assert np.max(np.abs(inverse_array(out.grid, out.coeffs) - ref)) < 1e-13

    def test_critical_besov_norm_quasi_invariant(self):
        g = TorusGrid(2, 32)
        u = forward_transform(g, np.stack([0 * g.x[0], np.cos(3 * g.x[0])]))
        s = critical_besov_smoothness(2, 2.0)
        out, _ = scaling_transform(u, 4.0)
        a, b = besov_norm(u, s, 2.0, 2.0), besov_norm(out, s, 2.0, 2.0)
        assert 0.5 <= b / a <= 2.0

    def test_rejects_non_square(self):
        g = TorusGrid(2, 16)
        with pytest.raises(ConfigurationError):
            scaling_transform(random_field(g, np.random.default_rng(4)), 2.0)
