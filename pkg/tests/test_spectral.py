import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kraichnan_ns.errors import ConfigurationError
from kraichnan_ns.spectral import (
    SpectralField, TorusGrid, convection_array, dealias, divergence, energy, enstrophy,
    forward_array, forward_scalar, forward_transform, gradient, helmholtz_project, inner,
    inverse_array, inverse_transform, q_solve, random_field, read_snapshot,
    spectral_derivative, write_snapshot)


def mode_index(grid, k):
    return tuple(int(kj) % grid.n for kj in k)


def direct_dft(grid, vals):
    """O(N^2) reference transform for small grids."""
    x = grid.x.reshape(grid.dim, -1)
    out = np.zeros(grid.shape, dtype=complex)
    flat = vals.reshape(-1)
    for k in itertools.product(range(grid.n), repeat=grid.dim):
        kk = np.array([kj if kj < grid.n // 2 else kj - grid.n for kj in k])
        out[k] = np.sum(flat * np.exp(-1j * kk @ x)) / grid.size
    return out


class TestGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ConfigurationError):
            TorusGrid(2, 7)
        with pytest.raises(ConfigurationError):
            TorusGrid(4, 16)

    def test_nyquist_removed_from_derivative_wavevector(self):
        g = TorusGrid(2, 8)
        assert g.k[0].min() == -4
        assert np.all(g.kd[0][g.k[0] == -4] == 0)

    def test_dealias_mask_two_thirds(self):
        g = TorusGrid(2, 16)
        kept = np.abs(g.k[0][:, 0])[g.dealias_mask[:, 0]]
        assert kept.max() == 5


class TestTransforms:
    def test_constant_field(self):
        g = TorusGrid(2, 16)
        vals = np.stack([np.full(g.shape, 3.0), np.full(g.shape, -1.5)])
        c = forward_transform(g, vals).coeffs
        assert c[0][0, 0] == pytest.approx(3.0)
        assert c[1][0, 0] == pytest.approx(-1.5)
        c[:, 0, 0] = 0
        assert np.max(np.abs(c)) < 1e-15

    def test_single_cosine(self):
        g = TorusGrid(2, 16)
        c = forward_scalar(g, np.cos(g.x[0])).coeffs
        assert c[1, 0] == pytest.approx(0.5)
        assert c[-1, 0] == pytest.approx(0.5)
        c[1, 0] = c[-1, 0] = 0
        assert np.max(np.abs(c)) < 1e-15

    def test_matches_direct_dft(self):
        g = TorusGrid(2, 8)
        vals = np.random.default_rng(0).standard_normal(g.shape)
        assert np.allclose(forward_array(g, vals), direct_dft(g, vals), atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 16), (2, 32), (3, 8)]))
    def test_round_trip(self, seed, dims):
        g = TorusGrid(*dims)
        vals = np.random.default_rng(seed).standard_normal((g.dim,) + g.shape)
        back = inverse_transform(forward_transform(g, vals))
        assert np.linalg.norm(back - vals) <= 1e-12 * np.linalg.norm(vals)

    def test_parseval_normalized_measure(self):
        g = TorusGrid(3, 8)
        vals = np.random.default_rng(1).standard_normal((3,) + g.shape)
        c = forward_array(g, vals)
        assert energy(g, c) == pytest.approx(np.mean(np.sum(vals**2, axis=0)), rel=1e-13)

    def test_shape_mismatch(self):
        g = TorusGrid(2, 16)
        with pytest.raises(ConfigurationError):
            forward_transform(g, np.zeros((2, 8, 8)))


class TestProjection:
    def test_divergence_free_fixed(self):
        g = TorusGrid(2, 16)
        f = forward_transform(g, np.stack([np.sin(g.x[1]), 0 * g.x[0]]))
        assert np.allclose(helmholtz_project(f).coeffs, f.coeffs, atol=1e-15)

    def test_gradient_killed(self):
        g = TorusGrid(2, 16)
        psi = forward_scalar(g, np.cos(2 * g.x[0]) * np.sin(3 * g.x[1]))
        assert np.max(np.abs(helmholtz_project(gradient(psi)).coeffs)) < 1e-15

    def test_longitudinal_sine(self):
        g = TorusGrid(2, 16)
        f = forward_transform(g, np.stack([np.sin(g.x[0]), 0 * g.x[0]]))
        assert np.max(np.abs(helmholtz_project(f).coeffs)) < 1e-15

    def test_matches_per_mode_formula(self):
        g = TorusGrid(2, 8)
        f = random_field(g, np.random.default_rng(2))
        p = helmholtz_project(f).coeffs
        for idx in itertools.product(range(g.n), repeat=2):
            k = g.kd[(slice(None),) + idx].astype(float)
            v = f.coeffs[(slice(None),) + idx]
            ref = v if k @ k == 0 else v - k * (k @ v) / (k @ k)
            assert np.allclose(p[(slice(None),) + idx], ref, atol=1e-15)

    def test_q_solve_gradient_of_cosine(self):
        g = TorusGrid(2, 16)
        psi = forward_scalar(g, np.cos(g.x[0]))
        out = q_solve(gradient(psi))
        assert np.allclose(inverse_transform(out), np.cos(g.x[0]), atol=1e-14)

    def test_q_solve_divergence_free_is_zero(self):
        g = TorusGrid(2, 16)
        f = helmholtz_project(random_field(g, np.random.default_rng(3)))
        assert np.max(np.abs(q_solve(f).coeffs)) < 1e-15

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_projection_invariants(self, seed):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(seed))
        p = helmholtz_project(f)
        scale = np.sqrt(energy(g, f.coeffs))
        assert np.sqrt(energy(g, helmholtz_project(p).coeffs - p.coeffs)) <= 1e-12 * scale
        assert abs(inner(g, p.coeffs, f.coeffs - p.coeffs)) <= 1e-12 * scale**2
        assert np.max(np.abs(divergence(p).coeffs)) <= 1e-12 * scale
        resid = f.coeffs - gradient(q_solve(f)).coeffs - p.coeffs
        assert np.sqrt(energy(g, resid)) <= 1e-12 * scale


class TestCalculus:
    def test_derivative_of_cosine(self):
        g = TorusGrid(2, 16)
        d = spectral_derivative(forward_scalar(g, np.cos(g.x[0])), 0)
        assert np.allclose(inverse_transform(d), -np.sin(g.x[0]), atol=1e-14)

    def test_derivative_of_constant_direction(self):
        g = TorusGrid(2, 16)
        d = spectral_derivative(forward_scalar(g, np.cos(3 * g.x[0])), 1)
        assert np.max(np.abs(d.coeffs)) == 0

    def test_mixed_derivatives_commute(self):
        g = TorusGrid(3, 8)
        f = random_field(g, np.random.default_rng(4))
        a = spectral_derivative(spectral_derivative(f, 0), 2).coeffs
        b = spectral_derivative(spectral_derivative(f, 2), 0).coeffs
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))

    def test_enstrophy_of_single_mode(self):
        g = TorusGrid(2, 16)
        u = forward_transform(g, np.stack([0 * g.x[0], np.cos(3 * g.x[0])]))
        assert enstrophy(g, u.coeffs) == pytest.approx(9 * 0.5)

    def test_dealias_keeps_band_limited(self):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(5), band_limited=True)
        assert np.array_equal(dealias(f).coeffs, f.coeffs)

    def test_dealias_removes_high_mode(self):
        g = TorusGrid(2, 16)
        f = forward_scalar(g, np.cos(7 * g.x[0]))
        assert np.max(np.abs(dealias(f).coeffs)) < 1e-15

    def test_convection_matches_direct_convolution(self):
        g = TorusGrid(2, 8)
        rng = np.random.default_rng(6)
        u = helmholtz_project(random_field(g, rng, band_limited=True)).coeffs
        got = convection_array(g, u)
        # reference: exact products by discrete convolution over the retained modes
        ks = [k for k in itertools.product(range(-4, 4), repeat=2)]
        ref = np.zeros_like(got)
        for i in range(2):
            for j in range(2):
                prod = np.zeros(g.shape, dtype=complex)
                for p in ks:
                    for q in ks:
                        s = (p[0] + q[0], p[1] + q[1])
                        if max(abs(s[0]), abs(s[1])) > 8 // 3:
                            continue
                        prod[mode_index(g, s)] += (u[i][mode_index(g, p)]
                                                   * u[j][mode_index(g, q)])
                ref[i] += 1j * g.kd[j] * prod
        assert np.max(np.abs(got - ref)) < 1e-14

    def test_convection_single_shear_mode(self):
        g = TorusGrid(2, 16)
        u = forward_transform(g, np.stack([0 * g.x[0], np.cos(g.x[0])])).coeffs
        assert np.max(np.abs(helmholtz_project(SpectralField(g, convection_array(g, u))).coeffs)) < 1e-15


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(7))
        write_snapshot(tmp_path / "a.knss", f)
        g2, vals = read_snapshot(tmp_path / "a.knss")
        assert g2 == g
        assert np.array_equal(vals, inverse_transform(f))

    def test_rejects_foreign_file(self, tmp_path):
        (tmp_path / "b.knss").write_bytes(b"x" * 64)
        with pytest.raises(ConfigurationError):
            read_snapshot(tmp_path / "b.knss")

    def test_rejects_batches(self, tmp_path):
        g = TorusGrid(2, 16)
        f = random_field(g, np.random.default_rng(8), batch=(2,))
        with pytest.raises(ConfigurationError):
            write_snapshot(tmp_path / "c.knss", f)
