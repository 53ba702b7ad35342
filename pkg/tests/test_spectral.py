import numpy as np
import pytest

from eulermap import (
    Grid,
    ScalarField,
    VectorField,
    biot_savart,
    evaluate_offgrid,
    resample,
    sobolev_norm,
    solve_poisson_zero_mean,
    spectral_derivative,
    vorticity_of,
)
from eulermap.solver import random_divergence_free
from eulermap.spectral import FieldEvaluator, divergence


class TestSpectralDerivative:
    def test_sin_to_cos(self, grid64):
        x1, _ = grid64.nodes()
        f = ScalarField(grid64, np.sin(x1))
        d = spectral_derivative(f, 1)
        assert np.abs(d.values - np.cos(x1)).max() <= 1e-10

    def test_constant(self, grid64):
        f = ScalarField(grid64, np.ones((64, 64)))
        assert spectral_derivative(f, 1).max_abs() == 0.0

    def test_product_field_axis2(self, grid64):
        x1, x2 = grid64.nodes()
        f = ScalarField(grid64, np.sin(x1) * np.sin(x2))
        d = spectral_derivative(f, 2)
        assert np.abs(d.values - np.sin(x1) * np.cos(x2)).max() <= 1e-10

    def test_mixed_partials_commute(self, grid32):
        # multiplier products commute; only rounding order can differ
        rng = np.random.default_rng(3)
        f = ScalarField(grid32, rng.standard_normal((32, 32)))
        d12 = spectral_derivative(spectral_derivative(f, 1), 2)
        d21 = spectral_derivative(spectral_derivative(f, 2), 1)
        scale = np.abs(np.asarray(d12.hat)).max()
        assert np.abs(np.asarray(d12.hat) - np.asarray(d21.hat)).max() <= 1e-15 * scale

    def test_derivative_of_real_field_is_real_with_nyquist(self, grid32):
        # odd-ball mode zeroing keeps derivatives real even with Nyquist content
        vals = np.cos(grid32.nodes()[0] * 16)  # pure Nyquist in x1
        d = spectral_derivative(ScalarField(grid32, vals), 1)
        assert d.max_abs() <= 1e-12

    def test_bad_axis(self, grid32):
        with pytest.raises(ValueError):
            spectral_derivative(ScalarField.zeros(grid32), 3)


class TestPoisson:
    def test_product_eigenfunction(self, grid64):
        x1, x2 = grid64.nodes()
        g = ScalarField(grid64, -2.0 * np.sin(x1) * np.sin(x2))
        f = solve_poisson_zero_mean(g)
        assert np.abs(f.values - np.sin(x1) * np.sin(x2)).max() <= 1e-12

    def test_zero(self, grid64):
        assert solve_poisson_zero_mean(ScalarField.zeros(grid64)).max_abs() == 0.0

    def test_cosine(self, grid64):
        _, x2 = grid64.nodes()
        g = ScalarField(grid64, -np.cos(x2))
        f = solve_poisson_zero_mean(g)
        assert np.abs(f.values - np.cos(x2)).max() <= 1e-12

    def test_rejects_nonzero_mean(self, grid64):
        g = ScalarField(grid64, np.ones((64, 64)))
        with pytest.raises(ValueError, match="zero mean"):
            solve_poisson_zero_mean(g)


class TestVorticityBiotSavart:
    def test_shear_vorticity(self, grid64):
        x1, x2 = grid64.nodes()
        u = VectorField.from_values(grid64, -np.sin(x2), np.zeros_like(x2))
        om = vorticity_of(u)
        assert np.abs(om.values - np.cos(x2)).max() <= 1e-10

    def test_constant_velocity(self, grid64):
        u = VectorField.from_values(grid64, np.full((64, 64), 0.7),
                                    np.full((64, 64), -0.3))
        assert vorticity_of(u).max_abs() <= 1e-14

    def test_taylor_green_vorticity(self, grid64):
        x1, x2 = grid64.nodes()
        u = VectorField.from_values(grid64, np.sin(x1) * np.cos(x2),
                                    -np.cos(x1) * np.sin(x2))
        om = vorticity_of(u)
        assert np.abs(om.values - 2 * np.sin(x1) * np.sin(x2)).max() <= 1e-10

    def test_biot_savart_taylor_green(self, grid64):
        x1, x2 = grid64.nodes()
        om = ScalarField(grid64, 2.0 * np.sin(x1) * np.sin(x2))
        u = biot_savart(om)
        assert np.abs(u.u1.values - np.sin(x1) * np.cos(x2)).max() <= 1e-10
        assert np.abs(u.u2.values + np.cos(x1) * np.sin(x2)).max() <= 1e-10

    def test_biot_savart_zero(self, grid64):
        u = biot_savart(ScalarField.zeros(grid64))
        assert u.max_abs() == 0.0

    def test_biot_savart_shear(self, grid64):
        _, x2 = grid64.nodes()
        u = biot_savart(ScalarField(grid64, np.cos(x2)))
        assert np.abs(u.u1.values + np.sin(x2)).max() <= 1e-10
        assert u.u2.max_abs() <= 1e-12

    def test_rejects_nonzero_mean_vorticity(self, grid64):
        om = ScalarField(grid64, np.ones((64, 64)))
        with pytest.raises(ValueError):
            biot_savart(om)

    def test_round_trip_identity_on_divergence_free(self, grid64):
        # biot_savart o vorticity_of = id for zero-mean solenoidal fields
        for seed in range(5):
            u = random_divergence_free(grid64, kmax=10, seed=seed, hk_norm=1.0)
            u2 = biot_savart(vorticity_of(u))
            gap = sobolev_norm(u2 - u, 3.0) / sobolev_norm(u, 3.0)
            assert gap <= 1e-10

    def test_output_divergence_free(self, grid64):
        rng = np.random.default_rng(7)
        vals = rng.standard_normal((64, 64))
        om = ScalarField(grid64, vals - vals.mean())
        u = biot_savart(om)
        assert divergence(u).max_abs() <= 1e-10 * u.max_abs()

    def test_gradient_bound_by_vorticity(self, grid64):
        # || grad u ||_{H^{k-1}} <= C || omega ||_{H^{k-1}} with C = 2
        ratios = []
        for seed in range(200):
            u = random_divergence_free(grid64, kmax=8, seed=seed, hk_norm=1.0)
            om = vorticity_of(u)
            grad_sq = sum(
                sobolev_norm(spectral_derivative(c, a), 2.0) ** 2
                for c in (u.u1, u.u2)
                for a in (1, 2)
            )
            ratios.append(np.sqrt(grad_sq) / sobolev_norm(om, 2.0))
        assert max(ratios) <= 2.0


class TestSobolevNorm:
    def test_l2_of_sine(self, grid64):
        f = ScalarField(grid64, np.sin(grid64.nodes()[0]))
        assert sobolev_norm(f, 0.0) == pytest.approx(np.pi * np.sqrt(2), rel=1e-12)

    def test_zero_field(self, grid64):
        for s in (0.0, 1.5, 3.0):
            assert sobolev_norm(ScalarField.zeros(grid64), s) == 0.0

    def test_h3_of_sine(self, grid64):
        f = ScalarField(grid64, np.sin(grid64.nodes()[0]))
        assert sobolev_norm(f, 3.0) == pytest.approx(
            2**1.5 * np.pi * np.sqrt(2), rel=1e-12
        )

    def test_parseval(self, grid64):
        rng = np.random.default_rng(11)
        for _ in range(20):
            f = ScalarField(grid64, rng.standard_normal((64, 64)))
            quadrature = np.sqrt(grid64.spacing**2 * (f.values**2).sum())
            assert sobolev_norm(f, 0.0) == pytest.approx(quadrature, rel=1e-10)

    def test_monotone_in_s(self, grid64):
        rng = np.random.default_rng(12)
        f = ScalarField(grid64, rng.standard_normal((64, 64)))
        norms = [sobolev_norm(f, s) for s in (0.0, 0.5, 1.0, 2.0, 3.0)]
        assert all(a <= b * (1 + 1e-14) for a, b in zip(norms, norms[1:]))

    def test_vector_norm_is_component_quadrature(self, grid64):
        rng = np.random.default_rng(13)
        u = VectorField.from_values(grid64, rng.standard_normal((64, 64)),
                                    rng.standard_normal((64, 64)))
        expected = np.hypot(sobolev_norm(u.u1, 2.0), sobolev_norm(u.u2, 2.0))
        assert sobolev_norm(u, 2.0) == pytest.approx(expected, rel=1e-14)


class TestResample:
    def test_band_limited_refinement_exact(self):
        g, gf = Grid(32), Grid(64)
        f = ScalarField(g, np.sin(g.nodes()[0]))
        up = resample(f, gf)
        assert np.abs(up.values - np.sin(gf.nodes()[0])).max() <= 1e-12

    def test_constant_any_resolution(self):
        f = ScalarField(Grid(32), np.full((32, 32), 2.5))
        for n in (16, 64, 128):
            out = resample(f, Grid(n))
            assert np.abs(out.values - 2.5).max() <= 1e-12

    def test_refine_coarsen_round_trip(self, grid64):
        rng = np.random.default_rng(5)
        f = ScalarField(grid64, rng.standard_normal((64, 64)))
        back = resample(resample(f, Grid(128)), grid64)
        assert np.abs(back.values - f.values).max() <= 1e-12 * f.max_abs()

    def test_same_grid_copy(self, grid64):
        f = ScalarField(grid64, np.sin(grid64.nodes()[0]))
        out = resample(f, grid64)
        assert np.array_equal(out.values, f.values)


class TestEvaluateOffgrid:
    def test_analytic_point(self, grid64):
        f = ScalarField(grid64, np.sin(grid64.nodes()[0]))
        val = evaluate_offgrid(f, [[np.pi / 2, 1.0]])
        assert abs(val[0] - 1.0) <= 1e-8

    def test_grid_nodes_reproduced(self, grid64):
        rng = np.random.default_rng(6)
        f = ScalarField(grid64, rng.standard_normal((64, 64)))
        pts = grid64.node_array()[:50]
        vals = evaluate_offgrid(f, pts)
        assert np.abs(vals - f.values.ravel()[:50]).max() <= 1e-10

    def test_periodicity(self, grid64):
        f = ScalarField(grid64, np.sin(grid64.nodes()[0]))
        a = evaluate_offgrid(f, [[np.pi / 2, 1.0]])
        b = evaluate_offgrid(f, [[np.pi / 2 + 2 * np.pi, 1.0]])
        assert abs(a[0] - b[0]) <= 1e-12

    def test_interpolation_path_accuracy_at_128(self):
        # > 64 points exercises the upsampled-spline backend
        g = Grid(128)
        x1, x2 = g.nodes()
        f = ScalarField(g, np.sin(x1) * np.cos(2 * x2) + np.cos(3 * x1))
        rng = np.random.default_rng(8)
        pts = rng.uniform(0, 2 * np.pi, size=(500, 2))
        exact = np.sin(pts[:, 0]) * np.cos(2 * pts[:, 1]) + np.cos(3 * pts[:, 0])
        vals = evaluate_offgrid(f, pts)
        assert np.abs(vals - exact).max() <= 1e-8

    def test_direct_and_interp_agree(self, grid64):
        rng = np.random.default_rng(9)
        f = ScalarField(grid64, rng.standard_normal((64, 64)))
        pts = rng.uniform(0, 2 * np.pi, size=(40, 2))
        direct = evaluate_offgrid(f, pts)
        interp = FieldEvaluator(f)(pts)
        # rough field: spline error larger, but both see the same interpolant
        assert np.abs(direct - interp).max() <= 5e-3 * f.max_abs()

    def test_rejects_bad_shape(self, grid64):
        with pytest.raises(ValueError):
            evaluate_offgrid(ScalarField.zeros(grid64), np.zeros((3, 3)))
