import numpy as np
import pytest
from dataclasses import replace

from eulermap import Grid, ScalarField, VectorField, biot_savart, sobolev_norm, vorticity_of
from eulermap.solver import (
    CFLError,
    SolverConfig,
    VorticityStepper,
    apply_scaling_map,
    builtin_velocity,
    pressure_from_velocity,
    random_divergence_free,
    solve,
    step_vorticity,
)
from eulermap.spectral import gradient, spectral_derivative

from conftest import shear_vorticity, taylor_green_vorticity


@pytest.fixture
def cfg64(grid64):
    return SolverConfig(grid64, dt=5e-3, t_end=1.0)


class TestStepVorticity:
    def test_taylor_green_steady_per_step(self, grid64, cfg64):
        om = taylor_green_vorticity(grid64)
        om1 = step_vorticity(om, 5e-3, cfg64)
        assert np.abs(om1.values - om.values).max() <= 1e-10

    def test_shear_steady_per_step(self, grid64, cfg64):
        om = shear_vorticity(grid64)
        om1 = step_vorticity(om, 5e-3, cfg64)
        assert np.abs(om1.values - om.values).max() <= 1e-10

    def test_zero_stays_zero(self, grid64, cfg64):
        om1 = step_vorticity(ScalarField.zeros(grid64), 5e-3, cfg64)
        assert om1.max_abs() == 0.0

    def test_rejects_nonzero_mean(self, grid64, cfg64):
        om = ScalarField(grid64, np.ones((64, 64)))
        with pytest.raises(ValueError, match="zero mean"):
            step_vorticity(om, 5e-3, cfg64)

    def test_cfl_violation_carries_courant(self, grid64):
        om = taylor_green_vorticity(grid64)
        cfg = SolverConfig(grid64, dt=1.0)
        with pytest.raises(CFLError) as err:
            step_vorticity(om, 1.0, cfg)
        assert err.value.courant > 0.5


class TestSolve:
    def test_steady_taylor_green_fixed_point(self, grid64, cfg64):
        u0 = biot_savart(taylor_green_vorticity(grid64))
        snap = solve(u0, cfg64)
        assert sobolev_norm(snap.u - u0, 3.0) <= 1e-6

    def test_zero_initial_data(self, grid64, cfg64):
        snap = solve(VectorField.zeros(grid64), cfg64)
        assert snap.u.max_abs() == 0.0
        assert snap.energy == 0.0

    def test_conservation_generic_data(self, grid64):
        u0 = random_divergence_free(grid64, kmax=8, seed=4, hk_norm=1.0)
        cfg = SolverConfig(grid64, dt=2e-3)
        stepper = VorticityStepper(grid64)
        e0, z0 = stepper.invariants(stepper.to_spectrum(vorticity_of(u0)))
        snap = solve(u0, cfg)
        assert abs(snap.energy - e0) / e0 <= 1e-6
        assert abs(snap.enstrophy - z0) / z0 <= 1e-6

    def test_rejects_divergent_input(self, grid64, cfg64):
        x1, _ = grid64.nodes()
        u = VectorField.from_values(grid64, np.sin(x1), np.zeros((64, 64)))
        with pytest.raises(ValueError, match="divergence"):
            solve(u, cfg64)

    def test_snapshot_consistency(self, grid64, cfg64):
        u0 = random_divergence_free(grid64, kmax=6, seed=5, hk_norm=0.8)
        snap = solve(u0, cfg64)
        rebuilt = biot_savart(snap.omega)
        gap = sobolev_norm(snap.u - rebuilt, 3.0) / sobolev_norm(snap.u, 3.0)
        assert gap <= 1e-10

    def test_observer_stream(self, grid64):
        u0 = random_divergence_free(grid64, kmax=4, seed=6, hk_norm=0.5)
        cfg = SolverConfig(grid64, dt=1e-2, t_end=0.1)
        seen = []
        solve(u0, cfg, observer=lambda t, om, pos: seen.append(t), observe_every=2)
        assert len(seen) == 5
        assert seen[-1] == pytest.approx(0.1)

    def test_timestep_refinement_fourth_order(self, grid64):
        # halving dt shrinks the self-difference by >= 12 (RK4 window);
        # the field must be strong enough that dt^4 error clears roundoff
        u0 = random_divergence_free(grid64, kmax=6, seed=7, hk_norm=30.0)
        sols = {}
        for dt in (4e-2, 2e-2, 1e-2):
            sols[dt] = solve(u0, SolverConfig(grid64, dt=dt, t_end=0.5)).u
        d_coarse = sobolev_norm(sols[4e-2] - sols[2e-2], 3.0)
        d_fine = sobolev_norm(sols[2e-2] - sols[1e-2], 3.0)
        assert d_coarse / d_fine >= 12.0


class TestScalingMap:
    def test_t_equal_one_bitwise(self, grid64, cfg64):
        u0 = random_divergence_free(grid64, kmax=5, seed=8, hk_norm=1.0)
        a = solve(u0, replace(cfg64, t_end=1.0))
        b = apply_scaling_map(u0, 1.0, cfg64)
        assert np.array_equal(a.omega.values, b.omega.values)
        assert np.array_equal(a.u.u1.values, b.u.u1.values)
        assert a.energy == b.energy

    def test_steady_fixed_point_any_t(self, grid64, cfg64):
        u0 = biot_savart(taylor_green_vorticity(grid64))
        for T in (0.5, 2.0):
            snap = apply_scaling_map(u0, T, cfg64)
            assert sobolev_norm(snap.u - u0, 3.0) <= 1e-6

    @pytest.mark.parametrize("T", [0.25, 0.5, 2.0])
    def test_matches_direct_solve(self, grid64, T):
        u0 = random_divergence_free(grid64, kmax=5, seed=9, hk_norm=1.0)
        cfg = SolverConfig(grid64, dt=1e-3)
        direct = solve(u0, replace(cfg, t_end=T))
        scaled = apply_scaling_map(u0, T, cfg)
        assert sobolev_norm(direct.u - scaled.u, 3.0) <= 1e-6

    def test_rejects_nonpositive_t(self, grid64, cfg64):
        u0 = VectorField.zeros(grid64)
        with pytest.raises(ValueError):
            apply_scaling_map(u0, 0.0, cfg64)


class TestPressure:
    def test_shear_pressure_vanishes(self, grid64):
        u = builtin_velocity("shear", grid64)
        assert pressure_from_velocity(u).max_abs() <= 1e-12

    def test_zero_velocity(self, grid64):
        assert pressure_from_velocity(VectorField.zeros(grid64)).max_abs() == 0.0

    def test_poisson_identity_residual(self, grid64):
        u = random_divergence_free(grid64, kmax=6, seed=10, hk_norm=1.0)
        p = pressure_from_velocity(u)
        d1u1 = spectral_derivative(u.u1, 1).values
        d2u1 = spectral_derivative(u.u1, 2).values
        d1u2 = spectral_derivative(u.u2, 1).values
        d2u2 = spectral_derivative(u.u2, 2).values
        source = d1u1**2 + 2 * d1u2 * d2u1 + d2u2**2
        lap_p = spectral_derivative(spectral_derivative(p, 1), 1) + \
            spectral_derivative(spectral_derivative(p, 2), 2)
        resid = lap_p.values + (source - source.mean())
        l2 = np.sqrt((resid**2).mean()) / np.sqrt((source**2).mean())
        assert l2 <= 1e-8

    def test_taylor_green_momentum_balance(self, grid64):
        # steady flow: (u . grad) u + grad p = 0 pointwise
        u = builtin_velocity("taylor-green", grid64)
        p = pressure_from_velocity(u)
        gp = gradient(p)
        adv1 = u.u1.values * spectral_derivative(u.u1, 1).values + \
            u.u2.values * spectral_derivative(u.u1, 2).values
        adv2 = u.u1.values * spectral_derivative(u.u2, 1).values + \
            u.u2.values * spectral_derivative(u.u2, 2).values
        resid = max(np.abs(adv1 + gp.u1.values).max(),
                    np.abs(adv2 + gp.u2.values).max())
        assert resid <= 1e-8


class TestBuiltins:
    def test_known_names(self, grid64):
        for name in ("zero", "taylor-green", "shear", "base", "random8:3"):
            u = builtin_velocity(name, grid64)
            assert u.grid.n == 64

    def test_unknown_name(self, grid64):
        with pytest.raises(ValueError):
            builtin_velocity("vortex-street", grid64)

    def test_random_seed_determinism(self, grid64):
        a = builtin_velocity("random8:5", grid64)
        b = builtin_velocity("random8:5", grid64)
        assert np.array_equal(a.u1.values, b.u1.values)

    def test_base_norm(self, grid64):
        u = builtin_velocity("base", grid64)
        assert sobolev_norm(u, 3.0) == pytest.approx(0.25, rel=1e-10)
