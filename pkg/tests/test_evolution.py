"""Semigroup, Duhamel potentials, stepper exactness, and solver cross-checks."""

import math

import numpy as np
import pytest

from conftest import random_vector
from nsrg.evolution import (
    BlowUpError,
    ForcingKind,
    ForcingSpec,
    GalerkinBasisError,
    Quadrature,
    Scheme,
    SolverConfig,
    _GalerkinBasis,
    _interaction_tensor,
    dissipation_symbol,
    galerkin_state,
    initial_value_potential,
    run_galerkin_oracle,
    run_simulation,
    semigroup_factor,
    solve_picard,
    step,
    volume_potential,
)
from nsrg.hodge import leray_project
from nsrg.io import single_mode, taylor_green
from nsrg.spectral import (
    SpectralVectorField,
    ViscosityParams,
    l2_norm,
    make_grid,
    random_solenoidal,
    relative_divergence,
    zero_vector,
)


class TestSemigroup:
    def test_factor_value(self):
        visc = ViscosityParams(nu=0.1, epsilon=0.01, m=2)
        assert abs(semigroup_factor((0, 1), 1.0, visc) - math.exp(-0.11)) < 1e-15

    def test_identity_at_zero_time(self):
        visc = ViscosityParams(nu=2.0, epsilon=0.3, m=2)
        for k in [(0, 1), (3, -2), (5, 5)]:
            assert semigroup_factor(k, 0.0, visc) == 1.0

    def test_mean_mode_invariant(self):
        visc = ViscosityParams(nu=2.0, epsilon=0.3, m=2)
        for t in (0.0, 0.5, 10.0):
            assert semigroup_factor((0, 0), t, visc) == 1.0

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            semigroup_factor((1, 0), -0.1, ViscosityParams(nu=1.0))

    def test_range(self):
        visc = ViscosityParams(nu=0.5, epsilon=0.1, m=1)
        val = semigroup_factor((2, 1), 0.7, visc)
        assert 0.0 < val <= 1.0


class TestInitialValuePotential:
    def test_identity(self, grid2_small):
        u = random_vector(grid2_small, 1)
        out = initial_value_potential(u, 0.0, ViscosityParams(nu=1.0))
        assert np.array_equal(out.components, u.components)

    def test_taylor_green_single_shell(self, grid2_small):
        tg = taylor_green(grid2_small)
        out = initial_value_potential(tg, 0.5, ViscosityParams(nu=1.0))
        assert l2_norm(out - math.exp(-1.0) * tg) < 1e-14

    def test_semigroup_property(self, grid2_small):
        visc = ViscosityParams(nu=0.3, epsilon=0.05, m=2)
        u = random_vector(grid2_small, 2)
        a = initial_value_potential(initial_value_potential(u, 0.2, visc), 0.7, visc)
        b = initial_value_potential(u, 0.9, visc)
        assert l2_norm(a - b) < 1e-13


class TestVolumePotential:
    def test_zero_source(self, grid2_small):
        visc = ViscosityParams(nu=1.0)
        z = zero_vector(grid2_small)
        out = volume_potential([z, z, z], 1.0, visc)
        assert l2_norm(out) == 0.0

    def test_constant_single_mode_closed_form(self, grid2_small):
        visc = ViscosityParams(nu=1.0)
        g = single_mode(grid2_small, (0, 1))  # sigma = 1
        samples = [g] * 11
        out = volume_potential(samples, 1.0, visc, Quadrature.EXPONENTIAL)
        expected = (1.0 - math.exp(-1.0)) * g
        assert l2_norm(out - expected) < 1e-14

    def test_mean_mode_integrates_exactly(self, grid2_small):
        visc = ViscosityParams(nu=1.0)
        comps = np.zeros(grid2_small.vector_shape, dtype=complex)
        comps[0, 0, 0] = 2.0
        g = SpectralVectorField(grid2_small, comps)
        out = volume_potential([g] * 5, 0.8, visc, Quadrature.EXPONENTIAL)
        assert abs(out.components[0, 0, 0] - 1.6) < 1e-14

    def test_trapezoid_converges_to_closed_form(self, grid2_small):
        visc = ViscosityParams(nu=1.0)
        g = single_mode(grid2_small, (0, 1))
        errs = []
        for n in (20, 40, 80):
            out = volume_potential([g] * (n + 1), 1.0, visc, Quadrature.TRAPEZOID)
            errs.append(l2_norm(out - (1.0 - math.exp(-1.0)) * g))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            volume_potential([], 1.0, ViscosityParams(nu=1.0))

    def test_green_formula_consistency(self, grid2_small):
        # linear run: state equals free flow plus the Duhamel term of the forcing
        visc = ViscosityParams(nu=0.5, epsilon=0.02, m=2)
        f0 = single_mode(grid2_small, (1, 1))
        forcing = ForcingSpec.time_harmonic(f0, omega=2.0)
        cfg = SolverConfig(
            visc=visc, grid=grid2_small, dt=1e-3, horizon=0.5,
            scheme=Scheme.IF_RK4, nonlinearity_enabled=False, forcing=forcing,
            snapshot_stride=500,
        )
        u0 = random_solenoidal(grid2_small, 9)
        traj = run_simulation(u0, cfg)
        t_final = float(traj.times[-1])
        n_samp = 4000
        samples = [
            leray_project(forcing.sample(s))
            for s in np.linspace(0.0, t_final, n_samp + 1)
        ]
        mild = initial_value_potential(leray_project(u0), t_final, visc) + (
            volume_potential(samples, t_final, visc, Quadrature.EXPONENTIAL)
        )
        assert l2_norm(traj.snapshots[-1] - mild) < 1e-8


class TestStep:
    def test_linear_taylor_green_exact(self, grid2):
        tg = taylor_green(grid2)
        cfg = SolverConfig(
            visc=ViscosityParams(nu=1.0), grid=grid2, dt=1e-2, horizon=1.0,
            nonlinearity_enabled=False,
        )
        out = step(tg, 0.0, cfg)
        assert l2_norm(out - math.exp(-2e-2) * tg) < 1e-14

    def test_nonlinear_taylor_green_still_exact(self, grid2):
        tg = taylor_green(grid2)
        cfg = SolverConfig(
            visc=ViscosityParams(nu=1.0), grid=grid2, dt=1e-2, horizon=1.0,
        )
        out = step(tg, 0.0, cfg)
        assert l2_norm(out - math.exp(-2e-2) * tg) < 1e-12

    def test_output_solenoidal(self, grid2):
        cfg = SolverConfig(visc=ViscosityParams(nu=0.1), grid=grid2, dt=1e-2, horizon=1.0)
        u = random_solenoidal(grid2, 3)
        out = step(u, 0.0, cfg)
        assert relative_divergence(out) < 1e-12

    def test_rejects_galerkin_scheme(self, grid2_small):
        cfg = SolverConfig(
            visc=ViscosityParams(nu=1.0), grid=grid2_small, dt=1e-2, horizon=1.0,
            scheme=Scheme.GALERKIN_ODE,
        )
        with pytest.raises(ValueError):
            step(random_solenoidal(grid2_small, 1), 0.0, cfg)

    def test_order_of_accuracy(self):
        grid = make_grid(2, 8)
        u0 = 5.0 * random_solenoidal(grid, 11, 2.0, 2)
        visc = ViscosityParams(nu=0.05)
        horizon = 0.5

        def final_state(scheme, dt):
            cfg = SolverConfig(
                visc=visc, grid=grid, dt=dt, horizon=horizon, scheme=scheme,
                snapshot_stride=10 ** 9,
            )
            return run_simulation(u0, cfg).snapshots[-1]

        ref = final_state(Scheme.IF_RK4, horizon / 6400)
        dts = np.array([horizon / n for n in (10, 20, 40, 80)])
        for scheme, expected in ((Scheme.IF_EULER, 1.0), (Scheme.IF_RK4, 4.0)):
            errs = np.array(
                [l2_norm(final_state(scheme, dt) - ref) for dt in dts]
            )
            slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
            assert abs(slope - expected) < 0.2


class TestRunSimulation:
    def test_taylor_green_decay(self, grid2):
        tg = taylor_green(grid2)
        cfg = SolverConfig(visc=ViscosityParams(nu=1.0), grid=grid2, dt=1e-3, horizon=1.0)
        traj = run_simulation(tg, cfg)
        expected = math.exp(-2.0) * tg
        assert l2_norm(traj.snapshots[-1] - expected) < 1e-10 * l2_norm(tg)

    def test_taylor_green_hyperviscous_decay(self, grid2):
        tg = taylor_green(grid2)
        visc = ViscosityParams(nu=1.0, epsilon=0.1, m=2)
        cfg = SolverConfig(visc=visc, grid=grid2, dt=1e-3, horizon=0.5)
        traj = run_simulation(tg, cfg)
        # single shell |k|^2 = 2, |k|^4 = 4
        expected = math.exp(-(2.0 * visc.nu + visc.epsilon * 4.0) * 0.5) * tg
        assert l2_norm(traj.snapshots[-1] - expected) < 1e-10 * l2_norm(tg)

    def test_zero_everything(self, grid2_small):
        cfg = SolverConfig(
            visc=ViscosityParams(nu=1.0), grid=grid2_small, dt=1e-2, horizon=0.1
        )
        traj = run_simulation(zero_vector(grid2_small), cfg)
        assert all(l2_norm(u) == 0.0 for u in traj.snapshots)

    def test_trajectory_invariants(self, grid2_small):
        u0 = random_vector(grid2_small, 5)  # intentionally not solenoidal
        cfg = SolverConfig(
            visc=ViscosityParams(nu=0.5), grid=grid2_small, dt=5e-3, horizon=0.2,
            snapshot_stride=4,
        )
        traj = run_simulation(u0, cfg)
        assert traj.times[0] == 0.0
        assert np.all(np.diff(traj.times) > 0)
        assert l2_norm(traj.snapshots[0] - leray_project(u0)) < 1e-14
        assert all(relative_divergence(u) <= 1e-11 for u in traj.snapshots)
        assert traj.times[-1] == pytest.approx(0.2, abs=1e-12)

    def test_deterministic(self, grid2_small):
        u0 = random_solenoidal(grid2_small, 6)
        cfg = SolverConfig(
            visc=ViscosityParams(nu=0.5), grid=grid2_small, dt=5e-3, horizon=0.1
        )
        a = run_simulation(u0, cfg)
        b = run_simulation(u0, cfg)
        assert np.array_equal(
            a.snapshots[-1].components, b.snapshots[-1].components
        )

    def test_blowup_detection(self):
        grid = make_grid(2, 32)
        u0 = 200.0 * random_solenoidal(grid, 3)
        cfg = SolverConfig(visc=ViscosityParams(nu=1e-4), grid=grid, dt=0.2, horizon=10.0)
        with pytest.raises(BlowUpError) as err:
            run_simulation(u0, cfg)
        assert err.value.last_good_time >= 0.0

    def test_config_validation(self, grid2_small, grid3):
        visc = ViscosityParams(nu=1.0)
        with pytest.raises(ValueError):
            SolverConfig(visc=visc, grid=grid2_small, dt=1.0, horizon=0.5)
        with pytest.raises(ValueError):
            SolverConfig(visc=visc, grid=grid2_small, dt=1e-2, horizon=1.0, snapshot_stride=0)
        with pytest.raises(ValueError):
            SolverConfig(
                visc=ViscosityParams(nu=1.0, epsilon=0.1, m=1),
                grid=grid3, dt=1e-2, horizon=1.0,
            )
        with pytest.raises(ValueError):
            SolverConfig(
                visc=visc, grid=make_grid(2, 32), dt=1e-2, horizon=1.0,
                scheme=Scheme.GALERKIN_ODE,
            )


class TestForcingSpec:
    def test_time_harmonic_sampling(self, grid2_small):
        f0 = single_mode(grid2_small, (1, 0))
        spec = ForcingSpec.time_harmonic(f0, omega=3.0, phase=0.5)
        got = spec.sample(0.7)
        expected = math.cos(3.0 * 0.7 + 0.5) * f0
        assert l2_norm(got - expected) < 1e-15

    def test_custom_snapshots_interpolation(self, grid2_small):
        a = single_mode(grid2_small, (1, 0))
        b = single_mode(grid2_small, (0, 1))
        spec = ForcingSpec.from_snapshots([0.0, 1.0], [a, b])
        mid = spec.sample(0.25)
        assert l2_norm(mid - (0.75 * a + 0.25 * b)) < 1e-15
        assert l2_norm(spec.sample(-1.0) - a) < 1e-15
        assert l2_norm(spec.sample(2.0) - b) < 1e-15

    def test_validation(self, grid2_small, grid2):
        with pytest.raises(ValueError):
            ForcingSpec.from_snapshots([0.0], [single_mode(grid2_small, (1, 0))])
        spec = ForcingSpec.steady(single_mode(grid2, (1, 0)))
        with pytest.raises(ValueError):
            SolverConfig(
                visc=ViscosityParams(nu=1.0), grid=grid2_small, dt=1e-2,
                horizon=0.1, forcing=spec,
            )


class TestGalerkinOracle:
    def test_linear_reproduces_semigroup(self):
        grid = make_grid(2, 8)
        visc = ViscosityParams(nu=0.3, epsilon=0.02, m=2)
        u0 = random_solenoidal(grid, 21, 2.0, 2)
        cfg = SolverConfig(
            visc=visc, grid=grid, dt=0.1, horizon=0.5, scheme=Scheme.GALERKIN_ODE,
            nonlinearity_enabled=False,
        )
        traj = run_galerkin_oracle(u0, cfg, rtol=1e-11, atol=1e-13)
        for t, u in zip(traj.times, traj.snapshots):
            expected = initial_value_potential(u0, float(t), visc)
            assert l2_norm(u - expected) < 1e-9

    def test_state_reconstruction(self):
        grid = make_grid(2, 8)
        visc = ViscosityParams(nu=1.0)
        u = random_solenoidal(grid, 33, 2.0, 2)
        state = galerkin_state(u, visc)
        assert np.all(state.eigenvalues >= 1.0)
        sigma = dissipation_symbol(grid, visc)
        for kvec, lam in zip(state.wavevectors, state.eigenvalues):
            idx = tuple(int(k) % grid.modes_per_axis for k in kvec)
            assert abs(lam - (1.0 + sigma[idx])) < 1e-12
        assert l2_norm(state.to_field() - u) < 1e-13

    def test_tensor_energy_neutrality(self):
        grid = make_grid(2, 8)
        visc = ViscosityParams(nu=1.0)
        basis = _GalerkinBasis(grid, visc)
        tensor = _interaction_tensor(basis)
        for seed in (1, 2):
            u = random_solenoidal(grid, seed, 2.0, 2)
            c = basis.project(u.components)
            d = np.einsum("ilm,l,m->i", tensor, c, c)
            val = grid.volume * float(np.real(np.vdot(c, d)))
            assert abs(val) < 1e-11

    def test_basis_too_large(self):
        grid = make_grid(3, 8)
        with pytest.raises(GalerkinBasisError):
            _GalerkinBasis(grid, ViscosityParams(nu=1.0))
        with pytest.raises(GalerkinBasisError):
            run_galerkin_oracle(
                random_solenoidal(make_grid(2, 32), 1),
                SolverConfig(
                    visc=ViscosityParams(nu=1.0), grid=make_grid(2, 32),
                    dt=0.1, horizon=0.2,
                ),
            )


class TestPicard:
    def test_taylor_green_fast_convergence(self, grid2_small):
        # the free heat flow is already the fixed point, so 3 iterations suffice
        tg = taylor_green(grid2_small)
        visc = ViscosityParams(nu=1.0)
        cfg = SolverConfig(
            visc=visc, grid=grid2_small, dt=1e-2, horizon=0.3, scheme=Scheme.PICARD,
            snapshot_stride=10,
        )
        traj = solve_picard(tg, cfg, tol=1e-12, max_iters=3)
        for t, u in zip(traj.times, traj.snapshots):
            assert l2_norm(u - math.exp(-2.0 * float(t)) * tg) < 1e-11

    def test_zero_data(self, grid2_small):
        cfg = SolverConfig(
            visc=ViscosityParams(nu=1.0), grid=grid2_small, dt=1e-2, horizon=0.1,
            scheme=Scheme.PICARD,
        )
        traj = solve_picard(zero_vector(grid2_small), cfg, tol=1e-12, max_iters=5)
        assert all(l2_norm(u) == 0.0 for u in traj.snapshots)

    def test_agrees_with_stepper_small_amplitude(self, grid2_small):
        u0 = 0.2 * random_solenoidal(grid2_small, 77, 2.0, 5)
        visc = ViscosityParams(nu=0.2, epsilon=0.01, m=2)
        cfg_rk = SolverConfig(
            visc=visc, grid=grid2_small, dt=1e-3, horizon=0.25, snapshot_stride=50,
        )
        traj_rk = run_simulation(u0, cfg_rk)
        cfg_pc = SolverConfig(
            visc=visc, grid=grid2_small, dt=2.5e-4, horizon=0.25,
            scheme=Scheme.PICARD, snapshot_stride=200,
        )
        traj_pc = solve_picard(u0, cfg_pc, tol=1e-11, max_iters=60)
        assert np.allclose(traj_rk.times, traj_pc.times)
        worst = max(
            l2_norm(a - b) for a, b in zip(traj_rk.snapshots, traj_pc.snapshots)
        )
        assert worst < 1e-8
