"""Dealiased convection and its cancellation identities."""

import math

import numpy as np
import pytest

from conftest import phys_mesh, random_vector
from nsrg.nonlinear import (
    TRILINEAR_CONSTANT,
    TRILINEAR_REFERENCE_VISC,
    _to_padded_physical,
    convect,
    convect_complex,
    nonlinear_term,
    projected_nonlinear_term,
    quadratic_potential,
    trilinear_form,
)
from nsrg.spectral import (
    FieldError,
    SpectralVectorField,
    dirichlet_form,
    inner,
    l2_norm,
    make_grid,
    random_solenoidal,
    sobolev_norm,
    to_physical,
    vector_to_spectral,
)


def shear(grid):
    xx, yy = phys_mesh(grid)
    return vector_to_spectral(np.stack([np.sin(yy), np.zeros_like(yy)]), grid)


def tg(grid):
    xx, yy = phys_mesh(grid)
    return vector_to_spectral(
        np.stack([np.cos(xx) * np.sin(yy), -np.sin(xx) * np.cos(yy)]), grid
    )


class TestConvect:
    def test_shear_self_convection_vanishes(self, grid2):
        u = shear(grid2)
        assert l2_norm(convect(u, u)) < 1e-14

    def test_taylor_green_closed_form(self, grid2):
        xx, yy = phys_mesh(grid2)
        n = nonlinear_term(tg(grid2))
        expected = np.stack([-0.5 * np.sin(2 * xx), -0.5 * np.sin(2 * yy)])
        from nsrg.spectral import vector_to_physical

        assert np.max(np.abs(vector_to_physical(n) - expected)) < 1e-13

    def test_zero(self, grid2):
        z = SpectralVectorField(grid2, np.zeros(grid2.vector_shape, dtype=complex))
        assert l2_norm(convect(z, z)) == 0.0

    def test_grid_mismatch(self, grid2, grid2_small):
        with pytest.raises(FieldError):
            convect(random_vector(grid2, 1), random_vector(grid2_small, 1))

    def test_single_mode_closed_form(self, grid2):
        # (q_l e^{i k_l x} . grad) q_m e^{i k_m x} = i (q_l . k_m) q_m e^{i(k_l+k_m) x}
        kl, ql = np.array([1, 2]), np.array([2.0, -1.0])
        km_, qm = np.array([3, -1]), np.array([1.0, 3.0])
        el = np.zeros(grid2.vector_shape, dtype=complex)
        el[:, 1, 2] = ql
        em = np.zeros(grid2.vector_shape, dtype=complex)
        em[:, 3, -1] = qm
        out = convect_complex(
            SpectralVectorField(grid2, el), SpectralVectorField(grid2, em)
        )
        expected_amp = 1j * float(ql @ km_) * qm
        got = out.components[:, 4, 1]
        assert np.max(np.abs(got - expected_amp)) < 1e-13
        mask = np.ones(grid2.shape, dtype=bool)
        mask[4, 1] = False
        assert np.max(np.abs(out.components[:, mask])) < 1e-13

    def test_resolution_independence(self):
        # band-limited fields convect identically on a finer grid
        coarse = make_grid(2, 16)
        fine = make_grid(2, 32)
        u = random_solenoidal(coarse, 3, cutoff=4)
        v = random_vector(coarse, 4)

        def embed(fld, target):
            comps = np.zeros(target.vector_shape, dtype=complex)
            k = coarse.modes_per_axis
            idx = coarse.wavenumbers_1d % target.modes_per_axis
            comps[np.ix_(range(target.dim), idx, idx)] = fld.components
            return SpectralVectorField(target, comps)

        out_c = convect(u, v)
        out_f = convect(embed(u, fine), embed(v, fine))
        idx = coarse.wavenumbers_1d % fine.modes_per_axis
        sub = out_f.components[np.ix_(range(2), idx, idx)]
        # the coarse result loses the product modes beyond its band
        keep = np.abs(out_c.components) > 0
        assert np.max(np.abs((sub - out_c.components)[keep])) < 1e-13


class TestProjectedNonlinearTerm:
    def test_taylor_green_is_pure_gradient(self, grid2):
        assert l2_norm(projected_nonlinear_term(tg(grid2))) < 1e-13

    def test_energy_neutrality(self, grid2):
        for seed in range(10):
            u = random_solenoidal(grid2, 700 + seed)
            pn = projected_nonlinear_term(u)
            bound = 1e-11 * l2_norm(u) ** 2 * sobolev_norm(u, 1.0)
            assert abs(inner(pn, u)) <= bound
            assert abs(inner(nonlinear_term(u), u)) <= bound

    def test_shear(self, grid2):
        assert l2_norm(projected_nonlinear_term(shear(grid2))) < 1e-14

    def test_rejects_non_solenoidal(self, grid2):
        with pytest.raises(FieldError):
            projected_nonlinear_term(random_vector(grid2, 13))


class TestTrilinearForm:
    def test_antisymmetry(self, grid2):
        for seed in range(30):
            u = random_solenoidal(grid2, 1000 + seed)
            v = random_vector(grid2, 2000 + seed)
            w = random_vector(grid2, 3000 + seed)
            rep = trilinear_form(u, v, w)
            scale = (
                l2_norm(u)
                * max(sobolev_norm(v, 1.0), sobolev_norm(w, 1.0))
                * max(l2_norm(v), l2_norm(w))
            )
            assert rep.antisymmetry_defect <= 1e-11 * scale

    def test_diagonal_vanishes(self, grid2):
        u = random_solenoidal(grid2, 55)
        v = random_vector(grid2, 56)
        rep = trilinear_form(u, v, v)
        assert abs(rep.value) <= 1e-11 * l2_norm(u) * sobolev_norm(v, 1.0) * l2_norm(v)

    def test_quadrature_oracle(self, grid2):
        # independent reduction: pointwise quadrature on the oversampled grid
        from nsrg.spectral import gradient

        u = random_solenoidal(grid2, 60)
        v = random_vector(grid2, 61)
        w = random_vector(grid2, 62)
        rep = trilinear_form(u, v, w)

        grid = grid2
        cell = (2 * math.pi / grid.padded_modes) ** grid.dim
        total = 0.0
        u_phys = [_to_padded_physical(u.components[j], grid) for j in range(2)]
        for c in range(2):
            dv = gradient(v.component(c))
            conv_c = sum(
                u_phys[j] * _to_padded_physical(dv.components[j], grid)
                for j in range(2)
            )
            total += float(
                np.sum(conv_c * _to_padded_physical(w.components[c], grid)) * cell
            )
        assert abs(rep.value - total) < 1e-12 * max(1.0, abs(total))

    def test_calibrated_bound_holds(self):
        # re-run the frozen calibration recipe and confirm the 2x headroom
        ratios = []
        g2 = make_grid(2, 32)
        for i in range(150):
            u = random_solenoidal(g2, i)
            v = random_vector(g2, 1000 + i)
            w = random_vector(g2, 5000 + i)
            ratios.append(trilinear_form(u, v, w).bound_ratio)
        g3 = make_grid(3, 12)
        for i in range(50):
            u = random_solenoidal(g3, 500 + i, 2.0, 4)
            v = random_vector(g3, 2000 + i)
            w = random_vector(g3, 7000 + i)
            ratios.append(trilinear_form(u, v, w).bound_ratio)
        worst = max(ratios)
        assert worst <= 1.0
        # the frozen constant is 2x the observed max, so the worst ratio ~ 1/2
        assert 0.45 <= worst <= 0.55


class TestQuadraticPotential:
    def test_constant(self, grid2):
        comps = np.zeros(grid2.vector_shape, dtype=complex)
        comps[0, 0, 0] = 1.0
        v = SpectralVectorField(grid2, comps)
        q = quadratic_potential(v, v)
        vals = to_physical(q)
        assert np.max(np.abs(vals - 0.5)) < 1e-14

    def test_taylor_green(self, grid2):
        xx, yy = phys_mesh(grid2)
        v = tg(grid2)
        q = quadratic_potential(v, v)
        expected = 0.5 * (
            np.cos(xx) ** 2 * np.sin(yy) ** 2 + np.sin(xx) ** 2 * np.cos(yy) ** 2
        )
        assert np.max(np.abs(to_physical(q) - expected)) < 1e-13

    def test_symmetry(self, grid2):
        v = random_vector(grid2, 81)
        w = random_vector(grid2, 82)
        a = quadratic_potential(v, w)
        b = quadratic_potential(w, v)
        assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13
