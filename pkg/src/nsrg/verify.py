"""Desk-scale invariant suites behind the ``verify`` subcommand.

Each suite runs a fixed list of named checks at small grid sizes and short
horizons and reports a worst-case metric per check.  Everything is seeded, so
a fixed seed reproduces the report byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hodge, nonlinear
from .diagnostics import (
    check_apriori_bound,
    check_energy_estimate,
    gronwall_bound,
    ladyzhenskaya_norm,
    toy_perturbation,
)
from .evolution import (
    ForcingSpec,
    Scheme,
    SolverConfig,
    dissipation_symbol,
    initial_value_potential,
    run_simulation,
)
from .io import single_mode, taylor_green
from .spectral import (
    SpectralScalarField,
    SpectralVectorField,
    ViscosityParams,
    divergence,
    gradient,
    hermitianize,
    inner,
    l2_norm,
    laplacian_power,
    make_grid,
    random_solenoidal,
    sobolev_norm,
    zero_vector,
)


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    metric: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.metric <= self.tolerance


def _random_vector(grid, rng) -> SpectralVectorField:
    raw = rng.standard_normal(grid.vector_shape) + 1j * rng.standard_normal(
        grid.vector_shape
    )
    comps = np.stack([hermitianize(raw[j]) for j in range(grid.dim)])
    u = SpectralVectorField(grid, comps)
    return u * (1.0 / l2_norm(u))


def _random_scalar(grid, rng) -> SpectralScalarField:
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralScalarField(grid, hermitianize(raw))


def projector_suite(seed: int, fields: int = 25) -> list[CheckResult]:
    results = []
    for dim, k in ((2, 64), (3, 16)):
        grid = make_grid(dim, k)
        rng = np.random.default_rng(seed + dim)
        worst = {
            "idempotent": 0.0,
            "self_adjoint": 0.0,
            "kills_divergence": 0.0,
            "kills_gradients": 0.0,
            "hodge_sum": 0.0,
        }
        for _ in range(fields):
            u = _random_vector(grid, rng)
            v = _random_vector(grid, rng)
            p = _random_scalar(grid, rng)
            pu = hodge.leray_project(u)
            ppu = hodge.leray_project(pu)
            worst["idempotent"] = max(worst["idempotent"], l2_norm(ppu - pu))
            worst["self_adjoint"] = max(
                worst["self_adjoint"],
                abs(inner(pu, v) - inner(u, hodge.leray_project(v))),
            )
            worst["kills_divergence"] = max(
                worst["kills_divergence"], l2_norm(divergence(pu))
            )
            worst["kills_gradients"] = max(
                worst["kills_gradients"], l2_norm(hodge.leray_project(gradient(p)))
            )
            split = hodge.hodge_split(u)
            worst["hodge_sum"] = max(worst["hodge_sum"], l2_norm(split.recompose() - u))
        tag = f"dim{dim}"
        results += [
            CheckResult("projector", f"{tag}.idempotent", worst["idempotent"], 1e-12),
            CheckResult("projector", f"{tag}.self_adjoint", worst["self_adjoint"], 1e-12),
            CheckResult(
                "projector", f"{tag}.kills_divergence", worst["kills_divergence"], 1e-12
            ),
            CheckResult(
                "projector", f"{tag}.kills_gradients", worst["kills_gradients"], 1e-13
            ),
            CheckResult("projector", f"{tag}.hodge_sum", worst["hodge_sum"], 1e-12),
        ]
    return results


def nonlinear_suite(seed: int, triples: int = 40) -> list[CheckResult]:
    grid = make_grid(2, 32)
    rng = np.random.default_rng(seed)
    worst_anti = 0.0
    worst_neutral = 0.0
    worst_ratio = 0.0
    for i in range(triples):
        u = random_solenoidal(grid, seed * 1000 + i)
        v = _random_vector(grid, rng)
        w = _random_vector(grid, rng)
        rep = nonlinear.trilinear_form(u, v, w)
        scale = (
            l2_norm(u)
            * max(sobolev_norm(v, 1.0), sobolev_norm(w, 1.0))
            * max(l2_norm(v), l2_norm(w))
        )
        worst_anti = max(worst_anti, rep.antisymmetry_defect / scale)
        worst_ratio = max(worst_ratio, rep.bound_ratio)
        pn = nonlinear.projected_nonlinear_term(u)
        neutral = abs(inner(nonlinear.nonlinear_term(u), u)) / (
            l2_norm(u) ** 2 * sobolev_norm(u, 1.0)
        )
        worst_neutral = max(worst_neutral, neutral, abs(inner(pn, u)))
    tg = taylor_green(grid)
    tg_defect = l2_norm(nonlinear.projected_nonlinear_term(tg))
    return [
        CheckResult("nonlinear", "antisymmetry", worst_anti, 1e-11),
        CheckResult("nonlinear", "energy_neutrality", worst_neutral, 1e-11),
        CheckResult("nonlinear", "trilinear_bound_ratio", worst_ratio, 1.0),
        CheckResult("nonlinear", "taylor_green_projected_zero", tg_defect, 1e-12),
    ]


def evolution_suite(seed: int) -> list[CheckResult]:
    grid = make_grid(2, 16)
    visc = ViscosityParams(nu=0.5, epsilon=0.01, m=2)
    u = random_solenoidal(grid, seed)

    a = initial_value_potential(initial_value_potential(u, 0.3, visc), 0.2, visc)
    b = initial_value_potential(u, 0.5, visc)
    semigroup_defect = l2_norm(a - b)
    identity_defect = l2_norm(initial_value_potential(u, 0.0, visc) - u)

    tg = taylor_green(grid)
    cfg = SolverConfig(
        visc=ViscosityParams(nu=1.0), grid=grid, dt=1e-3, horizon=0.25,
        scheme=Scheme.IF_RK4, nonlinearity_enabled=True,
    )
    traj = run_simulation(tg, cfg)
    decay = math.exp(-2.0 * cfg.visc.nu * cfg.horizon)
    tg_defect = l2_norm(traj.snapshots[-1] - decay * traj.snapshots[0]) / l2_norm(tg)

    f = single_mode(grid, (1, 1))
    cfg_lin = SolverConfig(
        visc=ViscosityParams(nu=1.0), grid=grid, dt=2e-3, horizon=20.0,
        scheme=Scheme.IF_RK4, nonlinearity_enabled=False,
        forcing=ForcingSpec.steady(f), snapshot_stride=1000,
    )
    traj_lin = run_simulation(zero_vector(grid), cfg_lin)
    sigma = dissipation_symbol(grid, cfg_lin.visc)
    target = np.where(sigma > 0, 1.0, 0.0) * f.components / np.where(sigma > 0, sigma, 1.0)
    stokes_defect = float(
        np.max(np.abs(traj_lin.snapshots[-1].components - target))
    ) / float(np.max(np.abs(target)))

    return [
        CheckResult("evolution", "semigroup_law", semigroup_defect, 1e-13),
        CheckResult("evolution", "semigroup_identity", identity_defect, 1e-13),
        CheckResult("evolution", "taylor_green_decay", tg_defect, 1e-10),
        CheckResult("evolution", "steady_stokes_limit", stokes_defect, 1e-10),
    ]


def estimates_suite(seed: int) -> list[CheckResult]:
    grid = make_grid(2, 16)
    u0 = random_solenoidal(grid, seed)
    cfg = SolverConfig(
        visc=ViscosityParams(nu=0.2, epsilon=0.05, m=1),
        grid=grid, dt=2e-3, horizon=0.5, scheme=Scheme.IF_RK4,
        forcing=ForcingSpec.steady(0.3 * taylor_green(grid)),
    )
    traj = run_simulation(u0, cfg)
    energy = check_energy_estimate(traj)
    energy_excess = max(energy.max_residual, 0.0) / energy.tolerance
    apriori = check_apriori_bound(traj, c=1.0)
    apriori_excess = max(-apriori.margin, 0.0)

    times = np.linspace(0.0, 1.0, 201)
    bounds = gronwall_bound(np.full_like(times, 0.7), np.full_like(times, 2.0), times)
    analytic = 2.0 * np.exp(0.7 * times)
    gronwall_defect = float(np.max(np.abs(bounds.product_form - analytic))) / float(
        np.max(analytic)
    )
    ordering = float(np.max(bounds.integral_form - bounds.product_form))

    toy = toy_perturbation(2.0, 0.01, np.array([0.0, 0.1]))
    toy_defect = abs(toy[1] - 1.0 - math.exp(-10.0)) + abs(toy[0] - 2.0)

    linf_l2 = ladyzhenskaya_norm(traj, math.inf, 2.0)
    ledger_max = math.sqrt(float(np.max(traj.ledger.l2_sq)))
    lady_defect = abs(linf_l2 - ledger_max) / ledger_max

    return [
        CheckResult("estimates", "energy_residual_within_budget", energy_excess, 1.0),
        CheckResult("estimates", "apriori_bound_c1", apriori_excess, 0.0),
        CheckResult("estimates", "gronwall_product_form", gronwall_defect, 1e-4),
        CheckResult("estimates", "gronwall_ordering", ordering, 1e-6),
        CheckResult("estimates", "toy_boundary_layer", toy_defect, 1e-14),
        CheckResult("estimates", "ladyzhenskaya_inf_2", lady_defect, 1e-12),
    ]


SUITES = {
    "projector": projector_suite,
    "nonlinear": nonlinear_suite,
    "evolution": evolution_suite,
    "estimates": estimates_suite,
}


def run_suites(names, seed: int) -> tuple[list[CheckResult], bool]:
    results: list[CheckResult] = []
    for name in names:
        results.extend(SUITES[name](seed))
    return results, all(r.passed for r in results)
