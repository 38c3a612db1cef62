"""Pseudospectral solver and diagnostics for regularized incompressible
Navier-Stokes on the periodic torus."""

__version__ = "0.1.0"

from .spectral import (
    Grid,
    SpectralScalarField,
    SpectralVectorField,
    ViscosityParams,
    dirichlet_form,
    divergence,
    gradient,
    inner,
    l2_norm,
    laplacian_power,
    make_grid,
    random_solenoidal,
    sobolev_norm,
    to_physical,
    to_spectral,
)
from .hodge import (
    HodgeSplit,
    green_operator,
    harmonic_projection,
    hodge_split,
    leray_project,
    recover_pressure,
)
from .nonlinear import (
    TrilinearReport,
    convect,
    nonlinear_term,
    projected_nonlinear_term,
    quadratic_potential,
    trilinear_form,
)
from .evolution import (
    BlowUpError,
    ForcingSpec,
    GalerkinState,
    PicardDivergenceError,
    Quadrature,
    Scheme,
    SolverConfig,
    Trajectory,
    galerkin_state,
    initial_value_potential,
    run_galerkin_oracle,
    run_simulation,
    semigroup_factor,
    solve_picard,
    step,
    volume_potential,
)
from .diagnostics import (
    EnergyLedger,
    SweepResult,
    check_apriori_bound,
    check_energy_estimate,
    epsilon_sweep,
    gronwall_bound,
    ladyzhenskaya_exponent_ok,
    ladyzhenskaya_norm,
    toy_perturbation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
