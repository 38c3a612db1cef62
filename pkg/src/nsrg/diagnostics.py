"""Energy bookkeeping and the estimate checks run against trajectories.

The ledger records, per time sample, the squared L2 norm, the energy form
D(u), the instantaneous dissipation 2(Vu,u) and forcing work 2Re(f,u), plus
their running trapezoid integrals.  The checks in this module replay the
a priori inequalities on that record with an explicit quadrature budget
tol_q = c_q * dt^2 * max D(u): the analysis works with exact time integrals,
the discrete ledger does not.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .spectral import (
    SpectralVectorField,
    ViscosityParams,
    h1_seminorm_sq,
    hyperviscous_seminorm_sq,
    inner,
    l2_norm,
    relative_divergence,
    sobolev_norm,
    vector_to_physical,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .evolution import SolverConfig, Trajectory

DEFAULT_QUADRATURE_SAFETY = 4.0


@dataclass(frozen=True)
class EnergyLedger:
    """Per-sample energy record of a run; all arrays share one time axis."""

    times: np.ndarray
    l2_sq: np.ndarray
    dirichlet: np.ndarray
    h1_semi_sq: np.ndarray
    visc_dissip: np.ndarray
    work: np.ndarray
    visc_dissip_cum: np.ndarray
    work_cum: np.ndarray
    div_residual: np.ndarray
    f_l2_sq: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


class LedgerBuilder:
    """Accumulates ledger rows during a run; finalize() closes the integrals."""

    def __init__(self, visc: ViscosityParams):
        self.visc = visc
        self.rows: list[tuple[float, ...]] = []

    def append(self, t: float, u: SpectralVectorField, f: SpectralVectorField | None):
        l2 = inner(u, u)
        h1s = h1_seminorm_sq(u)
        hms = hyperviscous_seminorm_sq(u, self.visc.m)
        dirichlet = self.visc.epsilon * hms + self.visc.nu * h1s + l2
        dissip = 2.0 * (self.visc.epsilon * hms + self.visc.nu * h1s)
        work = 2.0 * inner(f, u) if f is not None else 0.0
        f_l2 = inner(f, f) if f is not None else 0.0
        self.rows.append(
            (t, l2, dirichlet, h1s, dissip, work, relative_divergence(u), f_l2)
        )

    def finalize(self) -> EnergyLedger:
        data = np.array(self.rows, dtype=float)
        times = data[:, 0]
        dissip = data[:, 4]
        work = data[:, 5]
        return EnergyLedger(
            times=times,
            l2_sq=data[:, 1],
            dirichlet=data[:, 2],
            h1_semi_sq=data[:, 3],
            visc_dissip=dissip,
            work=work,
            visc_dissip_cum=_cumtrapz(dissip, times),
            work_cum=_cumtrapz(work, times),
            div_residual=data[:, 6],
            f_l2_sq=data[:, 7],
        )


def _cumtrapz(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(values) > 1:
        dt = np.diff(times)
        out[1:] = np.cumsum(0.5 * dt * (values[:-1] + values[1:]))
    return out


def _weighted_cum_integral(values, times, rate) -> np.ndarray:
    """I(t_i) = integral_0^{t_i} exp(rate*(t_i - s)) g(s) ds, trapezoid in g."""
    out = np.zeros_like(values)
    for i in range(1, len(values)):
        h = times[i] - times[i - 1]
        grow = math.exp(rate * h)
        out[i] = grow * out[i - 1] + 0.5 * h * (grow * values[i - 1] + values[i])
    return out


def quadrature_tolerance(traj: "Trajectory", safety: float = DEFAULT_QUADRATURE_SAFETY) -> float:
    return safety * traj.config.dt ** 2 * float(np.max(traj.ledger.dirichlet))


@dataclass(frozen=True)
class EnergyEstimateReport:
    residuals: np.ndarray
    tolerance: float
    max_residual: float
    passed: bool


def check_energy_estimate(
    traj: "Trajectory", safety: float = DEFAULT_QUADRATURE_SAFETY
) -> EnergyEstimateReport:
    """Replay the energy balance |u(t)|^2 + 2 int (Vu,u) <= |u0|^2 + 2 Re int (f,u).

    For the discrete solution the two sides agree up to time-quadrature error,
    so the signed residual must stay below tol_q.
    """
    led = traj.ledger
    residuals = (led.l2_sq + led.visc_dissip_cum) - (led.l2_sq[0] + led.work_cum)
    tol = quadrature_tolerance(traj, safety)
    max_res = float(np.max(residuals))
    return EnergyEstimateReport(
        residuals=residuals, tolerance=tol, max_residual=max_res, passed=max_res <= tol
    )


@dataclass(frozen=True)
class AprioriBoundReport:
    passed: bool
    margin: float
    lhs: np.ndarray
    rhs: np.ndarray


def check_apriori_bound(
    traj: "Trajectory", c: float, safety: float = DEFAULT_QUADRATURE_SAFETY
) -> AprioriBoundReport:
    """Exponentially weighted a priori bound with a free constant c > 0.

    Checks, per sample,
        |u(t)|^2 + 2 nu int exp((t-s)/c) |grad u|^2 ds
            <= exp(t/c) |u0|^2 + c int exp((t-s)/c) |f|^2 ds + tol_q.
    The weight degenerates to the plain energy estimate as c grows.
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    led = traj.ledger
    nu = traj.config.visc.nu
    rate = 1.0 / c
    lhs = led.l2_sq + 2.0 * nu * _weighted_cum_integral(led.h1_semi_sq, led.times, rate)
    rhs = np.exp(rate * led.times) * led.l2_sq[0] + c * _weighted_cum_integral(
        led.f_l2_sq, led.times, rate
    )
    tol = quadrature_tolerance(traj, safety)
    margin = float(np.min(rhs + tol - lhs))
    return AprioriBoundReport(passed=margin >= 0.0, margin=margin, lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class GronwallBounds:
    integral_form: np.ndarray
    product_form: np.ndarray | None


def gronwall_bound(a: Sequence[float], b: Sequence[float], times: Sequence[float]) -> GronwallBounds:
    """Integral-form Gronwall envelope for y <= b + int a*y, by trapezoid.

    Returns b(t) + int_0^t b(s) a(s) exp(int_s^t a) ds and, when b is
    nondecreasing, also the product form b(t) exp(int_0^t a).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(a < 0):
        raise ValueError("gronwall_bound requires a >= 0 samplewise")
    big_a = _cumtrapz(a, times)
    # integral_0^t b a exp(-A(s)) ds, then scale by exp(A(t))
    core = _cumtrapz(b * a * np.exp(-big_a), times)
    integral_form = b + np.exp(big_a) * core
    product_form = None
    if np.all(np.diff(b) >= 0):
        product_form = b * np.exp(big_a)
    return GronwallBounds(integral_form=integral_form, product_form=product_form)


def lq_norm(u: SpectralVectorField, q: float) -> float:
    """Spatial L^q norm of |u| by quadrature on the oversampled grid."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    from .nonlinear import _to_padded_physical

    grid = u.grid
    mag_sq = None
    for c in range(grid.dim):
        comp = _to_padded_physical(u.components[c], grid)
        mag_sq = comp ** 2 if mag_sq is None else mag_sq + comp ** 2
    cell = (2.0 * math.pi / grid.padded_modes) ** grid.dim
    if math.isinf(q):
        return float(np.max(np.sqrt(mag_sq)))
    return float(np.sum(mag_sq ** (q / 2.0)) * cell) ** (1.0 / q)


def ladyzhenskaya_norm(traj: "Trajectory", r: float, q: float) -> float:
    """Mixed norm (int ||u(t)||_{L^q}^r dt)^(1/r); r = inf takes the sup in time."""
    spatial = np.array([lq_norm(u, q) for u in traj.snapshots])
    if math.isinf(r):
        return float(np.max(spatial))
    if r < 1:
        raise ValueError(f"r must be >= 1 or inf, got {r}")
    times = np.asarray(traj.times, dtype=float)
    return float(np.trapezoid(spatial ** r, times)) ** (1.0 / r)


def ladyzhenskaya_exponent_ok(r: float, q: float, dim: int) -> bool:
    """Whether (r, q) sits in the uniqueness class: q > dim and 2/r + dim/q <= 1."""
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    return q > dim and 2.0 * inv_r + dim / q <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# vanishing-regularization sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    """Pairwise differences along a descending sequence of epsilon values."""

    epsilons: tuple[float, ...]
    pairwise_sup_diff: np.ndarray
    pairwise_h1_int_diff: np.ndarray
    fitted_rate: float
    certified_constant: float
    hm_sup: np.ndarray
    hm_uniform: bool
    reference_limit: "Trajectory"


def _run_one_epsilon(args):
    from .evolution import run_simulation

    u0, cfg = args
    return run_simulation(u0, cfg)


def epsilon_sweep(
    u0: SpectralVectorField,
    base_cfg: "SolverConfig",
    epsilons: Sequence[float],
    jobs: int = 1,
) -> "SweepResult":
    """Run the same problem across descending epsilons and compare neighbours.

    Records sup-in-time L2 differences and integrated H1-seminorm differences
    for consecutive pairs, fits the log-log rate on the last half of the pair
    list, and tracks sup_t ||u_eps||_{H^m} per run so non-uniformity in the
    regularization is visible rather than assumed.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 2:
        raise ValueError("need at least two epsilon values")
    if any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(b > a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be non-increasing")

    configs = [replace(base_cfg, visc=replace(base_cfg.visc, epsilon=e)) for e in eps]
    tasks = [(u0, cfg) for cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trajectories = list(pool.map(_run_one_epsilon, tasks))
    else:
        trajectories = [_run_one_epsilon(t) for t in tasks]

    m = base_cfg.visc.m
    sup_diffs, h1_ints = [], []
    for ta, tb in zip(trajectories, trajectories[1:]):
        diffs = [a - b for a, b in zip(ta.snapshots, tb.snapshots)]
        sup_diffs.append(max(l2_norm(d) for d in diffs))
        h1_vals = np.array([h1_seminorm_sq(d) for d in diffs])
        h1_ints.append(float(np.trapezoid(h1_vals, np.asarray(ta.times))))
    sup_diffs = np.array(sup_diffs)
    h1_ints = np.array(h1_ints)

    gaps = np.array([a - b for a, b in zip(eps, eps[1:])])
    usable = (gaps > 0) & (sup_diffs > 0)
    if np.count_nonzero(usable) >= 2:
        lg, ld = np.log(gaps[usable]), np.log(sup_diffs[usable])
        half = math.ceil(len(lg) / 2)
        fitted = float(np.polyfit(lg[-half:], ld[-half:], 1)[0]) if half >= 2 else float(
            np.polyfit(lg, ld, 1)[0]
        )
    else:
        fitted = float("nan")

    chat = float(np.max(sup_diffs[usable] ** 2 / gaps[usable])) if np.any(usable) else 0.0

    hm_sup = np.array(
        [max(sobolev_norm(u, m) for u in tr.snapshots) for tr in trajectories]
    )
    hm_uniform = bool(np.max(hm_sup) <= 1.5 * np.min(hm_sup))

    return SweepResult(
        epsilons=tuple(eps),
        pairwise_sup_diff=sup_diffs,
        pairwise_h1_int_diff=h1_ints,
        fitted_rate=fitted,
        certified_constant=chat,
        hm_sup=hm_sup,
        hm_uniform=hm_uniform,
        reference_limit=trajectories[-1],
    )


def toy_perturbation(u0: float, epsilon: float, times: Sequence[float]) -> np.ndarray:
    """Closed-form boundary-layer family (u0 - 1) exp(-t/eps) + 1.

    Solves eps*u' + u = 1, u(0) = u0.  Its sup distance to the limit u == 1
    over any interval containing t = 0 equals |u0 - 1| no matter how small
    eps is, while on [delta, T] the distance decays like exp(-delta/eps).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    t = np.asarray(times, dtype=float)
    return (u0 - 1.0) * np.exp(-t / epsilon) + 1.0
