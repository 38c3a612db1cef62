"""Semigroup, Duhamel potentials, and the three time solvers.

The dissipative operator V acts mode-wise with symbol
sigma(k) = nu|k|^2 + eps|k|^(2m), so exp(-tV) is exact and cheap.  On top of
that symbol the module provides:

* an integrating-factor stepper (Lawson Euler / RK4) that treats the stiff
  linear part exactly and Runge-Kuttas the projected convection and forcing;
* a dense Galerkin oracle that rewrites the dynamics as an ODE for the
  coefficients in the polarization eigenbasis of V + Id, with the quadratic
  interaction tensor precomputed through the nonlinear module;
* a fixed-point solver for the mild (Volterra) form of the equations, with
  interval bisection when the iteration fails to contract.

The stepper is the production path; the other two exist to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .diagnostics import EnergyLedger, LedgerBuilder
from .hodge import leray_project
from .nonlinear import convect, convect_complex
from .spectral import (
    FieldError,
    Grid,
    SpectralVectorField,
    ViscosityParams,
    inner,
    l2_norm,
    require_order_admissible,
    zero_vector,
)

BLOWUP_NORM_FACTOR = 1e6


class BlowUpError(RuntimeError):
    """Raised when a run produces non-finite data or runaway norm growth."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


class PicardDivergenceError(RuntimeError):
    """Fixed-point iteration failed even after interval bisection."""


class GalerkinBasisError(ValueError):
    """Dense oracle basis would be too large to assemble."""


class Scheme(str, Enum):
    IF_RK4 = "IF_RK4"
    IF_EULER = "IF_EULER"
    GALERKIN_ODE = "GALERKIN_ODE"
    PICARD = "PICARD"


class ForcingKind(str, Enum):
    ZERO = "ZERO"
    STEADY_FIELD = "STEADY_FIELD"
    TIME_HARMONIC = "TIME_HARMONIC"
    CUSTOM_SNAPSHOTS = "CUSTOM_SNAPSHOTS"


@dataclass(frozen=True)
class ForcingSpec:
    """Outer force field f(t); sampled at whatever stage times a scheme needs."""

    kind: ForcingKind = ForcingKind.ZERO
    fld: SpectralVectorField | None = None
    omega: float = 0.0
    phase: float = 0.0
    times: tuple[float, ...] = ()
    snapshots: tuple[SpectralVectorField, ...] = ()

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls()

    @classmethod
    def steady(cls, fld: SpectralVectorField) -> "ForcingSpec":
        return cls(kind=ForcingKind.STEADY_FIELD, fld=fld)

    @classmethod
    def time_harmonic(
        cls, fld: SpectralVectorField, omega: float, phase: float = 0.0
    ) -> "ForcingSpec":
        return cls(kind=ForcingKind.TIME_HARMONIC, fld=fld, omega=omega, phase=phase)

    @classmethod
    def from_snapshots(
        cls, times: Sequence[float], snapshots: Sequence[SpectralVectorField]
    ) -> "ForcingSpec":
        if len(times) != len(snapshots) or len(times) < 2:
            raise ValueError("need matching times and snapshots, at least two")
        if np.any(np.diff(np.asarray(times)) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        return cls(
            kind=ForcingKind.CUSTOM_SNAPSHOTS,
            times=tuple(float(t) for t in times),
            snapshots=tuple(snapshots),
        )

    @property
    def is_zero(self) -> bool:
        return self.kind == ForcingKind.ZERO

    def validate_for(self, grid: Grid) -> None:
        if self.kind in (ForcingKind.STEADY_FIELD, ForcingKind.TIME_HARMONIC):
            if self.fld is None or self.fld.grid != grid:
                raise ValueError("forcing payload missing or on the wrong grid")
        if self.kind == ForcingKind.CUSTOM_SNAPSHOTS:
            if any(s.grid != grid for s in self.snapshots):
                raise ValueError("forcing snapshots on the wrong grid")

    def sample(self, t: float) -> SpectralVectorField | None:
        if self.kind == ForcingKind.ZERO:
            return None
        if self.kind == ForcingKind.STEADY_FIELD:
            return self.fld
        if self.kind == ForcingKind.TIME_HARMONIC:
            return math.cos(self.omega * t + self.phase) * self.fld
        # linear interpolation in time, clamped at the ends
        ts = self.times
        if t <= ts[0]:
            return self.snapshots[0]
        if t >= ts[-1]:
            return self.snapshots[-1]
        i = int(np.searchsorted(ts, t)) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self.snapshots[i] + w * self.snapshots[i + 1]


@dataclass(frozen=True)
class SolverConfig:
    """Physical and numerical parameters of one run."""

    visc: ViscosityParams
    grid: Grid
    dt: float
    horizon: float
    scheme: Scheme = Scheme.IF_RK4
    nonlinearity_enabled: bool = True
    forcing: ForcingSpec = field(default_factory=ForcingSpec.zero)
    snapshot_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.dt > self.horizon * (1 + 1e-12):
            raise ValueError("dt must not exceed the horizon")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.scheme == Scheme.GALERKIN_ODE and self.grid.modes_per_axis > 16:
            raise ValueError("GALERKIN_ODE is a dense oracle; modes_per_axis <= 16")
        require_order_admissible(self.visc, self.grid.dim)
        self.forcing.validate_for(self.grid)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots plus the per-step energy ledger of one run."""

    times: np.ndarray
    snapshots: tuple[SpectralVectorField, ...]
    ledger: EnergyLedger
    config: SolverConfig


# ---------------------------------------------------------------------------
# semigroup and parabolic potentials
# ---------------------------------------------------------------------------


def dissipation_symbol(grid: Grid, visc: ViscosityParams) -> np.ndarray:
    """sigma(k) = nu|k|^2 + eps|k|^(2m) on the full grid."""
    return visc.nu * grid.k_sq + visc.epsilon * grid.k_sq ** visc.m


def semigroup_factor(k: Sequence[float], t: float, visc: ViscosityParams) -> float:
    """exp(-t sigma(k)) for a single wavevector; 1 at t = 0 and at k = 0."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    ksq = float(np.dot(k, k))
    return math.exp(-t * (visc.nu * ksq + visc.epsilon * ksq ** visc.m))


def initial_value_potential(
    u0: SpectralVectorField, t: float, visc: ViscosityParams
) -> SpectralVectorField:
    """Heat flow of the initial state: mode-wise decay by the semigroup factor."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    decay = np.exp(-t * dissipation_symbol(u0.grid, visc))
    return SpectralVectorField(u0.grid, u0.components * decay, _trust=True)


class Quadrature(str, Enum):
    TRAPEZOID = "trapezoid"
    # exact per interval for sources linear in time (hence for constants)
    EXPONENTIAL = "exponential_exact_for_constant"


# Taylor coefficients of (z - 1 + e^-z)/z^2 and (1 - (1+z) e^-z)/z^2 in -z;
# 16 terms keep the series branch below rounding error up to z = 0.5.
_PHI1_COEFFS = tuple(1.0 / math.factorial(n + 2) for n in range(16))
_PHI0_COEFFS = tuple((n + 1.0) / math.factorial(n + 2) for n in range(16))


def _phi_series(z: np.ndarray, coeffs) -> np.ndarray:
    acc = np.full_like(z, coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = acc * (-z) + c
    return acc


def _phi_weights(z: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Weights (w0, w1) with int_0^h e^{-(h-s) sigma} (g0 + (g1-g0) s/h) ds
    = w0 g0 + w1 g1, where z = h*sigma.  A series branch below z = 0.5 avoids
    the catastrophic cancellation of the closed forms near zero.
    """
    small = z < 0.5
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        ez = np.exp(-z)
    w0 = np.where(small, _phi_series(z, _PHI0_COEFFS), (1.0 - (1.0 + z) * ez) / zs ** 2)
    w1 = np.where(small, _phi_series(z, _PHI1_COEFFS), (z - 1.0 + ez) / zs ** 2)
    return h * w0, h * w1


def volume_potential(
    samples: Sequence[SpectralVectorField],
    span: float,
    visc: ViscosityParams,
    quadrature: Quadrature = Quadrature.EXPONENTIAL,
) -> SpectralVectorField:
    """Duhamel integral int_0^span exp(-(span-s)V) g(s) ds from equispaced samples.

    The exponential rule treats the semigroup factor exactly and the source as
    piecewise linear, so a time-constant source integrates to the closed form
    (1 - exp(-span*sigma))/sigma per mode (span*g for the sigma = 0 mode).
    """
    if len(samples) == 0:
        raise ValueError("empty sample sequence")
    grid = samples[0].grid
    if span == 0.0:
        return zero_vector(grid)
    if len(samples) == 1:
        raise ValueError("need at least two samples to integrate over a positive span")
    if span < 0:
        raise ValueError("span must be nonnegative")
    h = span / (len(samples) - 1)
    sigma = dissipation_symbol(grid, visc)
    decay = np.exp(-h * sigma)
    quadrature = Quadrature(quadrature)

    acc = np.zeros(grid.vector_shape, dtype=np.complex128)
    if quadrature == Quadrature.EXPONENTIAL:
        w0, w1 = _phi_weights(h * sigma, h)
        for prev, cur in zip(samples, samples[1:]):
            acc = decay * acc + w0 * prev.components + w1 * cur.components
    else:
        for prev, cur in zip(samples, samples[1:]):
            acc = decay * acc + 0.5 * h * (decay * prev.components + cur.components)
    return SpectralVectorField(grid, acc, _trust=True)


# ---------------------------------------------------------------------------
# integrating-factor stepper
# ---------------------------------------------------------------------------


class _Stepper:
    """Precomputed exponential factors plus the projected right-hand side."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        sigma = dissipation_symbol(cfg.grid, cfg.visc)
        self.e_full = np.exp(-cfg.dt * sigma)
        self.e_half = np.exp(-0.5 * cfg.dt * sigma)
        self._factors: dict[float, tuple[np.ndarray, np.ndarray]] = {
            cfg.dt: (self.e_full, self.e_half)
        }
        self._sigma = sigma

    def factors(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        got = self._factors.get(h)
        if got is None:
            got = (np.exp(-h * self._sigma), np.exp(-0.5 * h * self._sigma))
            self._factors[h] = got
        return got

    def rhs(self, comps: np.ndarray, t: float) -> np.ndarray:
        """P f(t) - P N(u), as a raw coefficient array."""
        cfg = self.cfg
        out = None
        if cfg.nonlinearity_enabled:
            u = SpectralVectorField(self.grid, comps, _trust=True)
            out = -leray_project(convect(u, u)).components
        f = cfg.forcing.sample(t)
        if f is not None:
            pf = leray_project(f).components
            out = pf if out is None else out + pf
        if out is None:
            out = np.zeros(self.grid.vector_shape, dtype=np.complex128)
        return out

    def advance(self, comps: np.ndarray, t: float, h: float) -> np.ndarray:
        e_full, e_half = self.factors(h)
        if self.cfg.scheme == Scheme.IF_EULER:
            return e_full * (comps + h * self.rhs(comps, t))
        # Lawson RK4: classical RK4 on the exponentially transformed variable
        k1 = self.rhs(comps, t)
        u1 = e_half * (comps + 0.5 * h * k1)
        k2 = self.rhs(u1, t + 0.5 * h)
        u2 = e_half * comps + 0.5 * h * k2
        k3 = self.rhs(u2, t + 0.5 * h)
        u3 = e_full * comps + h * e_half * k3
        k4 = self.rhs(u3, t + h)
        return e_full * comps + (h / 6.0) * (
            e_full * k1 + 2.0 * e_half * (k2 + k3) + k4
        )


def step(state: SpectralVectorField, t: float, cfg: SolverConfig) -> SpectralVectorField:
    """One integrating-factor step of length cfg.dt starting at time t."""
    if cfg.scheme not in (Scheme.IF_RK4, Scheme.IF_EULER):
        raise ValueError(f"step() supports the IF schemes only, got {cfg.scheme}")
    if state.grid != cfg.grid:
        raise FieldError("state is not on the configured grid")
    out = _Stepper(cfg).advance(state.components, t, cfg.dt)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise BlowUpError(f"non-finite coefficients after step at t={t}", t)
    return SpectralVectorField(state.grid, out, _trust=True)


def _time_steps(dt: float, horizon: float) -> list[float]:
    n_full = int(math.floor(horizon / dt + 1e-9))
    steps = [dt] * n_full
    rem = horizon - n_full * dt
    if rem > 1e-12 * max(1.0, horizon):
        steps.append(rem)
    return steps


def run_simulation(u0: SpectralVectorField, cfg: SolverConfig) -> Trajectory:
    """Integrate the projected dynamics with the configured IF scheme.

    The initial state is Leray-projected, the ledger gets a row per step, and
    snapshots are kept every ``snapshot_stride`` steps (the final state is
    always kept).  Deterministic for a fixed config.
    """
    if cfg.scheme not in (Scheme.IF_RK4, Scheme.IF_EULER):
        raise ValueError(f"run_simulation drives IF schemes only, got {cfg.scheme}")
    if u0.grid != cfg.grid:
        raise FieldError("initial state is not on the configured grid")

    stepper = _Stepper(cfg)
    state = leray_project(u0)
    norm0_sq = float(np.sum(np.abs(state.components) ** 2))

    builder = LedgerBuilder(cfg.visc)
    last_good = 0.0
    snap_times = [0.0]
    snapshots = [state]
    builder.append(0.0, state, cfg.forcing.sample(0.0))

    t = 0.0
    for i, h in enumerate(_time_steps(cfg.dt, cfg.horizon), start=1):
        comps = stepper.advance(state.components, t, h)
        t += h
        if not np.all(np.isfinite(comps.view(np.float64))):
            raise BlowUpError(f"non-finite coefficients at t={t}", last_good)
        norm_sq = float(np.sum(np.abs(comps) ** 2))
        if norm0_sq > 0 and norm_sq > BLOWUP_NORM_FACTOR ** 2 * norm0_sq:
            raise BlowUpError(f"norm grew beyond {BLOWUP_NORM_FACTOR}x at t={t}", last_good)
        last_good = t
        state = SpectralVectorField(cfg.grid, comps, _trust=True)
        builder.append(t, state, cfg.forcing.sample(t))
        if i % cfg.snapshot_stride == 0:
            snapshots.append(state)
            snap_times.append(t)

    if snap_times[-1] != last_good and last_good > 0.0:
        snapshots.append(state)
        snap_times.append(last_good)

    return Trajectory(
        times=np.array(snap_times),
        snapshots=tuple(snapshots),
        ledger=builder.finalize(),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# dense Galerkin oracle
# ---------------------------------------------------------------------------

_GALERKIN_TENSOR_BYTES_CAP = 512 * 2 ** 20


def _transverse_polarizations(k: np.ndarray) -> list[np.ndarray]:
    """Deterministic orthonormal basis of the plane orthogonal to k."""
    if len(k) == 2:
        q = np.array([-k[1], k[0]], dtype=float)
        return [q / np.linalg.norm(q)]
    a = np.zeros(3)
    a[int(np.argmin(np.abs(k)))] = 1.0
    q1 = np.cross(a, k).astype(float)
    q1 /= np.linalg.norm(q1)
    q2 = np.cross(k, q1).astype(float)
    q2 /= np.linalg.norm(q2)
    return [q1, q2]


@dataclass(frozen=True)
class GalerkinState:
    """Solenoidal field written in the polarization eigenbasis of V + Id."""

    wavevectors: tuple[tuple[int, ...], ...]
    polarizations: np.ndarray  # (n_basis, dim), real
    eigenvalues: np.ndarray  # 1 + sigma(k), >= 1
    coeffs: np.ndarray  # complex, (n_basis,)
    grid: Grid

    def to_field(self) -> SpectralVectorField:
        comps = np.zeros(self.grid.vector_shape, dtype=np.complex128)
        for i, kvec in enumerate(self.wavevectors):
            idx = tuple(int(kj) % self.grid.modes_per_axis for kj in kvec)
            comps[(slice(None),) + idx] += self.coeffs[i] * self.polarizations[i]
        return SpectralVectorField(self.grid, comps, _trust=True)


class _GalerkinBasis:
    def __init__(self, grid: Grid, visc: ViscosityParams):
        self.grid = grid
        wavevectors: list[tuple[int, ...]] = []
        pols: list[np.ndarray] = []
        sigmas: list[float] = []
        nyq = -grid.modes_per_axis // 2
        for idx in np.ndindex(grid.shape):
            k = np.array([grid.wavenumbers_1d[j] for j in idx])
            if np.any(k == nyq):
                continue
            ksq = float(np.dot(k, k))
            if ksq == 0.0:
                for j in range(grid.dim):
                    e = np.zeros(grid.dim)
                    e[j] = 1.0
                    wavevectors.append(tuple(int(x) for x in k))
                    pols.append(e)
                    sigmas.append(0.0)
                continue
            sigma = visc.nu * ksq + visc.epsilon * ksq ** visc.m
            for q in _transverse_polarizations(k):
                wavevectors.append(tuple(int(x) for x in k))
                pols.append(q)
                sigmas.append(sigma)
        self.wavevectors = tuple(wavevectors)
        self.polarizations = np.array(pols)
        self.sigma = np.array(sigmas)
        self.n = len(wavevectors)
        if self.n ** 3 * 16 > _GALERKIN_TENSOR_BYTES_CAP:
            raise GalerkinBasisError(
                f"basis too large for the dense oracle: {self.n} elements"
            )
        flat = [
            tuple(int(kj) % grid.modes_per_axis for kj in kvec)
            for kvec in wavevectors
        ]
        self._gather = tuple(np.array(axis) for axis in zip(*flat))

    def project(self, comps: np.ndarray) -> np.ndarray:
        """Coefficients of a (projected) field in this basis."""
        vals = comps[(slice(None),) + self._gather]  # (dim, n)
        return np.einsum("ic,ci->i", self.polarizations, vals)

    def basis_field(self, i: int) -> SpectralVectorField:
        comps = np.zeros(self.grid.vector_shape, dtype=np.complex128)
        idx = tuple(int(kj) % self.grid.modes_per_axis for kj in self.wavevectors[i])
        comps[(slice(None),) + idx] = self.polarizations[i]
        return SpectralVectorField(self.grid, comps, _trust=True)

    def state(self, coeffs: np.ndarray) -> GalerkinState:
        return GalerkinState(
            wavevectors=self.wavevectors,
            polarizations=self.polarizations,
            eigenvalues=1.0 + self.sigma,
            coeffs=coeffs,
            grid=self.grid,
        )


def galerkin_state(
    u: SpectralVectorField, visc: ViscosityParams
) -> GalerkinState:
    """Expand a solenoidal field in the polarization eigenbasis of V + Id."""
    basis = _GalerkinBasis(u.grid, visc)
    return basis.state(basis.project(u.components))


def _interaction_tensor(basis: _GalerkinBasis) -> np.ndarray:
    """a[i, l, m] = projection of N(e_l, e_m) onto e_i, via the nonlinear module.

    Basis elements are single complex exponentials, so the complex-capable
    convection is required.
    """
    n = basis.n
    tensor = np.zeros((n, n, n), dtype=np.complex128)
    fields = [basis.basis_field(i) for i in range(n)]
    for l in range(n):
        for m in range(n):
            nlm = convect_complex(fields[l], fields[m])
            tensor[:, l, m] = basis.project(nlm.components)
    return tensor


def run_galerkin_oracle(
    u0: SpectralVectorField,
    cfg: SolverConfig,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Trajectory:
    """Dense coefficient-ODE reference solution on a small grid.

    Rewrites the projected dynamics as c' + sigma c + sum a[i,l,m] c_l c_m =
    (f, e_i) in the polarization eigenbasis and hands the system to an
    adaptive Runge-Kutta integrator.
    """
    if cfg.grid.modes_per_axis > 16:
        raise GalerkinBasisError("dense oracle restricted to modes_per_axis <= 16")
    if u0.grid != cfg.grid:
        raise FieldError("initial state is not on the configured grid")

    basis = _GalerkinBasis(cfg.grid, cfg.visc)
    c0 = basis.project(leray_project(u0).components)
    n = basis.n
    tensor = _interaction_tensor(basis) if cfg.nonlinearity_enabled else None
    sigma = basis.sigma

    forcing = cfg.forcing

    def forcing_coeffs(t: float) -> np.ndarray | None:
        f = forcing.sample(t)
        if f is None:
            return None
        return basis.project(leray_project(f).components)

    static_b = forcing_coeffs(0.0) if forcing.kind == ForcingKind.STEADY_FIELD else None

    def rhs(t, y):
        c = y[:n] + 1j * y[n:]
        dc = -sigma * c
        if tensor is not None:
            dc = dc - np.einsum("ilm,l,m->i", tensor, c, c)
        if static_b is not None:
            dc = dc + static_b
        elif not forcing.is_zero:
            b = forcing_coeffs(t)
            if b is not None:
                dc = dc + b
        return np.concatenate([dc.real, dc.imag])

    step_times = np.concatenate([[0.0], np.cumsum(_time_steps(cfg.dt, cfg.horizon))])
    eval_idx = list(range(0, len(step_times), cfg.snapshot_stride))
    if eval_idx[-1] != len(step_times) - 1:
        eval_idx.append(len(step_times) - 1)
    t_eval = step_times[eval_idx]

    y0 = np.concatenate([c0.real, c0.imag])
    sol = solve_ivp(
        rhs,
        (0.0, float(step_times[-1])),
        y0,
        method="DOP853",
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"Galerkin oracle integration failed: {sol.message}")

    builder = LedgerBuilder(cfg.visc)
    snapshots = []
    for j, t in enumerate(sol.t):
        c = sol.y[:n, j] + 1j * sol.y[n:, j]
        u = basis.state(c).to_field()
        snapshots.append(u)
        builder.append(float(t), u, forcing.sample(float(t)))

    return Trajectory(
        times=np.array(sol.t),
        snapshots=tuple(snapshots),
        ledger=builder.finalize(),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# mild-solution fixed point
# ---------------------------------------------------------------------------


def _mild_sweep(
    u_start: np.ndarray,
    sources: list[np.ndarray],
    h: float,
    decay: np.ndarray,
    w0: np.ndarray,
    w1: np.ndarray,
) -> list[np.ndarray]:
    """States on the window mesh from one Duhamel pass over the sources."""
    states = [u_start]
    duhamel = np.zeros_like(u_start)
    free = u_start
    for j in range(1, len(sources)):
        free = decay * free
        duhamel = decay * duhamel + w0 * sources[j - 1] + w1 * sources[j]
        states.append(free + duhamel)
    return states


def solve_picard(
    u0: SpectralVectorField,
    cfg: SolverConfig,
    tol: float = 1e-10,
    max_iters: int = 60,
) -> Trajectory:
    """Solve the mild integral form by successive substitution.

    Iterates u <- P_i(v0) + P_v(Pf - PN(u)) on an equispaced mesh of spacing
    cfg.dt.  If the iteration fails to contract on the current window the
    window is bisected and the solve continues from the last converged state;
    exhausting the bisection floor raises PicardDivergenceError.  The
    converged path is checked against the integral equation residual.
    """
    if u0.grid != cfg.grid:
        raise FieldError("initial state is not on the configured grid")
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = cfg.grid
    n_cells = max(1, int(round(cfg.horizon / cfg.dt)))
    h = cfg.horizon / n_cells
    sigma = dissipation_symbol(grid, cfg.visc)
    decay = np.exp(-h * sigma)
    w0, w1 = _phi_weights(h * sigma, h)

    def source_at(comps: np.ndarray, t: float) -> np.ndarray:
        out = None
        if cfg.nonlinearity_enabled:
            u = SpectralVectorField(grid, comps, _trust=True)
            out = -leray_project(convect(u, u)).components
        f = cfg.forcing.sample(t)
        if f is not None:
            pf = leray_project(f).components
            out = pf if out is None else out + pf
        if out is None:
            out = np.zeros(grid.vector_shape, dtype=np.complex128)
        return out

    def l2_of(comps: np.ndarray) -> float:
        return math.sqrt(grid.volume * float(np.sum(np.abs(comps) ** 2)))

    mesh_states: list[np.ndarray] = [leray_project(u0).components]
    window = n_cells
    start = 0
    while start < n_cells:
        window = min(window, n_cells - start)
        u_start = mesh_states[start]
        t0 = start * h
        # zeroth iterate: free heat flow of the window's initial state
        states = [
            np.exp(-(j * h) * sigma) * u_start for j in range(window + 1)
        ]
        converged = False
        prev_inc = math.inf
        for _ in range(max_iters):
            sources = [source_at(states[j], t0 + j * h) for j in range(window + 1)]
            new_states = _mild_sweep(u_start, sources, h, decay, w0, w1)
            inc = max(
                l2_of(new_states[j] - states[j]) for j in range(1, window + 1)
            )
            states = new_states
            if not math.isfinite(inc) or inc > 4.0 * prev_inc:
                break
            prev_inc = min(prev_inc, inc)
            if inc < tol:
                converged = True
                break
        if converged:
            mesh_states.extend(states[1:])
            start += window
        else:
            if window == 1:
                raise PicardDivergenceError(
                    f"no contraction on a single cell at t={t0:.6g}; "
                    f"reduce dt or the horizon"
                )
            window = max(1, window // 2)

    # residual of the global integral equation on the full mesh
    sources = [source_at(mesh_states[j], j * h) for j in range(n_cells + 1)]
    check = _mild_sweep(mesh_states[0], sources, h, decay, w0, w1)
    residual = max(l2_of(check[j] - mesh_states[j]) for j in range(n_cells + 1))
    if residual >= 10.0 * tol:
        raise PicardDivergenceError(
            f"converged iterate violates the integral equation: residual {residual:.3e}"
        )

    keep = list(range(0, n_cells + 1, cfg.snapshot_stride))
    if keep[-1] != n_cells:
        keep.append(n_cells)
    builder = LedgerBuilder(cfg.visc)
    snapshots = []
    snap_times = []
    for j in keep:
        t = j * h
        u = SpectralVectorField(grid, mesh_states[j].copy(), _trust=True)
        snapshots.append(u)
        snap_times.append(t)
        builder.append(t, u, cfg.forcing.sample(t))

    return Trajectory(
        times=np.array(snap_times),
        snapshots=tuple(snapshots),
        ledger=builder.finalize(),
        config=cfg,
    )
