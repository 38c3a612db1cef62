"""Torus grids, Fourier fields, and spectral differential operators.

Everything lives on the flat periodic box [0, 2*pi)^dim with dim 2 or 3.
Fields are stored as complex Fourier coefficient arrays in the standard FFT
layout, normalized so that coefficient c_k multiplies exp(i k.x).  Real-valued
physical fields correspond to Hermitian-symmetric coefficient arrays, and the
Nyquist slot of every stored field is kept at exactly zero so that the
derivative symbols i*k are exactly skew-adjoint.

All operations are pure: they return new fields and never mutate their inputs.
Coefficient arrays are marked read-only after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi


class GridError(ValueError):
    """Invalid grid construction parameters."""


class FieldError(ValueError):
    """Shape mismatch, grid mismatch, or corrupted field data."""


@dataclass(frozen=True)
class Grid:
    """Discretization of the periodic torus.

    Parameters
    ----------
    dim : 2 or 3.
    modes_per_axis : even integer K >= 4.  The retained wavenumbers per axis
        are -K/2+1 .. K/2-1 plus the Nyquist slot, which is always zero.
    pad_factor : oversampling ratio (>= 3/2) for dealiased products.
    """

    dim: int
    modes_per_axis: int
    pad_factor: float = 1.5

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")
        k = self.modes_per_axis
        if k < 4 or k % 2 != 0:
            raise GridError(f"modes_per_axis must be even and >= 4, got {k}")
        if self.pad_factor < 1.5:
            raise GridError(
                f"pad_factor must be >= 3/2 for alias-free quadratic products, "
                f"got {self.pad_factor}"
            )

    @cached_property
    def wavenumbers_1d(self) -> np.ndarray:
        """Integer wavenumbers per axis in FFT layout: 0..K/2-1, -K/2..-1."""
        k = self.modes_per_axis
        return np.fft.fftfreq(k, d=1.0 / k).astype(np.int64)

    @cached_property
    def k_mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays, one per axis."""
        return tuple(
            np.meshgrid(*([self.wavenumbers_1d] * self.dim), indexing="ij", sparse=True)
        )

    @cached_property
    def k_sq(self) -> np.ndarray:
        """|k|^2 on the full grid."""
        out = np.zeros(self.shape)
        for km in self.k_mesh:
            out = out + km.astype(float) ** 2
        return out

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True wherever any axis sits on the (zeroed) Nyquist slot."""
        nyq = -self.modes_per_axis // 2
        mask = np.zeros(self.shape, dtype=bool)
        for km in self.k_mesh:
            mask |= km == nyq
        return mask

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes_per_axis,) * self.dim

    @property
    def vector_shape(self) -> tuple[int, ...]:
        return (self.dim,) + self.shape

    @cached_property
    def padded_modes(self) -> int:
        """Grid size used for dealiased products (even, >= pad_factor*K)."""
        return 2 * math.ceil(self.pad_factor * self.modes_per_axis / 2.0)

    @property
    def volume(self) -> float:
        return TWO_PI ** self.dim

    @property
    def n_points(self) -> int:
        return self.modes_per_axis ** self.dim


def make_grid(dim: int, modes_per_axis: int, pad_factor: float = 1.5) -> Grid:
    """Build a torus grid; wavenumber tables and masks are cached lazily."""
    return Grid(dim=dim, modes_per_axis=modes_per_axis, pad_factor=float(pad_factor))


@dataclass(frozen=True)
class ViscosityParams:
    """Dissipation parameters: nu*|k|^2 plus the hyperviscous eps*|k|^(2m).

    ``diagnostic=True`` relaxes the nu > 0 requirement so degenerate forms
    (pure L2 pairing) can be evaluated in diagnostic code paths.
    """

    nu: float
    epsilon: float = 0.0
    m: int = 1
    diagnostic: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.diagnostic and not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")


def min_hyperviscosity_order(dim: int) -> int:
    """Smallest admissible hyperviscosity order for the given dimension."""
    return math.ceil((dim + 2) / 4)


def require_order_admissible(visc: ViscosityParams, dim: int) -> None:
    """Reject epsilon > 0 with an order m too low for this dimension."""
    if visc.epsilon > 0 and visc.m < min_hyperviscosity_order(dim):
        raise ValueError(
            f"hyperviscosity order m={visc.m} too low for dim={dim}; "
            f"need m >= {min_hyperviscosity_order(dim)} when epsilon > 0"
        )


def _zero_nyquist(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    if coeffs.shape == grid.vector_shape:
        coeffs[:, grid.nyquist_mask] = 0.0
    else:
        coeffs[grid.nyquist_mask] = 0.0
    return coeffs


def conj_reflect(coeffs: np.ndarray) -> np.ndarray:
    """conj(c(-k)) in FFT layout; equals c(k) for real physical fields."""
    ax = tuple(range(coeffs.ndim))
    rev = coeffs[tuple(slice(None, None, -1) for _ in ax)]
    return np.conj(np.roll(rev, shift=1, axis=ax))


def hermitianize(coeffs: np.ndarray) -> np.ndarray:
    """Project a coefficient array onto the Hermitian-symmetric subspace."""
    return 0.5 * (coeffs + conj_reflect(coeffs))


class SpectralScalarField:
    """Real scalar field stored as Hermitian Fourier coefficients."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray, *, _trust: bool = False):
        if coeffs.shape != grid.shape:
            raise FieldError(
                f"coefficient shape {coeffs.shape} does not match grid {grid.shape}"
            )
        if not _trust:
            coeffs = np.array(coeffs, dtype=np.complex128)
            _zero_nyquist(coeffs, grid)
        coeffs.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralScalarField is immutable")

    def __reduce__(self):
        return (SpectralScalarField, (self.grid, np.asarray(self.coeffs)))

    def hermitian_defect(self) -> float:
        """Max deviation from Hermitian symmetry, relative to the peak amplitude."""
        scale = float(np.max(np.abs(self.coeffs)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs - conj_reflect(self.coeffs)))) / scale

    def _binary(self, other, op):
        if not isinstance(other, SpectralScalarField):
            return NotImplemented
        if other.grid != self.grid:
            raise FieldError("grid mismatch")
        return SpectralScalarField(self.grid, op(self.coeffs, other.coeffs), _trust=True)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralScalarField(self.grid, self.coeffs * scalar, _trust=True)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralScalarField(self.grid, -self.coeffs, _trust=True)


class SpectralVectorField:
    """Real vector field; one coefficient array per component, leading axis dim."""

    __slots__ = ("grid", "components")

    def __init__(self, grid: Grid, components: np.ndarray, *, _trust: bool = False):
        if components.shape != grid.vector_shape:
            raise FieldError(
                f"component shape {components.shape} does not match grid "
                f"{grid.vector_shape}"
            )
        if not _trust:
            components = np.array(components, dtype=np.complex128)
            _zero_nyquist(components, grid)
        components.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "components", components)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralVectorField is immutable")

    def __reduce__(self):
        return (SpectralVectorField, (self.grid, np.asarray(self.components)))

    @property
    def dim(self) -> int:
        return self.grid.dim

    def component(self, j: int) -> SpectralScalarField:
        return SpectralScalarField(self.grid, self.components[j])

    def hermitian_defect(self) -> float:
        scale = float(np.max(np.abs(self.components)))
        if scale == 0.0:
            return 0.0
        worst = max(
            float(np.max(np.abs(c - conj_reflect(c)))) for c in self.components
        )
        return worst / scale

    def _binary(self, other, op):
        if not isinstance(other, SpectralVectorField):
            return NotImplemented
        if other.grid != self.grid:
            raise FieldError("grid mismatch")
        return SpectralVectorField(
            self.grid, op(self.components, other.components), _trust=True
        )

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralVectorField(self.grid, self.components * scalar, _trust=True)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralVectorField(self.grid, -self.components, _trust=True)


def zero_scalar(grid: Grid) -> SpectralScalarField:
    return SpectralScalarField(grid, np.zeros(grid.shape, dtype=np.complex128), _trust=True)


def zero_vector(grid: Grid) -> SpectralVectorField:
    return SpectralVectorField(
        grid, np.zeros(grid.vector_shape, dtype=np.complex128), _trust=True
    )


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

_HERMITIAN_TOL = 1e-10


def to_spectral(samples: np.ndarray, grid: Grid) -> SpectralScalarField:
    """Forward transform of real samples on the grid's collocation points.

    The Nyquist slot is zeroed, so this is exactly invertible only for
    band-limited data (which is all the library ever stores).
    """
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise FieldError(
            f"sample shape {samples.shape} does not match grid {grid.shape}"
        )
    coeffs = np.fft.fftn(samples) / grid.n_points
    _zero_nyquist(coeffs, grid)
    return SpectralScalarField(grid, coeffs, _trust=True)


def to_physical(fld: SpectralScalarField) -> np.ndarray:
    """Inverse transform to real samples; rejects corrupted (non-Hermitian) data."""
    values = np.fft.ifftn(fld.coeffs) * fld.grid.n_points
    scale = max(float(np.max(np.abs(values.real))), 1e-300)
    if float(np.max(np.abs(values.imag))) > _HERMITIAN_TOL * scale:
        raise FieldError("field is not Hermitian-symmetric; refusing to realify")
    return values.real


def vector_to_spectral(samples: np.ndarray, grid: Grid) -> SpectralVectorField:
    """Forward transform of a (dim, K, ..) stack of real component samples."""
    samples = np.asarray(samples)
    if samples.shape != grid.vector_shape:
        raise FieldError(
            f"sample shape {samples.shape} does not match grid {grid.vector_shape}"
        )
    coeffs = np.fft.fftn(samples, axes=tuple(range(1, grid.dim + 1))) / grid.n_points
    _zero_nyquist(coeffs, grid)
    return SpectralVectorField(grid, coeffs, _trust=True)


def vector_to_physical(u: SpectralVectorField) -> np.ndarray:
    return np.stack([to_physical(u.component(j)) for j in range(u.dim)])


# ---------------------------------------------------------------------------
# differential operators and pairings
# ---------------------------------------------------------------------------


def gradient(p: SpectralScalarField) -> SpectralVectorField:
    """Spectral gradient: component j carries i*k_j*p_hat."""
    grid = p.grid
    comps = np.empty(grid.vector_shape, dtype=np.complex128)
    for j, km in enumerate(grid.k_mesh):
        comps[j] = 1j * km * p.coeffs
    return SpectralVectorField(grid, comps, _trust=True)


def divergence(u: SpectralVectorField) -> SpectralScalarField:
    """Spectral divergence: i*k dotted into the component stack."""
    grid = u.grid
    out = np.zeros(grid.shape, dtype=np.complex128)
    for j, km in enumerate(grid.k_mesh):
        out += 1j * km * u.components[j]
    return SpectralScalarField(grid, out, _trust=True)


def laplacian_power(fld, m: int):
    """Multiply coefficients by |k|^(2m); m = 0 is the identity."""
    if int(m) != m or m < 0:
        raise ValueError(f"m must be a nonnegative integer, got {m}")
    mult = fld.grid.k_sq ** m
    if isinstance(fld, SpectralScalarField):
        return SpectralScalarField(fld.grid, mult * fld.coeffs, _trust=True)
    return SpectralVectorField(fld.grid, mult * fld.components, _trust=True)


def _raw(fld) -> np.ndarray:
    return fld.coeffs if isinstance(fld, SpectralScalarField) else fld.components


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise FieldError("grid mismatch")


def inner(a, b) -> float:
    """L2 pairing on the torus: (2*pi)^dim times the Hermitian coefficient sum."""
    _check_same_grid(a, b)
    return float(a.grid.volume * np.real(np.vdot(_raw(b), _raw(a))))


def l2_norm(a) -> float:
    return math.sqrt(max(inner(a, a), 0.0))


def sobolev_norm(fld, s: float) -> float:
    """H^s norm: sqrt(sum (1+|k|^2)^s |c_k|^2), with the torus volume factor."""
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    grid = fld.grid
    weights = (1.0 + grid.k_sq) ** s
    total = float(np.sum(weights * np.abs(_raw(fld)) ** 2))
    return math.sqrt(grid.volume * total)


def h1_seminorm_sq(fld) -> float:
    """Integral of |grad u|^2, evaluated as sum |k|^2 |c_k|^2 with volume factor."""
    grid = fld.grid
    return float(grid.volume * np.sum(grid.k_sq * np.abs(_raw(fld)) ** 2))


def hyperviscous_seminorm_sq(fld, m: int) -> float:
    """Integral pairing of the order-2m dissipation: sum |k|^(2m) |c_k|^2."""
    grid = fld.grid
    return float(grid.volume * np.sum((grid.k_sq ** m) * np.abs(_raw(fld)) ** 2))


def dirichlet_form(
    u: SpectralVectorField, v: SpectralVectorField, visc: ViscosityParams
) -> float:
    """Energy inner product: sum (eps|k|^2m + nu|k|^2 + 1) Re<u_k, v_k> (2*pi)^dim.

    Dominates the plain L2 pairing, so D(u,u) >= inner(u,u).
    """
    _check_same_grid(u, v)
    grid = u.grid
    mult = visc.epsilon * grid.k_sq ** visc.m + visc.nu * grid.k_sq + 1.0
    pair = np.real(np.einsum("i...,i...->...", u.components, np.conj(v.components)))
    return float(grid.volume * np.sum(mult * pair))


def relative_divergence(u: SpectralVectorField) -> float:
    """L2 norm of div u scaled by the H1 norm of u (zero field maps to zero)."""
    div = l2_norm(divergence(u))
    scale = sobolev_norm(u, 1.0)
    if scale == 0.0:
        return 0.0
    return div / scale


# ---------------------------------------------------------------------------
# seeded field generation
# ---------------------------------------------------------------------------


def random_solenoidal(
    grid: Grid,
    seed: int,
    spectrum_slope: float = 2.0,
    cutoff: int | None = None,
) -> SpectralVectorField:
    """Deterministic divergence-free field with a power-law shell spectrum.

    Each retained mode with 0 < |k| <= cutoff gets an independent complex
    Gaussian amplitude scaled by |k|^(-spectrum_slope), is projected onto the
    plane orthogonal to k, and the whole field is normalized to unit L2 norm.
    """
    if cutoff is None:
        cutoff = grid.modes_per_axis // 3
    if cutoff < 1 or cutoff > grid.modes_per_axis // 3:
        raise ValueError(
            f"cutoff must satisfy 1 <= cutoff <= K/3 = {grid.modes_per_axis // 3}"
        )
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.vector_shape) + 1j * rng.standard_normal(
        grid.vector_shape
    )
    comps = np.stack([hermitianize(raw[j]) for j in range(grid.dim)])

    kmag = np.sqrt(grid.k_sq)
    with np.errstate(divide="ignore"):
        amp = np.where(
            (kmag > 0.5) & (kmag <= cutoff + 1e-9), kmag ** (-spectrum_slope), 0.0
        )
    comps *= amp
    _zero_nyquist(comps, grid)

    # per-mode transverse projection: remove k (k.u)/|k|^2
    kdot = np.zeros(grid.shape, dtype=np.complex128)
    for j, km in enumerate(grid.k_mesh):
        kdot += km * comps[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_ksq = np.where(grid.k_sq > 0, 1.0 / np.where(grid.k_sq > 0, grid.k_sq, 1.0), 0.0)
    for j, km in enumerate(grid.k_mesh):
        comps[j] -= km * kdot * inv_ksq

    u = SpectralVectorField(grid, comps, _trust=True)
    norm = l2_norm(u)
    if norm == 0.0:
        raise ValueError("generated field is identically zero; enlarge cutoff")
    return u * (1.0 / norm)
