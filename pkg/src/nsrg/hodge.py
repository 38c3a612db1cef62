"""Orthogonal splitting of vector fields on the torus and pressure recovery.

On the flat torus every operator involved diagonalizes in Fourier space: the
harmonic subspace is the mean (k = 0) modes, the Green operator divides by
|k|^2 away from the mean, and the Leray projection removes the component of
each coefficient parallel to its wavevector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    FieldError,
    SpectralScalarField,
    SpectralVectorField,
    relative_divergence,
)

_SOLENOIDAL_TOL = 1e-10


def harmonic_projection(u: SpectralVectorField) -> SpectralVectorField:
    """Keep only the constant (k = 0) part; idempotent and self-adjoint."""
    grid = u.grid
    out = np.zeros(grid.vector_shape, dtype=np.complex128)
    origin = (slice(None),) + (0,) * grid.dim
    out[origin] = u.components[origin]
    return SpectralVectorField(grid, out, _trust=True)


def _inv_ksq(grid) -> np.ndarray:
    ksq = grid.k_sq
    with np.errstate(divide="ignore"):
        inv = np.where(ksq > 0, 1.0 / np.where(ksq > 0, ksq, 1.0), 0.0)
    return inv


def green_operator(fld):
    """Invert the Laplacian symbol away from the mean: divide by |k|^2, zero k=0."""
    grid = fld.grid
    inv = _inv_ksq(grid)
    if isinstance(fld, SpectralScalarField):
        return SpectralScalarField(grid, fld.coeffs * inv, _trust=True)
    return SpectralVectorField(grid, fld.components * inv, _trust=True)


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    """Orthogonal projection onto divergence-free fields.

    Per mode k != 0 the coefficient loses its longitudinal part
    k (k.u)/|k|^2; the mean is left untouched.
    """
    grid = u.grid
    inv = _inv_ksq(grid)
    kdot = np.zeros(grid.shape, dtype=np.complex128)
    for j, km in enumerate(grid.k_mesh):
        kdot += km * u.components[j]
    kdot *= inv
    comps = u.components.copy()
    for j, km in enumerate(grid.k_mesh):
        comps[j] -= km * kdot
    return SpectralVectorField(grid, comps, _trust=True)


@dataclass(frozen=True)
class HodgeSplit:
    """Orthogonal three-way split: constants + solenoidal + gradient part."""

    harmonic: SpectralVectorField
    solenoidal: SpectralVectorField
    gradient_part: SpectralVectorField

    def recompose(self) -> SpectralVectorField:
        return self.harmonic + self.solenoidal + self.gradient_part


def hodge_split(u: SpectralVectorField) -> HodgeSplit:
    """Split u into mean, divergence-free, and curl-free (gradient) parts."""
    harm = harmonic_projection(u)
    proj = leray_project(u)
    return HodgeSplit(
        harmonic=harm,
        solenoidal=proj - harm,
        gradient_part=u - proj,
    )


def curl_defect(u: SpectralVectorField) -> float:
    """Size of the transverse content: max |k x u_k| over modes, normalized.

    Zero (to rounding) exactly when u is a gradient plus a constant.
    """
    grid = u.grid
    ks = [np.broadcast_to(km, grid.shape).astype(float) for km in grid.k_mesh]
    c = u.components
    if grid.dim == 2:
        cross = [ks[0] * c[1] - ks[1] * c[0]]
    else:
        cross = [
            ks[1] * c[2] - ks[2] * c[1],
            ks[2] * c[0] - ks[0] * c[2],
            ks[0] * c[1] - ks[1] * c[0],
        ]
    worst = max(float(np.max(np.abs(x))) for x in cross)
    scale = max(float(np.max(np.sqrt(grid.k_sq) * np.max(np.abs(c), axis=0))), 1e-300)
    return worst / scale


def recover_pressure(
    u: SpectralVectorField,
    f: SpectralVectorField | None,
    convected: SpectralVectorField,
) -> SpectralScalarField:
    """Mean-zero pressure whose gradient matches the non-solenoidal forcing.

    Solves grad p = (Id - P)(f - convected) per mode, where ``convected`` is
    the self-convection of u supplied by the nonlinear module.  Requires u to
    be divergence-free.
    """
    grid = u.grid
    if relative_divergence(u) > _SOLENOIDAL_TOL:
        raise FieldError("recover_pressure requires a solenoidal velocity")
    if f is not None and f.grid != grid:
        raise FieldError("grid mismatch")
    if convected.grid != grid:
        raise FieldError("grid mismatch")

    w = f.components - convected.components if f is not None else -convected.components
    kdot = np.zeros(grid.shape, dtype=np.complex128)
    for j, km in enumerate(grid.k_mesh):
        kdot += km * w[j]
    p = -1j * kdot * _inv_ksq(grid)
    return SpectralScalarField(grid, p, _trust=True)
