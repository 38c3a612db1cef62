import numpy as np
import pytest

from nsrg.spectral import (
    SpectralScalarField,
    SpectralVectorField,
    hermitianize,
    l2_norm,
    make_grid,
)


def phys_mesh(grid):
    """Collocation coordinates of the grid, meshed in ij order."""
    x = np.arange(grid.modes_per_axis) * (2.0 * np.pi / grid.modes_per_axis)
    return np.meshgrid(*([x] * grid.dim), indexing="ij")


def random_vector(grid, seed, unit=True):
    """Hermitian random vector field, not solenoidal, optionally unit L2 norm."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.vector_shape) + 1j * rng.standard_normal(
        grid.vector_shape
    )
    comps = np.stack([hermitianize(raw[j]) for j in range(grid.dim)])
    u = SpectralVectorField(grid, comps)
    return u * (1.0 / l2_norm(u)) if unit else u


def random_scalar(grid, seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralScalarField(grid, hermitianize(raw))


@pytest.fixture
def grid2():
    return make_grid(2, 32)


@pytest.fixture
def grid2_small():
    return make_grid(2, 16)


@pytest.fixture
def grid3():
    return make_grid(3, 12)
