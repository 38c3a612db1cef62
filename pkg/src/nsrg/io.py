"""On-disk formats: binary snapshots, energy CSVs, run configs, manifests.

Snapshot layout (all little-endian): magic ``NSRG``, then uint32 format
version, dim, modes_per_axis, m, then float64 epsilon, nu, t, then the
velocity components in axis order, each a row-major coefficient array as
interleaved (re, im) float64 pairs.  Energy CSVs carry a fixed column order
with 17 significant digits so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import EnergyLedger
from .evolution import ForcingSpec, Scheme, SolverConfig
from .spectral import (
    Grid,
    SpectralVectorField,
    ViscosityParams,
    make_grid,
    random_solenoidal,
    to_spectral,
    vector_to_spectral,
)

SNAPSHOT_MAGIC = b"NSRG"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIII ddd".replace(" ", ""))

ENERGY_CSV_COLUMNS = ("t", "l2_sq", "dirichlet", "visc_dissip_cum", "work_cum", "div_residual")


class ConfigError(ValueError):
    """Configuration file problem, annotated with the offending location."""

    def __init__(self, message: str, *, fld: str | None = None, line: int | None = None):
        loc = []
        if fld is not None:
            loc.append(f"field '{fld}'")
        if line is not None:
            loc.append(f"line {line}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.field = fld
        self.line = line


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def write_snapshot(path, u: SpectralVectorField, visc: ViscosityParams, t: float) -> None:
    grid = u.grid
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        grid.dim,
        grid.modes_per_axis,
        visc.m,
        visc.epsilon,
        visc.nu,
        t,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for j in range(grid.dim):
            fh.write(np.ascontiguousarray(u.components[j]).astype("<c16").tobytes())


def read_snapshot(path, pad_factor: float = 1.5):
    """Read a snapshot; returns (field, visc, t).

    The pad factor is not part of the format, so the reconstructed grid uses
    the supplied one.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"truncated snapshot header in {path}")
        magic, version, dim, k, m, epsilon, nu, t = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad magic in {path}: {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        grid = make_grid(dim, k, pad_factor)
        count = k ** dim
        comps = np.empty(grid.vector_shape, dtype=np.complex128)
        for j in range(dim):
            buf = fh.read(16 * count)
            if len(buf) != 16 * count:
                raise ValueError(f"truncated component {j} in {path}")
            comps[j] = np.frombuffer(buf, dtype="<c16").reshape(grid.shape)
    visc = ViscosityParams(nu=nu, epsilon=epsilon, m=int(m), diagnostic=True)
    return SpectralVectorField(grid, comps), visc, float(t)


# ---------------------------------------------------------------------------
# energy CSV
# ---------------------------------------------------------------------------


def write_energy_csv(path, ledger: EnergyLedger) -> None:
    rows = zip(
        ledger.times,
        ledger.l2_sq,
        ledger.dirichlet,
        ledger.visc_dissip_cum,
        ledger.work_cum,
        ledger.div_residual,
    )
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(ENERGY_CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_energy_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array(
            [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
        )
    return {name: data[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

_SCHEMES = {s.value for s in Scheme}
_INITIAL_KINDS = {"taylor_green", "perturbed_taylor_green", "random_solenoidal", "zero"}
_FORCING_KINDS = {"zero", "taylor_green", "steady_mode", "time_harmonic"}


@dataclass(frozen=True)
class RunSetup:
    """Plain-data mirror of a config file; builds the solver inputs on demand."""

    dim: int
    modes_per_axis: int
    nu: float
    epsilon: float
    m: int
    dt: float
    horizon: float
    scheme: str = "IF_RK4"
    nonlinearity: bool = True
    forcing: dict = field(default_factory=lambda: {"kind": "zero"})
    snapshot_stride: int = 1
    seed: int = 0
    output_dir: str | None = None
    pad_factor: float = 1.5
    initial: dict = field(default_factory=lambda: {"kind": "random_solenoidal"})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSetup":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'", fld=key)
        required = ["dim", "modes_per_axis", "nu", "epsilon", "m", "dt", "horizon"]
        for key in required:
            if key not in data:
                raise ConfigError(f"missing required config key '{key}'", fld=key)
        setup = cls(**data)
        setup.validate()
        return setup

    def validate(self) -> None:
        def need(cond: bool, message: str, fld: str):
            if not cond:
                raise ConfigError(message, fld=fld)

        need(self.dim in (2, 3), f"dim must be 2 or 3, got {self.dim}", "dim")
        need(
            self.modes_per_axis >= 4 and self.modes_per_axis % 2 == 0,
            f"modes_per_axis must be even and >= 4, got {self.modes_per_axis}",
            "modes_per_axis",
        )
        need(self.nu > 0, f"nu must be positive, got {self.nu}", "nu")
        need(self.epsilon >= 0, f"epsilon must be nonnegative, got {self.epsilon}", "epsilon")
        need(int(self.m) == self.m and self.m >= 1, f"m must be an integer >= 1, got {self.m}", "m")
        if self.epsilon > 0:
            from .spectral import min_hyperviscosity_order

            need(
                self.m >= min_hyperviscosity_order(self.dim),
                f"m={self.m} too low for dim={self.dim} with epsilon > 0 "
                f"(need m >= {min_hyperviscosity_order(self.dim)})",
                "m",
            )
        need(self.dt > 0, f"dt must be positive, got {self.dt}", "dt")
        need(self.horizon > 0, f"horizon must be positive, got {self.horizon}", "horizon")
        need(self.dt <= self.horizon, "dt must not exceed horizon", "dt")
        need(self.scheme in _SCHEMES, f"unknown scheme '{self.scheme}'", "scheme")
        need(self.snapshot_stride >= 1, "snapshot_stride must be >= 1", "snapshot_stride")
        need(self.pad_factor >= 1.5, "pad_factor must be >= 3/2", "pad_factor")
        if self.scheme == "GALERKIN_ODE":
            need(self.modes_per_axis <= 16, "GALERKIN_ODE needs modes_per_axis <= 16", "scheme")
        kind = self.initial.get("kind")
        need(kind in _INITIAL_KINDS, f"unknown initial kind '{kind}'", "initial")
        fkind = self.forcing.get("kind")
        need(fkind in _FORCING_KINDS, f"unknown forcing kind '{fkind}'", "forcing")

    # -- builders ----------------------------------------------------------

    def build_grid(self) -> Grid:
        return make_grid(self.dim, self.modes_per_axis, self.pad_factor)

    def build_initial(self, grid: Grid) -> SpectralVectorField:
        kind = self.initial.get("kind")
        amplitude = float(self.initial.get("amplitude", 1.0))
        if kind == "zero":
            from .spectral import zero_vector

            return zero_vector(grid)
        if kind == "taylor_green":
            return amplitude * taylor_green(grid)
        seed = int(self.initial.get("seed", self.seed))
        slope = float(self.initial.get("spectrum_slope", 2.0))
        cutoff = self.initial.get("cutoff")
        noise = random_solenoidal(
            grid, seed, slope, int(cutoff) if cutoff is not None else None
        )
        if kind == "perturbed_taylor_green":
            return taylor_green(grid) + amplitude * noise
        return amplitude * noise

    def build_forcing(self, grid: Grid) -> ForcingSpec:
        kind = self.forcing.get("kind")
        if kind == "zero":
            return ForcingSpec.zero()
        amplitude = float(self.forcing.get("amplitude", 1.0))
        if kind == "taylor_green":
            return ForcingSpec.steady(amplitude * taylor_green(grid))
        if kind == "steady_mode":
            mode = self.forcing.get("k")
            if not isinstance(mode, (list, tuple)) or len(mode) != grid.dim:
                raise ConfigError("steady_mode forcing needs a wavevector 'k'", fld="forcing")
            return ForcingSpec.steady(amplitude * single_mode(grid, tuple(mode)))
        base = amplitude * taylor_green(grid)
        return ForcingSpec.time_harmonic(
            base,
            omega=float(self.forcing.get("omega", 1.0)),
            phase=float(self.forcing.get("phase", 0.0)),
        )

    def build_solver_config(self) -> SolverConfig:
        grid = self.build_grid()
        return SolverConfig(
            visc=ViscosityParams(nu=self.nu, epsilon=self.epsilon, m=int(self.m)),
            grid=grid,
            dt=self.dt,
            horizon=self.horizon,
            scheme=Scheme(self.scheme),
            nonlinearity_enabled=self.nonlinearity,
            forcing=self.build_forcing(grid),
            snapshot_stride=self.snapshot_stride,
            seed=self.seed,
        )


def taylor_green(grid: Grid) -> SpectralVectorField:
    """The planar vortex array (cos x sin y, -sin x cos y), padded with 0 in 3-D."""
    k = grid.modes_per_axis
    x = np.arange(k) * (2.0 * np.pi / k)
    if grid.dim == 2:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        samples = np.stack([np.cos(xx) * np.sin(yy), -np.sin(xx) * np.cos(yy)])
    else:
        xx, yy, _ = np.meshgrid(x, x, x, indexing="ij")
        samples = np.stack(
            [
                np.cos(xx) * np.sin(yy),
                -np.sin(xx) * np.cos(yy),
                np.zeros((k, k, k)),
            ]
        )
    return vector_to_spectral(samples, grid)


def single_mode(grid: Grid, k: tuple[int, ...]) -> SpectralVectorField:
    """Unit-L2 solenoidal real field supported on the +/-k pair."""
    from .evolution import _transverse_polarizations
    from .spectral import l2_norm

    kvec = np.array(k, dtype=int)
    if np.all(kvec == 0):
        raise ValueError("single_mode needs a nonzero wavevector")
    pol = _transverse_polarizations(kvec)[0].astype(np.complex128)
    comps = np.zeros(grid.vector_shape, dtype=np.complex128)
    idx = tuple(int(kj) % grid.modes_per_axis for kj in k)
    midx = tuple(int(-kj) % grid.modes_per_axis for kj in k)
    comps[(slice(None),) + idx] = pol
    comps[(slice(None),) + midx] = pol
    u = SpectralVectorField(grid, comps)
    return u * (1.0 / l2_norm(u))


def load_config(path) -> RunSetup:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    try:
        return RunSetup.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"bad config structure: {exc}") from exc


def save_config(path, setup: RunSetup) -> None:
    Path(path).write_text(json.dumps(setup.to_dict(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    config: dict
    artifacts: dict
    code_version: str
    duration_seconds: float
    created_unix: float = field(default_factory=time.time)

    def to_dict(self) -> dict:
        return asdict(self)


def write_manifest(path, manifest: RunManifest) -> None:
    """Atomic write: the manifest appears only after its artifacts exist."""
    path = Path(path)
    for rel in _iter_paths(manifest.artifacts):
        target = path.parent / rel
        if not target.exists():
            raise FileNotFoundError(f"manifest references missing artifact {target}")
    payload = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _iter_paths(tree):
    if isinstance(tree, str):
        yield tree
    elif isinstance(tree, dict):
        for value in tree.values():
            yield from _iter_paths(value)
    elif isinstance(tree, (list, tuple)):
        for value in tree:
            yield from _iter_paths(value)


def default_output_root() -> Path:
    return Path(os.environ.get("NSRG_OUTPUT_DIR", "nsrg_out"))
