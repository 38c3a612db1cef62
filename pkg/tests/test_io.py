"""Snapshot format, energy CSV, config round-trips, and the atomic manifest."""

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import random_vector
from nsrg.diagnostics import LedgerBuilder
from nsrg.evolution import SolverConfig, run_simulation
from nsrg.io import (
    ConfigError,
    RunManifest,
    RunSetup,
    load_config,
    read_energy_csv,
    read_snapshot,
    save_config,
    single_mode,
    taylor_green,
    write_energy_csv,
    write_manifest,
    write_snapshot,
)
from nsrg.spectral import (
    ViscosityParams,
    divergence,
    l2_norm,
    make_grid,
    random_solenoidal,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestSnapshots:
    def test_roundtrip_bit_exact(self, tmp_path, grid2_small):
        u = random_solenoidal(grid2_small, 9)
        visc = ViscosityParams(nu=0.25, epsilon=0.01, m=2)
        path = tmp_path / "snap.nsrg"
        write_snapshot(path, u, visc, 0.375)
        back, visc2, t = read_snapshot(path)
        assert np.array_equal(back.components, u.components)
        assert (visc2.nu, visc2.epsilon, visc2.m) == (0.25, 0.01, 2)
        assert t == 0.375

    def test_header_layout(self, tmp_path, grid2_small):
        u = random_solenoidal(grid2_small, 9)
        path = tmp_path / "snap.nsrg"
        write_snapshot(path, u, ViscosityParams(nu=1.0), 0.0)
        raw = path.read_bytes()
        assert raw[:4] == b"NSRG"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 2  # dim
        assert int.from_bytes(raw[12:16], "little") == 16  # modes per axis
        expected = 4 + 4 * 4 + 3 * 8 + 2 * 16 ** 2 * 16
        assert len(raw) == expected

    def test_rejects_bad_magic(self, tmp_path, grid2_small):
        u = random_solenoidal(grid2_small, 9)
        path = tmp_path / "snap.nsrg"
        write_snapshot(path, u, ViscosityParams(nu=1.0), 0.0)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError):
            read_snapshot(path)

    def test_rejects_truncation(self, tmp_path, grid2_small):
        u = random_solenoidal(grid2_small, 9)
        path = tmp_path / "snap.nsrg"
        write_snapshot(path, u, ViscosityParams(nu=1.0), 0.0)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ValueError):
            read_snapshot(path)


class TestEnergyCsv:
    def _ledger(self, grid):
        cfg = SolverConfig(
            visc=ViscosityParams(nu=0.5), grid=grid, dt=5e-3, horizon=0.1
        )
        return run_simulation(random_solenoidal(grid, 3), cfg).ledger

    def test_roundtrip_and_columns(self, tmp_path, grid2_small):
        ledger = self._ledger(grid2_small)
        path = tmp_path / "energy.csv"
        write_energy_csv(path, ledger)
        data = read_energy_csv(path)
        assert list(data) == [
            "t", "l2_sq", "dirichlet", "visc_dissip_cum", "work_cum", "div_residual",
        ]
        assert np.allclose(data["l2_sq"], ledger.l2_sq, rtol=0, atol=0)

    def test_bit_identical_for_identical_runs(self, tmp_path, grid2_small):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_energy_csv(a, self._ledger(grid2_small))
        write_energy_csv(b, self._ledger(grid2_small))
        assert a.read_bytes() == b.read_bytes()


class TestRunSetup:
    def test_shipped_configs_load(self):
        for name in ("taylor_green.json", "forced_random.json", "sweep_tg64.json"):
            setup = load_config(CONFIG_DIR / name)
            cfg = setup.build_solver_config()
            u0 = setup.build_initial(cfg.grid)
            assert l2_norm(divergence(u0)) < 1e-12

    def test_roundtrip_identity(self, tmp_path):
        setup = load_config(CONFIG_DIR / "forced_random.json")
        path = tmp_path / "copy.json"
        save_config(path, setup)
        again = load_config(path)
        assert again == setup
        assert RunSetup.from_dict(setup.to_dict()) == setup

    def test_unknown_key_rejected(self):
        data = load_config(CONFIG_DIR / "taylor_green.json").to_dict()
        data["wibble"] = 1
        with pytest.raises(ConfigError, match="wibble"):
            RunSetup.from_dict(data)

    def test_missing_key_rejected(self):
        data = load_config(CONFIG_DIR / "taylor_green.json").to_dict()
        del data["nu"]
        with pytest.raises(ConfigError, match="nu"):
            RunSetup.from_dict(data)

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "dim": 2,\n  "oops"\n}\n')
        with pytest.raises(ConfigError, match="line 3"):
            load_config(path)

    @pytest.mark.parametrize(
        "patch,field",
        [
            ({"modes_per_axis": 7}, "modes_per_axis"),
            ({"dim": 3, "epsilon": 0.1, "m": 1}, "m"),
            ({"dt": 2.0}, "dt"),
            ({"scheme": "LEAPFROG"}, "scheme"),
            ({"pad_factor": 1.2}, "pad_factor"),
        ],
    )
    def test_field_diagnostics(self, patch, field):
        data = load_config(CONFIG_DIR / "taylor_green.json").to_dict()
        data.update(patch)
        with pytest.raises(ConfigError, match=field):
            RunSetup.from_dict(data)

    def test_initial_kinds(self):
        data = load_config(CONFIG_DIR / "sweep_tg64.json").to_dict()
        setup = RunSetup.from_dict(data)
        grid = setup.build_grid()
        u0 = setup.build_initial(grid)
        assert l2_norm(u0 - taylor_green(grid)) == pytest.approx(0.1, rel=1e-12)


class TestHelpers:
    def test_taylor_green_solenoidal(self, grid2, grid3):
        for grid in (grid2, grid3):
            tg = taylor_green(grid)
            assert l2_norm(divergence(tg)) < 1e-12

    def test_single_mode(self, grid2_small):
        u = single_mode(grid2_small, (1, 1))
        assert abs(l2_norm(u) - 1.0) < 1e-12
        assert l2_norm(divergence(u)) < 1e-13
        with pytest.raises(ValueError):
            single_mode(grid2_small, (0, 0))


class TestManifest:
    def test_write_after_artifacts(self, tmp_path):
        (tmp_path / "energy.csv").write_text("t\n0\n")
        manifest = RunManifest(
            config={"dim": 2}, artifacts={"energy_csv": "energy.csv"},
            code_version="0.1.0", duration_seconds=1.0,
        )
        write_manifest(tmp_path / "manifest.json", manifest)
        loaded = json.loads((tmp_path / "manifest.json").read_text())
        assert loaded["artifacts"]["energy_csv"] == "energy.csv"

    def test_refuses_missing_artifacts(self, tmp_path):
        manifest = RunManifest(
            config={}, artifacts={"energy_csv": "missing.csv"},
            code_version="0.1.0", duration_seconds=1.0,
        )
        with pytest.raises(FileNotFoundError):
            write_manifest(tmp_path / "manifest.json", manifest)
        assert not (tmp_path / "manifest.json").exists()
        # no temp droppings either
        assert list(tmp_path.iterdir()) == []
