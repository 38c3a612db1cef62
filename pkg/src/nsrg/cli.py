"""Command-line entry point: run, sweep, and verify.

Exit codes: 0 success, 1 failed verification or failed sweep gate, 2 config
error, 3 blow-up (the diagnostic names the last good time).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import epsilon_sweep
from .evolution import BlowUpError, Scheme, run_simulation, solve_picard, run_galerkin_oracle
from .hodge import recover_pressure
from .io import (
    ConfigError,
    RunManifest,
    default_output_root,
    load_config,
    write_energy_csv,
    write_manifest,
    write_snapshot,
)
from .nonlinear import nonlinear_term
from .verify import SUITES, run_suites

SWEEP_RATE_GATE = 0.45


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsrg",
        description="Pseudospectral solver for regularized incompressible "
        "Navier-Stokes on the periodic torus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate one configuration and write artifacts")
    run_p.add_argument("config", help="JSON config file")
    run_p.add_argument("--output-dir", default=None, help="override the output directory")
    run_p.add_argument(
        "--pressure", action="store_true", help="also write recovered pressure snapshots"
    )

    sweep_p = sub.add_parser("sweep", help="run a descending-epsilon convergence sweep")
    sweep_p.add_argument("config", help="JSON config file (epsilon field is ignored)")
    sweep_p.add_argument(
        "--epsilons", required=True, help="comma-separated descending positive values"
    )
    sweep_p.add_argument("--jobs", type=int, default=None, help="worker pool size")
    sweep_p.add_argument("--output-dir", default=None)
    sweep_p.add_argument(
        "--dry-run", action="store_true", help="print the planned runs and write nothing"
    )

    verify_p = sub.add_parser("verify", help="run the invariant suites")
    verify_p.add_argument(
        "--suite",
        default="all",
        choices=sorted(SUITES) + ["all"],
    )
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--report", default=None, help="write a JSON report here")
    return parser


def _resolve_output(cli_dir, setup, default_name: str) -> Path:
    if cli_dir:
        return Path(cli_dir)
    if setup.output_dir:
        return Path(setup.output_dir)
    return default_output_root() / default_name


def cmd_run(args) -> int:
    setup = load_config(args.config)
    cfg = setup.build_solver_config()
    u0 = setup.build_initial(cfg.grid)
    out = _resolve_output(args.output_dir, setup, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)

    started = time.perf_counter()
    if cfg.scheme == Scheme.PICARD:
        traj = solve_picard(u0, cfg)
    elif cfg.scheme == Scheme.GALERKIN_ODE:
        traj = run_galerkin_oracle(u0, cfg)
    else:
        traj = run_simulation(u0, cfg)

    energy_csv = out / "energy.csv"
    write_energy_csv(energy_csv, traj.ledger)
    artifacts = {"energy_csv": "energy.csv", "snapshots": [], "pressure": []}
    for i, (t, u) in enumerate(zip(traj.times, traj.snapshots)):
        name = f"snapshots/snap_{i:06d}.nsrg"
        write_snapshot(out / name, u, cfg.visc, float(t))
        artifacts["snapshots"].append(name)
        if args.pressure:
            f = cfg.forcing.sample(float(t))
            p = recover_pressure(u, f, nonlinear_term(u))
            pname = f"snapshots/pressure_{i:06d}.nsrg"
            _write_pressure(out / pname, p, cfg.visc, float(t))
            artifacts["pressure"].append(pname)

    manifest = RunManifest(
        config=setup.to_dict(),
        artifacts=artifacts,
        code_version=__version__,
        duration_seconds=time.perf_counter() - started,
    )
    write_manifest(out / "manifest.json", manifest)
    final_norm = float(np.sqrt(traj.ledger.l2_sq[-1]))
    print(f"run complete: t={traj.times[-1]:.6g}, |u| = {final_norm:.12g}, -> {out}")
    return 0


def _write_pressure(path, p, visc, t):
    # stored with the same header as velocity snapshots, single component
    from .io import SNAPSHOT_MAGIC, SNAPSHOT_VERSION, _HEADER

    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, p.grid.dim, p.grid.modes_per_axis,
        visc.m, visc.epsilon, visc.nu, t,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(p.coeffs).astype("<c16").tobytes())


def _parse_epsilons(text: str) -> list[float]:
    try:
        eps = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad epsilon list: {exc}") from exc
    if len(eps) < 4:
        raise ConfigError("need at least four epsilon values")
    if any(e <= 0 for e in eps):
        raise ConfigError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons must be strictly descending")
    return eps


def cmd_sweep(args) -> int:
    setup = load_config(args.config)
    eps = _parse_epsilons(args.epsilons)
    cfg = setup.build_solver_config()
    u0 = setup.build_initial(cfg.grid)
    out = _resolve_output(args.output_dir, setup, Path(args.config).stem + "_sweep")

    if args.dry_run:
        for e in eps:
            print(
                f"planned: epsilon={e:g} grid=K{cfg.grid.modes_per_axis} "
                f"dt={cfg.dt:g} horizon={cfg.horizon:g} scheme={cfg.scheme.value}"
            )
        print(f"would write results under {out}")
        return 0

    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs if args.jobs else 1
    result = epsilon_sweep(u0, cfg, eps, jobs=jobs)

    with open(out / "sweep.csv", "w", newline="\n") as fh:
        fh.write("eps_high,eps_low,gap,sup_l2_diff,h1_int_diff\n")
        for (hi, lo, sup, h1) in zip(
            result.epsilons, result.epsilons[1:],
            result.pairwise_sup_diff, result.pairwise_h1_int_diff,
        ):
            fh.write(
                f"{hi:.17g},{lo:.17g},{hi - lo:.17g},{sup:.17g},{h1:.17g}\n"
            )

    gate_ok = result.fitted_rate >= SWEEP_RATE_GATE
    summary = {
        "epsilons": list(result.epsilons),
        "fitted_rate": result.fitted_rate,
        "rate_gate": SWEEP_RATE_GATE,
        "rate_gate_passed": bool(gate_ok),
        "certified_constant": result.certified_constant,
        "hm_sup": [float(x) for x in result.hm_sup],
        "hm_uniform": result.hm_uniform,
    }
    (out / "sweep_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"sweep complete: fitted rate {result.fitted_rate:.3f} "
        f"({'PASS' if gate_ok else 'FAIL'} at gate {SWEEP_RATE_GATE}), "
        f"C-hat {result.certified_constant:.6g} -> {out}"
    )
    return 0 if gate_ok else 1


def cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    results, ok = run_suites(names, args.seed)
    lines = []
    first_failure = None
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.suite}.{r.name}: metric {r.metric:.6e} <= tol {r.tolerance:.6e}"
        lines.append(line)
        print(line)
        if not r.passed and first_failure is None:
            first_failure = f"{r.suite}.{r.name}"
    if args.report:
        report = {
            "seed": args.seed,
            "suites": names,
            "passed": bool(ok),
            "checks": [
                {
                    "suite": r.suite,
                    "name": r.name,
                    "metric": f"{r.metric:.17g}",
                    "tolerance": f"{r.tolerance:.17g}",
                    "passed": bool(r.passed),
                }
                for r in results
            ],
        }
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not ok:
        print(f"first failing invariant: {first_failure}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"blow-up: {exc} (last good time {exc.last_good_time:.6g})", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
