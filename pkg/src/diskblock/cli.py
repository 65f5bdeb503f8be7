"""Command-line front end: simulate, convergence, selftest.

Exit codes: 0 success, 1 bad input (arguments, config, parameter
violations), 2 runtime failure (diverged run, failed selftest, write
errors).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .fields import DiskGrid, dfs_extend, analyze, synthesize, disk_integral
from .solver import DiskSolver, SolverError, solve_bvp_1d
from .harness import (
    convergence_study,
    initial_disk_ok,
    initial_random_blocks,
    initial_ring_nuclei,
    initial_semi_random_circles,
    initial_two_disks_no,
    run_coarsening,
)
from .files import (
    ConfigError,
    parse_config,
    resolve_threads,
    thread_limit,
    write_report,
    write_snapshot,
    write_trace,
)

__all__ = ["cli_main", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diskblock",
        description="Block-copolymer phase-field dynamics on the unit disk",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run coarsening dynamics from a config")
    sim.add_argument("--config", required=True, help="path to a key = value config file")
    conv = sub.add_parser("convergence", help="tau-ladder error study from a config")
    conv.add_argument("--config", required=True, help="path to a key = value config file")
    sub.add_parser("selftest", help="run the analytic solver checks")
    return parser


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError([f"cannot read config {path}: {e.strerror}"]) from None
    return parse_config(text)


def _build_initial(cfg, grid):
    p = cfg.params
    if cfg.model == "ok":
        if cfg.initial == "disk":
            return initial_disk_ok(grid, p.omega)
        if cfg.initial == "ring_nuclei":
            return initial_ring_nuclei(grid, p.omega, seed=cfg.seed)
        return initial_random_blocks(grid, ratio=cfg.ratio, seed=cfg.seed)
    if cfg.initial == "two_disks":
        return initial_two_disks_no(grid, p.omega1, p.omega2)
    return initial_semi_random_circles(grid, seed=cfg.seed)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    threads = resolve_threads(cfg.threads)
    grid = DiskGrid(cfg.n_r, cfg.n_theta)
    initial = _build_initial(cfg, grid)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with thread_limit(threads):
        art = run_coarsening(cfg.model, cfg.params, initial,
                             snapshot_times=cfg.snapshot_times, grid=grid)

    trace_path = out / "trace.csv"
    write_trace(art.trace, trace_path)
    written = [trace_path]

    def dump(field, stem):
        path = out / f"{stem}.csv"
        write_snapshot(field, path)
        written.append(path)

    for idx, (t, snap) in enumerate(art.snapshots):
        if cfg.model == "ok":
            dump(snap, f"snapshot_{idx:03d}")
        else:
            dump(snap[0], f"snapshot_{idx:03d}_u1")
            dump(snap[1], f"snapshot_{idx:03d}_u2")
    final = art.final_state
    if cfg.model == "ok":
        dump(final.current, "final")
    else:
        dump(final.u1, "final_u1")
        dump(final.u2, "final_u2")

    print(f"stopped: {art.stop_reason} at step {final.step} (t = {final.time:g})")
    print(f"bubbles: {art.bubbles}")
    if len(art.trace):
        print(f"E_raw: {art.trace.e_raw[0]:.6g} -> {art.trace.e_raw[-1]:.6g}")
    names = ", ".join(str(p) for p in written)
    print(f"wrote {names} (snapshots carry a *_coeffs sidecar)")
    return 2 if art.stop_reason == "diverged" else 0


def _cmd_convergence(args) -> int:
    cfg = _load_config(args.config)
    problems = []
    if not cfg.taus:
        problems.append("missing required key: taus")
    if not cfg.benchmark_tau > 0:
        problems.append("missing required key: benchmark_tau")
    if problems:
        raise ConfigError(problems)
    threads = resolve_threads(cfg.threads)
    grid = DiskGrid(cfg.n_r, cfg.n_theta)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with thread_limit(threads):
        rep = convergence_study(cfg.model, cfg.params, cfg.taus,
                                cfg.benchmark_tau, grid, T=cfg.T,
                                norm_kind=cfg.norm)

    print(f"{'tau':>12}  {'error':>13}  {'rate':>7}")
    for tau, err, rate in rep.rows:
        r = f"{rate:7.4f}" if rate is not None else " " * 7
        print(f"{tau:12.4e}  {err:13.6e}  {r}")
    print(f"benchmark tau = {rep.benchmark_tau:g}, norm = {rep.norm_kind}, "
          f"epsilon = {rep.epsilon:g} ({rep.epsilon_multiplier:g} h)")
    report_path = out / "report.csv"
    write_report(rep, report_path)
    print(f"wrote {report_path}")
    return 0


def _cmd_selftest(args) -> int:
    checks = []

    grid = DiskGrid(33, 32)
    solver = DiskSolver(grid)
    f = analyze(dfs_extend(grid, lambda r, t: 8.0 - 16.0 * r**2 + (1.0 - r**2) ** 2))
    u = solver.helmholtz_solve(f, 1.0)
    exact = dfs_extend(grid, lambda r, t: (1.0 - r**2) ** 2)
    checks.append(("helmholtz", np.abs(synthesize(u).values - exact.values).max(), 1e-10))

    g = analyze(dfs_extend(grid, lambda r, t: 8.0 - 16.0 * r**2))
    w = solver.inverse_laplacian(g)
    wex = dfs_extend(grid, lambda r, t: (1.0 - r**2) ** 2 - 1.0 / 3.0)
    err = np.abs(synthesize(w).values - wex.values).max()
    checks.append(("inverse_laplacian", err, 1e-10))
    checks.append(("inverse_laplacian mean", abs(disk_integral(w)) / np.pi, 1e-10))

    coeffs = solve_bvp_1d(np.zeros(1), [2.0, 2.0], "dirichlet", 16)
    x = np.cos(np.pi * np.arange(17) / 16.0)
    vals = np.polynomial.chebyshev.chebval(x, coeffs)
    checks.append(("bvp_1d", np.abs(vals - (x**2 - 1.0)).max(), 1e-12))

    ok = True
    for name, residual, tol in checks:
        good = residual <= tol
        ok = ok and good
        print(f"{name:24s} residual {residual:9.3e}  (tol {tol:g})  "
              f"{'PASS' if good else 'FAIL'}")
    return 0 if ok else 2


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        return _cmd_selftest(args)
    except ConfigError as e:
        for msg in e.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main(sys.argv[1:]))
