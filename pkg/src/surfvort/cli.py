"""Batch command-line front end.

Subcommands:

    simulate     run a scenario config file (diagnostics CSV + snapshots)
    equilibrium  emit sphere equilibrium fields or torus recurrence
                 coefficients as CSV
    geometry     dump per-node Ricci scalar, Jacobian and g^zetazeta
    check        run invariant suites (grid | operators | hamiltonian |
                 killing-diffusion | all)

Exit codes: 0 success, 1 check/solver failure, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import checks, config as cfgmod, dynamics, equilibria, geometry
from . import operators as op
from .grid import ScalarField, grid_for_chart, write_snapshot


def _add_grid_args(p, nmu=64, nnu=128):
    p.add_argument("--Nmu", type=int, default=nmu)
    p.add_argument("--Nnu", type=int, default=nnu)


def build_parser():
    p = argparse.ArgumentParser(prog="surfvort",
                                description="vorticity dynamics on curved "
                                            "surfaces")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--output", default=None,
                     help="override the configured output directory")

    eq = sub.add_parser("equilibrium", help="diffusive equilibria")
    eqsub = eq.add_subparsers(dest="surface", required=True)
    eqs = eqsub.add_parser("sphere")
    eqs.add_argument("--B0", type=float, default=1.0)
    eqs.add_argument("--A1", type=float, default=0.0)
    eqs.add_argument("--B1", type=float, default=0.0)
    eqs.add_argument("--R", type=float, default=1.0)
    _add_grid_args(eqs)
    eqs.add_argument("--output", default="equilibrium_sphere")
    eqt = eqsub.add_parser("torus")
    eqt.add_argument("--alpha", type=float, required=True)
    eqt.add_argument("--c2", type=float, default=1.0)
    eqt.add_argument("--cm2", type=float, default=0.0)
    eqt.add_argument("--K", type=int, default=16)
    eqt.add_argument("--output", default="equilibrium_torus")

    geo = sub.add_parser("geometry", help="dump chart fields as CSV")
    geo.add_argument("--chart", required=True,
                     choices=sorted(cfgmod.CHART_PARAM_KEYS))
    geo.add_argument("--R", type=float, default=1.0)
    geo.add_argument("--r0", type=float, default=2.0)
    geo.add_argument("--T", type=float, default=0.25)
    geo.add_argument("--Lx", type=float, default=1.0)
    geo.add_argument("--Ly", type=float, default=1.0)
    geo.add_argument("--eps", type=float, default=0.3)
    _add_grid_args(geo, 64, 64)
    geo.add_argument("--output", default="geometry_dump")

    chk = sub.add_parser("check", help="run invariant suites")
    chk.add_argument("suite", choices=sorted(checks.SUITES) + ["all"])
    return p


def cmd_simulate(args) -> int:
    try:
        sc = cfgmod.parse_config(args.config)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        state, records = cfgmod.run_scenario(sc, output_dir=args.output)
    except (op.SolverError, dynamics.ChartMismatchError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    last = records[-1]
    print(f"t={last.t:.6g} H={last.energy:.12g} W={last.enstrophy:.12g} "
          f"omega in [{last.omega_min:.6g}, {last.omega_max:.6g}]")
    return 0


def cmd_equilibrium_sphere(args) -> int:
    chart = geometry.sphere_chart(R=args.R)
    grid = grid_for_chart(chart, args.Nmu, args.Nnu)
    e = equilibria.sphere_equilibrium(args.B0, args.A1, args.B1, args.R, grid)
    os.makedirs(args.output, exist_ok=True)
    write_snapshot(os.path.join(args.output, "omega.csv"), e.omega,
                   chart.name, chart.zeta0, 0.0)
    write_snapshot(os.path.join(args.output, "psi.csv"), e.psi,
                   chart.name, chart.zeta0, 0.0)
    gam = chart.induced_metric(grid.MU, grid.NU, chart.zeta0)
    speed = np.sqrt(gam[..., 0, 0] * e.u_theta ** 2
                    + gam[..., 1, 1] * e.u_phi ** 2)
    write_snapshot(os.path.join(args.output, "speed.csv"),
                   ScalarField(grid, speed), chart.name, chart.zeta0, 0.0)
    print(f"wrote omega.csv, psi.csv, speed.csv to {args.output}")
    return 0


def cmd_equilibrium_torus(args) -> int:
    rec = equilibria.torus_recurrence(args.alpha, c2=args.c2, cm2=args.cm2,
                                      K=args.K)
    os.makedirs(args.output, exist_ok=True)
    path = os.path.join(args.output, "coefficients.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "c_k"])
        for k in sorted(rec.coefficients):
            writer.writerow([k, f"{rec.coefficients[k]:.17g}"])
    print(f"alpha={args.alpha} classification={rec.classification} "
          f"({len(rec.coefficients)} coefficients -> {path})")
    if rec.growth_ratios:
        tail = rec.growth_ratios[-4:]
        print("growth ratios (tail):", " ".join(f"{r:.4g}" for r in tail))
    return 0


def cmd_geometry(args) -> int:
    kwargs = {k: getattr(args, k) for k in cfgmod.CHART_PARAM_KEYS[args.chart]}
    chart = geometry.builtin_chart(args.chart, **kwargs)
    grid = grid_for_chart(chart, args.Nmu, args.Nnu)
    cache = op.GeometryCache(chart, grid)
    os.makedirs(args.output, exist_ok=True)
    for name, values in (("ricci", cache.ricci), ("jacobian", cache.J),
                         ("gzz", cache.g_zz)):
        write_snapshot(os.path.join(args.output, f"{name}.csv"),
                       ScalarField(grid, np.broadcast_to(
                           values, grid.shape()).copy()),
                       chart.name, chart.zeta0, 0.0)
    print(f"wrote ricci.csv, jacobian.csv, gzz.csv to {args.output}")
    return 0


def cmd_check(args) -> int:
    ok = checks.run_suites([args.suite])
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "equilibrium":
        if args.surface == "sphere":
            return cmd_equilibrium_sphere(args)
        return cmd_equilibrium_torus(args)
    if args.command == "geometry":
        return cmd_geometry(args)
    if args.command == "check":
        return cmd_check(args)
    parser.error(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
