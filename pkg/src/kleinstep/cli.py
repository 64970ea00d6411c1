"""Command line: analytic rows, parameter sweeps, packet simulations, checks.

All quantities are in units of the mass m (hbar = c = 1); energies and
potentials are multiples of m and lengths multiples of 1/m.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 failed checks.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .analytic import (
    antiparticle_relabel,
    check_current_balance,
    momentum_averaged_reflectivity,
    solve_step,
    wave_currents,
)
from .core import DomainError, ParticleParams, Regime
from .csvio import fmt, write_csv, write_snapshots
from .scenario import Scenario, ScenarioError, SweepSpec, load_scenario, parse_range
from .sim import ConfigError, NumericalError, ObservableRecord, measure_R, plan_packet_run, run_plan
from . import verify as verify_mod

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

ANALYTIC_COLUMNS = (
    "E", "V0", "regime", "threshold", "p_prime", "q",
    "re_b", "im_b", "re_bprime", "im_bprime", "R",
    "rho_i", "rho_r", "rho_t", "j_i", "j_r", "j_t",
    "balance_residual", "E_c", "p_c", "attractive_step",
)


def analytic_row(E: float, V0: float, a2: float = 1.0, tag: str = "") -> tuple:
    sol = solve_step(ParticleParams(m=1.0, E=E), V0)
    cur = wave_currents(sol)
    if sol.regime is Regime.KLEIN:
        view = antiparticle_relabel(sol)
        E_c, p_c = view.E_c, view.p_c
    else:
        E_c = p_c = math.nan
    threshold = tag or (sol.regime.value if sol.regime.is_threshold else "")
    return (
        E, V0, sol.regime.value, threshold,
        math.nan if sol.p_prime is None else sol.p_prime,
        math.nan if sol.q is None else sol.q,
        sol.b_over_a.real, sol.b_over_a.imag, sol.bprime_over_a.real, sol.bprime_over_a.imag,
        sol.R,
        a2 * cur.rho_i, a2 * cur.rho_r, a2 * cur.rho_t,
        a2 * cur.j_i, a2 * cur.j_r, a2 * cur.j_t,
        check_current_balance(sol), E_c, p_c, V0 < 0,
    )


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario) if getattr(args, "scenario", None) else Scenario()
    over = {k: getattr(args, k) for k in ("E", "V0", "a2") if getattr(args, k, None) is not None}
    for k in ("out", "snapshots"):
        if getattr(args, k, None):
            over[k] = getattr(args, k)
    return replace(sc, **over).validate()


def _warn_attractive(V0: float) -> None:
    if V0 < 0:
        print(f"note: V0 = {V0:g} m is an attractive step; rows are flagged in the attractive_step column", file=sys.stderr)


def cmd_analytic(args) -> int:
    sc = _scenario(args)
    _warn_attractive(sc.V0)
    fh, close = _open_out(sc.out)
    try:
        write_csv(fh, ANALYTIC_COLUMNS, [analytic_row(sc.E, sc.V0, sc.a2)])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_sweep(args) -> int:
    lo, hi = parse_range(args.range)
    spec = SweepSpec(
        axis=args.axis, lo=lo, hi=hi, steps=args.steps,
        E=1.25 if args.E is None else args.E, V0=3.0 if args.V0 is None else args.V0,
    )
    pts = spec.samples()
    for v, _ in pts:
        E, V0 = spec.point(v)
        if not E > 1:
            raise ScenarioError(f"sweep reaches E = {E:g} m; the particle must have E > m")
    if any(spec.point(v)[1] < 0 for v, _ in pts):
        _warn_attractive(min(spec.point(v)[1] for v, _ in pts))
    a2 = 1.0 if args.a2 is None else args.a2

    def row(item):
        v, tag = item
        E, V0 = spec.point(v)
        return analytic_row(E, V0, a2, tag)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(row, pts))
    fh, close = _open_out(args.out)
    try:
        write_csv(fh, ANALYTIC_COLUMNS, rows)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    _warn_attractive(sc.V0)
    plan = plan_packet_run(
        sc.E, sc.V0,
        sigma_x=sc.sigma_x, dx=sc.dx, dt=sc.dt, cfl_guard=sc.cfl_guard,
        boundary=sc.boundary, integrator=sc.integrator, stencil_order=sc.stencil_order,
        smoothing_width=sc.smoothing_width, n_records=sc.n_records, absorb_width=sc.absorb_width,
    )
    if sc.snapshot_every:
        plan = replace(plan, config=replace(plan.config, snapshot_every=sc.snapshot_every))
    cfg = plan.config
    print(
        f"grid: n={cfg.grid.n} dx={cfg.grid.dx:g} [{cfg.grid.x_min:.6g}, {cfg.grid.x_max:.6g}] "
        f"dt={cfg.dt:.6g} steps={cfg.n_steps} regime={plan.regime.value}"
    )
    res = run_plan(plan)
    out = sc.out or "observables.csv"
    fh, close = _open_out(out)
    try:
        write_csv(fh, ObservableRecord.FIELDS, [r.row() for r in res.records])
    finally:
        if close:
            fh.close()
    if sc.snapshots:
        paths = write_snapshots(sc.snapshots, res.snapshots or [res.final])
        print(f"wrote {len(paths)} snapshot(s) to {sc.snapshots}")
    meas = measure_R(res)
    R_an = solve_step(plan.params, sc.V0).R
    R_avg = momentum_averaged_reflectivity(sc.E, sc.V0, 1.0, sc.sigma_x)
    sign = "negative" if meas.Q_right < 0 else "positive" if meas.Q_right > 0 else "zero"
    print(f"R_measured = {fmt(meas.R)}")
    print(f"T_measured = {fmt(meas.T)}")
    print(f"Q_right = {fmt(meas.Q_right)} ({sign})")
    print(f"R_analytic = {fmt(R_an)} (relative difference {fmt(meas.R / R_an - 1)})")
    print(f"R_momentum_averaged = {fmt(R_avg)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ctx = verify_mod.VerifyContext.with_hooks(args.inject or [], seed=args.seed)
    checks = verify_mod.QUICK_CHECKS if args.quick else verify_mod.ALL_CHECKS
    print(f"seed = {ctx.seed}" + (f"  test hooks: {', '.join(args.inject)}" if args.inject else ""))
    results = verify_mod.run_checks(ctx, checks, jobs=args.jobs)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.json:
        summary = {
            "seed": ctx.seed,
            "hooks": list(args.inject or []),
            "passed": not failed,
            "checks": [r.as_dict() for r in results],
        }
        Path(args.json).write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kleinstep", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def physics(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", help="scenario file (key = value lines)")
        p.add_argument("--E", type=float, help="energy in units of m (default 1.25)")
        p.add_argument("--V0", type=float, help="step height in units of m (default 3.0)")
        p.add_argument("--a2", type=float, help="incident intensity |a|^2 scaling densities")
        p.add_argument("--out", help="output CSV (default stdout)")

    p = sub.add_parser("analytic", help="plane-wave solution for one (E, V0)")
    physics(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("sweep", help="analytic rows over a range of V0 or E")
    physics(p, scenario=False)
    p.add_argument("--axis", choices=("V0", "E"), required=True)
    p.add_argument("--range", required=True, help="LO:HI in units of m")
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="evolve a Gaussian packet against the step")
    physics(p)
    p.add_argument("--snapshots", help="directory for field snapshots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run invariant and acceptance checks")
    p.add_argument("--quick", action="store_true", help="skip the long packet runs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=verify_mod.DEFAULT_SEED)
    p.add_argument("--json", help="write a machine-readable summary here")
    p.add_argument(
        "--inject", action="append", choices=("flip-branch", "double-dt"),
        help="test hook: deliberately break the branch rule or the time step",
    )
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ConfigError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
