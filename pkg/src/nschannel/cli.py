"""Command-line driver: ``run`` a configuration, ``verify`` the numerical
kernels, ``report`` figures from a diagnostics CSV.

Exit codes: 0 success, 1 configuration/IO/solver failure, 2 audit failure
(run with --strict, or any verify check exceeding its tolerance).
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap():
    """NSCH_THREADS caps internal data-parallelism (0 or unset = automatic).
    Must run before numpy is imported anywhere in the process."""
    cap = os.environ.get("NSCH_THREADS", "").strip()
    if cap and cap != "0":
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _build_parser():
    ap = argparse.ArgumentParser(prog="nschannel")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation configuration")
    run.add_argument("config")
    run.add_argument("--strict", action="store_true",
                     help="exit 2 if the conservation/energy audit fails")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--seed", type=int, default=None,
                     help="override the spinodal seed of the configuration")
    run.add_argument("--plots", action="store_true",
                     help="render report figures next to diagnostics.csv")

    ver = sub.add_parser("verify", help="run the verification kernels")
    ver.add_argument("config")
    ver.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("report", help="render figures from a diagnostics CSV")
    rep.add_argument("csv")
    rep.add_argument("--output-dir", default=None)
    return ap


def _load_config(path):
    from .config import parse_config

    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _initial_fields(cfg, grid, seed_override=None):
    from . import coupler

    init = cfg.init
    if init.preset == "constant":
        phase = coupler.constant_phase(grid, init.args[0])
    elif init.preset == "stripe":
        phase = coupler.stripe_phase(grid, init.args[0], init.args[1],
                                     cfg.params.eps)
    elif init.preset == "spinodal":
        seed = init.seed if seed_override is None else seed_override
        phase = coupler.spinodal_phase(grid, seed, init.args[0])
    else:  # pragma: no cover - presets validated at parse time
        raise ValueError(f"unknown preset {init.preset}")
    if init.v0 == "uniform":
        flow = coupler.uniform_flow(grid, init.v0_args[0])
    else:
        flow = None
    return phase, flow


def _cmd_run(args):
    import numpy as np

    from . import coupler, io

    cfg = _load_config(args.config)
    outdir = args.output_dir or cfg.output.directory
    os.makedirs(outdir, exist_ok=True)

    grid, params, consts = cfg.grid, cfg.params, cfg.consts
    phase, flow = _initial_fields(cfg, grid, args.seed)
    records, state, stats = coupler.run_simulation(
        grid, params, consts, phase, flow,
        output_every=cfg.raw["output_every"])

    csv_path = os.path.join(outdir, "diagnostics.csv")
    io.write_diagnostics_csv(records, csv_path)
    if "vtk" in cfg.output.formats:
        ucc, vcc = io.cell_centered_velocity(state.flow.u, state.flow.v, grid)
        io.write_vtk_structured(
            os.path.join(outdir, "final.vtk"), grid,
            scalars={"phi": state.phase.phi, "mu": state.chem.mu,
                     "p": state.flow.p},
            vectors={"velocity": (ucc, vcc)})
    if "csv" in cfg.output.formats:
        io.write_wall_profiles_csv(os.path.join(outdir, "wall_profiles.csv"),
                                   grid, state.phase.psi, state.chem.theta)
    if args.plots:
        from .figures import render_report

        render_report(csv_path)

    if args.strict:
        e0 = records[0].E_total
        m0 = records[0].M_weighted
        tol_m = 1e-9 * (1.0 + abs(m0))
        tol_e = 1e-8 * (1.0 + abs(e0))
        mass_drift = max(abs(r.M_weighted - m0) for r in records)
        e_prev = e0
        worst_rise = 0.0
        for r in records[1:]:
            worst_rise = max(worst_rise, r.E_total - e_prev)
            e_prev = r.E_total
        failures = []
        if mass_drift > tol_m:
            failures.append(f"weighted mass drift {mass_drift:.3e} > {tol_m:.3e}")
        if params.coupling.is_neumann:
            mb_drift = max(abs(r.M_bulk - records[0].M_bulk) for r in records)
            ms_drift = max(abs(r.M_surf - records[0].M_surf) for r in records)
            if mb_drift > 1e-9 * (1.0 + abs(records[0].M_bulk)):
                failures.append(f"bulk mass drift {mb_drift:.3e}")
            if ms_drift > 1e-9 * (1.0 + abs(records[0].M_surf)):
                failures.append(f"surface mass drift {ms_drift:.3e}")
        if worst_rise > tol_e:
            failures.append(f"energy rise {worst_rise:.3e} > {tol_e:.3e}")
        if stats.div_max > 1e-8:
            failures.append(f"post-projection divergence {stats.div_max:.3e} > 1e-8")
        if failures:
            for f in failures:
                print("AUDIT FAIL:", f, file=sys.stderr)
            return 2
    print(f"run complete: {stats.steps} steps, max divergence "
          f"{stats.div_max:.3e}, output in {outdir}")
    return 0


def _cmd_verify(args):
    import numpy as np

    from .galerkin import build_galerkin_system, integrate_and_audit, \
        project_initial_data
    from .navier_stokes import FlowState
    from .verification import (chain_rule_study, eigen_structure_report,
                               elliptic_convergence_study)

    cfg = _load_config(args.config)
    grid, params = cfg.grid, cfg.params
    k, tol = cfg.verify.k, cfg.verify.tol
    checks = []

    eig = eigen_structure_report(max(k, 2), params.alpha, grid)
    checks.append(("eigen lambda_1 = 0", abs(eig.lam1), 1e-10))
    checks.append(("eigen first pair", eig.first_pair_error, 1e-10))
    checks.append(("eigen Gram identity", eig.gram_error, 1e-10))
    checks.append(("eigen mean constraint", eig.mean_constraint_error, 1e-10))

    sys_g = build_galerkin_system(k, params.beta, grid, cfg.consts)
    phase, flow = _initial_fields(cfg, grid, args.seed)
    flow = flow if flow is not None else FlowState.zeros(grid)
    a0, b0 = project_initial_data(sys_g, flow, phase)
    rep = integrate_and_audit(sys_g, a0, b0, cfg.verify.t_end,
                              max(tol, 1e-12))
    checks.append(("galerkin energy identity", rep.max_energy_residual,
                   1e2 * tol * (1.0 + abs(rep.E0))))
    checks.append(("galerkin mass identity", rep.max_mass_residual, 1e-10))

    ell = elliptic_convergence_study()
    order = min(float(np.min(ell.orders_phi)), float(np.min(ell.orders_psi)))
    checks.append(("elliptic order >= 1.9", 1.9 - order, 0.0))

    cr = chain_rule_study()
    cr_order = float(min(cr.orders))
    checks.append(("chain rule order >= 1.9", 1.9 - cr_order, 0.0))

    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, value, bound in checks:
        ok = value <= bound
        failed += 0 if ok else 1
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  "
              f"(value {value:.3e}, bound {bound:.3e})")
    return 2 if failed else 0


def _cmd_report(args):
    from .figures import render_report

    paths = render_report(args.csv, args.output_dir)
    for p in paths:
        print("wrote", p)
    return 0


def main(argv=None):
    _apply_thread_cap()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_report(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
