"""Command line entry point ``vlasovlab``.

Exit codes: 0 success, 2 invalid input, 3 the run hit a numerical horizon.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import (ConfigurationError, ConstructionError, DecayError, DomainError,
                     NumericalHorizonError, OutOfValidityError, ResolutionError)
from .report import ReportRow, emit_report, resolution_tag, simulation_rows

log = logging.getLogger("vlasovlab")

EXIT_OK, EXIT_INVALID, EXIT_HORIZON = 0, 2, 3
_INVALID = (ConfigurationError, OutOfValidityError, ConstructionError, DomainError,
            ResolutionError, DecayError, FileNotFoundError, IsADirectoryError)


def _simulate(args) -> list[ReportRow]:
    from .grid import dump_field
    from .scenario_io import parse_scenario
    from .solver import bisect_horizon, run_simulation
    sc = parse_scenario(args.scenario)
    if args.gate is not None:
        T, out, attempts = bisect_horizon(sc, gate=args.gate)
        log.info("horizon T = %g after %d attempt(s)", T, len(attempts))
        sc = sc.with_T(T)
    else:
        out = run_simulation(sc)
    if args.dump_dir:
        d = Path(args.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, snap in enumerate(out.snapshots):
            dump_field(snap, d / f"snapshot_{i:05d}.vlg")
    return simulation_rows(out, sc)


def _counterexample1(args) -> list[ReportRow]:
    from .counterexamples import counterexample1, counterexample1_direct
    exact, quad = counterexample1(args.k, args.t)
    rows = [ReportRow(args.t, "dxk_rho_norm_exact", f"k={args.k};form=translate", exact, "quad"),
            ReportRow(args.t, "dxk_rho_norm_quadrature", f"k={args.k};form=translate", quad, "quad")]
    if args.direct:
        exact, quad = counterexample1_direct(args.k, args.t)
        rows += [ReportRow(args.t, "dxk_rho_norm_exact", f"k={args.k};form=direct", exact, "quad"),
                 ReportRow(args.t, "dxk_rho_norm_quadrature", f"k={args.k};form=direct", quad,
                           "quad")]
    return rows


def _superposition(args) -> list[ReportRow]:
    from .counterexamples import counterexample_superposition, example2_setup, example3_setup
    setup = (example2_setup if args.which == "example2" else example3_setup)(
        **({"T": args.T} if args.T is not None else {}))
    res = counterexample_superposition(setup, step_error=not args.no_step_error)
    tag = resolution_tag(setup.grid, setup.dt)
    rows = [ReportRow(float(t), "decoupling_residual", args.which, float(r), tag)
            for t, r in zip(res.times, res.residual)]
    rows += [ReportRow(float(t), "neglected_force_term", args.which, float(n), tag)
             for t, n in zip(res.times, res.neglected)]
    rows.append(ReportRow(setup.T, "sup_decoupling_residual", args.which, res.sup_residual, tag))
    if res.step_error is not None:
        rows.append(ReportRow(setup.T, "step_error", args.which, res.step_error, tag))
    if res.contact_time is not None:
        rows.append(ReportRow(res.contact_time, "first_contact_time", args.which,
                              res.contact_time, tag))
        rows.append(ReportRow(setup.T, "residual_growth", args.which, res.growth, tag))
    return rows


def _commutation(args) -> list[ReportRow]:
    from .models import ZeroForce, force_assemble
    from .operators import commutation_study, observed_orders
    from .scenario_io import parse_scenario
    sc = parse_scenario(args.scenario)
    force = force_assemble(sc.model, sc.f0)
    if isinstance(force, ZeroForce):
        raise ConfigurationError("commutation-check needs a nonzero force (model.kind = zero)")
    g, n = sc.grid, args.levels
    if g.nx >> (n - 1) < 8 or g.nv >> (n - 1) < 8:
        raise ConfigurationError(f"grid {g.nx}x{g.nv} too coarse for {n} levels")
    levels = [(g.nx >> (n - 1 - i), g.nv >> (n - 1 - i), sc.dt * 2 ** (n - 1 - i))
              for i in range(n)]
    t = sc.T
    study = commutation_study(force, sc.advection, levels, t=t, v_cut=g.v_cut)
    rows = [ReportRow(t, "commutation_residual", f"dt={dt!r}", res, f"{nx}x{nv}")
            for nx, nv, dt, res in study]
    orders = observed_orders([s[3] for s in study])
    rows += [ReportRow(t, "observed_order", f"level={i + 1}", o, f"{s[0]}x{s[1]}")
             for i, (o, s) in enumerate(zip(orders, study[1:]))]
    return rows


def _averaging(args) -> list[ReportRow]:
    from .averaging import gaussian_kernel, smoothing_ratio, spike_kernel
    from .scenario_io import parse_scenario
    sc = parse_scenario(args.scenario)
    g = sc.grid
    kernel = gaussian_kernel(args.width) if args.kernel == "gaussian" else spike_kernel(g.dv)
    modes, m = [], 1
    while m <= g.nx // 4:
        modes.append(m)
        m *= 2
    t = sc.T
    table = smoothing_ratio(kernel, sc.advection, modes, t, g)
    return [ReportRow(t, "smoothing_ratio", f"mode={r.mode};kernel={r.kernel_id}", r.ratio,
                      f"{resolution_tag(g)}/s={r.quadrature_level}") for r in table]


def _thresholds(args) -> list[ReportRow]:
    from .grid import compute_thresholds
    N, R = compute_thresholds(args.d, args.lam, args.r0)
    p = f"d={args.d};lambda={args.lam!r};r0={args.r0!r}"
    return [ReportRow(0.0, "regularity_index_N", p, N, "exact"),
            ReportRow(0.0, "weight_index_R", p, R, "exact")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vlasovlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", required=True, help="CSV report path")
        p.set_defaults(fn=fn)
        return p

    p = add("simulate", _simulate, "run a scenario file (Picard sweeps)")
    p.add_argument("scenario")
    p.add_argument("--gate", type=float, default=None,
                   help="halve T until every contraction ratio is <= GATE")
    p.add_argument("--dump-dir", default=None, help="write snapshots as binary grid dumps")

    p = add("counterexample1", _counterexample1, "norm law of the free-transport counterexample")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--direct", action="store_true", help="also report the first-principles form")

    p = add("superposition", _superposition, "decoupling residual of a superposition example")
    p.add_argument("--which", choices=("example2", "example3"), required=True)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--no-step-error", action="store_true")

    p = add("commutation-check", _commutation, "residual of L T = T L + ... under refinement")
    p.add_argument("scenario")
    p.add_argument("--levels", type=int, default=4)

    p = add("averaging-probe", _averaging, "smoothing ratios of the averaging operator")
    p.add_argument("scenario")
    p.add_argument("--kernel", choices=("gaussian", "spike"), default="gaussian")
    p.add_argument("--width", type=float, default=1.0)

    p = add("thresholds", _thresholds, "regularity and weight indices N and R")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rows = args.fn(args)
        emit_report(rows, args.out)
    except NumericalHorizonError as exc:
        print(f"vlasovlab: numerical horizon: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except _INVALID as exc:
        print(f"vlasovlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
