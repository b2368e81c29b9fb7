"""Command-line entry point.

Subcommands: run (simulate a scenario and write CSV results), compare
(run several junction solvers on the same grid and report differences),
verify (fixtures plus randomized property sweeps), riemann (solve a
single junction problem and print the recursion trace).

Exit codes: 0 success, 1 usage error, 2 scenario error, 3 runtime or
verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .diagnostics import (
    interaction_fixtures,
    check_fixture,
    check_p2_p3,
    format_report,
    write_report,
)
from .flux import FluxModel
from .godunov import CFLViolationError, run
from .junction import (
    JunctionSpec,
    UnsupportedJunctionError,
    bounds_from_data,
    get_solver,
    hbar,
)
from .scenario import (
    BUILTIN_NAMES,
    ScenarioError,
    build_network,
    builtin_scenario,
    load_scenario,
    write_results,
)
from .traces import reconstruct

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this tool reserves 2 for
    # scenario errors, so route usage failures through an exception.
    def error(self, message):
        raise _UsageError(message)


def _default_out() -> str:
    return os.environ.get("NETLWR_OUT", "netlwr-out")


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--builtin", choices=BUILTIN_NAMES, help="bundled scenario name")
    p.add_argument("--scenario", metavar="PATH", help="scenario YAML file")
    p.add_argument("--dx", type=float, help="override cell size on every road")
    p.add_argument("--T", type=float, help="override final time")
    p.add_argument("--cfl", type=float, help="override the CFL safety factor")


def _resolve_scenario(args):
    if bool(args.builtin) == bool(args.scenario):
        raise _UsageError("exactly one of --builtin / --scenario is required")
    scenario = builtin_scenario(args.builtin) if args.builtin else load_scenario(args.scenario)
    if args.T is not None:
        scenario.T = args.T
    if args.cfl is not None:
        scenario.cfl_safety = args.cfl
    return scenario


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netlwr", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_run = sub.add_parser("run", help="simulate a scenario and write results")
    _add_scenario_args(p_run)
    p_run.add_argument("--solver", choices=("prs", "sprs", "maxflux"), help="junction solver")
    p_run.add_argument("--out", default=None, help="output directory (default $NETLWR_OUT)")
    p_run.add_argument("--plots", action="store_true", help="also render PNG figures")

    p_cmp = sub.add_parser("compare", help="run several solvers on one scenario")
    _add_scenario_args(p_cmp)
    p_cmp.add_argument(
        "--solvers",
        default="prs,sprs",
        help="comma-separated solver list (default prs,sprs)",
    )
    p_cmp.add_argument("--out", default=None, help="output directory (default $NETLWR_OUT)")
    p_cmp.add_argument("--plots", action="store_true", help="also render overlay figures")

    p_ver = sub.add_parser("verify", help="run fixtures and randomized property sweeps")
    p_ver.add_argument("--solver", default="prs", choices=("prs", "sprs"), help="solver to sweep")
    p_ver.add_argument("--sweeps", type=int, default=1000, help="number of random experiments")
    p_ver.add_argument("--seed", type=int, default=0, help="sweep seed")
    p_ver.add_argument("--out", default=None, help="optional report directory")
    mode = p_ver.add_mutually_exclusive_group()
    mode.add_argument("--assert", dest="assert_mode", action="store_true", default=True)
    mode.add_argument("--report-only", dest="assert_mode", action="store_false")

    p_rie = sub.add_parser("riemann", help="solve one junction problem and print the trace")
    p_rie.add_argument("--builtin", choices=BUILTIN_NAMES, help="bundled scenario name")
    p_rie.add_argument("--scenario", metavar="PATH", help="scenario YAML file (first junction)")
    p_rie.add_argument("--A", help="distribution matrix, rows ';'-separated: '0.6,0;0.4,1'")
    p_rie.add_argument("--P", help="priorities, comma-separated")
    p_rie.add_argument("--data", help="per-road densities, incoming first, comma-separated")
    p_rie.add_argument("--solver", default="prs", choices=("prs", "sprs", "maxflux"))
    return parser


# -- subcommands -----------------------------------------------------


def cmd_run(args) -> int:
    scenario = _resolve_scenario(args)
    if args.solver:
        scenario.solver_choice = args.solver
    network = build_network(scenario, dx=args.dx)
    trajectory = run(
        network, scenario.solver_choice, scenario.T, scenario.cfl_safety, scenario.sample_times
    )
    outdir = args.out or _default_out()
    written = write_results(trajectory, scenario, network, outdir)
    if args.plots:
        from .plotting import render_all

        written += render_all(trajectory, scenario, network, outdir)
    _print_final_state(scenario, network, trajectory)
    print(f"wrote {len(written)} files to {outdir}")
    return EXIT_OK


def _print_final_state(scenario, network, trajectory) -> None:
    rec = trajectory.final_record()
    if rec is None:
        return
    print(f"final time t = {rec.t:g} (solver {scenario.solver_choice})")
    for jid, junction in network.junctions.items():
        fx = rec.junction_fluxes[jid]
        print(f"junction {jid}: Gamma = {fx.q_in.sum():.10g}, hbar = {fx.hbar:.10g}")
        for rid, q in zip(junction.incoming, fx.q_in):
            print(f"  in  {rid}: q = {q:.10g}")
        for rid, q in zip(junction.outgoing, fx.q_out):
            print(f"  out {rid}: q = {q:.10g}")


def cmd_compare(args) -> int:
    scenario = _resolve_scenario(args)
    solver_names = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if not solver_names:
        raise _UsageError("--solvers needs at least one solver")
    for name in solver_names:
        get_solver(name)  # validate early
    outdir = args.out or _default_out()

    results = {}
    for name in solver_names:
        sc = _resolve_scenario(args)
        sc.solver_choice = name
        network = build_network(sc, dx=args.dx)
        trajectory = run(network, name, sc.T, sc.cfl_safety, sc.sample_times)
        results[name] = (trajectory, network)
        write_results(trajectory, sc, network, os.path.join(outdir, name))

    print(f"compare {'/'.join(solver_names)} on T = {scenario.T:g}")
    print("boundary fluxes at final time:")
    ref_name = solver_names[0]
    some_network = results[ref_name][1]
    for jid, junction in some_network.junctions.items():
        for k, rid in enumerate(list(junction.incoming) + list(junction.outgoing)):
            side = "in" if k < len(junction.incoming) else "out"
            cells = []
            for name in solver_names:
                fx = results[name][0].final_record().junction_fluxes[jid]
                q = fx.q_in[k] if side == "in" else fx.q_out[k - len(junction.incoming)]
                cells.append(f"{name}={q:.10g}")
            print(f"  {jid} {side:>3} {rid}: " + "  ".join(cells))

    if len(solver_names) > 1:
        print(f"L1 density gaps at final sample (vs {ref_name}):")
        ref_traj, ref_net = results[ref_name]
        for name in solver_names[1:]:
            traj, net = results[name]
            for rid in ref_net.roads:
                a = ref_traj.samples[-1][2][rid]
                b = traj.samples[-1][2][rid]
                gap = float(np.sum(np.abs(a - b)) * ref_net.roads[rid].dx)
                print(f"  {name} {rid}: {gap:.6g}")

    if args.plots:
        from .plotting import render_comparison

        render_comparison(results, scenario, outdir)
    return EXIT_OK


def cmd_verify(args) -> int:
    model = FluxModel.quadratic()
    solver = get_solver(args.solver)
    failures = 0
    for fixture in interaction_fixtures(model):
        try:
            res = check_fixture(model, solver, fixture)
            print(
                f"fixture {fixture.name:12s} ok  dGamma={res.d_gamma:+.6f} "
                f"dHbar={res.d_hbar:+.6f} dTVf={res.d_tvf:+.6f}"
            )
        except AssertionError as exc:
            failures += 1
            print(f"fixture {fixture.name:12s} FAILED: {exc}")
    try:
        report = check_p2_p3(
            model,
            solver,
            solver_name=args.solver,
            experiments=args.sweeps,
            seed=args.seed,
            assert_mode=args.assert_mode,
            keep_rows=args.out is not None,
        )
    except AssertionError as exc:
        print(f"sweep FAILED: {exc}")
        return EXIT_RUNTIME
    print(format_report(report), end="")
    if args.out:
        for path in write_report(report, args.out):
            print(f"wrote {path}")
    if failures or report.p1_failures or report.p3_hbar_violations or report.consistency_failures:
        return EXIT_RUNTIME if args.assert_mode else EXIT_OK
    return EXIT_OK


def _parse_matrix(text: str) -> np.ndarray:
    return np.array([[float(v) for v in row.split(",")] for row in text.split(";")])


def cmd_riemann(args) -> int:
    model = FluxModel.quadratic()
    if args.builtin or args.scenario:
        if args.A or args.P or args.data:
            raise _UsageError("give either a scenario source or inline --A/--P/--data, not both")
        scenario = builtin_scenario(args.builtin) if args.builtin else load_scenario(args.scenario)
        model = scenario.flux_model()
        jc = scenario.junctions[0]
        spec = jc.spec()
        rho0 = np.array(
            [scenario.road(rid).initial[-1][2] for rid in jc.incoming]
            + [scenario.road(rid).initial[0][2] for rid in jc.outgoing]
        )
    elif args.A and args.P and args.data:
        A = _parse_matrix(args.A)
        P = np.array([float(v) for v in args.P.split(",")])
        rho0 = np.array([float(v) for v in args.data.split(",")])
        try:
            spec = JunctionSpec(n=A.shape[1], m=A.shape[0], A=A, P=P)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        if rho0.shape != (spec.n + spec.m,):
            raise ScenarioError(
                f"--data needs {spec.n + spec.m} densities, got {rho0.size}"
            )
    else:
        raise _UsageError("riemann needs --builtin/--scenario or all of --A, --P, --data")

    solver = get_solver(args.solver)
    bounds = bounds_from_data(model, spec, rho0)
    print(f"solver: {args.solver}")
    print(f"data:     {_vec(rho0)}")
    print(f"demands:  {_vec(bounds.gamma_max_in)}")
    print(f"supplies: {_vec(bounds.gamma_max_out)}")
    fluxes = solver(spec, bounds)
    for k, step in enumerate(fluxes.steps, start=1):
        h_in = ", ".join(f"road {i + 1}: {v:.10g}" for i, v in sorted(step.h_in.items()))
        h_out = ", ".join(f"road {spec.n + j + 1}: {v:.10g}" for j, v in sorted(step.h_out.items()))
        fixed = ", ".join(f"road {i + 1}" for i in step.fixed)
        print(f"step {k}: h_in [{h_in}]")
        print(f"        h_out [{h_out}]")
        print(f"        h = {step.hbar:.10g} ({step.branch} binds) -> fix {fixed}")
    print(f"Q      = {_vec(fluxes.q_in)}")
    print(f"A.Q    = {_vec(fluxes.q_out)}")
    print(f"hbar   = {hbar(spec, bounds):.10g}")
    trace = reconstruct(model, rho0, fluxes)
    print(f"traces = {_vec(trace.rho_bar)}")
    return EXIT_OK


def _vec(v) -> str:
    return "(" + ", ".join(f"{x:.10g}" for x in np.asarray(v)) + ")"


# -- dispatch --------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        handler = {
            "run": cmd_run,
            "compare": cmd_compare,
            "verify": cmd_verify,
            "riemann": cmd_riemann,
        }[args.command]
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except (UnsupportedJunctionError, CFLViolationError, AssertionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
