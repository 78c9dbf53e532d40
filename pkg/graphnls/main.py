#!/usr/bin/env python3
"""
graphnls
Spectra, NLS ground states, stability thresholds and time evolution on compact metric graphs

Usage:
    python main.py COMMAND --graph GRAPH [options]

Example:
    python main.py analyze --graph catalog:loop
    python main.py stability --graph graphs/loop.txt --p 6 --mass 2.8
    python main.py sweep --graph catalog:loop --ell-grid 0.01,0.1,1,10,100
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from graphnls.config import MassGrid, RunConfig, parse_grid
from graphnls.core.analysis import analyze_graph, check_rows, constant_summary, mesh_summary
from graphnls.core.discretize import Mesh, build_mesh
from graphnls.core.dynamics import orbital_probe
from graphnls.core.ground_state import continue_branch, estimate_mu2, find_ground_state
from graphnls.core.nls_energy import NlsParams
from graphnls.core.spectral import eigen_smallest
from graphnls.core.stability import classify_stability, mu1_asymptotics_study
from graphnls.data.graph_loader import resolve_graph
from graphnls.data.metric_graph import MetricGraph, critical_mass
from graphnls.errors import GraphNlsError, IllPosedEvolutionError, SupercriticalMassError
from graphnls.models.report_workbook import generate_report_workbook
from graphnls.models.tables import (
    BRANCH_HEADER,
    EIGEN_HEADER,
    STABILITY_HEADER,
    STATE_HEADER,
    STUDY_HEADER,
    SWEEP_HEADER,
    TRACE_HEADER,
    fmt,
    write_csv,
    write_report,
)

logger = logging.getLogger(__name__)

COMMANDS = ("analyze", "groundstate", "stability", "evolve", "sweep", "branch")

Tables = Dict[str, Tuple[Tuple[str, ...], List[tuple]]]


def print_banner():
    """Print application banner"""
    print("""
╔═══════════════════════════════════════════════════════════════╗
║                          graphnls                             ║
║        NLS ground states and stability on metric graphs       ║
╚═══════════════════════════════════════════════════════════════╝
    """)


def print_graph_summary(g: MetricGraph, mesh: Mesh):
    print(f"\n{'─'*60}")
    print(f"  {g.name}: {len(g.vertices)} vertices, {len(g.edges)} edges")
    print(f"{'─'*60}")
    print(f"  Mesh: {mesh.n_nodes} nodes, {mesh.n_elements} elements, h = {fmt(mesh.h_max)}")
    print(f"{'─'*60}\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_analyze(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    """Topology, lambda_2, mu_1(p), mu_G and the bound checks"""
    report = analyze_graph(g, config.p, mesh=mesh)
    print(f"  Total length:      {fmt(report['total_length'])}")
    print(f"  Terminal edges:    {report['terminal_edges']}")
    print(f"  Bridges:           {report['bridges']}")
    print(f"  Cycle covering:    {fmt(report['cycle_covering'])}")
    print(f"  lambda_2:          {fmt(report['lambda2'])}")
    print(f"  mu_1 (p = {fmt(config.p)}):  {fmt(report['mu1'])}")
    print(f"  mu_1 (p = 6):      {fmt(report['mu1_p6'])}")
    print(f"  Critical mass:     {fmt(report['critical_mass'])}")
    for name, ok, description in check_rows(report["checks"]):
        if ok is not None:
            print(f"    [{'PASS' if ok else 'FAIL'}] {description}")
    spectrum = eigen_smallest(mesh.forms, min(6, mesh.n_nodes))
    tables: Tables = {
        "eigenpairs": (EIGEN_HEADER, [(j + 1, lam, res) for j, (lam, res)
                                      in enumerate(zip(spectrum.eigenvalues, spectrum.residuals))]),
        "eigenvector_2": (STATE_HEADER, mesh.function(
            spectrum.eigenvectors[:, spectrum.zero_mean_index(mesh.forms)]).rows()),
    }
    return report, tables, check_rows(report["checks"])


def _refuse_supercritical(g: MetricGraph, p: float, masses: List[float], inclusive: bool = False):
    if p != 6 or not masses:
        return
    mu_c = critical_mass(g)
    top = max(masses)
    if top > mu_c or (inclusive and top >= mu_c):
        error = IllPosedEvolutionError if inclusive else SupercriticalMassError
        raise error(f"mass {fmt(top)} is beyond the critical mass {fmt(mu_c)} of {g.name} at p = 6")


def cmd_groundstate(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    masses = config.masses()
    _refuse_supercritical(g, config.p, masses + (list(config.bracket) if config.bracket else []))

    rows, results = [], []
    for mu in masses:
        result = find_ground_state(g, NlsParams(config.p, mu), config.starts, config.seed,
                                   mesh=mesh, workers=config.threads)
        results.append(result.to_dict())
        rows.append(result.sweep_row())
        print(f"  mu = {fmt(mu)}: E = {fmt(result.energy)}, is_constant = {fmt(result.is_constant)}, "
              f"gap = {fmt(result.gap_to_constant)}")

    tables: Tables = {"groundstate_sweep": (SWEEP_HEADER, rows)}
    report: Dict[str, Any] = {"p": config.p, "results": results}
    if masses:
        tables["groundstate_state"] = (STATE_HEADER, result.best.u.rows())
    if config.bracket:
        estimate = estimate_mu2(g, config.p, config.bracket, mesh=mesh, seed=config.seed)
        report["constancy_threshold"] = estimate
        print(f"  Empirical constancy threshold: {fmt(estimate)}")
    return report, tables, []


def cmd_stability(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    rows, reports = [], []
    for mu in config.masses():
        rep = classify_stability(g, NlsParams(config.p, mu), mesh=mesh)
        reports.append(rep.to_dict())
        rows.append((mu, rep.mu1, rep.min_tangent_eig, rep.n_negative_L1, rep.n_negative_hessian,
                     rep.verdict.value))
        print(f"  mu = {fmt(mu)}: mu_1 = {fmt(rep.mu1)}, verdict = {rep.verdict.value}")
        for note in rep.notes:
            print(f"    note: {note}")
    return {"p": config.p, "results": reports}, {"stability": (STABILITY_HEADER, rows)}, []


def cmd_evolve(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    _refuse_supercritical(g, config.p, config.masses(), inclusive=True)
    params = NlsParams(config.p, config.mass)
    max_d, trace = orbital_probe(g, params, config.delta, config.t_end, config.seed, config.dt,
                                 mesh=mesh, direction=config.direction)
    print(f"  max d(t) = {fmt(max_d)} (delta = {fmt(config.delta)})")
    print(f"  mass drift = {fmt(trace.mass_drift)}, energy drift = {fmt(trace.energy_drift)}")
    report = {
        "p": config.p,
        "constant": constant_summary(g, config.p, config.mass),
        "delta": config.delta,
        "dt": config.dt,
        "t_end": config.t_end,
        "direction": config.direction,
        "max_distance": max_d,
        "mass_drift": trace.mass_drift,
        "energy_drift": trace.energy_drift,
        "notes": trace.notes,
    }
    tables: Tables = {
        "trace": (TRACE_HEADER, trace.rows()),
        "final_state": (STATE_HEADER, trace.final.rows()),
    }
    return report, tables, []


def cmd_sweep(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    """mu_1(G_l, 6) along the bridged family built from the graph (and --graph2)"""
    g2 = resolve_graph(config.graph2) if config.graph2 else g
    study = mu1_asymptotics_study(g, g2, 0, 0, config.ell_grid, target_h=config.h,
                                  workers=config.threads)
    rows = [r.as_tuple() for r in study.rows]
    for r in study.rows:
        print(f"  l = {fmt(r.ell)}: lambda_2 = {fmt(r.lambda2)}, mu_1 = {fmt(r.mu1)}")
    print(f"  Monotone approach to pi/2: {fmt(study.monotone_approach)}")
    report = {"family": f"{g.name} + {g2.name}", "monotone_approach": study.monotone_approach}
    checks = [(f"l={fmt(r.ell)}", r.bound_half_pi_ok, "mu_1 >= pi / 2") for r in study.rows]
    return report, {"mu1_study": (STUDY_HEADER, rows)}, checks


def cmd_branch(config: RunConfig, g: MetricGraph, mesh: Mesh) -> Tuple[Dict, Tables, list]:
    points = continue_branch(g, config.p, config.mass, config.step, config.n_steps, mesh=mesh)
    folds = [p.mass for p in points if p.fold]
    for pt in points:
        print(f"  s = {fmt(pt.arclength)}: mu = {fmt(pt.mass)}, E = {fmt(pt.state.energy)}")
    report = {"p": config.p, "from_mass": config.mass, "points": len(points), "folds": folds}
    return report, {"branch": (BRANCH_HEADER, [p.row() for p in points])}, []


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig, MetricGraph, Mesh], Tuple[Dict, Tables, list]]] = {
    "analyze": cmd_analyze,
    "groundstate": cmd_groundstate,
    "stability": cmd_stability,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "branch": cmd_branch,
}


def run(config: RunConfig) -> Path:
    """Main execution flow; returns the output directory"""
    print_banner()
    g = resolve_graph(config.graph)
    mesh = build_mesh(g, config.h)
    print_graph_summary(g, mesh)

    started = time.perf_counter()
    body, tables, checks = COMMAND_HANDLERS[config.command](config, g, mesh)

    report = {"command": config.command, "config_hash": config.config_hash(), "graph": g.name}
    report.update(body)
    report.setdefault("mesh", mesh_summary(mesh))

    out = Path(config.out)
    write_report(out / f"{config.command}_report.json", report)
    for name, (header, rows) in tables.items():
        write_csv(out / f"{name}.csv", header, rows)
    if config.xlsx:
        generate_report_workbook(report, out / f"{config.command}_report.xlsx", tables, checks)

    print(f"\n{'='*60}")
    print(f"  Done in {time.perf_counter() - started:.1f}s")
    print(f"  Output written to: {out}")
    print(f"{'='*60}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="graphnls - NLS on compact metric graphs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py analyze --graph catalog:interval
  python main.py groundstate --graph catalog:dumbbell --p 6 --mass-grid 0.01:1.5:8
  python main.py stability --graph catalog:loop --p 6 --mass 2.8
  python main.py evolve --graph catalog:interval --p 4 --mass 2 --delta 1e-3 --t-end 10
  python main.py sweep --graph catalog:loop --ell-grid 0.01,0.1,1,10,100
  python main.py branch --graph catalog:interval --p 4 --mass 5.03
        """
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--graph", required=True, help="Graph file, or catalog:<name>")
    parser.add_argument("--graph2", help="Second graph of a bridged family (sweep)")
    parser.add_argument("--p", type=float, default=6.0, help="Nonlinearity power in (2, 6]")
    parser.add_argument("--mass", type=float, help="Mass mu")
    parser.add_argument("--mass-grid", help="Mass grid a:b:n")
    parser.add_argument("--bracket", help="Mass bracket lo:hi for the constancy threshold")
    parser.add_argument("--h", type=float, help="Target mesh width")
    parser.add_argument("--dt", type=float, default=1e-3, help="Time step")
    parser.add_argument("--t-end", type=float, default=10.0, help="Final time")
    parser.add_argument("--delta", type=float, default=1e-3, help="Perturbation size")
    parser.add_argument("--direction", choices=("random", "lambda2"), default="random")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--starts", type=int, default=8, help="Random starts per ground-state search")
    parser.add_argument("--ell-grid", default="0.01,0.1,1,10,100", help="Comma-separated bridge lengths")
    parser.add_argument("--step", type=float, default=0.05, help="Continuation arclength step")
    parser.add_argument("--n-steps", type=int, default=20, help="Continuation steps")
    parser.add_argument("--out", default="output", help="Output directory")
    parser.add_argument("--xlsx", action="store_true", help="Also write an Excel report")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {
        "command": args.command,
        "graph": args.graph,
        "graph2": args.graph2,
        "p": args.p,
        "mass": args.mass,
        "h": args.h,
        "dt": args.dt,
        "t_end": args.t_end,
        "delta": args.delta,
        "direction": args.direction,
        "seed": args.seed,
        "starts": args.starts,
        "step": args.step,
        "n_steps": args.n_steps,
        "out": args.out,
        "xlsx": args.xlsx,
    }
    if args.mass_grid:
        start, stop, n = parse_grid(args.mass_grid)
        values["mass_grid"] = MassGrid(start=start, stop=stop, n=n)
    if args.bracket:
        lo, hi = (float(x) for x in args.bracket.split(":"))
        values["bracket"] = (lo, hi)
    values["ell_grid"] = [float(x) for x in args.ell_grid.split(",") if x.strip()]
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = config_from_args(args)
    except (ValidationError, ValueError) as exc:
        print(f"\nError: invalid arguments\n{exc}", file=sys.stderr)
        return 2

    try:
        run(config)
    except GraphNlsError as exc:
        print(f"\nError: {exc}", file=sys.stderr)
        if exc.remediation:
            print(f"  {exc.remediation}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
