"""
Graph Analysis
Topology, spectral gap, thresholds and bound checks for one graph,
shared by the CLI and the web API
"""

import math
import logging
from typing import Any, Dict, List, Optional, Tuple

from graphnls.core.discretize import Mesh, build_mesh
from graphnls.core.nls_energy import constant_energy, kappa, mu1_from_lambda2, mu1_lower_bound
from graphnls.core.spectral import BOUND_TOL, lambda2, lambda2_bounds
from graphnls.core.stability import corollary_checks
from graphnls.data.metric_graph import (
    MetricGraph,
    bridges,
    critical_mass,
    has_cycle_covering,
    terminal_edges,
    total_length,
)

logger = logging.getLogger(__name__)


def mesh_summary(mesh: Mesh) -> Dict[str, Any]:
    return {
        "target_h": mesh.target_h,
        "h_max": mesh.h_max,
        "n_elements": mesh.n_elements,
        "n_nodes": mesh.n_nodes,
    }


def analyze_graph(g: MetricGraph, p: float, target_h: Optional[float] = None,
                  mesh: Optional[Mesh] = None) -> Dict[str, Any]:
    mesh = mesh or build_mesh(g, target_h)
    ell = total_length(g)
    covered = has_cycle_covering(g)
    lam2 = lambda2(g, mesh=mesh)
    lower, cycle_lower = lambda2_bounds(g)
    mu1 = mu1_from_lambda2(lam2, ell, p)
    mu1_6 = mu1_from_lambda2(lam2, ell, 6.0)

    checks = {
        "lambda2_above_pi2_over_l2": lam2 >= lower - BOUND_TOL,
        "lambda2_above_4pi2_over_l2": (lam2 >= cycle_lower - BOUND_TOL) if cycle_lower is not None else None,
        "mu1_above_lower_bound": mu1 >= mu1_lower_bound(ell, p, covered) * (1 - 1e-6),
        "mu1_p6_above_pi_half": mu1_6 >= math.pi / 2 - 1e-4,
        "mu1_p6_above_pi": (mu1_6 >= math.pi - 1e-4) if covered else None,
    }
    checks.update(corollary_checks(g, mu1_6))

    return {
        "graph": g.name,
        "vertices": len(g.vertices),
        "edges": len(g.edges),
        "total_length": ell,
        "terminal_edges": terminal_edges(g),
        "bridges": bridges(g),
        "cycle_covering": covered,
        "p": p,
        "lambda2": lam2,
        "lambda2_lower_bound": lower,
        "lambda2_cycle_bound": cycle_lower,
        "mu1": mu1,
        "mu1_p6": mu1_6,
        "mu1_lower_bound": mu1_lower_bound(ell, p, covered),
        "critical_mass": critical_mass(g),
        "checks": checks,
        "mesh": mesh_summary(mesh),
    }


def constant_summary(g: MetricGraph, p: float, mu: float) -> Dict[str, float]:
    ell = total_length(g)
    k = kappa(mu, ell)
    return {"mass": mu, "kappa": k, "multiplier": k ** (p - 2), "energy": constant_energy(mu, ell, p)}


CHECK_DESCRIPTIONS = {
    "lambda2_above_pi2_over_l2": "lambda_2 >= pi^2 / l^2 on every compact graph",
    "lambda2_above_4pi2_over_l2": "lambda_2 >= 4 pi^2 / l^2 under a cycle covering",
    "mu1_above_lower_bound": "mu_1 above its length-dependent lower bound",
    "mu1_p6_above_pi_half": "mu_1(G, 6) >= pi / 2",
    "mu1_p6_above_pi": "mu_1(G, 6) >= pi under a cycle covering",
    "mu1_above_half_line_mass": "mu_1 > pi sqrt(3) / 4 with a terminal edge",
    "mu1_above_line_mass": "mu_1 > pi sqrt(3) / 2 with a cycle covering",
}


# topology flags stored alongside the checks
FACT_KEYS = ("terminal_edge", "cycle_covering")


def check_rows(checks: Dict[str, Optional[bool]]) -> List[Tuple[str, Optional[bool], str]]:
    return [(name, ok, CHECK_DESCRIPTIONS.get(name, "")) for name, ok in checks.items()
            if name not in FACT_KEYS]
