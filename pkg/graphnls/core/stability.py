"""
Linear Stability of the Constant State
Linearized operators at kappa_mu, the constrained Hessian on the tangent space
of the mass sphere, and the stable / unstable verdict against mu_1
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
import threading
import weakref
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from graphnls.config import resolve_threads
from graphnls.core.discretize import AssembledForms, Mesh, build_mesh
from graphnls.core.nls_energy import (
    NlsParams,
    kappa,
    mu1_from_lambda2,
    mu1_lower_bound,
)
from graphnls.core.spectral import DENSE_LIMIT, eigen_smallest, lambda2
from graphnls.data.metric_graph import (
    MU_HALF_LINE,
    MU_LINE,
    MetricGraph,
    critical_mass,
    has_cycle_covering,
    make_bridged_family,
    terminal_edges,
    total_length,
)
from graphnls.errors import ParameterError

logger = logging.getLogger(__name__)

MIN_MARGIN = 1e-3


class Verdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


@dataclass
class LinearizedOperator:
    """Pencil (K + shift M, M); its spectrum is that of (K, M) moved by shift"""
    name: str
    forms: AssembledForms
    shift: float

    def matrix(self):
        return self.forms.K + self.shift * self.forms.M

    def eigenvalues(self, k: int) -> np.ndarray:
        k = min(k, self.forms.M.shape[0])
        return eigen_smallest(self.forms, k).eigenvalues + self.shift

    def count_negative(self, tol: float = 0.0, k_start: int = 8) -> int:
        """Number of eigenvalues below -tol, growing k until the count is certain"""
        N = self.forms.M.shape[0]
        k = min(k_start, N)
        while True:
            values = self.eigenvalues(k)
            negative = int(np.sum(values < -tol))
            if negative < k or k == N:
                return negative
            k = min(2 * k, N)


def assemble_linearized(g: MetricGraph, mesh: Mesh, params: NlsParams) -> Tuple[LinearizedOperator, LinearizedOperator]:
    """L0 = -d^2 + lambda - kappa^{p-2} and L1 = -d^2 + lambda - (p-1) kappa^{p-2} at kappa_mu.

    At the constant state lambda = kappa^{p-2}, so L0 is the Kirchhoff Laplacian itself
    and L1 is the Laplacian shifted down by (p - 2) lambda.
    """
    if mesh.graph is not g and mesh.graph != g:
        raise ParameterError("mesh does not belong to the given graph")
    lam = kappa(params.mu, mesh.length) ** (params.p - 2)
    forms = mesh.forms
    return (LinearizedOperator("L0", forms, 0.0),
            LinearizedOperator("L1", forms, -(params.p - 2) * lam))


# zero-mean spectra per live mesh, dropped with the mesh
_SPECTRUM_CACHE: "weakref.WeakKeyDictionary[Mesh, Dict[int, np.ndarray]]" = weakref.WeakKeyDictionary()
_SPECTRUM_LOCK = threading.Lock()


def _zero_mean_spectrum(mesh: Mesh, k: int) -> np.ndarray:
    with _SPECTRUM_LOCK:
        cached = _SPECTRUM_CACHE.get(mesh, {}).get(k)
    if cached is None:
        cached = _solve_zero_mean_spectrum(mesh, k)
        cached.setflags(write=False)
        with _SPECTRUM_LOCK:
            _SPECTRUM_CACHE.setdefault(mesh, {})[k] = cached
    return cached


def _solve_zero_mean_spectrum(mesh: Mesh, k: int) -> np.ndarray:
    """Smallest eigenvalues of (K, M) restricted to functions with zero mean"""
    forms = mesh.forms
    N = mesh.n_nodes
    if N <= DENSE_LIMIT:
        c = (forms.M @ np.ones(N))[None, :]
        Q = scipy.linalg.null_space(c)
        Kr = Q.T @ (forms.K @ Q)
        Mr = Q.T @ (forms.M @ Q)
        k = min(k, N - 1)
        return scipy.linalg.eigh(Kr, Mr, eigvals_only=True, subset_by_index=[0, k - 1])
    # The deflated solver already returns the constant first and zero-mean modes after it
    return eigen_smallest(forms, min(k + 1, N)).eigenvalues[1:]


def tangent_hessian_spectrum(mesh: Mesh, params: NlsParams, k: int = 4) -> np.ndarray:
    """Smallest eigenvalues of L1 (+) L0 restricted to the tangent space at kappa_mu.

    Tangent directions have zero-mean real part; the imaginary part is free up to the
    phase direction i kappa, which is factored out. Both parts therefore live on the
    zero-mean subspace, the real one shifted by -(p - 2) kappa^{p-2}.
    """
    if k < 1:
        raise ParameterError("k must be positive")
    nu = _zero_mean_spectrum(mesh, k)
    shift = (params.p - 2) * kappa(params.mu, mesh.length) ** (params.p - 2)
    return np.sort(np.concatenate((nu - shift, nu)))[:k]


def stability_margin(lam2: float, p: float, h: float) -> float:
    """Width of the indeterminate band around mu_1 from the O(h^2) eigenvalue error"""
    return max(MIN_MARGIN, 2.0 / (p - 2) * lam2 * h ** 2 / 12.0)


@dataclass
class StabilityReport:
    graph_name: str
    p: float
    mass: float
    lambda2: float
    mu1: float
    kappa: float
    multiplier: float
    critical_mass: Optional[float]
    n_negative_L0: int
    n_negative_L1: int
    n_negative_hessian: int
    min_tangent_eig: float
    margin: float
    verdict: Verdict
    notes: List[str] = field(default_factory=list)

    @property
    def relative_distance(self) -> float:
        return (self.mass - self.mu1) / self.mu1

    def to_dict(self) -> Dict:
        return {
            "graph": self.graph_name,
            "p": self.p,
            "mass": self.mass,
            "lambda2": self.lambda2,
            "mu1": self.mu1,
            "kappa": self.kappa,
            "multiplier": self.multiplier,
            "critical_mass": self.critical_mass,
            "n_negative_L0": self.n_negative_L0,
            "n_negative_L1": self.n_negative_L1,
            "n_negative_hessian": self.n_negative_hessian,
            "min_tangent_eig": self.min_tangent_eig,
            "margin": self.margin,
            "verdict": self.verdict.value,
            "notes": list(self.notes),
        }


def classify_stability(g: MetricGraph, params: NlsParams, target_h: Optional[float] = None,
                       mesh: Optional[Mesh] = None) -> StabilityReport:
    """Stable below mu_1, unstable above, indeterminate within the discretization margin"""
    mesh = mesh or build_mesh(g, target_h)
    p, mu = params.p, params.mu
    ell = mesh.length
    lam2 = lambda2(g, mesh=mesh)
    mu1 = mu1_from_lambda2(lam2, ell, p)
    margin = stability_margin(lam2, p, mesh.h_max)

    L0, L1 = assemble_linearized(g, mesh, params)
    tol = 1e-8 * max(1.0, abs(L1.shift))
    n0 = L0.count_negative(tol)
    n1 = L1.count_negative(tol)
    min_eig = float(tangent_hessian_spectrum(mesh, params, k=1)[0])

    relative = (mu - mu1) / mu1
    if relative < -margin:
        verdict = Verdict.STABLE
    elif relative > margin:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.INDETERMINATE

    notes = []
    expected_sign = {Verdict.STABLE: 1.0, Verdict.UNSTABLE: -1.0}.get(verdict)
    if expected_sign is not None and expected_sign * min_eig <= 0:
        notes.append("tangent Hessian sign disagrees with the mu_1 comparison")
        logger.warning("%s: tangent Hessian eigenvalue %.6g disagrees with verdict %s",
                       g.name, min_eig, verdict.value)
    if verdict is Verdict.STABLE and n0 + n1 != 1:
        notes.append(f"expected exactly one negative Hessian direction, found {n0 + n1}")

    mu_c = None
    if p == 6:
        mu_c = critical_mass(g)
        if mu > mu_c and verdict is Verdict.STABLE:
            notes.append("stable beyond ground-state existence (mass above the critical mass)")
        elif mu > mu_c:
            notes.append("mass above the critical mass: no ground state exists")

    bound = mu1_lower_bound(ell, p, has_cycle_covering(g))
    if mu1 < bound * (1 - 1e-6):
        notes.append(f"mu_1 below its lower bound {bound:.9g}")

    report = StabilityReport(
        graph_name=g.name,
        p=p,
        mass=mu,
        lambda2=lam2,
        mu1=mu1,
        kappa=kappa(mu, ell),
        multiplier=-L1.shift / (p - 2),
        critical_mass=mu_c,
        n_negative_L0=n0,
        n_negative_L1=n1,
        n_negative_hessian=n0 + n1,
        min_tangent_eig=min_eig,
        margin=margin,
        verdict=verdict,
        notes=notes,
    )
    logger.info("%s: mu = %.6g, mu_1 = %.6g -> %s", g.name, mu, mu1, verdict.value)
    return report


def corollary_checks(g: MetricGraph, mu1: float) -> Dict[str, Optional[bool]]:
    """Comparisons of mu_1 (p = 6) with the half-line and line critical masses.

    A terminal edge forces mu_1 > mu_R+; a cycle covering forces mu_1 > mu_R.
    Checks that do not apply to the graph are reported as None.
    """
    has_terminal = bool(terminal_edges(g))
    covered = has_cycle_covering(g)
    return {
        "terminal_edge": has_terminal,
        "cycle_covering": covered,
        "mu1_above_half_line_mass": (mu1 > MU_HALF_LINE) if has_terminal else None,
        "mu1_above_line_mass": (mu1 > MU_LINE) if covered else None,
    }


@dataclass
class AsymptoticsRow:
    ell: float
    lambda2: float
    mu1: float
    bound_half_pi_ok: bool
    bound_pi_ok: bool

    def as_tuple(self) -> Tuple[float, float, float, bool, bool]:
        return (self.ell, self.lambda2, self.mu1, self.bound_half_pi_ok, self.bound_pi_ok)


@dataclass
class AsymptoticsStudy:
    rows: List[AsymptoticsRow]
    monotone_approach: bool
    limit: float = math.pi / 2


def mu1_asymptotics_study(g1: MetricGraph, g2: MetricGraph, attach_1: int, attach_2: int,
                          ell_grid: Sequence[float], target_h: Optional[float] = None,
                          workers: Optional[int] = None) -> AsymptoticsStudy:
    """mu_1 (p = 6) of g1 and g2 joined by a bridge of each length in ell_grid"""
    grid = [float(x) for x in ell_grid]
    if not grid or any(not (x > 0 and math.isfinite(x)) for x in grid):
        raise ParameterError("ell_grid must hold positive finite lengths")

    def one(ell: float) -> AsymptoticsRow:
        g = make_bridged_family(g1, g2, attach_1, attach_2, ell)
        lam2 = lambda2(g, target_h)
        mu1 = mu1_from_lambda2(lam2, total_length(g), 6.0)
        return AsymptoticsRow(ell, lam2, mu1,
                              mu1 >= math.pi / 2 - 1e-6,
                              mu1 >= math.pi - 1e-6)

    with ThreadPoolExecutor(max_workers=workers or resolve_threads()) as pool:
        rows = list(pool.map(one, grid))

    ordered = sorted(rows, key=lambda r: r.ell)
    gaps = [abs(r.mu1 - math.pi / 2) for r in ordered]
    monotone = all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:]))
    return AsymptoticsStudy(rows=rows, monotone_approach=monotone)
