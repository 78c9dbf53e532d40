"""
NLS Energy
E(u) = 1/2 ||u'||^2 - 1/p ||u||_p^p on the mass sphere, its constrained
derivatives at the constant state kappa_mu and the local-minimality threshold mu_1
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from graphnls.core.discretize import (
    GraphFunction,
    Mesh,
    build_mesh,
    lp_power,
    lp_power_gradient,
)
from graphnls.core.spectral import eigen_smallest, lambda2
from graphnls.data.metric_graph import MetricGraph, has_cycle_covering, total_length
from graphnls.errors import ParameterError

logger = logging.getLogger(__name__)

TANGENCY_TOL = 1e-8


@dataclass(frozen=True)
class NlsParams:
    """Nonlinearity power p in (2, 6] and mass mu > 0"""
    p: float
    mu: float

    def __post_init__(self):
        if not (2 < self.p <= 6):
            raise ParameterError(f"p must lie in (2, 6], got {self.p}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ParameterError(f"mass must be positive, got {self.mu}")

    def with_mass(self, mu: float) -> "NlsParams":
        return NlsParams(self.p, mu)


@dataclass
class StationaryState:
    """Candidate solution of u'' + |u|^{p-2} u - lambda u = 0 with its diagnostics"""
    u: GraphFunction
    mass: float
    multiplier: float
    pde_residual: float
    flux_defect: float
    energy: float
    iterations: int = 0
    converged: bool = True
    note: str = ""
    energy_history: List[float] = field(default_factory=list, repr=False)


def energy(u: GraphFunction, params: NlsParams) -> float:
    return 0.5 * u.dirichlet() - lp_power(u, params.p) / params.p


def energy_differential(u: GraphFunction, p: float) -> np.ndarray:
    """Dual vector r with dE[v] = Re(r^H v)"""
    return u.forms.K @ u.values - lp_power_gradient(u, p) / p


def lagrange_multiplier(u: GraphFunction, p: float) -> float:
    """lambda = (||u||_p^p - ||u'||^2) / ||u||^2, the L2-best multiplier"""
    return (lp_power(u, p) - u.dirichlet()) / u.mass()


def stationary_residual(u: GraphFunction, p: float, multiplier: float) -> float:
    """M-norm of the Riesz representative of u'' + |u|^{p-2} u - lambda u"""
    forms = u.forms
    r = -(forms.K @ u.values) + lp_power_gradient(u, p) / p - multiplier * (forms.M @ u.values)
    w = forms.solve_mass(r)
    return math.sqrt(max(float(np.real(np.vdot(w, r))), 0.0))


def flux_defect(u: GraphFunction) -> float:
    """max over vertices of |sum of outgoing one-sided derivatives|"""
    mesh = u.mesh
    sums = np.zeros(len(mesh.graph.vertices), dtype=complex)
    for pos, e in enumerate(mesh.graph.edges):
        nodes = mesh.edge_nodes[pos]
        h = mesh.edge_h(pos)
        vals = u.values[nodes]
        sums[e.a] += (vals[1] - vals[0]) / h
        sums[e.b] += (vals[-2] - vals[-1]) / h
    return float(np.max(np.abs(sums)))


def measure_state(u: GraphFunction, p: float, iterations: int = 0, converged: bool = True,
                  note: str = "") -> StationaryState:
    mass = u.mass()
    lam = lagrange_multiplier(u, p)
    params = NlsParams(p, mass)
    return StationaryState(
        u=u,
        mass=mass,
        multiplier=lam,
        pde_residual=stationary_residual(u, p, lam),
        flux_defect=flux_defect(u),
        energy=energy(u, params),
        iterations=iterations,
        converged=converged,
        note=note,
    )


def kappa(mu: float, ell: float) -> float:
    return math.sqrt(mu / ell)


def constant_solution(g: MetricGraph, params: NlsParams, mesh: Optional[Mesh] = None,
                      target_h: Optional[float] = None) -> StationaryState:
    """kappa_mu = sqrt(mu / l) with multiplier (mu / l)^{p/2 - 1}"""
    mesh = mesh or build_mesh(g, target_h)
    ell = total_length(g)
    k = kappa(params.mu, ell)
    u = mesh.constant(k)
    lam = (params.mu / ell) ** (params.p / 2 - 1)
    return StationaryState(
        u=u,
        mass=u.mass(),
        multiplier=lam,
        pde_residual=stationary_residual(u, params.p, lam),
        flux_defect=flux_defect(u),
        energy=energy(u, params),
        note="constant",
    )


def constant_energy(mu: float, ell: float, p: float) -> float:
    """E(kappa_mu) = -(1/p) mu^{p/2} l^{1 - p/2}"""
    return -(mu ** (p / 2)) * ell ** (1 - p / 2) / p


def project_tangent(u: GraphFunction, v: np.ndarray) -> np.ndarray:
    """M-orthogonal projection onto {w : Re <u, w>_M = 0}"""
    forms = u.forms
    return v - (forms.inner(u.values, v) / forms.inner(u.values, u.values)) * u.values


def constrained_gradient(u: GraphFunction, params: NlsParams) -> GraphFunction:
    """Riesz representative of E'(u), projected on the tangent space of the mass sphere"""
    m = u.mass()
    if abs(m - params.mu) > 1e-8 * params.mu:
        logger.warning("constrained_gradient: mass %.12g differs from mu = %.12g", m, params.mu)
    G = u.forms.solve_mass(energy_differential(u, params.p))
    return u.with_values(project_tangent(u, G))


def second_variation_at_constant(g: MetricGraph, mesh: Mesh, params: NlsParams,
                                 phi: GraphFunction) -> float:
    """int |phi'|^2 - (p - 2) kappa^{p-2} int |Re phi|^2 for phi with zero real mean"""
    if mesh.graph is not g and mesh.graph != g:
        raise ParameterError("mesh does not belong to the given graph")
    forms = mesh.forms
    re = phi.values.real
    im = phi.values.imag
    scale = max(1.0, math.sqrt(max(phi.mass(), 0.0) * mesh.length))
    if abs(float(np.sum(forms.M @ re))) > TANGENCY_TOL * scale:
        raise ParameterError("phi is not tangent: its real part has nonzero mean")
    k = kappa(params.mu, mesh.length)
    return float(re @ (forms.K @ re) + im @ (forms.K @ im)
                 - (params.p - 2) * k ** (params.p - 2) * (re @ (forms.M @ re)))


def mu1_from_lambda2(lam2: float, ell: float, p: float) -> float:
    """mu_1 = l (lambda_2 / (p - 2))^{2 / (p - 2)}"""
    return ell * (lam2 / (p - 2)) ** (2.0 / (p - 2))


def mu1_lower_bound(ell: float, p: float, cycle_covered: bool = False) -> float:
    """l^{(p-6)/(p-2)} (c pi^2 / (p - 2))^{2/(p-2)}, c = 4 under a cycle covering"""
    c = 4.0 if cycle_covered else 1.0
    return ell ** ((p - 6) / (p - 2)) * (c * math.pi ** 2 / (p - 2)) ** (2.0 / (p - 2))


def scale_invariant_mass(mu: float, ell: float, p: float) -> float:
    """mu^{(p-2)/(6-p)} l, unchanged by the scaling that preserves the equation (p < 6)"""
    if p >= 6:
        raise ParameterError("the scale-invariant combination is only defined for p < 6")
    return mu ** ((p - 2) / (6 - p)) * ell


def mu1_threshold(g: MetricGraph, p: float, target_h: Optional[float] = None,
                  mesh: Optional[Mesh] = None) -> float:
    if not (2 < p <= 6):
        raise ParameterError(f"p must lie in (2, 6], got {p}")
    ell = total_length(g)
    mu1 = mu1_from_lambda2(lambda2(g, target_h, mesh=mesh), ell, p)
    bound = mu1_lower_bound(ell, p, has_cycle_covering(g))
    if mu1 < bound * (1 - 1e-6):
        logger.warning("%s: mu_1 = %.9g below its lower bound %.9g", g.name, mu1, bound)
    return mu1


def gn_ratio(u: GraphFunction, params: NlsParams) -> float:
    """||u||_p^p / (mu^{(p+2)/4} (||u'|| + ||u||)^{(p-2)/2})"""
    if u.sup_norm() == 0:
        raise ParameterError("gn_ratio is undefined for u = 0")
    m = u.mass()
    if abs(m - params.mu) > 1e-8 * params.mu:
        logger.warning("gn_ratio: mass %.12g differs from mu = %.12g", m, params.mu)
    p = params.p
    return lp_power(u, p) / (params.mu ** ((p + 2) / 4) * u.h1_norm() ** ((p - 2) / 2))


def random_smooth_field(mesh: Mesh, rng: np.random.Generator, basis: np.ndarray,
                        complex_valued: bool = True) -> np.ndarray:
    """Random combination of low modes with decaying weights"""
    k = basis.shape[1]
    weights = 1.0 / (1.0 + np.arange(k))
    coeffs = rng.standard_normal(k) * weights
    if complex_valued:
        coeffs = coeffs + 1j * rng.standard_normal(k) * weights
    return basis @ coeffs


def estimate_gn_constant(g: MetricGraph, p: float, n_samples: int = 10_000, seed: int = 0,
                         target_h: Optional[float] = None, mesh: Optional[Mesh] = None) -> np.ndarray:
    """Running maximum of gn_ratio over random smooth fields (a lower bound for K_p)"""
    mesh = mesh or build_mesh(g, target_h)
    basis = eigen_smallest(mesh.forms, min(12, mesh.n_nodes)).eigenvectors
    rng = np.random.default_rng(seed)
    samples = np.empty(n_samples)
    for i in range(n_samples):
        u = mesh.function(random_smooth_field(mesh, rng, basis))
        samples[i] = gn_ratio(u, NlsParams(p, u.mass()))
    return np.maximum.accumulate(samples)
