"""
Ground States
Mass-constrained minimization of the NLS energy by a preconditioned normalized
gradient flow with Newton refinement, constancy classification against kappa_mu,
and continuation of the nonconstant branch that leaves the constant family at mu_1
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from graphnls.config import resolve_threads
from graphnls.core.discretize import GraphFunction, Mesh, build_mesh, lp_power_gradient, lp_power_hessian
from graphnls.core.nls_energy import (
    NlsParams,
    StationaryState,
    constant_energy,
    constant_solution,
    energy,
    energy_differential,
    kappa,
    lagrange_multiplier,
    measure_state,
    mu1_from_lambda2,
    project_tangent,
    random_smooth_field,
)
from graphnls.core.spectral import eigen_smallest, lambda2
from graphnls.core.stability import tangent_hessian_spectrum
from graphnls.data.metric_graph import MetricGraph, critical_mass
from graphnls.errors import (
    BracketError,
    ContinuationError,
    ConvergenceError,
    ParameterError,
    SupercriticalMassError,
)

logger = logging.getLogger(__name__)

CONSTANCY_TOL = 1e-5
RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-9
SAME_STATE_TOL = 1e-6
KICK = 0.1


@dataclass
class FlowSchedule:
    """Step control for normalized_gradient_flow"""
    step: float = 1.0
    max_iter: int = 5000
    tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.5
    max_step: float = 50.0
    max_backtracks: int = 40

    def enlarged(self, factor: int) -> "FlowSchedule":
        return FlowSchedule(self.step, self.max_iter * factor, self.tol, self.armijo,
                            self.shrink, self.grow, self.max_step, self.max_backtracks)


def _complex_solver(lu):
    def solve(r: np.ndarray) -> np.ndarray:
        return lu.solve(np.ascontiguousarray(r.real)) + 1j * lu.solve(np.ascontiguousarray(r.imag))
    return solve


def normalized_gradient_flow(u0: GraphFunction, params: NlsParams,
                             schedule: Optional[FlowSchedule] = None) -> StationaryState:
    """Minimize E on the mass sphere from u0.

    Each step moves against the (K + sigma M)-preconditioned gradient, projected onto
    the tangent space, and renormalizes the mass. Armijo backtracking keeps the energy
    nonincreasing up to roundoff. Stops when the M-norm of the projected gradient
    drops below schedule.tol.
    """
    schedule = schedule or FlowSchedule()
    p, mu = params.p, params.mu
    forms = u0.forms

    m0 = u0.mass()
    if m0 <= 0:
        raise ParameterError("initial state is zero")
    if abs(m0 - mu) > 1e-6 * mu:
        raise ParameterError(f"initial mass {m0:.12g} differs from mu = {mu:.12g}")
    u = u0.renormalized(mu)

    sigma = max(1.0, abs(lagrange_multiplier(u, p)))
    solve = _complex_solver(splu((forms.K + sigma * forms.M).tocsc()))

    E = energy(u, params)
    history = [E]
    tau = schedule.step
    converged = False
    note = ""
    it = 0
    for it in range(schedule.max_iter + 1):
        r = energy_differential(u, p)
        grad = project_tangent(u, forms.solve_mass(r))
        gnorm = math.sqrt(max(forms.inner(grad, grad), 0.0))
        if gnorm < schedule.tol:
            converged = True
            break
        if it == schedule.max_iter:
            note = "iteration cap reached"
            logger.warning("gradient flow: iteration cap %d reached, |grad| = %.3g", schedule.max_iter, gnorm)
            break

        D = solve(r)
        W = solve(forms.M @ u.values)
        D = D - (forms.inner(u.values, D) / forms.inner(u.values, W)) * W
        slope = float(np.real(np.vdot(r, D)))
        if slope <= 0:
            D, slope = grad, gnorm ** 2

        slack = 1e-13 * max(1.0, abs(E))
        for _ in range(schedule.max_backtracks):
            trial = u.with_values(u.values - tau * D).renormalized(mu)
            E_trial = energy(trial, params)
            if E_trial <= E - schedule.armijo * tau * slope + slack:
                break
            tau *= schedule.shrink
        else:
            note = "energy increase after backtracking"
            logger.warning("gradient flow: backtracking exhausted at iteration %d, |grad| = %.3g", it, gnorm)
            break

        u, E = trial, E_trial
        history.append(E)
        tau = min(tau * schedule.grow, schedule.max_step)
        if it % 500 == 0:
            logger.debug("flow it %d: E = %.14g, |grad| = %.3g, tau = %.3g", it, E, gnorm, tau)

    state = measure_state(u, p, iterations=it, converged=converged, note=note)
    state.energy_history = history
    return state


# ---------------------------------------------------------------------------
# Newton refinement of real stationary states
# ---------------------------------------------------------------------------

def _real_representative(u: GraphFunction, tol: float = 1e-6) -> Optional[Tuple[np.ndarray, complex]]:
    """(w, phase) with u = phase * w, w real and of positive mean, or None"""
    z = complex(np.sum(u.values * (u.forms.M @ u.values)))
    phase = np.exp(0.5j * np.angle(z)) if abs(z) > 0 else 1.0
    rotated = u.values / phase
    if np.max(np.abs(rotated.imag)) > tol * max(u.sup_norm(), 1e-300):
        return None
    w = rotated.real.copy()
    if np.sum(u.forms.M @ w) < 0:
        w, phase = -w, -phase
    return w, phase


def _stationary_parts(mesh: Mesh, w: np.ndarray, lam: float, p: float):
    """F(w) = -K w + g(w)/p - lam M w and its Jacobian in w"""
    forms = mesh.forms
    u = mesh.function(w)
    Mw = forms.M @ w
    F = -(forms.K @ w) + lp_power_gradient(u, p).real / p - lam * Mw
    J = -forms.K + lp_power_hessian(u, p) / p - lam * forms.M
    return F, J, Mw


def _dual_norm(mesh: Mesh, F: np.ndarray) -> float:
    return math.sqrt(max(float(F @ mesh.forms.solve_mass(F)), 0.0))


def newton_polish(u: GraphFunction, params: NlsParams, tol: float = 1e-10,
                  max_iter: int = 30) -> StationaryState:
    """Newton on the real bordered system [F(w, lam); w^T M w - mu] = 0 at fixed mass"""
    rep = _real_representative(u)
    if rep is None:
        raise ConvergenceError("state is not real up to a global phase; Newton refinement skipped")
    w, phase = rep
    mesh, p, mu = u.mesh, params.p, params.mu
    lam = lagrange_multiplier(u, p)

    res0 = prev = None
    for it in range(max_iter + 1):
        F, J, Mw = _stationary_parts(mesh, w, lam, p)
        c = float(w @ Mw) - mu
        res = _dual_norm(mesh, F)
        if res0 is None:
            res0 = res
        if res < tol and abs(c) < tol * mu:
            break
        if prev is not None and res < 100 * tol and res > 0.5 * prev:
            break
        if not math.isfinite(res) or res > 1e6 * max(res0, tol):
            raise ConvergenceError(f"Newton diverged (residual {res:.3g})")
        if it == max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {res:.3g})")

        col = sp.csr_matrix(-Mw[:, None])
        row = sp.csr_matrix(2 * Mw[None, :])
        A = sp.bmat([[J, col], [row, None]], format="csc")
        step = spsolve(A, -np.concatenate((F, [c])))
        if not np.all(np.isfinite(step)):
            raise ConvergenceError("singular Newton system")
        w = w + step[:-1]
        lam += float(step[-1])
        prev = res

    return measure_state(mesh.function(phase * w), p, iterations=it, converged=True, note="newton")


def _converged(state: StationaryState) -> bool:
    return state.converged or state.pde_residual < RESIDUAL_TOL


def _descend(start: GraphFunction, params: NlsParams, schedule: FlowSchedule) -> StationaryState:
    flow = normalized_gradient_flow(start, params, schedule)
    try:
        polished = newton_polish(flow.u, params)
    except ConvergenceError as exc:
        logger.debug("polish skipped: %s", exc)
        return flow
    if (polished.energy <= flow.energy + 1e-10 * max(1.0, abs(flow.energy))
            and polished.pde_residual < flow.pde_residual):
        polished.iterations += flow.iterations
        polished.energy_history = flow.energy_history + [polished.energy]
        return polished
    return flow


# ---------------------------------------------------------------------------
# Ground states
# ---------------------------------------------------------------------------

def constant_distance(u: GraphFunction, k: float) -> float:
    """sup |u - e^{i theta} k| at the L2-optimal phase theta = arg <k, u>_M"""
    z = complex(np.sum(u.forms.M @ u.values))
    phase = z / abs(z) if abs(z) > 0 else 1.0
    return float(np.max(np.abs(u.values - phase * k)))


def _phase_distance(a: GraphFunction, b: GraphFunction) -> float:
    z = complex(np.vdot(b.values, a.forms.M @ a.values))
    phase = z / abs(z) if abs(z) > 0 else 1.0
    return float(np.max(np.abs(a.values - phase * b.values)))


@dataclass
class GroundStateResult:
    best: StationaryState
    energy: float
    starts_used: int
    all_local_minima: List[Tuple[float, bool]]
    is_constant: bool
    gap_to_constant: float
    constant_energy: float
    degenerate: bool = False
    labels: List[str] = field(default_factory=list)

    def sweep_row(self) -> Tuple[float, float, float, bool, float, int]:
        """(mu, E_ground, E(kappa_mu), is_constant, gap, iterations)"""
        return (self.best.mass, self.energy, self.constant_energy, self.is_constant,
                self.gap_to_constant, self.best.iterations)

    def to_dict(self) -> Dict:
        return {
            "mass": self.best.mass,
            "energy": self.energy,
            "constant_energy": self.constant_energy,
            "gap_to_constant": self.gap_to_constant,
            "is_constant": self.is_constant,
            "degenerate": self.degenerate,
            "starts_used": self.starts_used,
            "multiplier": self.best.multiplier,
            "pde_residual": self.best.pde_residual,
            "flux_defect": self.best.flux_defect,
            "iterations": self.best.iterations,
            "local_minima": [{"energy": e, "is_constant": c} for e, c in self.all_local_minima],
        }


def _starting_points(mesh: Mesh, params: NlsParams, n_random_starts: int,
                     seed: int) -> List[Tuple[str, GraphFunction]]:
    mu = params.mu
    k = kappa(mu, mesh.length)
    spectrum = eigen_smallest(mesh.forms, min(8, mesh.n_nodes))
    phi2 = mesh.function(spectrum.eigenvectors[:, spectrum.zero_mean_index(mesh.forms)])

    const = mesh.constant(k)
    starts = [("constant", const)]
    for sign, label in ((1.0, "+phi2"), (-1.0, "-phi2")):
        starts.append((label, (const + phi2 * (sign * KICK * math.sqrt(mu))).renormalized(mu)))

    rng = np.random.default_rng(seed)
    for i in range(n_random_starts):
        values = random_smooth_field(mesh, rng, spectrum.eigenvectors)
        starts.append((f"random{i}", mesh.function(values).renormalized(mu)))
    return starts


def find_ground_state(g: MetricGraph, params: NlsParams, n_random_starts: int = 8, seed: int = 0,
                      target_h: Optional[float] = None, mesh: Optional[Mesh] = None,
                      schedule: Optional[FlowSchedule] = None,
                      workers: Optional[int] = None) -> GroundStateResult:
    """Multistart minimization of E at mass mu; kappa_mu is always one of the candidates"""
    p, mu = params.p, params.mu
    if p == 6:
        mu_c = critical_mass(g)
        if mu > mu_c:
            raise SupercriticalMassError(
                f"mass {mu:.12g} exceeds the critical mass {mu_c:.12g} at p = 6: the energy is unbounded below"
            )
    if n_random_starts < 0:
        raise ParameterError("n_random_starts must be nonnegative")

    mesh = mesh or build_mesh(g, target_h)
    schedule = schedule or FlowSchedule()
    near_critical = p == 6 and mu > 0.9 * critical_mass(g)
    if near_critical:
        schedule = schedule.enlarged(4)

    starts = _starting_points(mesh, params, n_random_starts, seed)
    with ThreadPoolExecutor(max_workers=workers or resolve_threads()) as pool:
        states = list(pool.map(lambda s: _descend(s[1], params, schedule), starts))

    k = kappa(mu, mesh.length)
    finished = [(label, st) for (label, _), st in zip(starts, states) if _converged(st)]
    if not finished:
        raise ConvergenceError(f"none of the {len(starts)} starts converged at mu = {mu:.12g}")

    finished.sort(key=lambda item: (item[1].energy, tuple(np.round(np.abs(item[1].u.values), 12))))
    distinct: List[Tuple[str, StationaryState]] = []
    for label, st in finished:
        scale = max(st.u.sup_norm(), 1e-300)
        if not any(_phase_distance(st.u, other.u) <= SAME_STATE_TOL * scale for _, other in distinct):
            distinct.append((label, st))

    best_label, best = distinct[0]
    dist = constant_distance(best.u, k)
    is_constant = dist <= CONSTANCY_TOL * k
    e_const = constant_solution(g, params, mesh=mesh).energy
    degenerate = len(distinct) > 1 and distinct[1][1].energy - best.energy <= DEGENERACY_TOL

    if near_critical:
        ratio = best.u.sup_norm() ** 2 / (mu / mesh.length)
        logger.info("%s: near-critical mass, concentration max/mean = %.4g", g.name, ratio)
    if degenerate:
        logger.info("%s: degenerate minima within %.0e in energy", g.name, DEGENERACY_TOL)
    logger.info("%s: mu = %.6g, ground energy %.12g from start %s (%s)", g.name, mu, best.energy,
                best_label, "constant" if is_constant else "nonconstant")

    return GroundStateResult(
        best=best,
        energy=best.energy,
        starts_used=len(starts),
        all_local_minima=[(st.energy, constant_distance(st.u, k) <= CONSTANCY_TOL * k) for _, st in distinct],
        is_constant=is_constant,
        gap_to_constant=e_const - best.energy,
        constant_energy=e_const,
        degenerate=degenerate,
        labels=[label for label, _ in distinct],
    )


def estimate_mu2(g: MetricGraph, p: float, mass_bracket: Tuple[float, float], tol: float = 1e-3,
                 target_h: Optional[float] = None, mesh: Optional[Mesh] = None,
                 n_random_starts: int = 4, seed: int = 0) -> float:
    """Bisect the mass at which the computed ground state stops being constant.

    This is an empirical constancy threshold; it bounds mu_1 from below only
    through the fact that a global minimizer is a local one.
    """
    lo, hi = mass_bracket
    if not (0 < lo < hi):
        raise ParameterError("mass bracket must satisfy 0 < lo < hi")
    mesh = mesh or build_mesh(g, target_h)

    def constant_at(mu: float) -> bool:
        return find_ground_state(g, NlsParams(p, mu), n_random_starts, seed, mesh=mesh).is_constant

    if not constant_at(lo) or constant_at(hi):
        raise BracketError(f"ground-state constancy does not change inside [{lo:.6g}, {hi:.6g}]",
                           "Widen the bracket so that the lower mass gives a constant ground state.")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if constant_at(mid):
            lo = mid
        else:
            hi = mid
    estimate = 0.5 * (lo + hi)

    mu1 = mu1_from_lambda2(lambda2(g, mesh=mesh), mesh.length, p)
    if estimate > mu1 + tol:
        logger.warning("%s: constancy threshold %.6g above mu_1 = %.6g", g.name, estimate, mu1)
    logger.info("%s: constancy threshold %.6g (mu_1 = %.6g)", g.name, estimate, mu1)
    return estimate


# ---------------------------------------------------------------------------
# Bifurcation from the constant family
# ---------------------------------------------------------------------------

def constant_family_residual(mesh: Mesh, p: float, lam: float) -> float:
    """Residual of u'' + |u|^{p-2} u - lam u at the constant lam^{1/(p-2)}"""
    if lam <= 0:
        raise ParameterError("the constant family needs lambda > 0")
    F, _, _ = _stationary_parts(mesh, np.full(mesh.n_nodes, lam ** (1 / (p - 2))), lam, p)
    return _dual_norm(mesh, F)


def locate_branch_point(mesh: Mesh, p: float, bracket: Optional[Tuple[float, float]] = None,
                        rel_tol: float = 1e-4) -> float:
    """Mass at which the smallest tangent-Hessian eigenvalue at kappa_mu changes sign"""
    if bracket is None:
        mu1 = mu1_from_lambda2(lambda2(mesh.graph, mesh=mesh), mesh.length, p)
        bracket = (0.5 * mu1, 2.0 * mu1)
    lo, hi = bracket

    def smallest(mu: float) -> float:
        return float(tangent_hessian_spectrum(mesh, NlsParams(p, mu), k=1)[0])

    if not (smallest(lo) > 0 > smallest(hi)):
        raise BracketError(f"tangent Hessian does not change sign inside [{lo:.6g}, {hi:.6g}]")
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if smallest(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class BranchPoint:
    arclength: float
    state: StationaryState
    distance_from_constant: float
    fold: bool = False

    @property
    def mass(self) -> float:
        return self.state.mass

    def row(self) -> Tuple[float, float, float, float, float]:
        """(arclength, mu, lambda, |u - kappa|_inf, E)"""
        return (self.arclength, self.state.mass, self.state.multiplier,
                self.distance_from_constant, self.state.energy)


class _BranchSystem:
    """G(w, lam, mu) = [F(w, lam); w^T M w - mu] on X = (w, lam, mu)"""

    def __init__(self, mesh: Mesh, p: float):
        self.mesh = mesh
        self.p = p
        self.N = mesh.n_nodes

    def weight(self, t: np.ndarray) -> np.ndarray:
        out = t.copy()
        out[:self.N] = self.mesh.forms.M @ t[:self.N]
        return out

    def residual(self, X: np.ndarray):
        w, lam, mu = X[:self.N], X[self.N], X[self.N + 1]
        F, J, Mw = _stationary_parts(self.mesh, w, lam, self.p)
        c = float(w @ Mw) - mu
        DG = sp.bmat([
            [J, sp.csr_matrix(-Mw[:, None]), None],
            [sp.csr_matrix(2 * Mw[None, :]), None, sp.csr_matrix([[-1.0]])],
        ])
        return F, c, DG

    def tangent(self, X: np.ndarray, reference: np.ndarray) -> np.ndarray:
        _, _, DG = self.residual(X)
        A = sp.vstack([DG, sp.csr_matrix(self.weight(reference)[None, :])], format="csc")
        rhs = np.zeros(self.N + 2)
        rhs[-1] = 1.0
        t = spsolve(A, rhs)
        return t / math.sqrt(float(t @ self.weight(t)))

    def correct(self, X_pred: np.ndarray, t: np.ndarray, tol: float = 1e-10,
                max_iter: int = 15) -> Optional[np.ndarray]:
        X = X_pred.copy()
        wt = self.weight(t)
        prev = None
        for _ in range(max_iter):
            F, c, DG = self.residual(X)
            res = _dual_norm(self.mesh, F)
            mu = X[-1]
            if not math.isfinite(res) or mu <= 0:
                return None
            if res < tol and abs(c) < tol * mu:
                return X
            if prev is not None and res < 100 * tol and res > 0.5 * prev:
                return X
            A = sp.vstack([DG, sp.csr_matrix(wt[None, :])], format="csc")
            rhs = -np.concatenate((F, [c, float(wt @ (X - X_pred))]))
            step = spsolve(A, rhs)
            if not np.all(np.isfinite(step)):
                return None
            X = X + step
            prev = res
        return None


def _branch_seed(g: MetricGraph, mesh: Mesh, params: NlsParams, branch_mass: float) -> StationaryState:
    mu = params.mu
    k = kappa(mu, mesh.length)
    spectrum = eigen_smallest(mesh.forms, min(6, mesh.n_nodes))
    phi2 = mesh.function(spectrum.eigenvectors[:, spectrum.zero_mean_index(mesh.forms)])
    const = mesh.constant(k)
    for amplitude in (KICK, 0.3, 0.03):
        for sign in (1.0, -1.0):
            u0 = (const + phi2 * (sign * amplitude * math.sqrt(mu))).renormalized(mu)
            try:
                if mu > branch_mass:
                    state = _descend(u0, params, FlowSchedule())
                else:
                    state = newton_polish(u0, params)
            except ConvergenceError:
                continue
            if _converged(state) and constant_distance(state.u, k) > 1e-4 * k:
                return state
    raise ContinuationError(f"{g.name}: no nonconstant stationary state found near mu = {mu:.6g}",
                            "Start the branch at a mass closer to mu_1.")


def continue_branch(g: MetricGraph, p: float, from_mass: float, step: float = 0.05, n_steps: int = 20,
                    target_h: Optional[float] = None, mesh: Optional[Mesh] = None,
                    max_halvings: int = 6) -> List[BranchPoint]:
    """Pseudo-arclength continuation of the real nonconstant branch through from_mass.

    The branch is entered from kappa_mu + eps phi_2, on the side of mu_1 given by
    from_mass, and followed away from the constant family. Corrector failures halve
    the step; a sign change of dmu/ds is reported as a fold.
    """
    params = NlsParams(p, from_mass)
    if step <= 0 or n_steps < 0:
        raise ParameterError("step must be positive and n_steps nonnegative")
    mesh = mesh or build_mesh(g, target_h)
    branch_mass = locate_branch_point(mesh, p)
    logger.info("%s: branch point at mu = %.9g", g.name, branch_mass)

    seed = _branch_seed(g, mesh, params, branch_mass)
    rep = _real_representative(seed.u)
    if rep is None:
        raise ContinuationError("branch seed is not real up to a phase")
    w, _ = rep

    system = _BranchSystem(mesh, p)
    N = mesh.n_nodes
    X = np.concatenate((w, [seed.multiplier, seed.mass]))
    reference = np.zeros(N + 2)
    reference[-1] = 1.0 if from_mass >= branch_mass else -1.0
    t = system.tangent(X, reference)

    def point(X: np.ndarray, s: float, fold: bool) -> BranchPoint:
        state = measure_state(mesh.function(X[:N]), p, note="branch")
        return BranchPoint(s, state, constant_distance(state.u, kappa(state.mass, mesh.length)), fold)

    points = [point(X, 0.0, False)]
    s = 0.0
    ds = step
    while len(points) <= n_steps:
        trial = ds
        for _ in range(max_halvings + 1):
            X_new = system.correct(X + trial * t, t)
            if X_new is not None:
                candidate = point(X_new, s + trial, False)
                if candidate.state.pde_residual < RESIDUAL_TOL:
                    break
            trial *= 0.5
        else:
            raise ContinuationError(
                f"{g.name}: corrector failed after {max_halvings} step halvings at mu = {X[-1]:.6g}",
                "Reduce --step or start closer to the branch point.",
            )

        t_new = system.tangent(X_new, t)
        if np.sign(t_new[-1]) != np.sign(t[-1]):
            candidate.fold = True
            logger.info("%s: fold near mu = %.9g", g.name, X_new[-1])
        s += trial
        points.append(candidate)
        X, t = X_new, t_new
        ds = min(step, 2 * trial)
        logger.debug("branch s = %.4g: mu = %.9g, lambda = %.9g", s, X[-1], X[N])

    end = points[-1].state
    logger.info("%s: branch end mu = %.6g, E = %.9g vs E(kappa) = %.9g", g.name,
                end.mass, end.energy, constant_energy(end.mass, mesh.length, p))
    return points
