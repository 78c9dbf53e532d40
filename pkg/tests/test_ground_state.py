import math

import numpy as np
import pytest

from graphnls.core.discretize import build_mesh
from graphnls.core.ground_state import (
    FlowSchedule,
    constant_distance,
    constant_family_residual,
    continue_branch,
    estimate_mu2,
    find_ground_state,
    locate_branch_point,
    newton_polish,
    normalized_gradient_flow,
)
from graphnls.core.nls_energy import (
    NlsParams,
    constant_energy,
    kappa,
    mu1_threshold,
    random_smooth_field,
)
from graphnls.core.spectral import eigen_smallest, second_eigenpair
from graphnls.data import catalog
from graphnls.data.metric_graph import critical_mass, total_length
from graphnls.errors import BracketError, ParameterError, SupercriticalMassError


def _kicked_constant(mesh, mu, amplitude=0.1):
    _, phi2 = second_eigenpair(mesh)
    return (mesh.constant(kappa(mu, mesh.length)) + phi2 * (amplitude * math.sqrt(mu))).renormalized(mu)


def test_flow_from_the_constant_stops_immediately(interval):
    mesh = build_mesh(interval, 0.05)
    params = NlsParams(4.0, 1.0)
    state = normalized_gradient_flow(mesh.constant(1.0), params)
    assert state.converged
    assert state.iterations == 0
    assert constant_distance(state.u, 1.0) < 1e-12


def test_flow_requires_the_declared_mass(interval):
    mesh = build_mesh(interval, 0.05)
    with pytest.raises(ParameterError):
        normalized_gradient_flow(mesh.constant(1.0), NlsParams(4.0, 2.0))


def test_flow_finds_the_nonconstant_state_above_mu1(interval):
    mesh = build_mesh(interval, 0.02)
    params = NlsParams(4.0, 10.0)
    state = normalized_gradient_flow(_kicked_constant(mesh, params.mu), params)
    assert state.converged
    assert state.mass == pytest.approx(10.0, rel=1e-8)
    assert state.energy < constant_energy(10.0, 1.0, 4.0)
    assert np.all(state.u.values.real > 0)
    assert constant_distance(state.u, kappa(10.0, 1.0)) > 0.1

    polished = newton_polish(state.u, params)
    assert polished.pde_residual < 1e-8
    assert polished.mass == pytest.approx(10.0, rel=1e-10)
    assert polished.energy == pytest.approx(state.energy, rel=1e-8)


def test_flow_energy_is_nonincreasing(tadpole):
    mesh = build_mesh(tadpole, 0.05)
    basis = eigen_smallest(mesh.forms, 8).eigenvectors
    rng = np.random.default_rng(3)
    params = NlsParams(4.0, 3.0)
    schedule = FlowSchedule(max_iter=400)
    for _ in range(20):
        u0 = mesh.function(random_smooth_field(mesh, rng, basis)).renormalized(params.mu)
        state = normalized_gradient_flow(u0, params, schedule)
        history = np.array(state.energy_history)
        assert len(history) >= 1
        assert np.all(np.diff(history) <= 1e-12 * np.maximum(1.0, np.abs(history[:-1])))
        assert state.mass == pytest.approx(params.mu, rel=1e-10)


def test_flow_is_phase_invariant(interval):
    mesh = build_mesh(interval, 0.05)
    params = NlsParams(4.0, 8.0)
    u0 = _kicked_constant(mesh, params.mu)
    plain = normalized_gradient_flow(u0, params)
    rotated = normalized_gradient_flow(u0 * np.exp(0.7j), params)
    assert rotated.energy == pytest.approx(plain.energy, rel=1e-9)
    assert rotated.mass == pytest.approx(plain.mass, rel=1e-12)


def test_small_mass_ground_states_are_constant(corpus):
    for g in corpus:
        mesh = build_mesh(g, min(0.1, g.min_edge_length / 4))
        for p in (4.0, 6.0):
            result = find_ground_state(g, NlsParams(p, 1e-2), n_random_starts=2, seed=1, mesh=mesh, workers=2)
            assert result.is_constant, (g.name, p)
            assert result.energy <= result.constant_energy + 1e-10
            assert result.gap_to_constant >= -1e-10


def test_ground_state_result_fields(tadpole):
    result = find_ground_state(tadpole, NlsParams(4.0, 0.5), n_random_starts=3, seed=0, target_h=0.05, workers=1)
    assert result.starts_used == 6
    assert result.labels[0] in ("constant", "+phi2", "-phi2", "random0", "random1", "random2")
    row = result.sweep_row()
    assert row[0] == pytest.approx(0.5, rel=1e-8)
    assert row[3] is True
    body = result.to_dict()
    assert body["is_constant"] is True
    assert body["local_minima"][0]["energy"] == pytest.approx(result.energy)


def test_mirror_minima_are_flagged_degenerate(interval):
    result = find_ground_state(interval, NlsParams(4.0, 8.0), n_random_starts=0, target_h=0.05, workers=1)
    assert not result.is_constant
    assert result.degenerate
    assert result.gap_to_constant > 1e-4
    assert len(result.all_local_minima) >= 2


def test_supercritical_mass_is_refused(interval):
    mu = critical_mass(interval) + 0.1
    with pytest.raises(SupercriticalMassError) as info:
        find_ground_state(interval, NlsParams(6.0, mu), target_h=0.1)
    assert info.value.exit_code == 4


def test_ground_state_energy_is_stable_under_refinement(interval):
    energies = [
        find_ground_state(interval, NlsParams(4.0, 8.0), n_random_starts=0, target_h=h, workers=1).energy
        for h in (0.04, 0.02)
    ]
    assert energies[1] == pytest.approx(energies[0], rel=1e-2)


def test_constancy_threshold_on_the_interval(interval):
    mesh = build_mesh(interval, 0.05)
    p = 4.0
    tol = 0.5
    mu1 = mu1_threshold(interval, p, mesh=mesh)
    estimate = estimate_mu2(interval, p, (2.0, 8.0), tol=tol, mesh=mesh, n_random_starts=2)
    assert 2.0 < estimate <= mu1 + tol
    for mu in np.linspace(0.5, estimate - tol, 3):
        assert find_ground_state(interval, NlsParams(p, float(mu)), 2, mesh=mesh, workers=1).is_constant


def test_constancy_threshold_needs_a_sign_change(interval):
    mesh = build_mesh(interval, 0.1)
    with pytest.raises(BracketError):
        estimate_mu2(interval, 4.0, (0.5, 1.0), mesh=mesh, n_random_starts=1)
    with pytest.raises(ParameterError):
        estimate_mu2(interval, 4.0, (1.0, 0.5), mesh=mesh)


@pytest.mark.slow
def test_long_bridge_dumbbell_has_a_nonconstant_ground_state():
    g = catalog.dumbbell(1.0, 50.0, 1.0)
    mesh = build_mesh(g, 0.05)
    mu1 = mu1_threshold(g, 6.0, mesh=mesh)
    mu = 2.6
    assert mu1 < mu <= critical_mass(g)
    result = find_ground_state(g, NlsParams(6.0, mu), n_random_starts=0, mesh=mesh)
    assert not result.is_constant
    assert result.gap_to_constant >= 1e-4


@pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
def test_constant_family_solves_the_stationary_equation(interval, p):
    mesh = build_mesh(interval, 0.05)
    for lam in (0.5, 1.0, 2.0):
        assert constant_family_residual(mesh, p, lam) <= 1e-10 * max(1.0, lam ** ((p - 1) / (p - 2)))
    with pytest.raises(ParameterError):
        constant_family_residual(mesh, p, 0.0)


def test_branch_point_is_mu1(interval):
    mesh = build_mesh(interval, 0.02)
    p = 4.0
    mu1 = mu1_threshold(interval, p, mesh=mesh)
    assert locate_branch_point(mesh, p) == pytest.approx(mu1, rel=1e-4)


def test_continued_branch_lies_below_the_constant(interval):
    mesh = build_mesh(interval, 0.05)
    p = 4.0
    mu1 = mu1_threshold(interval, p, mesh=mesh)
    points = continue_branch(interval, p, mu1 + 0.1, step=0.05, n_steps=4, mesh=mesh)
    assert len(points) == 5
    assert points[0].arclength == 0.0
    assert all(b.arclength > a.arclength for a, b in zip(points, points[1:]))
    ell = total_length(interval)
    for pt in points:
        assert pt.state.energy < constant_energy(pt.mass, ell, p)
        assert pt.distance_from_constant > 1e-4
    for pt in points[1:]:
        assert pt.state.pde_residual < 1e-8
    assert points[-1].mass > points[0].mass


@pytest.mark.parametrize("p, masses", [
    (3.0, [0.01, 0.1, 1.0, 10.0]),
    (4.0, [0.01, 0.1, 1.0, 10.0]),
    (5.0, [0.001, 0.01, 0.1, 1.0]),
])
def test_subcritical_ground_states_exist_across_decades(tadpole, p, masses):
    mesh = build_mesh(tadpole, 0.05)
    for mu in masses:
        result = find_ground_state(tadpole, NlsParams(p, mu), n_random_starts=2, mesh=mesh)
        assert result.best.pde_residual < 1e-8
        assert result.best.mass == pytest.approx(mu, rel=1e-8)
        assert result.energy <= result.constant_energy + 1e-12 * max(1.0, abs(result.constant_energy))


def _second_derivative_bound(state, p):
    u = np.abs(state.u.values)
    return float(np.max(abs(state.multiplier) * u + u ** (p - 1)))


def test_nonconstant_state_flux_defect_is_first_order(interval):
    params = NlsParams(4.0, 10.0)
    defects = []
    for h in (0.02, 0.01):
        mesh = build_mesh(interval, h)
        result = find_ground_state(interval, params, n_random_starts=0, mesh=mesh)
        assert not result.is_constant
        best = result.best
        assert 0.0 < best.flux_defect <= mesh.h_max * _second_derivative_bound(best, params.p)
        defects.append(best.flux_defect)
    assert 1.6 < defects[0] / defects[1] < 2.4


def test_flux_defect_at_a_branching_vertex(tadpole):
    params = NlsParams(4.0, 8.0)
    mesh = build_mesh(tadpole, 0.02)
    result = find_ground_state(tadpole, params, n_random_starts=2, mesh=mesh)
    assert not result.is_constant
    best = result.best
    assert best.flux_defect <= 2 * mesh.h_max * _second_derivative_bound(best, params.p)
