import math

import numpy as np
import pytest

from graphnls.core.discretize import build_mesh
from graphnls.core.nls_energy import (
    NlsParams,
    constant_energy,
    constant_solution,
    constrained_gradient,
    energy,
    energy_differential,
    estimate_gn_constant,
    gn_ratio,
    kappa,
    mu1_lower_bound,
    mu1_threshold,
    random_smooth_field,
    scale_invariant_mass,
    second_variation_at_constant,
)
from graphnls.core.spectral import eigen_smallest, second_eigenpair
from graphnls.data import catalog
from graphnls.data.metric_graph import has_cycle_covering, total_length
from graphnls.errors import ParameterError


def _mass_curve(u, phi, mu, t):
    """sqrt(mu) (u + t phi) / ||u + t phi||"""
    return (u + phi * t).renormalized(mu)


def test_params_validation():
    with pytest.raises(ParameterError):
        NlsParams(2.0, 1.0)
    with pytest.raises(ParameterError):
        NlsParams(6.5, 1.0)
    with pytest.raises(ParameterError):
        NlsParams(4.0, 0.0)
    assert NlsParams(4.0, 1.0).with_mass(2.0) == NlsParams(4.0, 2.0)


def test_energy_examples():
    mesh = build_mesh(catalog.interval(), 0.1)
    assert energy(mesh.constant(0.0), NlsParams(6, 1.0)) == 0.0
    assert energy(mesh.constant(1.0), NlsParams(6, 1.0)) == pytest.approx(-1 / 6, rel=1e-12)
    assert constant_energy(2.0, 5.0, 4.0) == pytest.approx(-0.2, rel=1e-12)

    g = catalog.dumbbell(1.0, 3.0, 1.0)
    state = constant_solution(g, NlsParams(4, 2.0), target_h=0.1)
    assert state.energy == pytest.approx(-0.2, rel=1e-12)


def test_constant_solution_examples(dumbbell):
    state = constant_solution(catalog.interval(), NlsParams(6, 4.0), target_h=0.1)
    assert state.u.values[0].real == pytest.approx(2.0)
    assert state.multiplier == pytest.approx(16.0)
    assert state.pde_residual <= 1e-10 * 16 * 2
    assert state.flux_defect == 0.0
    assert state.note == "constant"

    state = constant_solution(dumbbell, NlsParams(4, 3.7), target_h=0.05)
    assert state.mass == pytest.approx(3.7, abs=1e-10)
    assert kappa(3.7, 5.0) == pytest.approx(math.sqrt(3.7 / 5.0))


def test_constant_is_a_constrained_critical_point(tadpole):
    params = NlsParams(5.0, 2.5)
    state = constant_solution(tadpole, params, target_h=0.05)
    grad = constrained_gradient(state.u, params)
    assert grad.sup_norm() <= 1e-9


def test_unprojected_differential_vanishes_along_phi2(tadpole):
    mesh = build_mesh(tadpole, 0.05)
    params = NlsParams(4.0, 3.0)
    u = constant_solution(tadpole, params, mesh=mesh).u
    _, phi2 = second_eigenpair(mesh)
    r = energy_differential(u, params.p)
    assert abs(float(np.real(np.vdot(r, phi2.values)))) <= 1e-10


@pytest.mark.parametrize("name, p, seed", [
    ("interval", 4.0, 0), ("tadpole", 6.0, 1), ("dumbbell", 3.0, 2),
    ("theta3", 5.0, 3), ("star3", 4.5, 4), ("loop", 6.0, 5),
])
def test_constrained_gradient_matches_finite_differences(name, p, seed):
    g = catalog.named_graph(name)
    mesh = build_mesh(g, 0.05)
    basis = eigen_smallest(mesh.forms, 6).eigenvectors
    rng = np.random.default_rng(seed)
    for _ in range(8):
        u = mesh.function(random_smooth_field(mesh, rng, basis))
        mu = u.mass()
        params = NlsParams(p, mu)
        phi = mesh.function(random_smooth_field(mesh, rng, basis))
        t = 1e-5
        fd = (energy(_mass_curve(u, phi, mu, t), params) - energy(_mass_curve(u, phi, mu, -t), params)) / (2 * t)
        grad = constrained_gradient(u, params)
        exact = u.forms.inner(grad.values, phi.values)
        assert fd == pytest.approx(exact, rel=1e-6, abs=1e-9)


def test_second_variation_examples(dumbbell):
    mesh = build_mesh(dumbbell, 0.05)
    params = NlsParams(6.0, 2.0)
    assert second_variation_at_constant(dumbbell, mesh, params, mesh.constant(0.7j)) == pytest.approx(0.0, abs=1e-12)

    lam2, phi2 = second_eigenpair(mesh)
    k = kappa(params.mu, total_length(dumbbell))
    expected = (lam2 - (params.p - 2) * k ** (params.p - 2)) * phi2.mass()
    assert second_variation_at_constant(dumbbell, mesh, params, phi2) == pytest.approx(expected, rel=1e-9)


def test_second_variation_requires_tangency(dumbbell):
    mesh = build_mesh(dumbbell, 0.1)
    with pytest.raises(ParameterError):
        second_variation_at_constant(dumbbell, mesh, NlsParams(4.0, 1.0), mesh.constant(1.0))


@pytest.mark.parametrize("name, p, mu, seed", [
    ("interval", 4.0, 3.0, 0), ("loop", 6.0, 2.0, 1), ("tadpole", 5.0, 1.5, 2),
    ("dumbbell", 3.0, 4.0, 3), ("figure_eight", 6.0, 1.0, 4),
])
def test_second_variation_matches_the_mass_preserving_curve(name, p, mu, seed):
    g = catalog.named_graph(name)
    mesh = build_mesh(g, 0.05)
    forms = mesh.forms
    params = NlsParams(p, mu)
    u = constant_solution(g, params, mesh=mesh).u
    basis = eigen_smallest(forms, 6).eigenvectors
    rng = np.random.default_rng(seed)
    ones = np.ones(mesh.n_nodes)
    for _ in range(10):
        values = random_smooth_field(mesh, rng, basis)
        re = values.real - (ones @ (forms.M @ values.real)) / (ones @ (forms.M @ ones))
        phi = mesh.function(re + 1j * values.imag)
        phi = phi * (1.0 / math.sqrt(phi.mass()))
        t = 1e-3
        e0 = energy(u, params)
        fd = (energy(_mass_curve(u, phi, mu, t), params) - 2 * e0
              + energy(_mass_curve(u, phi, mu, -t), params)) / t ** 2
        exact = second_variation_at_constant(g, mesh, params, phi)
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("mu_factor, positive", [(0.9, True), (1.1, False)])
def test_second_variation_sign_dichotomy(interval, mu_factor, positive):
    mesh = build_mesh(interval, 0.01)
    p = 4.0
    mu1 = mu1_threshold(interval, p, mesh=mesh)
    params = NlsParams(p, mu_factor * mu1)
    _, phi2 = second_eigenpair(mesh)
    value = second_variation_at_constant(interval, mesh, params, phi2)
    assert (value > 0) == positive


def test_mu1_threshold_examples(interval, unit_loop):
    assert mu1_threshold(interval, 6.0, 1e-2) == pytest.approx(math.pi / 2, rel=5e-3)
    assert mu1_threshold(unit_loop, 6.0, 1e-2) == pytest.approx(math.pi, rel=5e-3)
    assert mu1_threshold(interval, 4.0, 1e-2) == pytest.approx(math.pi ** 2 / 2, rel=5e-3)
    with pytest.raises(ParameterError):
        mu1_threshold(interval, 7.0)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_mu1_is_scale_invariant_at_p6(t):
    g = catalog.star((1.0, 0.5, 2.0))
    h = 0.02
    assert mu1_threshold(g.scaled(t), 6.0, h * t) == pytest.approx(mu1_threshold(g, 6.0, h), abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_threshold_comparison_is_scale_covariant(interval, t):
    p = 4.0
    beta = (p - 2) / (6 - p)
    h = 0.01
    s = t ** -beta
    mu1 = mu1_threshold(interval, p, h)
    mu1_scaled = mu1_threshold(interval.scaled(s), p, h * s)
    for mu in (0.8 * mu1, 1.2 * mu1):
        assert (mu < mu1) == (t * mu < mu1_scaled)
        assert scale_invariant_mass(t * mu, s, p) == pytest.approx(scale_invariant_mass(mu, 1.0, p))
    with pytest.raises(ParameterError):
        scale_invariant_mass(1.0, 1.0, 6.0)


def test_mu1_bounds_on_corpus(corpus):
    for g in corpus:
        ell = total_length(g)
        covered = has_cycle_covering(g)
        mu1_6 = mu1_threshold(g, 6.0)
        assert mu1_6 >= math.pi / 2 - 1e-4, g.name
        if covered:
            assert mu1_6 >= math.pi - 1e-4, g.name
        mu1_4 = mu1_threshold(g, 4.0)
        assert mu1_4 >= mu1_lower_bound(ell, 4.0, covered) * (1 - 1e-6), g.name


def test_gn_ratio(tadpole):
    mesh = build_mesh(tadpole, 0.05)
    params = NlsParams(4.0, 2.0)
    u = constant_solution(tadpole, params, mesh=mesh).u
    ratio = gn_ratio(u, params)
    assert math.isfinite(ratio) and ratio > 0
    with pytest.raises(ParameterError):
        gn_ratio(mesh.constant(0.0), params)

    v = u * 3.0
    assert gn_ratio(v, NlsParams(4.0, 9.0 * 2.0)) > 0


def test_gn_constant_estimate_is_a_running_maximum(tadpole):
    running = estimate_gn_constant(tadpole, 4.0, n_samples=300, seed=1, target_h=0.05)
    assert running.shape == (300,)
    assert np.all(np.diff(running) >= 0)
    assert running[-1] > 0
