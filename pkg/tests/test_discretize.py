import math

import numpy as np
import pytest
from scipy.linalg import eigh

from graphnls.core.discretize import (
    MIN_ELEMENTS_PER_EDGE,
    assemble,
    build_mesh,
    default_target_h,
    lp_norm,
    lp_power,
    lp_power_gradient,
)
from graphnls.data import catalog
from graphnls.errors import ParameterError


def test_mesh_sizes():
    mesh = build_mesh(catalog.interval(), 0.25)
    assert (mesh.n_elements, mesh.n_nodes) == (4, 5)

    mesh = build_mesh(catalog.loop(), 0.25)
    assert (mesh.n_elements, mesh.n_nodes) == (4, 4)

    mesh = build_mesh(catalog.dumbbell(1.0, 3.0, 1.0), 0.5)
    assert mesh.subdivisions == (2, 6, 2)


def test_mesh_rejects_bad_width():
    with pytest.raises(ParameterError):
        build_mesh(catalog.interval(), 0.0)


def test_default_width_resolves_shortest_edge():
    g = catalog.star((0.1, 1.0, 1.0))
    mesh = build_mesh(g)
    assert min(mesh.subdivisions) >= MIN_ELEMENTS_PER_EDGE
    assert default_target_h(g) <= 0.1 / MIN_ELEMENTS_PER_EDGE


def test_single_element_matrices():
    forms = assemble(build_mesh(catalog.interval(), 1.0))
    np.testing.assert_allclose(forms.K.toarray(), [[1, -1], [-1, 1]])
    np.testing.assert_allclose(forms.M.toarray(), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])


def test_stiffness_kills_constants(corpus):
    for g in corpus:
        forms = build_mesh(g).forms
        np.testing.assert_allclose(forms.K @ np.ones(forms.K.shape[0]), 0.0, atol=1e-9)


def test_mass_of_one_is_total_length(dumbbell):
    mesh = build_mesh(dumbbell, 0.1)
    ones = np.ones(mesh.n_nodes)
    assert ones @ (mesh.forms.M @ ones) == pytest.approx(5.0, rel=1e-12)
    assert ones @ (mesh.lumped_forms.M @ ones) == pytest.approx(5.0, rel=1e-12)


def test_lp_norm_of_constant(tadpole):
    mesh = build_mesh(tadpole, 0.1)
    u = mesh.constant(-3.0 + 4.0j)
    for p in (1.0, 2.0, 4.0, 6.0):
        assert lp_norm(u, p) == pytest.approx(5.0 * 2.0 ** (1 / p), rel=1e-12)


def test_l2_quadrature_is_exact_for_linear_functions():
    mesh = build_mesh(catalog.star(), 0.2)
    u = mesh.interpolate(lambda e, s: 1.0 + 2.0 * s * (e.id + 1) / 3.0)
    assert lp_power(u, 2.0) == pytest.approx(u.mass(), abs=1e-10)


def test_hat_function_norm():
    mesh = build_mesh(catalog.interval(), 1.0)
    u = mesh.function([0.0, 1.0])
    assert lp_norm(u, 2.0) == pytest.approx(math.sqrt(1 / 3), rel=1e-12)


def test_lp_gradient_matches_finite_differences():
    mesh = build_mesh(catalog.tadpole(), 0.1)
    rng = np.random.default_rng(4)
    u = mesh.function(rng.standard_normal(mesh.n_nodes) + 1j * rng.standard_normal(mesh.n_nodes))
    v = rng.standard_normal(mesh.n_nodes) + 1j * rng.standard_normal(mesh.n_nodes)
    p = 4.5
    t = 1e-6
    fd = (lp_power(u.with_values(u.values + t * v), p) - lp_power(u.with_values(u.values - t * v), p)) / (2 * t)
    exact = float(np.real(np.vdot(lp_power_gradient(u, p), v)))
    assert fd == pytest.approx(exact, rel=1e-6)


def test_adding_a_constant_leaves_stiffness_unchanged():
    mesh = build_mesh(catalog.theta(), 0.1)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(mesh.n_nodes)
    K = mesh.forms.K
    np.testing.assert_allclose(K @ (u + 2.5), K @ u, atol=1e-10)


def test_refinement_never_raises_rayleigh_minimum():
    """Doubling every subdivision count gives nested spaces"""
    g = catalog.dumbbell(1.0, 2.0, 1.0)
    previous = math.inf
    for h in (0.25, 0.125, 0.0625):
        forms = build_mesh(g, h).forms
        values = eigh(forms.K.toarray(), forms.M.toarray(), eigvals_only=True, subset_by_index=[1, 1])
        assert values[0] <= previous + 1e-10
        previous = values[0]


def test_function_rows_and_renormalization(unit_loop):
    mesh = build_mesh(unit_loop, 0.25)
    rows = mesh.constant(1.0).rows()
    assert len(rows) == 5
    assert rows[0][0] == rows[-1][0] == 0
    assert [r[2] for r in rows] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])

    u = mesh.constant(2.0).renormalized(3.0)
    assert u.mass() == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(ParameterError):
        mesh.constant(0.0).renormalized(1.0)
