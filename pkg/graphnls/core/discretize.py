"""
Finite Element Discretization
Continuous piecewise-linear elements on every edge, one shared node per vertex.
Kirchhoff conditions are the natural boundary conditions of the stiffness form,
so nothing is imposed at the vertices.
"""

import math
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from graphnls.data.metric_graph import Edge, MetricGraph, total_length
from graphnls.errors import ParameterError

logger = logging.getLogger(__name__)

MIN_ELEMENTS_PER_EDGE = 8


def default_target_h(g: MetricGraph) -> float:
    """Mesh width giving at least 8 elements on the shortest edge"""
    return min(g.min_edge_length / MIN_ELEMENTS_PER_EDGE, total_length(g) / 200.0)


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Stiffness K and mass M acting on nodal vectors"""
    K: sp.csr_matrix
    M: sp.csr_matrix
    lumped: bool = False

    @cached_property
    def _mass_lu(self):
        return splu(self.M.tocsc())

    def solve_mass(self, r: np.ndarray) -> np.ndarray:
        """M^{-1} r, real and imaginary parts solved separately"""
        if np.iscomplexobj(r):
            return self._mass_lu.solve(np.ascontiguousarray(r.real)) + 1j * self._mass_lu.solve(
                np.ascontiguousarray(r.imag))
        return self._mass_lu.solve(np.asarray(r, dtype=float))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Real part of the M-inner product"""
        return float(np.real(np.vdot(u, self.M @ v)))

    def dirichlet(self, u: np.ndarray) -> float:
        return float(np.real(np.vdot(u, self.K @ u)))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Global nodal numbering of the graph: vertex nodes first, then edge interiors"""
    graph: MetricGraph
    target_h: float
    subdivisions: Tuple[int, ...]
    n_nodes: int
    elements: np.ndarray = field(repr=False)
    element_h: np.ndarray = field(repr=False)
    element_edge: np.ndarray = field(repr=False)
    edge_nodes: Tuple[np.ndarray, ...] = field(repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.element_h)

    @property
    def h_max(self) -> float:
        return float(self.element_h.max())

    @property
    def h_min(self) -> float:
        return float(self.element_h.min())

    @property
    def length(self) -> float:
        return total_length(self.graph)

    @cached_property
    def forms(self) -> AssembledForms:
        return assemble(self)

    @cached_property
    def lumped_forms(self) -> AssembledForms:
        return assemble(self, lumped=True)

    def edge_h(self, position: int) -> float:
        e = self.graph.edges[position]
        return e.length / self.subdivisions[position]

    def function(self, values) -> "GraphFunction":
        return GraphFunction(self, np.asarray(values, dtype=complex))

    def constant(self, value: complex) -> "GraphFunction":
        return GraphFunction(self, np.full(self.n_nodes, value, dtype=complex))

    def interpolate(self, f: Callable[[Edge, np.ndarray], np.ndarray]) -> "GraphFunction":
        """Nodal interpolant of f(edge, arclength); vertex values come from the first edge touching them"""
        values = np.zeros(self.n_nodes, dtype=complex)
        assigned = np.zeros(self.n_nodes, dtype=bool)
        for pos, e in enumerate(self.graph.edges):
            nodes = self.edge_nodes[pos]
            s = np.linspace(0.0, e.length, len(nodes))
            vals = np.asarray(f(e, s), dtype=complex)
            fresh = ~assigned[nodes]
            values[nodes[fresh]] = vals[fresh]
            assigned[nodes] = True
        return GraphFunction(self, values)

    def node_rows(self) -> List[Tuple[int, int, float]]:
        """(node id, edge id, arclength) for every edge-local node"""
        rows = []
        for pos, e in enumerate(self.graph.edges):
            nodes = self.edge_nodes[pos]
            h = e.length / self.subdivisions[pos]
            rows.extend((int(n), e.id, k * h) for k, n in enumerate(nodes))
        return rows


def build_mesh(g: MetricGraph, target_h: Optional[float] = None) -> Mesh:
    """Subdivide edge e into ceil(length_e / target_h) elements.

    Loops get at least two elements so they carry an interior node.
    """
    if target_h is None:
        target_h = default_target_h(g)
    if not (target_h > 0 and math.isfinite(target_h)):
        raise ParameterError(f"target_h must be positive, got {target_h}")

    n_vertices = len(g.vertices)
    subdivisions = []
    for e in g.edges:
        n = max(1, math.ceil(e.length / target_h - 1e-9))
        if e.is_loop:
            n = max(n, 2)
        subdivisions.append(n)

    next_node = n_vertices
    elements, element_h, element_edge, edge_nodes = [], [], [], []
    for pos, (e, n) in enumerate(zip(g.edges, subdivisions)):
        interior = np.arange(next_node, next_node + n - 1)
        next_node += n - 1
        nodes = np.concatenate(([e.a], interior, [e.b])).astype(np.int64)
        edge_nodes.append(nodes)
        elements.append(np.column_stack((nodes[:-1], nodes[1:])))
        element_h.append(np.full(n, e.length / n))
        element_edge.append(np.full(n, pos, dtype=np.int64))

    mesh = Mesh(
        graph=g,
        target_h=float(target_h),
        subdivisions=tuple(subdivisions),
        n_nodes=next_node,
        elements=np.vstack(elements),
        element_h=np.concatenate(element_h),
        element_edge=np.concatenate(element_edge),
        edge_nodes=tuple(edge_nodes),
    )
    logger.debug("Mesh for %s: %d nodes, %d elements, h in [%.3g, %.3g]",
                 g.name, mesh.n_nodes, mesh.n_elements, mesh.h_min, mesh.h_max)
    return mesh


def assemble(mesh: Mesh, lumped: bool = False) -> AssembledForms:
    """Sum the linear-element matrices K_e = [[1,-1],[-1,1]]/h and M_e = h/6 [[2,1],[1,2]]"""
    i, j = mesh.elements[:, 0], mesh.elements[:, 1]
    h = mesh.element_h
    rows = np.concatenate((i, i, j, j))
    cols = np.concatenate((i, j, i, j))
    N = mesh.n_nodes

    k = np.concatenate((1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h))
    K = sp.coo_matrix((k, (rows, cols)), shape=(N, N)).tocsr()

    if lumped:
        diag = np.bincount(i, weights=h / 2, minlength=N) + np.bincount(j, weights=h / 2, minlength=N)
        M = sp.diags(diag).tocsr()
    else:
        m = np.concatenate((h / 3, h / 6, h / 6, h / 3))
        M = sp.coo_matrix((m, (rows, cols)), shape=(N, N)).tocsr()

    return AssembledForms(K=K, M=M, lumped=lumped)


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """Complex nodal values on a mesh; continuity at vertices is built in"""
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.mesh.n_nodes,):
            raise ParameterError(f"expected {self.mesh.n_nodes} nodal values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def forms(self) -> AssembledForms:
        return self.mesh.forms

    def with_values(self, values) -> "GraphFunction":
        return GraphFunction(self.mesh, values)

    def __add__(self, other: "GraphFunction") -> "GraphFunction":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GraphFunction") -> "GraphFunction":
        return self.with_values(self.values - other.values)

    def __mul__(self, c: complex) -> "GraphFunction":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "GraphFunction":
        return self.with_values(-self.values)

    def mass(self, forms: Optional[AssembledForms] = None) -> float:
        forms = forms or self.forms
        return forms.inner(self.values, self.values)

    def dirichlet(self) -> float:
        """||u'||_2^2"""
        return self.forms.dirichlet(self.values)

    def integral(self, forms: Optional[AssembledForms] = None) -> complex:
        forms = forms or self.forms
        return complex(np.sum(forms.M @ self.values))

    def h1_norm(self, forms: Optional[AssembledForms] = None) -> float:
        """||u'||_2 + ||u||_2"""
        return math.sqrt(max(self.dirichlet(), 0.0)) + math.sqrt(max(self.mass(forms), 0.0))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.values.imag), initial=0.0) <= tol * max(1.0, self.sup_norm()))

    def renormalized(self, mu: float, forms: Optional[AssembledForms] = None) -> "GraphFunction":
        m = self.mass(forms)
        if m <= 0:
            raise ParameterError("cannot renormalize the zero function")
        return self * math.sqrt(mu / m)

    def rows(self) -> List[Tuple[int, int, float, float, float]]:
        """(node id, edge id, arclength, re, im) per edge-local node"""
        return [(n, e, s, float(self.values[n].real), float(self.values[n].imag))
                for n, e, s in self.mesh.node_rows()]


def _element_values(u: GraphFunction):
    el = u.mesh.elements
    a = u.values[el[:, 0]]
    b = u.values[el[:, 1]]
    return a, b, 0.5 * (a + b), u.mesh.element_h


def lp_power(u: GraphFunction, p: float) -> float:
    """Composite Simpson of |u|^p over each element of the linear interpolant"""
    a, b, m, h = _element_values(u)
    return float(np.sum(h / 6.0 * (np.abs(a) ** p + 4.0 * np.abs(m) ** p + np.abs(b) ** p)))


def lp_norm(u: GraphFunction, p: float) -> float:
    if p < 1:
        raise ParameterError(f"lp_norm needs p >= 1, got {p}")
    return lp_power(u, p) ** (1.0 / p)


def lp_power_gradient(u: GraphFunction, p: float) -> np.ndarray:
    """Dual vector g with d/dt lp_power(u + t v) = Re(g^H v)"""
    a, b, m, h = _element_values(u)
    w = h / 6.0 * p
    wm = 2.0 * np.abs(m) ** (p - 2) * m
    ga = w * (np.abs(a) ** (p - 2) * a + wm)
    gb = w * (np.abs(b) ** (p - 2) * b + wm)
    el = u.mesh.elements
    N = u.mesh.n_nodes
    re = np.bincount(el[:, 0], weights=ga.real, minlength=N) + np.bincount(el[:, 1], weights=gb.real, minlength=N)
    im = np.bincount(el[:, 0], weights=ga.imag, minlength=N) + np.bincount(el[:, 1], weights=gb.imag, minlength=N)
    return re + 1j * im


def lp_power_hessian(u: GraphFunction, p: float) -> sp.csr_matrix:
    """Hessian of lp_power with respect to real nodal values (u must be real)"""
    a, b, m, h = (np.real(x) for x in _element_values(u))
    c = p * (p - 1)

    def phi2(x):
        return c * np.abs(x) ** (p - 2)

    w = h / 6.0
    d_aa = w * (phi2(a) + phi2(m))
    d_bb = w * (phi2(b) + phi2(m))
    d_ab = w * phi2(m)
    i, j = u.mesh.elements[:, 0], u.mesh.elements[:, 1]
    N = u.mesh.n_nodes
    rows = np.concatenate((i, i, j, j))
    cols = np.concatenate((i, j, i, j))
    vals = np.concatenate((d_aa, d_ab, d_ab, d_bb))
    return sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
