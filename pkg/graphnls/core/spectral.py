"""
Kirchhoff Laplacian Spectrum
Generalized symmetric eigenproblem K phi = lambda M phi, the spectral gap
lambda_2 and the rearrangement of graph functions onto an interval
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, lobpcg, splu

from graphnls.core.discretize import AssembledForms, GraphFunction, Mesh, build_mesh
from graphnls.data.metric_graph import MetricGraph, has_cycle_covering, total_length
from graphnls.errors import ParameterError, SpectralSolverError

logger = logging.getLogger(__name__)

# Systems up to this size go to the dense solver
DENSE_LIMIT = 3000
ZERO_MEAN_TOL = 1e-6
BOUND_TOL = 1e-6


@dataclass
class SpectralResult:
    """k smallest eigenpairs, eigenvectors M-orthonormal in the columns"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    method: str = "dense"

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def zero_mean_index(self, forms: AssembledForms, tol: float = ZERO_MEAN_TOL) -> int:
        """First eigenpair whose eigenvector is M-orthogonal to the constants"""
        ones = np.ones(forms.M.shape[0])
        scale = math.sqrt(float(ones @ (forms.M @ ones)))
        for j in range(len(self)):
            phi = self.eigenvectors[:, j]
            mean = abs(float(ones @ (forms.M @ phi))) / scale
            norm = math.sqrt(max(forms.inner(phi, phi), 0.0))
            if mean <= tol * norm:
                return j
        raise SpectralSolverError("no zero-mean eigenvector among the computed eigenpairs",
                                  self.residuals)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-10 * np.max(np.abs(col)))
        if big.size and col[big[0]] < 0:
            vectors[:, j] = -col
    return vectors


def _residuals(forms: AssembledForms, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    R = forms.K @ vectors - (forms.M @ vectors) * values
    return np.linalg.norm(R, axis=0)


def _dense_eigs(forms: AssembledForms, k: int) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.eigh(forms.K.toarray(), forms.M.toarray(), subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralSolverError(f"dense generalized eigensolver failed: {exc}")


def _deflated_eigs(forms: AssembledForms, k: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Constant mode known exactly; the rest by preconditioned LOBPCG against it"""
    N = forms.M.shape[0]
    ones = np.ones(N)
    length = float(ones @ (forms.M @ ones))
    const = (ones / math.sqrt(length))[:, None]

    shifted = splu((forms.K + forms.M).tocsc())
    precond = LinearOperator((N, N), matvec=shifted.solve, dtype=float)
    X = np.random.default_rng(seed).standard_normal((N, k - 1))
    try:
        values, vectors = lobpcg(forms.K, X, B=forms.M, M=precond, Y=const, tol=1e-10,
                                 maxiter=1000, largest=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralSolverError(f"LOBPCG failed: {exc}")

    order = np.argsort(values)
    values = np.concatenate(([0.0], values[order]))
    vectors = np.hstack((const, vectors[:, order]))
    return values, vectors


def eigen_smallest(forms: AssembledForms, k: int, method: str = "auto",
                   residual_tol: float = 1e-6) -> SpectralResult:
    """The k smallest eigenpairs of (K, M), signs fixed by the first nonzero component"""
    N = forms.M.shape[0]
    if k < 2 or k > N:
        raise ParameterError(f"need 2 <= k <= {N}, got k={k}")
    if method == "auto":
        method = "dense" if N <= DENSE_LIMIT else "deflated"

    if method == "dense":
        values, vectors = _dense_eigs(forms, k)
    elif method == "deflated":
        values, vectors = _deflated_eigs(forms, k)
    else:
        raise ParameterError(f"unknown eigen method {method!r}")

    vectors = _fix_signs(np.array(vectors, dtype=float))
    residuals = _residuals(forms, values, vectors)
    scale = np.linalg.norm(forms.K @ vectors, axis=0) + np.abs(values) * np.linalg.norm(forms.M @ vectors, axis=0)
    bad = residuals > residual_tol * np.maximum(scale, 1.0)
    if np.any(bad):
        raise SpectralSolverError(
            f"{method} eigensolver did not converge for {int(bad.sum())} of {k} eigenpairs",
            residuals,
        )
    logger.debug("eigen_smallest(%s): %s", method, np.array2string(values[:4], precision=6))
    return SpectralResult(eigenvalues=np.asarray(values, dtype=float), eigenvectors=vectors,
                          residuals=residuals, method=method)


def second_eigenpair(mesh: Mesh, k: int = 6) -> Tuple[float, GraphFunction]:
    """lambda_2 and an M-normalized eigenfunction with zero mean"""
    forms = mesh.forms
    k = min(k, mesh.n_nodes)
    result = eigen_smallest(forms, k)
    j = result.zero_mean_index(forms)
    return float(result.eigenvalues[j]), mesh.function(result.eigenvectors[:, j])


def lambda2_bounds(g: MetricGraph) -> Tuple[float, Optional[float]]:
    """pi^2/l^2 always; 4 pi^2/l^2 when the graph has a cycle covering"""
    ell = total_length(g)
    base = math.pi ** 2 / ell ** 2
    return base, (4.0 * base if has_cycle_covering(g) else None)


def lambda2(g: MetricGraph, target_h: Optional[float] = None, mesh: Optional[Mesh] = None) -> float:
    mesh = mesh or build_mesh(g, target_h)
    lam2, _ = second_eigenpair(mesh)

    lower, cycle_lower = lambda2_bounds(g)
    if lam2 < lower - BOUND_TOL:
        logger.warning("%s: lambda_2 = %.9g below pi^2/l^2 = %.9g", g.name, lam2, lower)
    if cycle_lower is not None and lam2 < cycle_lower - BOUND_TOL:
        logger.warning("%s: lambda_2 = %.9g below 4 pi^2/l^2 = %.9g despite a cycle covering",
                       g.name, lam2, cycle_lower)
    logger.info("%s: lambda_2 = %.9g (%d nodes)", g.name, lam2, mesh.n_nodes)
    return lam2


# ---------------------------------------------------------------------------
# Rearrangement onto [0, l]
# ---------------------------------------------------------------------------

@dataclass
class IntervalFunction:
    """Piecewise-linear function on [0, x[-1]] given by breakpoints"""
    x: np.ndarray
    y: np.ndarray

    @property
    def length(self) -> float:
        return float(self.x[-1] - self.x[0])

    def _segments(self):
        return self.y[:-1], self.y[1:], np.diff(self.x)

    def integral(self) -> float:
        a, b, h = self._segments()
        return float(np.sum(h * (a + b) / 2))

    def l2_squared(self) -> float:
        a, b, h = self._segments()
        return float(np.sum(h / 3 * (a * a + a * b + b * b)))

    def lq_power(self, q: float) -> float:
        a, b, h = self._segments()
        return float(np.sum(h / 6 * (np.abs(a) ** q + 4 * np.abs((a + b) / 2) ** q + np.abs(b) ** q)))

    def dirichlet(self) -> float:
        a, b, h = self._segments()
        keep = h > 0
        return float(np.sum((b[keep] - a[keep]) ** 2 / h[keep]))


@dataclass
class Rearrangement:
    psi: IntervalFunction
    positive_measure: float
    negative_measure: float
    source_dirichlet: float
    dirichlet: float
    two_preimages_assumed: bool
    energy_nonincreasing: Optional[bool]


def _level_measure(lo: np.ndarray, hi: np.ndarray, h: np.ndarray, levels: np.ndarray,
                   strict: bool) -> np.ndarray:
    """|{v > t}| (strict) or |{v >= t}| of a piecewise-linear function, per level t"""
    out = np.empty(len(levels))
    span = hi - lo
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    for start in range(0, len(levels), 256):
        t = levels[start:start + 256, None]
        frac = np.clip((hi - t) / safe, 0.0, 1.0)
        if strict:
            frac = np.where(flat, (lo > t).astype(float), frac)
        else:
            frac = np.where(flat, (lo >= t).astype(float), np.where(lo >= t, 1.0, frac))
        out[start:start + 256] = frac @ h
    return out


def _monotone_profile(a: np.ndarray, b: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Breakpoints (s, t) of the decreasing rearrangement of the positive part on [0, |{v > 0}|]"""
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    levels = np.unique(np.concatenate((a[a > 0], b[b > 0])))[::-1]
    if levels.size == 0:
        return np.zeros(1), np.zeros(1)

    s_gt = _level_measure(lo, hi, h, levels, strict=True)
    s_ge = _level_measure(lo, hi, h, levels, strict=False)
    support = float(_level_measure(lo, hi, h, np.zeros(1), strict=True)[0])

    s = np.concatenate((s_gt, s_ge, [support]))
    t = np.concatenate((levels, levels, [0.0]))
    order = np.lexsort((-t, s))
    s, t = s[order], t[order]
    keep = np.concatenate(([True], (np.diff(s) > 0) | (np.diff(t) != 0)))
    return s[keep], t[keep]


def _symmetric_piece(s: np.ndarray, t: np.ndarray, offset: float, sign: float):
    L = float(s[-1])
    x_left = offset + (L - s[::-1]) / 2
    x_right = offset + (L + s[1:]) / 2
    return np.concatenate((x_left, x_right)), sign * np.concatenate((t[::-1], t[1:]))


def rearrange_to_interval(u: GraphFunction, assume_two_preimages: bool = True,
                          tol: float = 1e-6) -> Rearrangement:
    """Place the symmetric decreasing rearrangements of u+ and u- side by side on [0, l].

    Works on the exact distribution function of the piecewise-linear
    interpolant, so the pieces are equimeasurable with u+ and u-. The Dirichlet
    energy can only be expected not to increase when almost every level of u
    has at least two preimages, which holds under a cycle covering.
    """
    if not u.is_real():
        raise ParameterError("rearrangement needs a real-valued function")
    mesh = u.mesh
    ell = mesh.length
    mean = u.integral().real / ell
    if abs(mean) > 1e-8 * max(1.0, u.sup_norm()):
        logger.warning("rearrange_to_interval: input mean %.3g is not zero", mean)

    v = u.values.real
    el = mesh.elements
    a, b, h = v[el[:, 0]], v[el[:, 1]], mesh.element_h

    s_pos, t_pos = _monotone_profile(a, b, h)
    s_neg, t_neg = _monotone_profile(-a, -b, h)
    L_pos, L_neg = float(s_pos[-1]), float(s_neg[-1])

    xs, ys = [], []
    if L_pos > 0:
        x, y = _symmetric_piece(s_pos, t_pos, 0.0, 1.0)
        xs.append(x)
        ys.append(y)
    if L_neg > 0:
        x, y = _symmetric_piece(s_neg, t_neg, L_pos, -1.0)
        xs.append(x)
        ys.append(y)
    xs.append(np.array([0.0, L_pos + L_neg, ell]))
    ys.append(np.zeros(3))

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = np.lexsort((np.arange(len(x)), x))
    x, y = x[order], y[order]
    keep = np.concatenate(([True], (np.diff(x) > 0) | (np.diff(y) != 0)))
    psi = IntervalFunction(x=x[keep], y=y[keep])

    source = float(v @ (mesh.forms.K @ v))
    energy = psi.dirichlet()
    verdict = None
    if assume_two_preimages:
        verdict = energy <= source * (1 + tol) + 1e-14
        if not verdict:
            logger.warning("Polya-Szego check failed: %.9g > %.9g", energy, source)

    return Rearrangement(psi=psi, positive_measure=L_pos, negative_measure=L_neg,
                         source_dirichlet=source, dirichlet=energy,
                         two_preimages_assumed=assume_two_preimages, energy_nonincreasing=verdict)
