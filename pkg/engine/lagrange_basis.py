"""
Lagrange bases on the reference simplex (1D and 2D, degree 1-4) and the
quadrature rules used to integrate them.

All points are given in barycentric coordinates (lambda_0, ..., lambda_dim).
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import roots_jacobi

logger = logging.getLogger(__name__)

# --- Configuration ---
SUPPORTED_DIMS = (1, 2)
SUPPORTED_DEGREES = (1, 2, 3, 4)
MAX_QUADRATURE_ORDER = 8
DEFAULT_COEFFICIENT_DEGREE = 1


class QuadratureError(ValueError):
    """Requested quadrature order is not available."""


def _silvester_factors(degree):
    """
    Polynomials s_a(t) = prod_{j<a} (p*t - j) / (j + 1) for a = 0..p,
    with their first and second derivatives.
    """
    factors = []
    for a in range(degree + 1):
        poly = Polynomial([1.0])
        for j in range(a):
            poly = poly * Polynomial([-j / (j + 1), degree / (j + 1)])
        factors.append((poly, poly.deriv(1), poly.deriv(2)))
    return factors


def _multi_indices(dim, degree):
    """Node multi-indices: vertices, then edge nodes edge by edge, then interior."""
    p = degree
    n_vertices = dim + 1
    indices = []
    for v in range(n_vertices):
        alpha = [0] * n_vertices
        alpha[v] = p
        indices.append(tuple(alpha))
    edges = [(0, 1)] if dim == 1 else [(0, 1), (1, 2), (2, 0)]
    for a, b in edges:
        for k in range(1, p):
            alpha = [0] * n_vertices
            alpha[a], alpha[b] = p - k, k
            indices.append(tuple(alpha))
    if dim == 2:
        for i in range(1, p):
            for j in range(1, p - i):
                indices.append((p - i - j, i, j))
    return indices


class ReferenceBasis:
    """
    Equispaced Lagrange basis of degree ``degree`` on the reference simplex.

    Basis function i is the Silvester product attached to ``multi_indices[i]``;
    its node is ``multi_indices[i] / degree`` in barycentric coordinates.
    """

    def __init__(self, dim, degree):
        """
        :param dim: 1 or 2.
        :param degree: Polynomial degree, 1 to 4.
        """
        if dim not in SUPPORTED_DIMS:
            raise ValueError(f"Unsupported dimension {dim}")
        if degree not in SUPPORTED_DEGREES:
            raise ValueError(f"Unsupported Lagrange degree {degree}; expected 1-4")
        self.dim = dim
        self.degree = degree
        self.multi_indices = _multi_indices(dim, degree)
        self.n = len(self.multi_indices)
        assert self.n == math.comb(degree + dim, dim)
        self.nodes = np.array(self.multi_indices, dtype=float) / degree
        self._alpha = np.array(self.multi_indices, dtype=np.int64)
        self._factors = _silvester_factors(degree)

    def _factor_tables(self, bary):
        """s_a, s_a', s_a'' at every barycentric coordinate: arrays (3, p+1, npts, dim+1)."""
        table = np.empty((3, self.degree + 1) + bary.shape)
        for a, polys in enumerate(self._factors):
            for d in range(3):
                table[d, a] = polys[d](bary)
        return table

    def _gather(self, table, derivative):
        # (npts, n, dim+1): factor a=alpha[i,k] evaluated at lambda_k
        k = np.arange(self.dim + 1)
        return table[derivative][self._alpha, :, k].transpose(2, 0, 1)

    def values(self, bary):
        """
        :param bary: (npts, dim+1) barycentric points.
        :return: (npts, n) basis values.
        """
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        table = self._factor_tables(bary)
        return np.prod(self._gather(table, 0), axis=2)

    def grad_bary(self, bary):
        """Derivatives with respect to each barycentric coordinate: (npts, n, dim+1)."""
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        table = self._factor_tables(bary)
        f0, f1 = self._gather(table, 0), self._gather(table, 1)
        out = np.empty_like(f0)
        for k in range(self.dim + 1):
            rest = np.prod(np.delete(f0, k, axis=2), axis=2)
            out[:, :, k] = f1[:, :, k] * rest
        return out

    def hess_bary(self, bary):
        """Second derivatives in barycentric coordinates: (npts, n, dim+1, dim+1)."""
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        table = self._factor_tables(bary)
        f = [self._gather(table, d) for d in range(3)]
        m = self.dim + 1
        out = np.empty(f[0].shape + (m,))
        for k in range(m):
            for l in range(m):
                if k == l:
                    term = f[2][:, :, k]
                    others = [j for j in range(m) if j != k]
                else:
                    term = f[1][:, :, k] * f[1][:, :, l]
                    others = [j for j in range(m) if j not in (k, l)]
                for j in others:
                    term = term * f[0][:, :, j]
                out[:, :, k, l] = term
        return out

    def node_index(self, multi_index):
        return self.multi_indices.index(tuple(multi_index))

    def __repr__(self):
        return f"<ReferenceBasis dim={self.dim} degree={self.degree} n={self.n}>"


@lru_cache(maxsize=None)
def get_basis(dim, degree):
    return ReferenceBasis(dim, degree)


def barycentric_gradients(coords):
    """
    Gradients of the barycentric coordinates of an affine simplex.

    :param coords: (dim+1, dim) or batched (ne, dim+1, dim) vertex coordinates.
    :return: Same leading shape, (dim+1, dim) rows = grad lambda_k.
    :raises ValueError: For a degenerate element.
    """
    coords = np.asarray(coords, dtype=float)
    jac = np.swapaxes(coords[..., 1:, :] - coords[..., :1, :], -1, -2)
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < 1e-300):
        raise ValueError("Degenerate element: zero Jacobian determinant")
    inv = np.linalg.inv(jac)
    grads = np.concatenate([-inv.sum(axis=-2, keepdims=True), inv], axis=-2)
    return grads


def eval_basis(basis, point):
    """
    Values of all local shape functions at a barycentric point.

    :param basis: A ReferenceBasis.
    :param point: Barycentric coordinates summing to 1.
    :return: Vector of n values.
    """
    return basis.values(np.asarray(point, dtype=float)[None, :])[0]


def eval_grad_basis(basis, coords, point):
    """
    Physical gradients of all local shape functions at a barycentric point.

    :param basis: A ReferenceBasis.
    :param coords: (dim+1, dim) element vertex coordinates.
    :param point: Barycentric coordinates.
    :return: (n, dim) gradients.
    """
    grad_lambda = barycentric_gradients(coords)
    gb = basis.grad_bary(np.asarray(point, dtype=float)[None, :])[0]
    return gb @ grad_lambda


def physical_gradients(basis, grad_lambda, bary):
    """
    Batched physical gradients.

    :param grad_lambda: (ne, dim+1, dim) barycentric gradients per element.
    :param bary: (nq, dim+1) quadrature points.
    :return: (ne, nq, n, dim).
    """
    gb = basis.grad_bary(bary)
    return np.einsum("qik,ekd->eqid", gb, grad_lambda)


def physical_laplacians(basis, grad_lambda, bary):
    """Batched Laplacians of the basis functions: (ne, nq, n)."""
    hb = basis.hess_bary(bary)
    metric = np.einsum("ekd,eld->ekl", grad_lambda, grad_lambda)
    return np.einsum("qikl,ekl->eqi", hb, metric)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points in barycentric coordinates; weights sum to the reference measure 1/dim!."""
    dim: int
    order: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return len(self.weights)


def _gauss_legendre_unit(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def get_quadrature(dim, order):
    """
    A rule on the reference simplex exact for polynomials up to ``order``.

    :param dim: 0, 1 or 2 (0 is the single-point rule used for 1D facets).
    :param order: Exactness order, 0 to 8.
    :return: QuadratureRule.
    :raises QuadratureError: For unsupported orders.
    """
    if order < 0 or order > MAX_QUADRATURE_ORDER:
        raise QuadratureError(f"Quadrature order {order} unavailable; supported 0-{MAX_QUADRATURE_ORDER}")
    if dim == 0:
        return QuadratureRule(0, order, np.ones((1, 1)), np.ones(1))
    if dim == 1:
        x, w = _gauss_legendre_unit(max(1, math.ceil((order + 1) / 2)))
        return QuadratureRule(1, order, np.column_stack([1.0 - x, x]), w)
    if dim != 2:
        raise QuadratureError(f"No quadrature for dimension {dim}")
    if order <= 1:
        return QuadratureRule(2, order, np.full((1, 3), 1.0 / 3.0), np.array([0.5]))
    if order == 2:
        points = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return QuadratureRule(2, order, points, np.full(3, 1.0 / 6.0))

    # collapsed Gauss-Jacobi: x = xi (1 - eta), y = eta
    n = math.ceil((order + 1) / 2)
    xi, w_xi = _gauss_legendre_unit(n)
    t, w_t = roots_jacobi(n, 1.0, 0.0)
    eta, w_eta = 0.5 * (t + 1.0), 0.25 * w_t
    X = np.outer(1.0 - eta, xi).ravel()
    Y = np.repeat(eta, n)
    W = np.outer(w_eta, w_xi).ravel()
    return QuadratureRule(2, order, np.column_stack([1.0 - X - Y, X, Y]), W)


def default_quadrature_order(row_degree, col_degree, coefficient_degree=DEFAULT_COEFFICIENT_DEGREE):
    """p_row + p_col + q, capped at the highest available order."""
    order = row_degree + col_degree + coefficient_degree
    if order > MAX_QUADRATURE_ORDER:
        logger.debug("Quadrature order %d capped at %d", order, MAX_QUADRATURE_ORDER)
    return min(order, MAX_QUADRATURE_ORDER)


def facet_vertices(dim, k):
    """Local vertex indices of the facet opposite vertex k."""
    return tuple(v for v in range(dim + 1) if v != k)


def facet_points(dim, order, k):
    """
    Quadrature on facet k mapped into element barycentrics.

    :return: (points (nq, dim+1), weights summing to 1).
    """
    rule = get_quadrature(dim - 1, order)
    points = np.zeros((rule.size, dim + 1))
    for j, v in enumerate(facet_vertices(dim, k)):
        points[:, v] = rule.points[:, j]
    return points, rule.weights * math.factorial(dim - 1)


def sub_simplices(dim, degree):
    """
    Splits the reference simplex into degree**dim sub-simplices on the node lattice.

    :return: List of tuples of local node indices.
    """
    basis = get_basis(dim, degree)
    index = {alpha: i for i, alpha in enumerate(basis.multi_indices)}
    p = degree
    cells = []
    if dim == 1:
        for a in range(p):
            cells.append((index[(p - a, a)], index[(p - a - 1, a + 1)]))
        return cells
    for i, j in ((i, j) for i in range(p) for j in range(p - i)):
        lower = [(p - i - j, i, j), (p - i - j - 1, i + 1, j), (p - i - j - 1, i, j + 1)]
        cells.append(tuple(index[a] for a in lower))
        if i + j < p - 1:
            upper = [(p - i - j - 1, i + 1, j), (p - i - j - 2, i + 1, j + 1), (p - i - j - 1, i, j + 1)]
            cells.append(tuple(index[a] for a in upper))
    return cells
