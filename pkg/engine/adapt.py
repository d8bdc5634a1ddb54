"""
Residual error estimation, marking strategies, mesh adaptation and the
transfer of solutions between successive meshes.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .assembly import FEFunction, FESpace
from .lagrange_basis import (
    get_quadrature, physical_gradients, physical_laplacians,
)
from .refinement_sequence import LEFT, RIGHT, RefinementSequence
from .simplicial_mesh import MAX_LEVEL
from .transform_cache import CHILD_BARYCENTRICS, MatrixCache, compose

logger = logging.getLogger(__name__)

# --- Configuration ---
REFINE = 1
KEEP = 0
COARSEN = -1
STRATEGIES = ("equidistribution", "maximum", "gers")


class TransferError(ValueError):
    """The old and new meshes are not related by refinement and coarsening."""


@dataclass
class EstimateResult:
    """Per-leaf indicators and their p-norm."""
    indicators: np.ndarray
    p: float = 2.0

    @property
    def n(self):
        return len(self.indicators)

    @property
    def eta(self):
        return float(np.sum(self.indicators ** self.p) ** (1.0 / self.p))


@dataclass
class AdaptConfig:
    """Per-component adaptation settings."""
    tol: float = 0.5
    p: float = 2.0
    c0: float = 0.0
    c1: float = 1.0
    theta_r: float = 0.8
    theta_c: float = 0.2
    strategy: str = "equidistribution"
    theta: float = 0.5
    max_iterations: int = 3
    enabled: bool = True
    start_step: int = 0
    max_level: int = MAX_LEVEL
    min_level: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"Unknown marking strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.p < 1:
            raise ValueError(f"p-norm exponent must be >= 1, got {self.p}")
        if not (0.0 < self.theta_c < self.theta_r < 1.0):
            raise ValueError(f"Need 0 < theta_c < theta_r < 1, got {self.theta_c}, {self.theta_r}")
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        if not (0 <= self.min_level <= self.max_level <= MAX_LEVEL):
            raise ValueError(f"Need 0 <= min_level <= max_level <= {MAX_LEVEL}, "
                             f"got {self.min_level}, {self.max_level}")


# --- Estimation ---

def _interior_facets(space):
    """
    Pairs of leaves sharing a facet.

    :return: (elements (F, 2), local facet indices (F, 2)).
    """
    d = space.dim
    vertex_dofs = space.dofs[:, :d + 1]
    keys, owners, locals_ = [], [], []
    for k in range(d + 1):
        keys.append(np.sort(np.delete(vertex_dofs, k, axis=1), axis=1))
        owners.append(np.arange(space.num_elements))
        locals_.append(np.full(space.num_elements, k))
    keys, owners, locals_ = np.vstack(keys), np.concatenate(owners), np.concatenate(locals_)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    shared = counts[inverse] == 2
    order = np.argsort(inverse[shared], kind="stable")
    elements = owners[shared][order].reshape(-1, 2)
    facets = locals_[shared][order].reshape(-1, 2)
    return elements, facets


def _bary_in(space, elements, points):
    origin = space.coords[elements, 0, :]
    lam = np.einsum("fkd,fqd->fqk", space.grad_lambda[elements, 1:, :], points - origin[:, None, :])
    return np.concatenate([1.0 - lam.sum(axis=2, keepdims=True), lam], axis=2)


def _gradients_at(space, coeffs, elements, bary):
    """Gradients of the FE function at per-facet barycentric points (F, nq, d+1) -> (F, nq, dim)."""
    F, nq, _ = bary.shape
    gb = space.basis.grad_bary(bary.reshape(F * nq, -1)).reshape(F, nq, space.basis.n, -1)
    return np.einsum("fi,fqik,fkd->fqd", coeffs[elements], gb, space.grad_lambda[elements])


def jump_indicators(solution):
    """
    Jump residual per leaf: half of h_E^{1/2} ||[du/dn]||_{L2(E)} from each
    interior facet in 2D, half of the absolute derivative jump in 1D.
    """
    space = solution.space
    d = space.dim
    indicators = np.zeros(space.num_elements)
    elements, facets = _interior_facets(space)
    if len(elements) == 0:
        return indicators
    coeffs = solution.local_coefficients()

    rule = get_quadrature(d - 1, max(2 * (space.degree - 1), 1))
    first, second = elements[:, 0], elements[:, 1]
    bary = np.zeros((len(first), rule.size, d + 1))
    for k in range(d + 1):
        on_k = facets[:, 0] == k
        verts = [v for v in range(d + 1) if v != k]
        for j, v in enumerate(verts):
            bary[on_k, :, v] = rule.points[:, j]
    points = np.einsum("fqk,fkd->fqd", bary, space.coords[first])
    bary_other = _bary_in(space, second, points)

    jump = _gradients_at(space, coeffs, first, bary) - _gradients_at(space, coeffs, second, bary_other)
    if d == 1:
        J = np.abs(jump[:, 0, 0])
    else:
        a = space.coords[first, (facets[:, 0] + 1) % 3]
        b = space.coords[first, (facets[:, 0] + 2) % 3]
        tangent = b - a
        h_e = np.linalg.norm(tangent, axis=1)
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / h_e[:, None]
        jn = np.einsum("fqd,fd->fq", jump, normal)
        norm = np.sqrt(h_e * (jn ** 2 @ rule.weights))
        J = np.sqrt(h_e) * norm
    np.add.at(indicators, first, 0.5 * J)
    np.add.at(indicators, second, 0.5 * J)
    return indicators


def element_residuals(solution, residual):
    """
    h_T ||r||_{L2(T)} with ``r = residual(x, u, grad_u, laplace_u)`` at quadrature points.
    """
    space = solution.space
    rule = get_quadrature(space.dim, min(2 * space.degree, 8))
    coeffs = solution.local_coefficients()
    x = np.einsum("qk,ekd->eqd", rule.points, space.coords)
    u = coeffs @ space.basis.values(rule.points).T
    grad = np.einsum("ei,eqid->eqd", coeffs, physical_gradients(space.basis, space.grad_lambda, rule.points))
    lap = np.einsum("ei,eqi->eq", coeffs, physical_laplacians(space.basis, space.grad_lambda, rule.points))
    r = np.broadcast_to(np.asarray(residual(x, u, grad, lap), dtype=float), u.shape)
    dx = rule.weights[None, :] * (space.volumes * math.factorial(space.dim))[:, None]
    return space.element_diameters() * np.sqrt(np.sum(dx * r ** 2, axis=1))


def estimate_residual(solution, residual=None, c0=0.0, c1=1.0, p=2.0):
    """
    Residual estimator eta_T = C0 R_T + C1 sum_E J_E on the solution's own mesh.

    :param solution: FEFunction.
    :param residual: Strong residual callable, needed when c0 > 0.
    :param c0: Element residual weight.
    :param c1: Jump residual weight.
    :param p: Exponent of the global p-norm.
    :return: EstimateResult.
    """
    eta = c1 * jump_indicators(solution) if c1 else np.zeros(solution.space.num_elements)
    if c0:
        if residual is None:
            raise ValueError("Element residual requested (c0 > 0) without a residual function")
        eta = eta + c0 * element_residuals(solution, residual)
    result = EstimateResult(eta, p)
    logger.debug("Estimate for %s: eta=%.4e over %d elements", solution.name, result.eta, result.n)
    return result


# --- Marking ---

def mark_equidistribution(est, tol, theta_r, theta_c, p=None):
    """
    Refine where eta_T > theta_r * eta_eq, coarsen where eta_T <= theta_c * eta_eq,
    with eta_eq = tol / n^(1/p).
    """
    p = est.p if p is None else p
    eta_eq = tol / est.n ** (1.0 / p)
    marks = np.full(est.n, KEEP, dtype=np.int8)
    marks[est.indicators > theta_r * eta_eq] = REFINE
    marks[est.indicators <= theta_c * eta_eq] = COARSEN
    return marks


def mark_maximum(est, theta):
    """Refine where eta_T > theta * max eta_T; no coarsening."""
    marks = np.full(est.n, KEEP, dtype=np.int8)
    marks[est.indicators > theta * est.indicators.max()] = REFINE
    return marks


def mark_gers(est, theta):
    """
    Refine the smallest set S, taken by descending eta_T, with
    sum_S eta_T^p >= (1 - theta)^p sum eta_T^p.
    """
    marks = np.full(est.n, KEEP, dtype=np.int8)
    powered = est.indicators ** est.p
    total = powered.sum()
    if total <= 0.0:
        return marks
    order = np.argsort(-est.indicators, kind="stable")
    target = (1.0 - theta) ** est.p * total
    cumulative = np.cumsum(powered[order])
    count = int(np.searchsorted(cumulative, target * (1.0 - 1e-12))) + 1
    chosen = order[:min(count, est.n)]
    marks[chosen[est.indicators[chosen] > 0]] = REFINE
    return marks


def mark(est, config):
    """Applies the strategy selected in an AdaptConfig."""
    if config.strategy == "equidistribution":
        return mark_equidistribution(est, config.tol, config.theta_r, config.theta_c, config.p)
    if config.strategy == "maximum":
        return mark_maximum(est, config.theta)
    return mark_gers(est, config.theta)


def limit_marks(marks, levels, max_level=MAX_LEVEL, min_level=0):
    """Drops refinement of leaves at or beyond max_level and coarsening of leaves at or below min_level."""
    marks = np.array(marks, dtype=np.int8)
    levels = np.asarray(levels)
    marks[(marks == REFINE) & (levels >= max_level)] = KEEP
    marks[(marks == COARSEN) & (levels <= min_level)] = KEEP
    return marks


def combine_marks(mark_list):
    """Refine if any strategy refines; coarsen only if all coarsen."""
    stacked = np.vstack(mark_list)
    combined = np.full(stacked.shape[1], KEEP, dtype=np.int8)
    combined[np.all(stacked == COARSEN, axis=0)] = COARSEN
    combined[np.any(stacked == REFINE, axis=0)] = REFINE
    return combined


# --- Adaptation ---

def adapt_mesh(space, marks, max_level=MAX_LEVEL):
    """
    Refines and coarsens ``space.mesh`` according to per-leaf ``marks``.

    Coarsening is applied only where every child of the coarsening patch is
    marked and the result stays conforming.

    :param space: FESpace the marks belong to (must be current).
    :param marks: REFINE/KEEP/COARSEN per leaf, in traverse order.
    :param max_level: No bisection of leaves at or beyond this level.
    :return: (new FESpace, refined count, coarsened count).
    """
    space.check_current()
    mesh = space.mesh
    marks = np.asarray(marks)
    if marks.shape != (space.num_elements,):
        raise ValueError(f"Got {marks.shape} marks for {space.num_elements} leaves")
    leaves = mesh.leaf_nodes()

    to_refine = [leaves[e] for e in np.nonzero(marks == REFINE)[0] if leaves[e].level < max_level]
    coarsen_ids = {id(leaves[e]) for e in np.nonzero(marks == COARSEN)[0]}
    coarsen_nodes = [leaves[e] for e in np.nonzero(marks == COARSEN)[0]]

    refined = mesh.refine_marked(to_refine)

    coarsened = 0
    for node in coarsen_nodes:
        if not node.is_leaf or node.parent is None or node.parent.children is None:
            continue
        patch = mesh.coarsening_patch(node)
        if patch is None:
            continue
        if all(id(child) in coarsen_ids for parent in patch for child in parent.children):
            if mesh.coarsen(node):
                coarsened += len(patch)
    if refined or coarsened:
        logger.info("Adapted %s: %d bisections, %d merges, %d leaves",
                    space.name, refined, coarsened, mesh.num_leaves)
    return FESpace(mesh, space.degree, space.name), refined, coarsened


# --- Transfer ---

def _locate_descendant(old_space, path, bary):
    """Walks from ``path`` down to the old leaf containing the point with barycentrics ``bary``."""
    macro_index, bits, length = path
    dim = old_space.dim
    inverses = {s: np.linalg.inv(np.array(CHILD_BARYCENTRICS[dim][s])) for s in (LEFT, RIGHT)}
    while (macro_index, bits, length) not in old_space.element_index:
        if length >= MAX_LEVEL:
            raise TransferError(f"No old leaf below element {path}")
        step = LEFT if bary[0] >= bary[1] else RIGHT
        bary = np.clip(bary @ inverses[step], 0.0, None)
        bary = bary / bary.sum()
        bits |= step << length
        length += 1
    return old_space.element_index[(macro_index, bits, length)], bary


def transfer_matrix(old_space, new_space, cache=None):
    """
    Sparse operator mapping old coefficients to new ones.

    New leaves that are equal to or below an old leaf take C(seq)^T of the
    old local coefficients; new leaves that replaced several old leaves take
    old point values at their nodes.

    :return: csr_matrix (new dofs, old dofs).
    """
    if old_space.degree != new_space.degree or old_space.mesh.macro is not new_space.mesh.macro:
        raise TransferError("Spaces differ in degree or macro mesh")
    cache = cache if cache is not None else MatrixCache()
    basis = new_space.basis
    n = basis.n
    assigned = np.zeros(new_space.num_dofs, dtype=bool)
    rows, cols, vals = [], [], []

    for e, (macro_index, bits, length) in enumerate(new_space.paths):
        targets = new_space.dofs[e]
        fresh = ~assigned[targets]
        if not np.any(fresh):
            continue
        old = None
        for prefix in range(length, -1, -1):
            key = (macro_index, bits & ((1 << prefix) - 1), prefix)
            if key in old_space.element_index:
                old = old_space.element_index[key]
                break
        if old is not None:
            seq = RefinementSequence(bits >> prefix, length - prefix)
            C = compose(cache, new_space.dim, new_space.degree, seq)
            local = C.T
            for j in np.nonzero(fresh)[0]:
                rows.extend([targets[j]] * n)
                cols.extend(old_space.dofs[old])
                vals.extend(local[j])
        else:
            for j in np.nonzero(fresh)[0]:
                leaf, bary = _locate_descendant(old_space, (macro_index, bits, length), basis.nodes[j])
                rows.extend([targets[j]] * n)
                cols.extend(old_space.dofs[leaf])
                vals.extend(old_space.basis.values(bary[None, :])[0])
        assigned[targets] = True

    matrix = sparse.coo_matrix((vals, (rows, cols)), shape=(new_space.num_dofs, old_space.num_dofs)).tocsr()
    matrix.eliminate_zeros()
    return matrix


def transfer_solution(old, new_space, conserve_mass=False, cache=None):
    """
    Moves an FEFunction onto an adapted space of the same mesh family.

    :param old: FEFunction on the previous space.
    :param new_space: FESpace after refine/coarsen steps.
    :param conserve_mass: Add the constant restoring the integral of ``old``.
    :return: FEFunction on ``new_space``.
    """
    if old.space is new_space:
        return old.copy()
    values = transfer_matrix(old.space, new_space, cache) @ old.values
    result = FEFunction(new_space, values, old.name)
    if conserve_mass:
        domain = new_space.lumped_mass().sum()
        shift = (old.integrate() - result.integrate()) / domain
        result.values += shift
    return result
