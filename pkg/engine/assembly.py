"""
Finite element spaces, functions and the (multi-mesh) assembler.

Element matrices are always integrated on the small element of a virtual
pair, with both bases taken as the small element's local basis in physical
coordinates. The side living on the large element is then corrected with
its transformation matrix: C.M for the test side, M.C^T for the trial side.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse

from .lagrange_basis import (
    barycentric_gradients, default_quadrature_order, get_basis, get_quadrature,
    physical_gradients,
)
from .multimesh_traverse import MESH_A, MESH_B, iter_virtual_pairs
from .transform_cache import MatrixCache, compose, gradient_matrix

logger = logging.getLogger(__name__)

# --- Configuration ---
ZERO = "zero"
FIRST = "first"
SECOND = "second"
TEST = "test"
TRIAL = "trial"
LOCATE_TOLERANCE = 1e-10


class AssemblyError(ValueError):
    """Invalid assembly request (stale space, third-mesh coefficient, unknown marker...)."""


def _dof_key(vertices, alpha):
    return tuple(sorted((v, a) for v, a in zip(vertices, alpha) if a > 0))


class FESpace:
    """
    Continuous Lagrange space of one degree on the leaves of one mesh.

    The space is a snapshot: it records the mesh revision it was built at
    and refuses to take part in assembly once the mesh has changed.
    """

    def __init__(self, mesh, degree, name=None):
        """
        :param mesh: The adapted Mesh.
        :param degree: Lagrange degree, 1 to 4.
        :param name: Optional component name used in logs and output.
        """
        self.mesh = mesh
        self.degree = degree
        self.name = name or f"P{degree}"
        self.dim = mesh.dim
        self.basis = get_basis(mesh.dim, degree)
        self.revision = mesh.revision
        self._cache = {}

        infos = list(mesh.iter_elements())
        self.num_elements = len(infos)
        self.coords = np.array([info.vertex_coords for info in infos])
        self.volumes = np.array([info.volume for info in infos])
        self.boundary = np.array([info.boundary for info in infos], dtype=np.int64)
        self.levels = np.array([info.level for info in infos], dtype=np.int64)
        self.paths = [info.path for info in infos]
        self.element_index = {path: e for e, path in enumerate(self.paths)}
        self.grad_lambda = barycentric_gradients(self.coords)

        numbering = {}
        dofs = np.empty((self.num_elements, self.basis.n), dtype=np.int64)
        for e, info in enumerate(infos):
            for i, alpha in enumerate(self.basis.multi_indices):
                dofs[e, i] = numbering.setdefault(_dof_key(info.vertices, alpha), len(numbering))
        self.dofs = dofs
        self.num_dofs = len(numbering)

        self.dof_coords = np.empty((self.num_dofs, self.dim))
        nodes_physical = np.einsum("ik,ekd->eid", self.basis.nodes, self.coords)
        self.dof_coords[dofs.ravel()] = nodes_physical.reshape(-1, self.dim)

        self._boundary_dofs = {}
        alpha = np.array(self.basis.multi_indices)
        for e, k in zip(*np.nonzero(self.boundary > 0)):
            marker = int(self.boundary[e, k])
            on_facet = dofs[e, alpha[:, k] == 0]
            self._boundary_dofs.setdefault(marker, set()).update(int(d) for d in on_facet)
        logger.debug("Space %s: %d elements, %d dofs", self.name, self.num_elements, self.num_dofs)

    @property
    def is_current(self):
        return self.mesh.revision == self.revision

    def check_current(self):
        if not self.is_current:
            raise AssemblyError(f"Space {self.name} is stale: built at mesh revision {self.revision}, "
                                f"mesh is at {self.mesh.revision}")

    @property
    def markers(self):
        return sorted(self._boundary_dofs)

    def boundary_dofs(self, markers=None):
        """
        Sorted DOFs on facets carrying any of ``markers`` (all markers when None).

        :raises AssemblyError: For a marker the macro mesh does not carry.
        """
        if markers is None:
            markers = self.markers
        elif isinstance(markers, int):
            markers = [markers]
        selected = set()
        for marker in markers:
            if marker not in self.mesh.macro.markers:
                raise AssemblyError(f"Unknown boundary marker {marker}; mesh has {self.mesh.macro.markers}")
            selected |= self._boundary_dofs.get(marker, set())
        return np.array(sorted(selected), dtype=np.int64)

    def interpolate(self, fn, name=None):
        """
        Nodal interpolant of ``fn``.

        :param fn: Constant, or callable taking (N, dim) points.
        :return: FEFunction.
        """
        if callable(fn):
            values = np.broadcast_to(np.asarray(fn(self.dof_coords), dtype=float), (self.num_dofs,))
        else:
            values = np.full(self.num_dofs, float(fn))
        return FEFunction(self, np.array(values, dtype=float), name)

    def zeros(self, name=None):
        return FEFunction(self, np.zeros(self.num_dofs), name)

    def lumped_mass(self):
        """Integral of every basis function."""
        if "lumped" not in self._cache:
            self._cache["lumped"] = Assembler().assemble_vector(self, [LinearTerm(ZERO, 1.0)])
        return self._cache["lumped"]

    def mass_matrix(self):
        if "mass" not in self._cache:
            self._cache["mass"] = Assembler().assemble_block(self, self, [OperatorTerm(ZERO)])
        return self._cache["mass"]

    def stiffness_matrix(self):
        if "stiffness" not in self._cache:
            self._cache["stiffness"] = Assembler().assemble_block(self, self, [OperatorTerm(SECOND)])
        return self._cache["stiffness"]

    def locate(self, points):
        """
        Leaf element and barycentric coordinates of each point.

        :param points: (N, dim) points.
        :return: (element indices (N,), bary (N, dim+1)); index -1 if outside.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        elements = np.full(len(points), -1, dtype=np.int64)
        bary = np.zeros((len(points), self.dim + 1))
        origin = self.coords[:, 0, :]
        for i, x in enumerate(points):
            lam = np.einsum("ekd,ed->ek", self.grad_lambda[:, 1:, :], x - origin)
            lam = np.column_stack([1.0 - lam.sum(axis=1), lam])
            inside = np.nonzero(lam.min(axis=1) >= -LOCATE_TOLERANCE)[0]
            if len(inside):
                e = inside[0]
                elements[i], bary[i] = e, lam[e]
        return elements, bary

    def element_diameters(self):
        c = self.coords
        pairs = [(i, j) for i in range(self.dim + 1) for j in range(i + 1, self.dim + 1)]
        return np.max([np.linalg.norm(c[:, i] - c[:, j], axis=1) for i, j in pairs], axis=0)

    def __repr__(self):
        return f"<FESpace {self.name} degree={self.degree} dofs={self.num_dofs} elements={self.num_elements}>"


class FEFunction:
    """Coefficient vector over the DOFs of an FESpace."""

    def __init__(self, space, values=None, name=None):
        self.space = space
        self.name = name or space.name
        if values is None:
            values = np.zeros(space.num_dofs)
        values = np.asarray(values, dtype=float)
        if values.shape != (space.num_dofs,):
            raise AssemblyError(f"Function {self.name} has {values.shape} values for {space.num_dofs} dofs")
        self.values = values

    def copy(self, name=None):
        return FEFunction(self.space, self.values.copy(), name or self.name)

    def local_coefficients(self):
        return self.values[self.space.dofs]

    def evaluate(self, points):
        """Point values; NaN outside the domain."""
        elements, bary = self.space.locate(points)
        out = np.full(len(elements), np.nan)
        found = elements >= 0
        if np.any(found):
            coeffs = self.values[self.space.dofs[elements[found]]]
            out[found] = np.einsum("pi,pi->p", coeffs, self.space.basis.values(bary[found]))
        return out

    def gradient(self, points):
        """Point gradients (N, dim); NaN outside the domain."""
        elements, bary = self.space.locate(points)
        out = np.full((len(elements), self.space.dim), np.nan)
        for i in np.nonzero(elements >= 0)[0]:
            e = elements[i]
            gb = self.space.basis.grad_bary(bary[i][None, :])[0] @ self.space.grad_lambda[e]
            out[i] = self.values[self.space.dofs[e]] @ gb
        return out

    def integrate(self):
        return float(self.space.lumped_mass() @ self.values)

    def l2_norm(self):
        return math.sqrt(max(float(self.values @ (self.space.mass_matrix() @ self.values)), 0.0))

    def __repr__(self):
        return f"<FEFunction {self.name} on {self.space!r}>"


@dataclass
class FieldSample:
    """Values and gradients of a field at quadrature points: (P, nq) and (P, nq, dim)."""
    value: np.ndarray
    grad: np.ndarray


class FieldCoefficient:
    """
    Coefficient computed from FE fields: ``fn(x, *samples)`` with one
    FieldSample per field, evaluated at the quadrature points of the small element.
    """

    def __init__(self, fn, *fields):
        self.fn = fn
        self.fields = tuple(fields)


@dataclass
class OperatorTerm:
    """
    A bilinear term.

    zero:   int psi_a c phi_b
    first:  int psi_a (b . grad phi_b)   (derivative on the trial side), or
            int (b . grad psi_a) phi_b   with ``derivative_on='test'``
    second: int grad psi_a . A grad phi_b

    Coefficients are constants, callables of the (P, nq, dim) physical
    points, FEFunctions or FieldCoefficients. For second-order terms a 2D
    constant or a 4D callable result is read as a matrix, anything else as a scalar.
    """
    kind: str
    coefficient: Any = None
    derivative_on: str = TRIAL
    coefficient_degree: int = 1

    def __post_init__(self):
        if self.kind not in (ZERO, FIRST, SECOND):
            raise AssemblyError(f"Unknown term kind {self.kind!r}")
        if self.derivative_on not in (TEST, TRIAL):
            raise AssemblyError(f"derivative_on must be 'test' or 'trial', got {self.derivative_on!r}")


@dataclass
class LinearTerm:
    """zero: int f psi_a;  first: int b . grad psi_a."""
    kind: str
    coefficient: Any = 1.0
    coefficient_degree: int = 1

    def __post_init__(self):
        if self.kind not in (ZERO, FIRST):
            raise AssemblyError(f"Unknown linear term kind {self.kind!r}")


def _term_fields(coefficient):
    if isinstance(coefficient, FEFunction):
        return [coefficient]
    if isinstance(coefficient, FieldCoefficient):
        return list(coefficient.fields)
    return []


class PairBatch:
    """
    The virtual pairs of a row and a column space, stored as arrays.

    Side 'A' is the row (test) mesh and side 'B' the column (trial/data)
    mesh. With a single mesh every pair is an equal pair.
    """

    def __init__(self, row_space, col_space, cache):
        self.row_space = row_space
        self.col_space = col_space
        self.cache = cache
        self.single = row_space.mesh is col_space.mesh
        self._transforms = {}
        if self.single:
            n = row_space.num_elements
            self.elements = {MESH_A: np.arange(n), MESH_B: np.arange(n)}
            self.sequences = {MESH_A: [], MESH_B: []}
            self.coords = row_space.coords
            self.volumes = row_space.volumes
            self.grad_lambda = row_space.grad_lambda
            return

        rows, cols, coords, volumes = [], [], [], []
        seq_a, seq_b = [], []
        for p, pair in enumerate(iter_virtual_pairs(row_space.mesh, col_space.mesh)):
            rows.append(row_space.element_index[pair.element_on(MESH_A).path])
            cols.append(col_space.element_index[pair.element_on(MESH_B).path])
            coords.append(pair.small.vertex_coords)
            volumes.append(pair.small.volume)
            if pair.fine_mesh == MESH_B:
                seq_a.append((p, pair.sequence))
            elif pair.fine_mesh == MESH_A:
                seq_b.append((p, pair.sequence))
        self.elements = {MESH_A: np.array(rows, dtype=np.int64), MESH_B: np.array(cols, dtype=np.int64)}
        self.sequences = {MESH_A: seq_a, MESH_B: seq_b}
        self.coords = np.array(coords)
        self.volumes = np.array(volumes)
        self.grad_lambda = barycentric_gradients(self.coords)

    @property
    def size(self):
        return len(self.volumes)

    def space_of(self, side):
        return self.row_space if side == MESH_A else self.col_space

    def side_of(self, fe_space):
        """Side whose mesh carries ``fe_space``."""
        for side in (MESH_A, MESH_B):
            own = self.space_of(side)
            if fe_space.mesh is own.mesh:
                if fe_space.revision != own.revision:
                    raise AssemblyError(f"Field space {fe_space.name} is stale")
                return side
        raise AssemblyError(f"Coefficient on space {fe_space.name} lives on a third mesh")

    def transforms(self, side, degree, gradients=False):
        """
        (pair indices, stacked C) for the pairs whose ``side`` element is the large one.
        """
        key = (side, degree, gradients)
        if key not in self._transforms:
            entries = self.sequences[side]
            if not entries:
                self._transforms[key] = (np.zeros(0, dtype=np.int64), None)
            else:
                build = gradient_matrix if gradients else compose
                index = np.array([p for p, _ in entries], dtype=np.int64)
                stack = np.array([build(self.cache, self.row_space.dim, degree, seq) for _, seq in entries])
                self._transforms[key] = (index, stack)
        return self._transforms[key]

    def field_sample(self, fn, bary, gradients=True):
        """Values (P, nq) and gradients (P, nq, dim) of FEFunction ``fn`` on the small elements."""
        side = self.side_of(fn.space)
        basis = fn.space.basis
        coeffs = fn.values[fn.space.dofs[self.elements[side]]]
        index, stack = self.transforms(side, basis.degree)
        if len(index):
            coeffs[index] = np.einsum("pij,pi->pj", stack, coeffs[index])
        values = coeffs @ basis.values(bary).T
        grads = None
        if gradients:
            grads = np.einsum("pi,pqid->pqd", coeffs, physical_gradients(basis, self.grad_lambda, bary))
        return FieldSample(values, grads)


class Assembler:
    """
    Assembles blocks and load vectors for single- and multi-mesh spaces.

    The transformation-matrix cache is shared by everything this assembler builds.
    """

    def __init__(self, cache=None):
        self.cache = cache if cache is not None else MatrixCache()

    # --- Pairs ---

    def pairs(self, row_space, col_space):
        row_space.check_current()
        col_space.check_current()
        key = ("pairs", id(col_space))
        cached = row_space._cache.get(key)
        if cached is None or cached[0] is not col_space:
            cached = (col_space, PairBatch(row_space, col_space, self.cache))
            row_space._cache[key] = cached
        return cached[1]

    # --- Element level ---

    def _coefficient(self, coefficient, batch, bary, x):
        if coefficient is None:
            return np.asarray(1.0)
        if isinstance(coefficient, FEFunction):
            return batch.field_sample(coefficient, bary, gradients=False).value
        if isinstance(coefficient, FieldCoefficient):
            samples = [batch.field_sample(f, bary) for f in coefficient.fields]
            return np.asarray(coefficient.fn(x, *samples), dtype=float)
        if callable(coefficient):
            return np.asarray(coefficient(x), dtype=float)
        return np.asarray(coefficient, dtype=float)

    def _term_matrices(self, term, batch, row_basis, col_basis):
        order = default_quadrature_order(row_basis.degree, col_basis.degree, term.coefficient_degree)
        rule = get_quadrature(batch.coords.shape[2], order)
        P, nq, dim = batch.size, rule.size, batch.coords.shape[2]
        x = np.einsum("qk,pkd->pqd", rule.points, batch.coords)
        dx = rule.weights[None, :] * (batch.volumes * math.factorial(dim))[:, None]
        c = self._coefficient(term.coefficient, batch, rule.points, x)

        if term.kind == ZERO:
            c = np.broadcast_to(c, (P, nq))
            return np.einsum("pq,qa,qb->pab", dx * c, row_basis.values(rule.points),
                             col_basis.values(rule.points))
        if term.kind == FIRST:
            b = np.broadcast_to(c, (P, nq, dim))
            if term.derivative_on == TRIAL:
                grads = physical_gradients(col_basis, batch.grad_lambda, rule.points)
                return np.einsum("pq,qa,pqd,pqbd->pab", dx, row_basis.values(rule.points), b, grads)
            grads = physical_gradients(row_basis, batch.grad_lambda, rule.points)
            return np.einsum("pq,pqad,pqd,qb->pab", dx, grads, b, col_basis.values(rule.points))

        row_grads = physical_gradients(row_basis, batch.grad_lambda, rule.points)
        col_grads = row_grads if col_basis is row_basis else physical_gradients(
            col_basis, batch.grad_lambda, rule.points)
        constant = not callable(term.coefficient) and not _term_fields(term.coefficient)
        is_matrix = (constant and c.ndim == 2) or c.ndim == 4
        if is_matrix:
            A = np.broadcast_to(c, (P, nq, dim, dim))
            return np.einsum("pq,pqad,pqde,pqbe->pab", dx, row_grads, A, col_grads)
        c = np.broadcast_to(c, (P, nq))
        return np.einsum("pq,pqad,pqbd->pab", dx * c, row_grads, col_grads)

    def element_matrix(self, term, small, row_basis, col_basis):
        """
        Element matrix of ``term`` on a single element, both bases local to it.

        :param term: OperatorTerm with a constant or callable coefficient.
        :param small: ElementInfo of the element.
        :return: (n_row, n_col) array.
        """
        if _term_fields(term.coefficient):
            raise AssemblyError("element_matrix takes analytic coefficients only")
        batch = _SingleElement(small.vertex_coords, small.volume)
        return self._term_matrices(term, batch, row_basis, col_basis)[0]

    # --- Global level ---

    def assemble_block(self, row_space, col_space, terms):
        """
        Sparse block for the sum of ``terms`` with rows on ``row_space``
        and columns on ``col_space``.

        :return: scipy.sparse.csr_matrix of shape (row dofs, col dofs).
        """
        batch = self.pairs(row_space, col_space)
        for term in terms:
            for f in _term_fields(term.coefficient):
                batch.side_of(f.space)
        local = np.zeros((batch.size, row_space.basis.n, col_space.basis.n))
        for term in terms:
            local += self._term_matrices(term, batch, row_space.basis, col_space.basis)

        index, stack = batch.transforms(MESH_A, row_space.degree)
        if len(index):
            local[index] = transform_element_matrix(local[index], stack, TEST)
        index, stack = batch.transforms(MESH_B, col_space.degree)
        if len(index):
            local[index] = transform_element_matrix(local[index], stack, TRIAL)

        rows = row_space.dofs[batch.elements[MESH_A]]
        cols = col_space.dofs[batch.elements[MESH_B]]
        R = np.broadcast_to(rows[:, :, None], local.shape).ravel()
        C = np.broadcast_to(cols[:, None, :], local.shape).ravel()
        block = sparse.coo_matrix((local.ravel(), (R, C)),
                                  shape=(row_space.num_dofs, col_space.num_dofs)).tocsr()
        if not np.all(np.isfinite(block.data)):
            raise AssemblyError(f"Non-finite entries in block ({row_space.name}, {col_space.name})")
        return block

    def assemble_vector(self, test_space, terms):
        """
        Load vector of ``terms`` on ``test_space``. FE data may live on the
        test mesh or on one other mesh.
        """
        data_spaces = [f.space for term in terms for f in _term_fields(term.coefficient)
                       if f.space.mesh is not test_space.mesh]
        if len({id(s.mesh) for s in data_spaces}) > 1:
            raise AssemblyError("Load vector data spread over more than one foreign mesh")
        partner = data_spaces[0] if data_spaces else test_space
        batch = self.pairs(test_space, partner)

        basis = test_space.basis
        local = np.zeros((batch.size, basis.n))
        dim = test_space.dim
        for term in terms:
            order = default_quadrature_order(basis.degree, 0, term.coefficient_degree)
            rule = get_quadrature(dim, order)
            x = np.einsum("qk,pkd->pqd", rule.points, batch.coords)
            dx = rule.weights[None, :] * (batch.volumes * math.factorial(dim))[:, None]
            c = self._coefficient(term.coefficient, batch, rule.points, x)
            if term.kind == ZERO:
                c = np.broadcast_to(c, dx.shape)
                local += np.einsum("pq,qa->pa", dx * c, basis.values(rule.points))
            else:
                b = np.broadcast_to(c, dx.shape + (dim,))
                grads = physical_gradients(basis, batch.grad_lambda, rule.points)
                local += np.einsum("pq,pqd,pqad->pa", dx, b, grads)

        index, stack = batch.transforms(MESH_A, basis.degree)
        if len(index):
            local[index] = np.einsum("pij,pj->pi", stack, local[index])
        rows = test_space.dofs[batch.elements[MESH_A]]
        return np.bincount(rows.ravel(), weights=local.ravel(), minlength=test_space.num_dofs)


class _SingleElement:
    """Minimal batch of one element for element_matrix."""

    def __init__(self, coords, volume):
        self.coords = np.asarray(coords, dtype=float)[None]
        self.volumes = np.array([volume], dtype=float)
        self.grad_lambda = barycentric_gradients(self.coords)

    @property
    def size(self):
        return 1


def transform_element_matrix(M, C, side):
    """
    Moves one side of an element matrix from the small to the large element.

    :param M: (n, m) or batched (P, n, m) element matrix.
    :param C: Matching transformation matrix (or stack).
    :param side: 'test' -> C.M, 'trial' -> M.C^T.
    """
    if side == TEST:
        return np.matmul(C, M)
    if side == TRIAL:
        return np.matmul(M, np.swapaxes(C, -1, -2))
    raise AssemblyError(f"Unknown side {side!r}")


def assemble_block(row_space, col_space, terms, assembler=None):
    return (assembler or Assembler()).assemble_block(row_space, col_space, terms)


def assemble_vector(test_space, terms, assembler=None):
    return (assembler or Assembler()).assemble_vector(test_space, terms)


def element_matrix(term, small, row_basis, col_basis):
    return Assembler().element_matrix(term, small, row_basis, col_basis)


@dataclass
class BlockSystem:
    """
    Sparse block system over named components.

    Dirichlet constraints are collected per component and applied when the
    system is assembled; a later constraint on a DOF overrides an earlier one.
    """
    spaces: dict
    blocks: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    constraints: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = list(self.spaces)
        for name, space in self.spaces.items():
            self.rhs.setdefault(name, np.zeros(space.num_dofs))
            self.constraints.setdefault(name, {})

    def add_block(self, row, col, matrix):
        shape = (self.spaces[row].num_dofs, self.spaces[col].num_dofs)
        if matrix.shape != shape:
            raise AssemblyError(f"Block ({row}, {col}) has shape {matrix.shape}, expected {shape}")
        if (row, col) in self.blocks:
            self.blocks[(row, col)] = self.blocks[(row, col)] + matrix
        else:
            self.blocks[(row, col)] = matrix.tocsr()

    def add_rhs(self, name, vector):
        self.rhs[name] = self.rhs[name] + vector

    def apply_dirichlet(self, component, markers, value):
        """
        Constrains the DOFs of ``component`` on ``markers`` to ``value``.

        :param component: Component name.
        :param markers: Marker or list of markers.
        :param value: Constant or callable of (N, dim) points.
        :raises AssemblyError: For an unknown marker.
        """
        space = self.spaces[component]
        dofs = space.boundary_dofs(markers)
        if callable(value):
            values = np.broadcast_to(np.asarray(value(space.dof_coords[dofs]), dtype=float), dofs.shape)
        else:
            values = np.full(len(dofs), float(value))
        self.constraints[component].update(zip(dofs.tolist(), values.tolist()))

    def pin(self, component, dof, value=0.0):
        """Fixes a single DOF, e.g. to remove the pressure null space."""
        self.constraints[component][int(dof)] = float(value)

    @property
    def offsets(self):
        sizes = [self.spaces[n].num_dofs for n in self.names]
        return np.concatenate([[0], np.cumsum(sizes)])

    def assemble(self):
        """
        :return: (A, b) with constraints applied; constrained columns are
                 moved to the right-hand side so symmetric blocks stay symmetric.
        """
        grid = [[self.blocks.get((r, c)) for c in self.names] for r in self.names]
        for i, name in enumerate(self.names):
            if grid[i][i] is None:
                n = self.spaces[name].num_dofs
                grid[i][i] = sparse.csr_matrix((n, n))
        A = sparse.bmat(grid, format="csr")
        b = np.concatenate([self.rhs[n] for n in self.names])

        offsets = self.offsets
        constrained = np.zeros(A.shape[0], dtype=bool)
        g = np.zeros(A.shape[0])
        for i, name in enumerate(self.names):
            for dof, value in self.constraints[name].items():
                constrained[offsets[i] + dof] = True
                g[offsets[i] + dof] = value
        if np.any(constrained):
            b = b - A @ g
            keep = sparse.diags((~constrained).astype(float))
            A = (keep @ A @ keep + sparse.diags(constrained.astype(float))).tocsr()
            A.eliminate_zeros()
            b[constrained] = g[constrained]
        return A, b

    def nnz(self):
        return int(self.assemble()[0].nnz)

    def split(self, x):
        """Solution vector -> dict of FEFunctions."""
        offsets = self.offsets
        return {name: FEFunction(self.spaces[name], x[offsets[i]:offsets[i + 1]].copy(), name)
                for i, name in enumerate(self.names)}

    def initial_guess(self, functions):
        return np.concatenate([functions[n].values if n in functions else np.zeros(self.spaces[n].num_dofs)
                               for n in self.names])
