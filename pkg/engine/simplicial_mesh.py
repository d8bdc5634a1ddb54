"""
Macro meshes, binary refinement forests and the element traverse.

Only macro elements carry geometry. Tree nodes below the macro level keep
their vertex indices and children; coordinates, volumes and boundary
markers are rebuilt top-down by the traverse.

Bisection convention, shared with transform_cache: an element
(v0, v1, ..) is always bisected at its refinement edge (v0, v1) with
midpoint m. The LEFT child contains v0 and the RIGHT child contains v1:

    1D:  left = (v0, m)          right = (m, v1)
    2D:  left = (v2, v0, m)      right = (v1, v2, m)

so the newest vertex is last and every child's refinement edge is the edge
opposite its newest vertex. Both children keep the parent's orientation.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .refinement_sequence import (
    EMPTY_SEQUENCE, LEFT, MAX_SEQUENCE_LENGTH, RIGHT, RefinementSequence,
)

logger = logging.getLogger(__name__)

# --- Configuration ---
MAX_LEVEL = MAX_SEQUENCE_LENGTH
PROPAGATION_DEPTH_LIMIT = 256
DEFAULT_BOUNDARY_MARKER = 1
SECTIONS = ("DIM", "VERTICES", "ELEMENTS", "NEIGHBOURS", "BOUNDARY", "REFINEMENT_EDGES")
LEAF = "leaf"


class MeshError(ValueError):
    """Invalid macro mesh or an impossible mesh operation."""


class MacroParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DepthLimitError(MeshError):
    """Raised when a bisection would push a tree beyond MAX_LEVEL."""


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def _facet_keys(vertices):
    return [tuple(sorted(vertices[:k] + vertices[k + 1:])) for k in range(len(vertices))]


def simplex_volume(coords):
    """
    Signed volume of a line segment or triangle.

    :param coords: (dim+1, dim) vertex coordinates.
    :return: Signed measure (positive for the stored orientation).
    """
    coords = np.asarray(coords, dtype=float)
    dim = coords.shape[1]
    jac = (coords[1:] - coords[0]).T
    return float(np.linalg.det(jac)) / math.factorial(dim)


def child_boundary(boundary, step):
    """
    Facet markers of a child, derived from the parent's markers.

    Facet k of an element is the facet opposite its local vertex k;
    the facet created by the bisection is interior (marker 0).
    """
    if len(boundary) == 2:
        b0, b1 = boundary
        return (0, b1) if step == LEFT else (b0, 0)
    b0, b1, b2 = boundary
    return (b2, 0, b1) if step == LEFT else (0, b2, b0)


def child_coordinates(coords, step):
    """
    Vertex coordinates of a child under the bisection convention.

    :param coords: (dim+1, dim) parent coordinates.
    :param step: LEFT or RIGHT.
    :return: (dim+1, dim) child coordinates.
    """
    mid = 0.5 * (coords[0] + coords[1])
    if len(coords) == 2:
        return np.array([coords[0], mid]) if step == LEFT else np.array([mid, coords[1]])
    if step == LEFT:
        return np.array([coords[2], coords[0], mid])
    return np.array([coords[1], coords[2], mid])


def child_vertices(vertices, midpoint, step):
    if len(vertices) == 2:
        return (vertices[0], midpoint) if step == LEFT else (midpoint, vertices[1])
    if step == LEFT:
        return (vertices[2], vertices[0], midpoint)
    return (vertices[1], vertices[2], midpoint)


@dataclass(eq=False)
class MacroMesh:
    """
    The coarsest conforming triangulation shared by every adapted mesh.

    Vertex order of each element is normalized at construction so that its
    refinement edge is (v0, v1). ``neighbours[e, k]`` is the element across
    the facet opposite local vertex k (-1 on the boundary) and
    ``boundary[e, k]`` its marker (0 on interior facets).
    """
    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    neighbours: np.ndarray
    boundary: np.ndarray

    @classmethod
    def from_arrays(cls, dim, vertices, elements, neighbours=None, boundary=None,
                    refinement_edges=None, check_compatibility=True):
        """
        Builds and validates a macro mesh.

        :param dim: Spatial dimension, 1 or 2.
        :param vertices: (nv, dim) coordinates.
        :param elements: (ne, dim+1) vertex indices.
        :param neighbours: Optional (ne, dim+1) neighbour indices; derived when omitted.
        :param boundary: Optional (ne, dim+1) facet markers; boundary facets default to 1.
        :param refinement_edges: Optional per-element local index of the vertex opposite
                                 the refinement edge (2D); longest edge when omitted.
        :param check_compatibility: Run the bounded propagation dry-run (2D).
        :return: A validated MacroMesh.
        """
        if dim not in (1, 2):
            raise MeshError(f"Unsupported dimension {dim}; only 1 and 2 are available")
        vertices = np.asarray(vertices, dtype=float).reshape(-1, dim)
        elements = np.asarray(elements, dtype=np.int64).reshape(-1, dim + 1)
        if elements.size == 0:
            raise MeshError("Macro mesh has no elements")
        if elements.min() < 0 or elements.max() >= len(vertices):
            raise MeshError("Element vertex index out of range")

        facet_owners = {}
        for e, element in enumerate(elements):
            for k, key in enumerate(_facet_keys(tuple(int(v) for v in element))):
                facet_owners.setdefault(key, []).append((e, k))
        for key, owners in facet_owners.items():
            if len(owners) > 2:
                raise MeshError(f"Facet {key} is shared by {len(owners)} elements")

        derived = np.full(elements.shape, -1, dtype=np.int64)
        for owners in facet_owners.values():
            if len(owners) == 2:
                (e0, k0), (e1, k1) = owners
                derived[e0, k0] = e1
                derived[e1, k1] = e0

        if neighbours is None:
            neighbours = derived
        else:
            neighbours = np.asarray(neighbours, dtype=np.int64).reshape(elements.shape)
            cls._check_reciprocity(elements, neighbours, derived)

        if boundary is None:
            boundary = np.where(neighbours < 0, DEFAULT_BOUNDARY_MARKER, 0)
        boundary = np.asarray(boundary, dtype=np.int64).reshape(elements.shape)
        for e, k in zip(*np.nonzero(neighbours < 0)):
            if boundary[e, k] <= 0:
                raise MeshError(f"Boundary facet {k} of element {e} carries no boundary marker")
        for e, k in zip(*np.nonzero(neighbours >= 0)):
            if boundary[e, k] != 0:
                raise MeshError(f"Interior facet {k} of element {e} carries marker {boundary[e, k]}")

        elements, neighbours, boundary = elements.copy(), neighbours.copy(), boundary.copy()
        if dim == 2:
            if refinement_edges is None:
                refinement_edges = [cls._longest_edge(vertices[el]) for el in elements]
            for e, r in enumerate(refinement_edges):
                r = int(r)
                if r not in (0, 1, 2):
                    raise MeshError(f"Refinement edge index {r} of element {e} out of range")
                perm = [(r + 1) % 3, (r + 2) % 3, r]
                elements[e] = elements[e, perm]
                neighbours[e] = neighbours[e, perm]
                boundary[e] = boundary[e, perm]

        macro = cls(dim, vertices, elements, neighbours, boundary)
        for e in range(len(elements)):
            vol = macro.element_volume(e)
            if vol <= 0.0:
                raise MeshError(f"Element {e} has non-positive volume {vol:g}")
        if dim == 2 and check_compatibility:
            check_refinement_compatibility(macro)
        return macro

    @staticmethod
    def _longest_edge(coords):
        lengths = [np.linalg.norm(coords[(k + 1) % 3] - coords[(k + 2) % 3]) for k in range(3)]
        return int(np.argmax(lengths))

    @staticmethod
    def _check_reciprocity(elements, neighbours, derived):
        for e in range(len(elements)):
            for k in range(elements.shape[1]):
                listed, actual = int(neighbours[e, k]), int(derived[e, k])
                if listed == actual:
                    continue
                if listed < 0:
                    raise MeshError(
                        f"Non-reciprocal neighbours: element {e} marks facet {k} as boundary "
                        f"but element {actual} shares it")
                if listed >= len(elements):
                    raise MeshError(f"Neighbour index {listed} of element {e} out of range")
                raise MeshError(
                    f"Non-reciprocal neighbours: element {e} lists {listed} across facet {k}, "
                    f"which does not list {e} back across that facet")

    @property
    def num_elements(self):
        return len(self.elements)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def refinement_edge(self):
        """Global vertex pair bisected first in each element."""
        return self.elements[:, :2]

    @property
    def markers(self):
        return sorted(int(m) for m in np.unique(self.boundary) if m > 0)

    def element_coordinates(self, e):
        return self.vertices[self.elements[e]]

    def element_volume(self, e):
        return simplex_volume(self.element_coordinates(e))

    def total_volume(self):
        return sum(self.element_volume(e) for e in range(self.num_elements))

    def scaled(self, factor):
        """Same topology with coordinates multiplied by ``factor``."""
        return MacroMesh(self.dim, self.vertices * float(factor), self.elements.copy(),
                         self.neighbours.copy(), self.boundary.copy())

    def structural_hash(self):
        return hash((self.dim, self.vertices.tobytes(), self.elements.tobytes()))


def load_macro_mesh(source, check_compatibility=True):
    """
    Parses a macro mesh from a text stream (or a path).

    Sections DIM, VERTICES, ELEMENTS, NEIGHBOURS, BOUNDARY and
    REFINEMENT_EDGES, one record per line; '#' starts a comment.
    Only DIM, VERTICES and ELEMENTS are mandatory.

    :param source: A text stream or a file path.
    :param check_compatibility: Run the refinement-edge dry-run.
    :return: A validated MacroMesh.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as f:
            return load_macro_mesh(f, check_compatibility)

    records = {}
    section = None
    for number, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.upper() in SECTIONS:
            section = line.upper()
            if section in records:
                raise MacroParseError(f"Duplicate section {section}", number)
            records[section] = []
            continue
        if section is None:
            raise MacroParseError(f"Record {line!r} outside of any section", number)
        records[section].append((number, line.split()))

    if "DIM" not in records or len(records["DIM"]) != 1:
        raise MacroParseError("Expected exactly one DIM record")
    dim_line, dim_fields = records["DIM"][0]
    dim = _parse_numbers(dim_fields, 1, int, dim_line)[0]
    if dim not in (1, 2):
        raise MacroParseError(f"Unsupported dimension {dim}", dim_line)
    for required in ("VERTICES", "ELEMENTS"):
        if not records.get(required):
            raise MacroParseError(f"Missing section {required}")

    vertices = [_parse_numbers(f, dim, float, n) for n, f in records["VERTICES"]]
    elements = []
    for n, fields in records["ELEMENTS"]:
        element = _parse_numbers(fields, dim + 1, int, n)
        if min(element) < 0 or max(element) >= len(vertices):
            raise MacroParseError(f"Vertex index out of range in element {element}", n)
        elements.append(element)

    def optional(name, width):
        if name not in records:
            return None
        rows = records[name]
        if len(rows) != len(elements):
            line = rows[-1][0] if rows else None
            raise MacroParseError(f"{name} has {len(rows)} records for {len(elements)} elements", line)
        return [_parse_numbers(f, width, int, n) for n, f in rows]

    neighbours = optional("NEIGHBOURS", dim + 1)
    if neighbours is not None:
        for (n, _), row in zip(records["NEIGHBOURS"], neighbours):
            if any(v >= len(elements) or v < -1 for v in row):
                raise MacroParseError(f"Neighbour index out of range in {row}", n)
    boundary = optional("BOUNDARY", dim + 1)
    edges = optional("REFINEMENT_EDGES", 1)
    if edges is not None:
        edges = [row[0] for row in edges]

    macro = MacroMesh.from_arrays(dim, vertices, elements, neighbours, boundary, edges,
                                  check_compatibility=check_compatibility)
    logger.info("Loaded macro mesh: dim=%d, %d vertices, %d elements",
                dim, macro.num_vertices, macro.num_elements)
    return macro


def _parse_numbers(fields, count, kind, line):
    if len(fields) != count:
        raise MacroParseError(f"Expected {count} values, found {len(fields)}", line)
    try:
        return [kind(f) for f in fields]
    except ValueError:
        raise MacroParseError(f"Could not parse {' '.join(fields)!r} as {kind.__name__}", line) from None


def check_refinement_compatibility(macro):
    """
    Dry-run: bisect every macro element once with propagation, bounded.

    :param macro: The MacroMesh to check.
    :raises MeshError: If propagation does not terminate.
    """
    mesh = Mesh(macro)
    try:
        for root in mesh.roots:
            mesh._refine(root)
    except RecursionError:
        raise MeshError("Refinement propagation does not terminate; "
                        "refinement edges are incompatible") from None
    if not mesh.is_conforming():
        raise MeshError("Dry-run refinement left hanging nodes; refinement edges are incompatible")


class _Node:
    """A node of a refinement tree. Leaves have ``children is None``."""
    __slots__ = ("vertices", "parent", "children", "level", "macro_index", "bits")

    def __init__(self, vertices, parent, level, macro_index, bits):
        self.vertices = vertices
        self.parent = parent
        self.children = None
        self.level = level
        self.macro_index = macro_index
        self.bits = bits

    @property
    def is_leaf(self):
        return self.children is None

    @property
    def path(self):
        return (self.macro_index, self.bits, self.level)

    @property
    def sequence(self):
        return RefinementSequence(self.bits, self.level)

    def __repr__(self):
        return f"<Node macro={self.macro_index} seq={self.sequence} vertices={self.vertices}>"


@dataclass(eq=False)
class ElementInfo:
    """Element data produced on demand by the traverse."""
    macro_index: int
    sequence: RefinementSequence
    level: int
    vertex_coords: np.ndarray
    volume: float
    boundary: tuple
    vertices: tuple = None
    node: _Node = None

    @property
    def path(self):
        return (self.macro_index, self.sequence.bits, self.sequence.length)

    @property
    def dim(self):
        return self.vertex_coords.shape[1]


class Mesh:
    """
    An adapted mesh: one binary refinement tree per macro element.

    Every mutation (bisect/coarsen) bumps ``revision``; finite element
    spaces remember the revision they were built at.
    """

    def __init__(self, macro):
        """
        Creates an unrefined forest over ``macro``.

        :param macro: The shared MacroMesh.
        """
        self.macro = macro
        self.dim = macro.dim
        self._coords = [np.array(v, dtype=float) for v in macro.vertices]
        self._coord_array = None
        self._midpoints = {}
        self._facets = {}
        self.revision = 0
        self._leaf_cache = (None, None)
        self.roots = [_Node(tuple(int(v) for v in element), None, 0, i, 0)
                      for i, element in enumerate(macro.elements)]
        for root in self.roots:
            self._register(root)

    # --- Vertex and facet bookkeeping ---

    @property
    def coordinates(self):
        if self._coord_array is None or len(self._coord_array) != len(self._coords):
            self._coord_array = np.array(self._coords)
        return self._coord_array

    @property
    def num_vertices(self):
        return len(self._coords)

    def _midpoint(self, a, b):
        key = _edge_key(a, b)
        m = self._midpoints.get(key)
        if m is None:
            m = len(self._coords)
            self._coords.append(0.5 * (self._coords[a] + self._coords[b]))
            self._midpoints[key] = m
        return m

    def _register(self, node):
        for key in _facet_keys(node.vertices):
            self._facets.setdefault(key, []).append(node)

    def _unregister(self, node):
        for key in _facet_keys(node.vertices):
            owners = self._facets[key]
            owners.remove(node)
            if not owners:
                del self._facets[key]

    def _neighbour(self, node, key):
        for other in self._facets.get(key, ()):
            if other is not node:
                return other
        return None

    # --- Refinement ---

    def _check_depth(self, node):
        if node.level >= MAX_LEVEL:
            raise DepthLimitError(f"Bisection beyond level {MAX_LEVEL} in macro element {node.macro_index}")

    def _split(self, node):
        self._check_depth(node)
        m = self._midpoint(node.vertices[0], node.vertices[1])
        self._unregister(node)
        node.children = (
            _Node(child_vertices(node.vertices, m, LEFT), node, node.level + 1,
                  node.macro_index, node.bits),
            _Node(child_vertices(node.vertices, m, RIGHT), node, node.level + 1,
                  node.macro_index, node.bits | (1 << node.level)),
        )
        for child in node.children:
            self._register(child)
        self.revision += 1
        return list(node.children)

    def _refine(self, node, depth=0):
        """Bisects a leaf, refining neighbours first where needed."""
        if node.children is not None:
            return []
        if depth > PROPAGATION_DEPTH_LIMIT:
            raise MeshError("Refinement propagation does not terminate; "
                            "refinement edges are incompatible")
        if self.dim == 1:
            return self._split(node)

        created = []
        edge = _edge_key(node.vertices[0], node.vertices[1])
        neighbour = self._neighbour(node, edge)
        while neighbour is not None and _edge_key(*neighbour.vertices[:2]) != edge:
            created += self._refine(neighbour, depth + 1)
            if node.children is not None:
                return created
            neighbour = self._neighbour(node, edge)
        # both halves of the pair are checked before either is split
        self._check_depth(node)
        if neighbour is not None:
            self._check_depth(neighbour)
        created += self._split(node)
        if neighbour is not None:
            created += self._split(neighbour)
        return created

    def bisect(self, element_ref):
        """
        Bisects a leaf at its refinement edge, refining neighbours so the
        leaf level stays conforming.

        :param element_ref: An ElementInfo or tree node of a leaf.
        :return: List of ElementInfo for the newly created leaves.
        """
        node = self._as_node(element_ref)
        if not node.is_leaf:
            raise MeshError(f"Element {node.sequence} of macro {node.macro_index} is not a leaf")
        created = self._refine(node)
        return [self.element_info(n) for n in created if n.is_leaf]

    def refine_marked(self, nodes):
        """
        Bisects each given leaf once (already-refined ones are skipped).

        :param nodes: Iterable of leaf nodes or ElementInfos.
        :return: Number of bisections performed, including propagation.
        """
        before = self.revision
        for ref in list(nodes):
            self._refine(self._as_node(ref))
        return self.revision - before

    def refine_uniform(self, times=1):
        """Bisects every leaf ``times`` times."""
        for _ in range(times):
            self.refine_marked(self.leaf_nodes())
        return self

    def refine_to(self, path):
        """
        Refines along a macro-rooted path until the element it names exists.

        :param path: (macro_index, bits, length).
        :return: The tree node named by the path.
        """
        macro_index, bits, length = path
        node = self.roots[macro_index]
        for i in range(length):
            if node.is_leaf:
                self._refine(node)
            node = node.children[(bits >> i) & 1]
        return node

    # --- Coarsening ---

    def _merge(self, node):
        for child in node.children:
            self._unregister(child)
        node.children = None
        self._register(node)
        self.revision += 1

    def coarsening_patch(self, element_ref):
        """
        Parents that must be coarsened together with ``element_ref``'s parent.

        :return: List of parent nodes, or None when coarsening is not allowed.
        """
        node = self._as_node(element_ref)
        parent = node.parent
        if parent is None or any(not c.is_leaf for c in parent.children):
            return None
        if self.dim == 1:
            return [parent]
        a, b = parent.vertices[0], parent.vertices[1]
        m = self._midpoints[_edge_key(a, b)]
        other = self._neighbour(parent.children[LEFT], _edge_key(a, m))
        if other is None:
            return [parent]
        mate = other.parent
        if (mate is None or _edge_key(*mate.vertices[:2]) != _edge_key(a, b)
                or any(not c.is_leaf for c in mate.children)):
            return None
        return [parent, mate]

    def coarsen(self, element_ref):
        """
        Removes the children of ``element_ref``'s parent if that keeps the
        leaf level conforming; the neighbour pair sharing the bisected edge
        is coarsened jointly.

        :param element_ref: ElementInfo or node of a leaf.
        :return: True if coarsening was performed.
        """
        patch = self.coarsening_patch(element_ref)
        if patch is None:
            return False
        for parent in patch:
            self._merge(parent)
        return True

    # --- Traverse ---

    def _root_info(self, i):
        coords = self.macro.element_coordinates(i).astype(float)
        return ElementInfo(i, EMPTY_SEQUENCE, 0, coords, self.macro.element_volume(i),
                           tuple(int(b) for b in self.macro.boundary[i]),
                           self.roots[i].vertices, self.roots[i])

    def child_info(self, info, step):
        """ElementInfo of a child, computed from its parent's."""
        node = info.node.children[step]
        return ElementInfo(info.macro_index, info.sequence.append(step), info.level + 1,
                           child_coordinates(info.vertex_coords, step), 0.5 * info.volume,
                           child_boundary(info.boundary, step), node.vertices, node)

    def iter_elements(self, level=LEAF, macro_range=None):
        """
        Yields ElementInfo in macro order, depth first, left before right.

        :param level: 'leaf' or a fixed tree level.
        :param macro_range: Optional iterable of macro indices to restrict to.
        """
        indices = range(len(self.roots)) if macro_range is None else macro_range
        for i in indices:
            stack = [self._root_info(i)]
            while stack:
                info = stack.pop()
                node = info.node
                if level == LEAF:
                    if node.children is None:
                        yield info
                        continue
                else:
                    if info.level == level:
                        yield info
                        continue
                    if node.children is None:
                        continue
                stack.append(self.child_info(info, RIGHT))
                stack.append(self.child_info(info, LEFT))

    def element_info(self, element_ref):
        """Replays the path of a node from its macro element."""
        node = self._as_node(element_ref)
        info = self._root_info(node.macro_index)
        for i in range(node.level):
            info = self.child_info(info, (node.bits >> i) & 1)
        return info

    def leaf_nodes(self):
        self._refresh_leaf_cache()
        return self._leaf_cache[1]

    def _refresh_leaf_cache(self):
        if self._leaf_cache[0] != self.revision:
            nodes = []
            for root in self.roots:
                stack = [root]
                while stack:
                    node = stack.pop()
                    if node.children is None:
                        nodes.append(node)
                    else:
                        stack.append(node.children[RIGHT])
                        stack.append(node.children[LEFT])
            self._leaf_cache = (self.revision, nodes)

    @property
    def num_leaves(self):
        return len(self.leaf_nodes())

    def max_leaf_level(self):
        return max(n.level for n in self.leaf_nodes())

    def total_volume(self):
        return sum(info.volume for info in self.iter_elements())

    def is_conforming(self):
        """True if every leaf facet is a full facet of its neighbour or lies on the boundary."""
        for info in self.iter_elements():
            for k, key in enumerate(_facet_keys(info.vertices)):
                owners = len(self._facets.get(key, ()))
                if owners == 1 and info.boundary[k] == 0:
                    return False
                if owners > 2:
                    return False
        return True

    def copy(self):
        """An independent forest over the same MacroMesh object."""
        clone = Mesh.__new__(Mesh)
        clone.macro = self.macro
        clone.dim = self.dim
        clone._coords = [c.copy() for c in self._coords]
        clone._coord_array = None
        clone._midpoints = dict(self._midpoints)
        clone._facets = {}
        clone.revision = 0
        clone._leaf_cache = (None, None)

        def clone_tree(src, parent):
            node = _Node(src.vertices, parent, src.level, src.macro_index, src.bits)
            if src.children is not None:
                node.children = tuple(clone_tree(c, node) for c in src.children)
            return node

        clone.roots = [clone_tree(root, None) for root in self.roots]
        for node in clone.leaf_nodes():
            clone._register(node)
        return clone

    def signature(self):
        """Leaf paths with their vertex coordinates; equal signatures mean equal meshes."""
        return tuple((info.path, info.vertex_coords.tobytes()) for info in self.iter_elements())

    def _as_node(self, element_ref):
        if isinstance(element_ref, ElementInfo):
            return element_ref.node
        return element_ref

    def __repr__(self):
        return (f"<Mesh dim={self.dim} macro_elements={len(self.roots)} "
                f"leaves={self.num_leaves} revision={self.revision}>")


def traverse(mesh, level_spec, callback):
    """
    Calls ``callback(ElementInfo)`` once per element at the requested level.

    :param mesh: A Mesh.
    :param level_spec: 'leaf' or an integer tree level.
    :param callback: Function receiving each ElementInfo.
    """
    for info in mesh.iter_elements(level_spec):
        callback(info)


def bisect(mesh, element_ref):
    return mesh.bisect(element_ref)


def coarsen(mesh, element_ref):
    return mesh.coarsen(element_ref)
