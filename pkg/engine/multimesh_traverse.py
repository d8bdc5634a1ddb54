"""
Dual traverse of two refinement forests over one macro mesh.

The leaves of the virtual union are produced as VirtualElementPairs: the
leaf of the coarser mesh stays fixed while all leaves of the finer mesh
below it are visited.
"""
import logging
from dataclasses import dataclass

from .refinement_sequence import (
    EMPTY_SEQUENCE, LEFT, RIGHT, RefinementSequence, SequenceOverflowError, sequence_append,
)
from .simplicial_mesh import (
    DepthLimitError, ElementInfo, MeshError, child_boundary, child_coordinates,
)

logger = logging.getLogger(__name__)

__all__ = [
    "MacroMismatchError", "RefinementSequence", "VirtualElementPair", "dual_traverse",
    "iter_virtual_pairs", "sequence_append", "tra", "union_mesh",
]

MESH_A = "A"
MESH_B = "B"


class MacroMismatchError(MeshError):
    """The two meshes are not built on the same macro mesh."""


@dataclass(eq=False)
class VirtualElementPair:
    """
    One leaf of the virtual union.

    ``fine_mesh`` names the mesh holding ``small`` ('A' or 'B'); it is None
    when both meshes have the same leaf, in which case large is small.
    """
    large: ElementInfo
    small: ElementInfo
    sequence: RefinementSequence
    fine_mesh: str = None

    @property
    def is_equal(self):
        return self.sequence.length == 0

    def element_on(self, side):
        """ElementInfo of the leaf that belongs to mesh ``side``."""
        if self.fine_mesh is None or self.fine_mesh == side:
            return self.small
        return self.large

    def sequence_on(self, side):
        """Sequence from the leaf of mesh ``side`` down to the small element."""
        if self.fine_mesh is None or self.fine_mesh == side:
            return EMPTY_SEQUENCE
        return self.sequence


def tra(element, sequence):
    """
    Geometry of the descendant of ``element`` reached by ``sequence``.

    TRA(T, empty) = T and TRA(T, (a, rest)) = TRA(child_a(T), rest).

    :param element: ElementInfo of the start element.
    :param sequence: RefinementSequence.
    :return: ElementInfo of the descendant (without tree node).
    :raises DepthLimitError: If the descendant would exceed the depth cap.
    """
    if sequence.length == 0:
        return element
    step = sequence.step(0)
    try:
        child_sequence = element.sequence.append(step)
    except SequenceOverflowError as e:
        raise DepthLimitError(str(e)) from None
    child = ElementInfo(element.macro_index, child_sequence, element.level + 1,
                        child_coordinates(element.vertex_coords, step), 0.5 * element.volume,
                        child_boundary(element.boundary, step))
    return tra(child, sequence.suffix(1))


def _check_same_macro(mesh_a, mesh_b):
    if mesh_a.macro is mesh_b.macro:
        return
    if mesh_a.macro.structural_hash() != mesh_b.macro.structural_hash():
        raise MacroMismatchError("Meshes do not share a macro mesh")


def iter_virtual_pairs(mesh_a, mesh_b):
    """
    Yields the VirtualElementPairs of the union of ``mesh_a`` and ``mesh_b``
    in macro order, depth first, left before right.
    """
    _check_same_macro(mesh_a, mesh_b)
    for i in range(len(mesh_a.roots)):
        stack = [(mesh_a._root_info(i), mesh_b._root_info(i))]
        while stack:
            info_a, info_b = stack.pop()
            leaf_a, leaf_b = info_a.node.is_leaf, info_b.node.is_leaf
            if leaf_a and leaf_b:
                yield VirtualElementPair(info_a, info_b, EMPTY_SEQUENCE, None)
            elif leaf_a:
                yield from _descend(mesh_b, info_a, info_b, MESH_B)
            elif leaf_b:
                yield from _descend(mesh_a, info_b, info_a, MESH_A)
            else:
                stack.append((mesh_a.child_info(info_a, RIGHT), mesh_b.child_info(info_b, RIGHT)))
                stack.append((mesh_a.child_info(info_a, LEFT), mesh_b.child_info(info_b, LEFT)))


def _descend(fine_mesh, large, start, fine_name):
    """Visits the leaves of ``fine_mesh`` below ``start`` while ``large`` stays fixed."""
    stack = [(start, EMPTY_SEQUENCE)]
    while stack:
        info, sequence = stack.pop()
        if info.node.is_leaf:
            yield VirtualElementPair(large, info, sequence, fine_name)
            continue
        stack.append((fine_mesh.child_info(info, RIGHT), sequence_append(sequence, RIGHT)))
        stack.append((fine_mesh.child_info(info, LEFT), sequence_append(sequence, LEFT)))


def dual_traverse(mesh_a, mesh_b, callback):
    """
    Calls ``callback(VirtualElementPair)`` once per leaf of the virtual union.

    :param mesh_a: First Mesh.
    :param mesh_b: Second Mesh on the same macro mesh.
    :param callback: Receives each pair.
    :raises MacroMismatchError: If the macro meshes differ.
    """
    for pair in iter_virtual_pairs(mesh_a, mesh_b):
        callback(pair)


def union_mesh(mesh_a, mesh_b):
    """
    Explicit union: a copy of ``mesh_a`` refined to every finer leaf of ``mesh_b``.

    :return: A new Mesh whose leaves are the locally finest elements of both.
    """
    _check_same_macro(mesh_a, mesh_b)
    union = mesh_a.copy()
    for pair in iter_virtual_pairs(mesh_a, mesh_b):
        if pair.fine_mesh == MESH_B:
            union.refine_to(pair.small.path)
    logger.debug("Union mesh has %d leaves", union.num_leaves)
    return union
