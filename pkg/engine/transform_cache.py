"""
Transformation matrices between a coarse element's local basis and the
local basis of one of its descendants.

Row i of C belongs to the coarse basis function psi_i, column j to the
fine basis function phi_j: psi_i restricted to the descendant equals
sum_j C[i, j] phi_j.
"""
import logging
import threading
from functools import lru_cache

import numpy as np

from .lagrange_basis import get_basis
from .refinement_sequence import LEFT, RIGHT, as_step

logger = logging.getLogger(__name__)

# --- Configuration ---
# Child vertices in parent barycentric coordinates, matching simplicial_mesh.
CHILD_BARYCENTRICS = {
    1: {
        LEFT: [[1.0, 0.0], [0.5, 0.5]],
        RIGHT: [[0.5, 0.5], [0.0, 1.0]],
    },
    2: {
        LEFT: [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.5, 0.5, 0.0]],
        RIGHT: [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0]],
    },
}


def _frozen(matrix):
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=None)
def child_matrix(dim, degree, step):
    """
    C for a single bisection step.

    :param dim: 1 or 2.
    :param degree: Lagrange degree.
    :param step: 'L'/'R' or LEFT/RIGHT.
    :return: Read-only (n, n) array with C[i, j] = psi_i(child node j).
    """
    basis = get_basis(dim, degree)
    vertices = np.array(CHILD_BARYCENTRICS[dim][as_step(step)])
    parent_bary = basis.nodes @ vertices
    return _frozen(basis.values(parent_bary).T.copy())


@lru_cache(maxsize=None)
def _identity(n):
    return _frozen(np.eye(n))


class MatrixCache:
    """
    Unbounded map (bits, length, dim, degree) -> C with hit/miss counters.

    Lookups and inserts take the lock so the counters stay exact under
    threads. Two threads may compute the same entry concurrently, the
    first insert wins.
    """

    def __init__(self):
        self._entries = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._entries)

    def get(self, key):
        with self._lock:
            matrix = self._entries.get(key)
            if matrix is not None:
                self.hits += 1
            return matrix

    def insert(self, key, matrix):
        with self._lock:
            self.misses += 1
            return self._entries.setdefault(key, matrix)

    def clear(self):
        with self._lock:
            self._entries.clear()
            self.hits = 0
            self.misses = 0


def compose(cache, dim, degree, sequence):
    """
    C(sequence), built as C(prefix) . C_last and memoized for every prefix.

    :param cache: A MatrixCache.
    :param dim: Spatial dimension.
    :param degree: Lagrange degree of both bases.
    :param sequence: RefinementSequence from the coarse to the fine element.
    :return: Read-only (n, n) array.
    """
    if sequence.length == 0:
        return _identity(get_basis(dim, degree).n)
    key = (sequence.bits, sequence.length, dim, degree)
    matrix = cache.get(key)
    if matrix is not None:
        return matrix
    if sequence.length == 1:
        matrix = child_matrix(dim, degree, sequence.bits)
    else:
        head = compose(cache, dim, degree, sequence.prefix(sequence.length - 1))
        matrix = _frozen(head @ child_matrix(dim, degree, sequence.step(sequence.length - 1)))
    return cache.insert(key, matrix)


def gradient_matrix(cache, dim, degree, sequence):
    """
    C for gradients. Element matrices are computed in physical coordinates
    on the small element, where grad psi_i = sum_j C[i, j] grad phi_j holds
    with the same coefficients as for values.
    """
    return compose(cache, dim, degree, sequence)


def cache_stats(cache):
    """:return: (entries, hits, misses)."""
    return len(cache), cache.hits, cache.misses
