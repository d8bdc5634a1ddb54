"""
Result files: legacy ASCII VTK snapshots and the per-step CSV series.
"""
import csv
import logging
import os

import numpy as np

from .lagrange_basis import sub_simplices

logger = logging.getLogger(__name__)

# --- Configuration ---
VTK_CELL_TYPES = {1: 3, 2: 5}  # line, triangle
FLOAT_FORMAT = "%.10g"


class OutputError(OSError):
    """A result file could not be written."""


def write_vtk(path, functions, title="multimesh"):
    """
    Writes FEFunctions sharing one space as a legacy ASCII unstructured grid.

    Elements of degree p are written as p**dim linear sub-cells on the node
    lattice, so every DOF becomes one point.

    :param path: Output file.
    :param functions: FEFunction or list of FEFunctions on the same space.
    :return: ``path``.
    """
    if not isinstance(functions, (list, tuple)):
        functions = [functions]
    space = functions[0].space
    for f in functions:
        if f.space is not space:
            raise ValueError(f"Function {f.name} lives on a different space than {functions[0].name}")

    points = np.zeros((space.num_dofs, 3))
    points[:, :space.dim] = space.dof_coords
    local = np.array(sub_simplices(space.dim, space.degree), dtype=np.int64)
    cells = space.dofs[:, local].reshape(-1, space.dim + 1)
    cell_type = VTK_CELL_TYPES[space.dim]

    try:
        with open(path, "w", encoding="ascii") as f:
            f.write("# vtk DataFile Version 2.0\n")
            f.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
            f.write(f"POINTS {len(points)} double\n")
            np.savetxt(f, points, fmt=FLOAT_FORMAT)
            f.write(f"CELLS {len(cells)} {len(cells) * (space.dim + 2)}\n")
            np.savetxt(f, np.column_stack([np.full(len(cells), space.dim + 1), cells]), fmt="%d")
            f.write(f"CELL_TYPES {len(cells)}\n")
            np.savetxt(f, np.full(len(cells), cell_type), fmt="%d")
            f.write(f"POINT_DATA {len(points)}\n")
            for fn in functions:
                f.write(f"SCALARS {fn.name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(f, fn.values, fmt=FLOAT_FORMAT)
    except OSError as e:
        raise OutputError(f"Could not write {path}: {e}") from e
    logger.debug("Wrote %s (%d points, %d cells)", path, len(points), len(cells))
    return path


def export_vtk(fields, directory, prefix, step=None):
    """
    One VTK file per component, named ``<prefix>_<component>[_<step>].vtk``.

    :param fields: Dict component -> FEFunction.
    :return: List of written paths.
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for component, function in fields.items():
        suffix = f"_{step:05d}" if step is not None else ""
        name = f"{prefix}_{component}{suffix}.vtk" if prefix else f"{component}{suffix}.vtk"
        paths.append(write_vtk(os.path.join(directory, name), function))
    return paths


class CsvSeries:
    """Per-step records written row by row under a fixed header."""

    def __init__(self, path, columns):
        self.path = path
        self.columns = list(columns)
        try:
            self._file = open(path, "w", newline="", encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Could not open {path}: {e}") from e
        self._writer = csv.DictWriter(self._file, fieldnames=self.columns, extrasaction="ignore")
        self._writer.writeheader()

    def write(self, record):
        self._writer.writerow({k: _csv_value(record.get(k)) for k in self.columns})
        self._file.flush()

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _csv_value(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def read_csv(path):
    """Reads a CSV series back as a list of dicts of strings."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
