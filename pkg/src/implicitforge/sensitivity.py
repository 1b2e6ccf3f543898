"""Parameter sweeps and field/mesh comparison metrics.

``sign_distance`` is the workhorse: the fraction of lattice points whose
inside/outside/unknown classification differs between two same-shape
fields.  It is a pseudometric (zero on identical fields, symmetric,
triangle inequality) and treats unknown as disagreeing with anything but
unknown, so it grows monotonically as singular regions grow.  Sweeps
record it between consecutive parameter values together with occupancy
fractions, surface-cell counts and mesh sizes; the numbers are reported
for comparison, not judged against thresholds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import free_names
from .family import SceneSpec
from .field import ScalarField, classify, sample_field
from .mesh import TriangleMesh, marching_cubes

__all__ = [
    "SweepRow",
    "SweepReport",
    "sign_distance",
    "surface_cells",
    "sweep",
    "hausdorff",
]

_CELL_CORNERS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
)


def sign_distance(a: ScalarField, b: ScalarField, iso: float = 0.0) -> float:
    """Fraction of lattice points classified differently (index-aligned).

    Requires identical point counts; bounds may differ.  Unknown points
    agree only with unknown points.
    """
    if a.values.shape != b.values.shape:
        raise ValueError(
            f"grid dimensions differ: {a.values.shape[::-1]} vs {b.values.shape[::-1]}"
        )
    return float(np.mean(classify(a, iso) != classify(b, iso)))


def surface_cells(f: ScalarField, iso: float = 0.0) -> int:
    """Cells with all corners defined and corners on both sides of iso.

    Zero exactly when the extracted mesh is empty.
    """
    v = f.values
    inside = v <= iso
    defined = np.isfinite(v)
    nz, ny, nx = v.shape
    shape = (nz - 1, ny - 1, nx - 1)
    any_in = np.zeros(shape, dtype=bool)
    all_in = np.ones(shape, dtype=bool)
    ok = np.ones(shape, dtype=bool)
    for dx, dy, dz in _CELL_CORNERS:
        sl = (slice(dz, dz + shape[0]), slice(dy, dy + shape[1]), slice(dx, dx + shape[2]))
        any_in |= inside[sl]
        all_in &= inside[sl]
        ok &= defined[sl]
    return int((ok & any_in & ~all_in).sum())


@dataclass
class SweepRow:
    value: float
    surface_cells: int
    inside_fraction: float
    unknown_fraction: float
    sign_distance_prev: float | None
    mesh_vertices: int


@dataclass
class SweepReport:
    scene: str
    param: str
    rows: list[SweepRow]

    def to_json(self) -> str:
        doc = {"scene": self.scene, "param": self.param, "rows": []}
        for row in self.rows:
            entry = {
                "value": row.value,
                "surface_cells": row.surface_cells,
                "inside_fraction": row.inside_fraction,
                "unknown_fraction": row.unknown_fraction,
            }
            if row.sign_distance_prev is not None:
                entry["sign_distance_prev"] = row.sign_distance_prev
            entry["mesh_vertices"] = row.mesh_vertices
            doc["rows"].append(entry)
        return json.dumps(doc, indent=2) + "\n"


def sweep(
    scene: SceneSpec,
    param: str,
    values: Sequence[float],
    *,
    threads: int | None = None,
    keep_meshes: bool = False,
) -> SweepReport | tuple[SweepReport, list[TriangleMesh]]:
    """Sample the scene once per parameter value and tabulate shape metrics.

    ``values`` must be nonempty and sorted ascending; ``param`` must
    actually occur in the scene expression.  Each row records occupancy
    and surface metrics plus the sign distance to the previous row.
    """
    _, wanted = free_names(scene.expr)
    if param not in wanted:
        raise ValueError(f"parameter '{param}' does not occur in scene '{scene.name}'")
    if len(values) == 0:
        raise ValueError("values must be nonempty")
    values = [float(v) for v in values]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("values must be strictly increasing")

    rows = []
    meshes = []
    prev_field = None
    total = None
    for value in values:
        params = dict(scene.params)
        params[param] = value
        f = sample_field(scene.expr, scene.grid, params, threads=threads)
        marks = classify(f, scene.iso)
        if total is None:
            total = marks.size
        mesh = marching_cubes(f, scene.iso)
        rows.append(SweepRow(
            value=value,
            surface_cells=surface_cells(f, scene.iso),
            inside_fraction=float(np.mean(marks == 1)),
            unknown_fraction=float(np.mean(marks == 2)),
            sign_distance_prev=(
                None if prev_field is None else sign_distance(prev_field, f, scene.iso)
            ),
            mesh_vertices=len(mesh.vertices),
        ))
        if keep_meshes:
            meshes.append(mesh)
        prev_field = f
    report = SweepReport(scene=scene.name, param=param, rows=rows)
    if keep_meshes:
        return report, meshes
    return report


def hausdorff(a: TriangleMesh, b: TriangleMesh) -> float:
    """Symmetric Hausdorff distance between the two vertex sets.

    Exact brute force over vertices; a vertex-set approximation of the
    surface-to-surface distance.  Rejects empty meshes.
    """
    if a.is_empty or b.is_empty:
        raise ValueError("hausdorff requires two nonempty meshes")
    pa = a.vertices
    pb = b.vertices

    def directed(p: np.ndarray, q: np.ndarray) -> float:
        worst = 0.0
        step = max(1, (1 << 22) // max(len(q), 1))
        for i in range(0, len(p), step):
            block = p[i:i + step, None, :] - q[None, :, :]
            nearest = np.sqrt((block * block).sum(axis=2)).min(axis=1)
            worst = max(worst, float(nearest.max()))
        return worst

    return max(directed(pa, pb), directed(pb, pa))
