"""Isosurface extraction and mesh export.

``marching_cubes`` walks every lattice cell whose eight corners are all
defined, classifies corners as inside (value <= iso) or outside, and
emits triangles from the standard 256-case tables with linear edge
interpolation.  Cells touching an undefined (NaN) sample emit nothing:
the singular planes of these expressions are real, and inventing values
across them would invent geometry.  Vertices on shared cell edges are
welded by exact edge identity, never by coordinate tolerance, and cells
are scanned x-fastest, so output is deterministic.

Also here: the quantized parametric sampler (coordinates mapped through
w -> w/|w| per axis on request) and OBJ / binary STL / ascii PLY export.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import Expr, evaluate_array, free_names
from .field import ScalarField, axis_coords
from .mc_tables import EDGE_TABLE, TRI_TABLE

__all__ = [
    "TriangleMesh",
    "ParametricSpec",
    "marching_cubes",
    "sample_parametric_sign",
    "export_obj",
    "export_stl",
    "export_ply",
]

# Cell corner k sits at cell_origin + _CORNER_OFFSETS[k] (x, y, z).
_CORNER_OFFSETS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
)
# Edge e joins corners _EDGE_CORNERS[e]; interpolation runs a -> b.
_EDGE_CORNERS = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)
# Global identity of edge e: (axis, offset of its low corner along that axis).
_EDGE_AXIS = (0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2)
_EDGE_BASE = (
    (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 0),
    (0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 1),
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
)


@dataclass
class TriangleMesh:
    """Indexed triangle soup: (n, 3) float64 vertices, (m, 3) int triangles."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles):
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ValueError("triangle index out of range")
            t = self.triangles
            if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
                raise ValueError("degenerate triangle with repeated vertex index")
        if len(self.vertices) and not np.all(np.isfinite(self.vertices)):
            raise ValueError("non-finite vertex coordinate")

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0


def _cube_indices(values: np.ndarray, iso: float):
    """Vectorized case index, crossed-edge mask and defined flag per cell."""
    inside = (values <= iso)
    defined = np.isfinite(values)
    nz, ny, nx = values.shape
    shape = (nz - 1, ny - 1, nx - 1)
    index = np.zeros(shape, dtype=np.uint16)
    ok = np.ones(shape, dtype=bool)
    for bit, (dx, dy, dz) in enumerate(_CORNER_OFFSETS):
        sl = (slice(dz, dz + shape[0]), slice(dy, dy + shape[1]), slice(dx, dx + shape[2]))
        index |= inside[sl].astype(np.uint16) << bit
        ok &= defined[sl]
    edge_mask = np.asarray(EDGE_TABLE, dtype=np.int32)[index]
    return index, edge_mask, ok


def marching_cubes(f: ScalarField, iso: float = 0.0) -> TriangleMesh:
    """Extract the iso-level triangle mesh from a sampled field.

    Corners with value <= iso count as inside; edge vertices are placed
    at t = (iso - v0)/(v1 - v0).  An empty mesh is a valid result.
    """
    values = f.values
    index, edge_mask, ok = _cube_indices(values, iso)
    active = np.argwhere(ok & (edge_mask != 0))

    xs = axis_coords(f.spec.x_min, f.spec.x_max, f.spec.nx)
    ys = axis_coords(f.spec.y_min, f.spec.y_max, f.spec.ny)
    zs = axis_coords(f.spec.z_min, f.spec.z_max, f.spec.nz)
    axes = (xs, ys, zs)

    vert_ids: dict[tuple[int, int, int, int], int] = {}
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []

    for cz, cy, cx in active:
        corner_vals = [values[cz + o[2], cy + o[1], cx + o[0]] for o in _CORNER_OFFSETS]
        base = (int(cx), int(cy), int(cz))
        row = TRI_TABLE[index[cz, cy, cx]]
        cell_vertex: dict[int, int] = {}
        for edge in row:
            if edge in cell_vertex:
                continue
            ox, oy, oz = _EDGE_BASE[edge]
            key = (base[0] + ox, base[1] + oy, base[2] + oz, _EDGE_AXIS[edge])
            vid = vert_ids.get(key)
            if vid is None:
                a, b = _EDGE_CORNERS[edge]
                va, vb = corner_vals[a], corner_vals[b]
                t = (iso - va) / (vb - va)
                pa, pb = _CORNER_OFFSETS[a], _CORNER_OFFSETS[b]
                point = [0.0, 0.0, 0.0]
                for axis in range(3):
                    ca = axes[axis][base[axis] + pa[axis]]
                    if axis == _EDGE_AXIS[edge]:
                        cb = axes[axis][base[axis] + pb[axis]]
                        ca = ca + t * (cb - ca)
                    point[axis] = float(ca)
                vid = len(verts)
                verts.append((point[0], point[1], point[2]))
                vert_ids[key] = vid
            cell_vertex[edge] = vid
        # reversed winding so right-hand normals point away from value <= iso
        for k in range(0, len(row), 3):
            tris.append((cell_vertex[row[k]], cell_vertex[row[k + 2]], cell_vertex[row[k + 1]]))

    if not tris:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    return TriangleMesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# Parametric sign surfaces


@dataclass
class ParametricSpec:
    """(u, v) -> (fx, fy, fz) patch with optional per-axis sign quantization.

    A flagged axis maps its coordinate through w -> w/|w| (undefined at
    zero).  Quads whose corners are undefined, or that straddle a jump
    larger than ``jump_threshold`` in any coordinate, are skipped.
    """

    fx: Expr
    fy: Expr
    fz: Expr
    u_min: float = 0.0
    u_max: float = 1.0
    nu: int = 32
    v_min: float = 0.0
    v_max: float = 1.0
    nv: int = 32
    sign_axes: tuple[bool, bool, bool] = (False, False, False)
    jump_threshold: float = 1.0

    def __post_init__(self):
        for e in (self.fx, self.fy, self.fz):
            variables, _ = free_names(e)
            bad = variables - {"u", "v"}
            if bad:
                raise ValueError(
                    f"parametric expressions may only use u, v; found {sorted(bad)}"
                )
        if self.nu < 2 or self.nv < 2:
            raise ValueError("need at least 2 samples per direction")
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValueError("parameter ranges must satisfy min < max")


def sample_parametric_sign(spec: ParametricSpec,
                           params: dict[str, float] | None = None) -> TriangleMesh:
    """Triangulate the (u, v) lattice of a quantized parametric patch."""
    us = axis_coords(spec.u_min, spec.u_max, spec.nu)
    vs = axis_coords(spec.v_min, spec.v_max, spec.nv)
    ug = np.broadcast_to(us[None, :], (spec.nv, spec.nu)).copy()
    vg = np.broadcast_to(vs[:, None], (spec.nv, spec.nu)).copy()
    coords = {"u": ug.ravel(), "v": vg.ravel()}

    channels = []
    for e, flagged in zip((spec.fx, spec.fy, spec.fz), spec.sign_axes):
        w = evaluate_array(e, coords, params or {}).reshape(spec.nv, spec.nu)
        if flagged:
            with np.errstate(invalid="ignore"):
                w = np.where(w == 0, np.nan, np.sign(w))
        channels.append(w)
    X, Y, Z = channels
    defined = np.isfinite(X) & np.isfinite(Y) & np.isfinite(Z)

    vert_ids = np.full((spec.nv, spec.nu), -1, dtype=np.int64)
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []

    def vertex(iv: int, iu: int) -> int:
        vid = vert_ids[iv, iu]
        if vid < 0:
            vid = len(verts)
            verts.append((float(X[iv, iu]), float(Y[iv, iu]), float(Z[iv, iu])))
            vert_ids[iv, iu] = vid
        return int(vid)

    for iv in range(spec.nv - 1):
        for iu in range(spec.nu - 1):
            quad = [(iv, iu), (iv, iu + 1), (iv + 1, iu + 1), (iv + 1, iu)]
            if not all(defined[q] for q in quad):
                continue
            jump = max(
                float(max(ch[q] for q in quad) - min(ch[q] for q in quad))
                for ch in channels
            )
            if jump > spec.jump_threshold:
                continue
            a, b, c, d = (vertex(*q) for q in quad)
            tris.append((a, b, c))
            tris.append((a, c, d))

    if not tris:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    return TriangleMesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))


# ---------------------------------------------------------------------------
# Export


def _open_binary(target):
    if isinstance(target, (str, Path)):
        return open(target, "wb"), True
    return target, False


def _fmt_coord(v: float) -> str:
    """Shortest decimal that round-trips the exact float."""
    return repr(float(v))


def export_obj(m: TriangleMesh, sink) -> None:
    """Wavefront OBJ text: one v line per vertex, 1-based f lines, LF only."""
    lines = [f"v {_fmt_coord(x)} {_fmt_coord(y)} {_fmt_coord(z)}" for x, y, z in m.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in m.triangles]
    data = ("\n".join(lines) + "\n").encode() if lines else b""
    fh, owned = _open_binary(sink)
    try:
        fh.write(data)
    finally:
        if owned:
            fh.close()


def _triangle_normal(p0, p1, p2) -> np.ndarray:
    n = np.cross(p1 - p0, p2 - p0)
    norm = float(np.linalg.norm(n))
    if norm == 0.0 or not np.isfinite(norm):
        return np.zeros(3)
    return n / norm


def export_stl(m: TriangleMesh, sink) -> None:
    """Binary STL: 80-byte header, u32 count, 50 bytes per triangle."""
    header = b"implicitforge".ljust(80, b"\0")
    out = bytearray(header)
    out += struct.pack("<I", len(m.triangles))
    for a, b, c in m.triangles:
        p0, p1, p2 = m.vertices[a], m.vertices[b], m.vertices[c]
        n = _triangle_normal(p0, p1, p2)
        out += struct.pack("<3f", *np.asarray(n, dtype=np.float32))
        for p in (p0, p1, p2):
            out += struct.pack("<3f", *np.asarray(p, dtype=np.float32))
        out += struct.pack("<H", 0)
    fh, owned = _open_binary(sink)
    try:
        fh.write(bytes(out))
    finally:
        if owned:
            fh.close()


def export_ply(m: TriangleMesh, sink) -> None:
    """Minimal ascii PLY with double-precision vertex properties."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(m.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(m.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    lines += [f"{_fmt_coord(x)} {_fmt_coord(y)} {_fmt_coord(z)}" for x, y, z in m.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in m.triangles]
    fh, owned = _open_binary(sink)
    try:
        fh.write(("\n".join(lines) + "\n").encode())
    finally:
        if owned:
            fh.close()
