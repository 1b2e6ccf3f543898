"""Sampling expressions over a 3D lattice into scalar fields.

The lattice is inclusive of its endpoints: axis i of N points covers
``lo + i*(hi - lo)/(N - 1)`` with the first and last point pinned to the
bounds exactly.  Fields store 64-bit values in x-fastest order and allow
NaN where the expression is undefined.

Sampling is deterministic regardless of the worker count: the lattice is
split into z slices, every slice is evaluated as the same fixed-shape
array no matter how many workers run, and workers write disjoint slabs.

The on-disk format (IFLD v1, see docs/formats.md) is little-endian:
magic ``IFLD``, u32 version, u32 Nx Ny Nz, six f64 bounds, then
Nx*Ny*Nz f64 values with NaNs normalized to the canonical quiet NaN.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Mapping

import numpy as np

from .expr import Expr, evaluate_array, free_names

__all__ = [
    "GridSpec",
    "ScalarField",
    "FieldFormatError",
    "INSIDE",
    "OUTSIDE",
    "UNKNOWN",
    "grid_point",
    "axis_coords",
    "sample_field",
    "classify",
    "write_field",
    "read_field",
]

INSIDE, OUTSIDE, UNKNOWN = np.uint8(1), np.uint8(0), np.uint8(2)

_MAGIC = b"IFLD"
_VERSION = 1
_HEADER = struct.Struct("<4sIIII6d")
_MAX_POINTS = 1 << 34  # refuse absurd headers before allocating


class FieldFormatError(ValueError):
    """Malformed field stream: bad magic, version, size, or truncation."""


@dataclass(frozen=True)
class GridSpec:
    """Axis bounds plus point counts for the sampling lattice."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for lo, hi, n, axis in self._axes():
            if not (lo < hi):
                raise ValueError(f"{axis}: bounds must satisfy min < max, got [{lo}, {hi}]")
            if n < 2:
                raise ValueError(f"{axis}: need at least 2 points, got {n}")

    def _axes(self):
        return (
            (self.x_min, self.x_max, self.nx, "x"),
            (self.y_min, self.y_max, self.ny, "y"),
            (self.z_min, self.z_max, self.nz, "z"),
        )

    @property
    def point_count(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def cell_diagonal(self) -> float:
        dx = (self.x_max - self.x_min) / (self.nx - 1)
        dy = (self.y_max - self.y_min) / (self.ny - 1)
        dz = (self.z_max - self.z_min) / (self.nz - 1)
        return float(np.sqrt(dx * dx + dy * dy + dz * dz))


@dataclass(eq=False)
class ScalarField:
    """Sampled values on a GridSpec lattice, shape (nz, ny, nx).

    ``values.ravel()`` is the canonical x-fastest linear order
    (index ix + nx*(iy + ny*iz)).  NaN marks undefined samples.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        want = (self.spec.nz, self.spec.ny, self.spec.nx)
        if self.values.shape != want:
            raise ValueError(f"values shape {self.values.shape} != {want}")


def _axis_value(lo: float, hi: float, n: int, i: int) -> float:
    if i == 0:
        return lo
    if i == n - 1:
        return hi
    return lo + i * (hi - lo) / (n - 1)


def axis_coords(lo: float, hi: float, n: int) -> np.ndarray:
    """Inclusive lattice coordinates; endpoints equal the bounds exactly."""
    out = lo + np.arange(n) * (hi - lo) / (n - 1)
    out[0] = lo
    out[-1] = hi
    return out


def grid_point(spec: GridSpec, ix: int, iy: int, iz: int) -> tuple[float, float, float]:
    """Coordinates of lattice point (ix, iy, iz)."""
    if not (0 <= ix < spec.nx and 0 <= iy < spec.ny and 0 <= iz < spec.nz):
        raise IndexError(f"index ({ix}, {iy}, {iz}) outside grid "
                         f"({spec.nx}, {spec.ny}, {spec.nz})")
    return (
        _axis_value(spec.x_min, spec.x_max, spec.nx, ix),
        _axis_value(spec.y_min, spec.y_max, spec.ny, iy),
        _axis_value(spec.z_min, spec.z_max, spec.nz, iz),
    )


def sample_field(
    e: Expr,
    spec: GridSpec,
    params: Mapping[str, float] | None = None,
    *,
    threads: int | None = None,
) -> ScalarField:
    """Evaluate an expression at every lattice point.

    The expression may use x, y, z only; all parameters must be bound.
    Output is bit-identical across runs and worker counts.
    """
    variables, _ = free_names(e)
    extra = variables - {"x", "y", "z"}
    if extra:
        raise ValueError(f"field expressions may only use x, y, z; found {sorted(extra)}")
    params = dict(params or {})

    xs = axis_coords(spec.x_min, spec.x_max, spec.nx)
    ys = axis_coords(spec.y_min, spec.y_max, spec.ny)
    zs = axis_coords(spec.z_min, spec.z_max, spec.nz)
    n_slice = spec.ny * spec.nx
    x_flat = np.broadcast_to(xs[None, :], (spec.ny, spec.nx)).reshape(n_slice).copy()
    y_flat = np.broadcast_to(ys[:, None], (spec.ny, spec.nx)).reshape(n_slice).copy()

    out = np.empty((spec.nz, spec.ny, spec.nx), dtype=np.float64)

    def fill(iz: int) -> None:
        coords = {"x": x_flat, "y": y_flat, "z": np.full(n_slice, zs[iz])}
        out[iz] = evaluate_array(e, coords, params).reshape(spec.ny, spec.nx)

    workers = threads if threads else (os.cpu_count() or 1)
    if workers <= 1 or spec.nz == 1:
        for iz in range(spec.nz):
            fill(iz)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(spec.nz)))
    return ScalarField(spec, out)


def classify(field: ScalarField, iso: float = 0.0) -> np.ndarray:
    """Per-point occupancy marks: INSIDE where value <= iso, UNKNOWN at NaN."""
    v = field.values
    marks = np.where(v <= iso, INSIDE, OUTSIDE)
    marks[np.isnan(v)] = UNKNOWN
    return marks.astype(np.uint8)


# ---------------------------------------------------------------------------
# IFLD v1 stream format


def _open(target, mode: str):
    if isinstance(target, (str, Path)):
        return open(target, mode), True
    return target, False


def write_field(field: ScalarField, sink) -> None:
    """Write the IFLD v1 byte stream to a path or binary file object."""
    spec = field.spec
    header = _HEADER.pack(
        _MAGIC, _VERSION, spec.nx, spec.ny, spec.nz,
        spec.x_min, spec.x_max, spec.y_min, spec.y_max, spec.z_min, spec.z_max,
    )
    flat = field.values.ravel().astype("<f8", copy=True)
    flat[np.isnan(flat)] = np.nan  # normalize NaN payloads to the quiet NaN
    fh, owned = _open(sink, "wb")
    try:
        fh.write(header)
        fh.write(flat.tobytes())
    finally:
        if owned:
            fh.close()


def read_field(source) -> ScalarField:
    """Read an IFLD v1 stream from a path or binary file object."""
    fh, owned = _open(source, "rb")
    try:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FieldFormatError("truncated header")
        magic, version, nx, ny, nz, *bounds = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise FieldFormatError(f"bad magic {magic!r}")
        if version != _VERSION:
            raise FieldFormatError(f"unsupported version {version}")
        count = nx * ny * nz
        if count > _MAX_POINTS:
            raise FieldFormatError(f"declared size {count} points overflows sane limits")
        try:
            spec = GridSpec(*bounds, nx, ny, nz)
        except ValueError as exc:
            raise FieldFormatError(f"invalid grid header: {exc}") from None
        payload = fh.read(count * 8)
        if len(payload) < count * 8:
            raise FieldFormatError(
                f"truncated payload: expected {count * 8} bytes, got {len(payload)}"
            )
        values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
        return ScalarField(spec, values.reshape(nz, ny, nx))
    finally:
        if owned:
            fh.close()
