import io
import math

import numpy as np
import pytest

from implicitforge.expr import parse
from implicitforge.field import (
    INSIDE,
    OUTSIDE,
    UNKNOWN,
    FieldFormatError,
    GridSpec,
    ScalarField,
    axis_coords,
    classify,
    grid_point,
    read_field,
    sample_field,
    write_field,
)


def cube_spec(lo, hi, n):
    return GridSpec(lo, hi, lo, hi, lo, hi, n, n, n)


SPHERE = parse("x^2+y^2+z^2-1")


def test_grid_point_inclusive_linspace():
    spec = cube_spec(0.0, 1.0, 5)
    xs = [grid_point(spec, i, 0, 0)[0] for i in range(5)]
    assert xs == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_grid_point_endpoints_exact():
    spec = cube_spec(-155.0, 155.0, 82)
    assert grid_point(spec, 0, 0, 0)[0] == -155.0
    assert grid_point(spec, 81, 0, 0)[0] == 155.0
    # no accumulation drift on awkward bounds either
    spec2 = cube_spec(0.1, 0.3, 7)
    assert grid_point(spec2, 6, 0, 0)[0] == 0.3


def test_grid_point_odd_symmetric_midpoint_is_zero():
    spec = cube_spec(-7.05, 7.05, 33)
    assert grid_point(spec, 16, 16, 16) == (0.0, 0.0, 0.0)


def test_grid_point_out_of_range():
    spec = cube_spec(0.0, 1.0, 5)
    with pytest.raises(IndexError):
        grid_point(spec, 5, 0, 0)
    with pytest.raises(IndexError):
        grid_point(spec, 0, -1, 0)


def test_axis_coords_matches_grid_point():
    spec = cube_spec(-7.05, 7.05, 34)
    xs = axis_coords(spec.x_min, spec.x_max, spec.nx)
    for i in range(spec.nx):
        assert xs[i] == grid_point(spec, i, 0, 0)[0]


def test_grid_spec_invariants():
    with pytest.raises(ValueError):
        cube_spec(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        cube_spec(0.0, 1.0, 1)


def test_sample_sphere_hand_values():
    f = sample_field(SPHERE, cube_spec(-1.0, 1.0, 3))
    assert f.values[1, 1, 1] == -1.0  # center
    corners = [f.values[a, b, c] for a in (0, 2) for b in (0, 2) for c in (0, 2)]
    assert corners == [2.0] * 8


def test_sample_singular_plane_nan_count():
    f = sample_field(parse("1/x"), cube_spec(-1.0, 1.0, 3))
    assert int(np.isnan(f.values).sum()) == 9
    assert np.all(np.isnan(f.values[:, :, 1]))


def test_sample_rejects_parametric_vars():
    with pytest.raises(ValueError):
        sample_field(parse("u+1"), cube_spec(0, 1, 2))


def test_sample_values_match_pointwise_evaluation():
    from implicitforge.expr import evaluate

    e = parse("sin(x)*y - cos(z)^2 + 0.25")
    spec = GridSpec(-2, 1, 0, 3, -1, 1, 4, 3, 5)
    f = sample_field(e, spec)
    rng = np.random.default_rng(3)
    for _ in range(25):
        ix, iy, iz = rng.integers(0, (spec.nx, spec.ny, spec.nz))
        x, y, z = grid_point(spec, ix, iy, iz)
        assert f.values[iz, iy, ix] == pytest.approx(evaluate(e, x, y, z), rel=1e-14)


def test_sample_deterministic_across_threads():
    e = parse("sin(3*x)*cos(2*y)+tan(z)/(1+x^2)")
    spec = cube_spec(-2.0, 2.0, 17)
    base = sample_field(e, spec, threads=1)
    for workers in (2, 5, 8):
        other = sample_field(e, spec, threads=workers)
        assert np.array_equal(
            base.values.view(np.uint64), other.values.view(np.uint64)
        )


def test_classify_sphere_counts():
    f = sample_field(SPHERE, cube_spec(-1.0, 1.0, 3))
    marks = classify(f, iso=0.0)
    # center is negative, the six face centers sit exactly on the surface
    assert int((marks == INSIDE).sum()) == 7
    assert int((marks == OUTSIDE).sum()) == 20


def test_classify_boundary_value_counts_inside():
    spec = cube_spec(0.0, 1.0, 2)
    f = ScalarField(spec, np.full((2, 2, 2), 0.5))
    assert np.all(classify(f, iso=0.5) == INSIDE)


def test_classify_all_positive_and_unknown():
    spec = cube_spec(0.0, 1.0, 3)
    f = sample_field(parse("1+x^2"), spec)
    assert int((classify(f, 0.0) == INSIDE).sum()) == 0
    g = sample_field(parse("1/x"), cube_spec(-1.0, 1.0, 3))
    assert int((classify(g, 0.0) == UNKNOWN).sum()) == 9


# --- IFLD stream ------------------------------------------------------------

def test_field_file_size_arithmetic():
    spec = cube_spec(0.0, 1.0, 2)
    f = ScalarField(spec, np.zeros((2, 2, 2)))
    buf = io.BytesIO()
    write_field(f, buf)
    assert len(buf.getvalue()) == 4 + 4 + 12 + 48 + 64 == 132


def test_field_round_trip_bit_exact(tmp_path):
    e = parse("1/(x*y*z) - sin(x)")
    f = sample_field(e, GridSpec(-1, 1, -1, 1, -1, 1, 5, 4, 3))
    path = tmp_path / "field.ifld"
    write_field(f, path)
    g = read_field(path)
    assert g.spec == f.spec
    # after one write the payload is canonical: re-writing is bit-identical
    buf1, buf2 = io.BytesIO(), io.BytesIO()
    write_field(g, buf1)
    write_field(read_field(io.BytesIO(buf1.getvalue())), buf2)
    assert buf1.getvalue() == buf2.getvalue()
    # values round-trip exactly, NaNs normalized to the quiet NaN pattern
    same = np.isnan(f.values) == np.isnan(g.values)
    assert np.all(same)
    defined = ~np.isnan(f.values)
    assert np.array_equal(f.values[defined], g.values[defined])
    nan_bits = g.values[np.isnan(g.values)].view(np.uint64)
    assert np.all(nan_bits == np.float64(np.nan).view(np.uint64) if len(nan_bits) else True)


def test_field_bad_magic():
    spec = cube_spec(0.0, 1.0, 2)
    buf = io.BytesIO()
    write_field(ScalarField(spec, np.zeros((2, 2, 2))), buf)
    data = bytearray(buf.getvalue())
    data[0:4] = b"XFLD"
    with pytest.raises(FieldFormatError, match="magic"):
        read_field(io.BytesIO(bytes(data)))


def test_field_version_mismatch():
    spec = cube_spec(0.0, 1.0, 2)
    buf = io.BytesIO()
    write_field(ScalarField(spec, np.zeros((2, 2, 2))), buf)
    data = bytearray(buf.getvalue())
    data[4] = 9
    with pytest.raises(FieldFormatError, match="version"):
        read_field(io.BytesIO(bytes(data)))


def test_field_truncated_payload():
    spec = cube_spec(0.0, 1.0, 2)
    buf = io.BytesIO()
    write_field(ScalarField(spec, np.zeros((2, 2, 2))), buf)
    with pytest.raises(FieldFormatError, match="truncated"):
        read_field(io.BytesIO(buf.getvalue()[:-8]))


def test_field_size_overflow():
    header = bytearray()
    import struct

    header += struct.pack("<4sIIII6d", b"IFLD", 1, 2**31, 2**31, 4, 0, 1, 0, 1, 0, 1)
    with pytest.raises(FieldFormatError, match="overflow"):
        read_field(io.BytesIO(bytes(header)))
