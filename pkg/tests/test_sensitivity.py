import json

import numpy as np
import pytest

from implicitforge.expr import parse
from implicitforge.family import SceneSpec, preset
from implicitforge.field import GridSpec, ScalarField, sample_field
from implicitforge.mesh import TriangleMesh, marching_cubes
from implicitforge.sensitivity import hausdorff, sign_distance, surface_cells, sweep

from oracles import brute_force_surface_cells


def cube_spec(lo, hi, n):
    return GridSpec(lo, hi, lo, hi, lo, hi, n, n, n)


def random_field(rng, n=8, nan_fraction=0.05):
    values = rng.normal(size=(n, n, n))
    mask = rng.random(values.shape) < nan_fraction
    values[mask] = np.nan
    return ScalarField(cube_spec(0.0, 1.0, n), values)


def test_sign_distance_identity_and_symmetry():
    rng = np.random.default_rng(31)
    a = random_field(rng)
    b = random_field(rng)
    assert sign_distance(a, a) == 0.0
    assert sign_distance(a, b) == sign_distance(b, a)


def test_sign_distance_total_disagreement():
    spec = cube_spec(0.0, 1.0, 3)
    plus = ScalarField(spec, np.ones((3, 3, 3)))
    minus = ScalarField(spec, -np.ones((3, 3, 3)))
    assert sign_distance(plus, minus) == 1.0


def test_sign_distance_unknown_counts_as_difference():
    spec = cube_spec(0.0, 1.0, 2)
    a = ScalarField(spec, np.full((2, 2, 2), -1.0))
    values = np.full((2, 2, 2), -1.0)
    values[0, 0, 0] = np.nan
    b = ScalarField(spec, values)
    assert sign_distance(a, b) == pytest.approx(1 / 8)
    # unknown agrees with unknown
    assert sign_distance(b, b) == 0.0


def test_sign_distance_dimension_mismatch():
    a = ScalarField(cube_spec(0, 1, 3), np.zeros((3, 3, 3)))
    b = ScalarField(cube_spec(0, 1, 4), np.zeros((4, 4, 4)))
    with pytest.raises(ValueError, match="dimension"):
        sign_distance(a, b)


def test_sign_distance_triangle_inequality():
    rng = np.random.default_rng(32)
    for _ in range(100):
        a, b, c = (random_field(rng, n=6) for _ in range(3))
        dab = sign_distance(a, b)
        dbc = sign_distance(b, c)
        dac = sign_distance(a, c)
        assert dac <= dab + dbc + 1e-15


def test_surface_cells_all_positive():
    f = ScalarField(cube_spec(0, 1, 4), np.ones((4, 4, 4)))
    assert surface_cells(f) == 0


def test_surface_cells_small_sphere():
    f = sample_field(parse("x^2+y^2+z^2-1"), cube_spec(-1, 1, 3))
    assert surface_cells(f) == 8
    assert brute_force_surface_cells(f, 0.0) == 8


def test_surface_cells_matches_brute_force_and_mesh_emptiness():
    rng = np.random.default_rng(33)
    for _ in range(200):
        f = random_field(rng, n=8, nan_fraction=0.08)
        n_cells = surface_cells(f, 0.0)
        assert n_cells == brute_force_surface_cells(f, 0.0)
        assert (n_cells == 0) == marching_cubes(f, 0.0).is_empty


def test_sweep_requires_param_in_scene():
    scene = SceneSpec(parse("x^2+y^2+z^2-1"), cube_spec(-1, 1, 4), name="sphere")
    with pytest.raises(ValueError, match="does not occur"):
        sweep(scene, "m", [0.5, 1.0])


def test_sweep_requires_sorted_values():
    scene = SceneSpec(
        parse("x^2+y^2+z^2-m"), cube_spec(-2, 2, 6), {"m": 1.0}, name="s"
    )
    with pytest.raises(ValueError):
        sweep(scene, "m", [])
    with pytest.raises(ValueError):
        sweep(scene, "m", [1.0, 0.5])


def test_sweep_sphere_radius_metrics():
    scene = SceneSpec(
        parse("x^2+y^2+z^2-m"), cube_spec(-2, 2, 9), {"m": 1.0}, name="spheres"
    )
    report = sweep(scene, "m", [0.5, 1.0, 2.0])
    assert [row.value for row in report.rows] == [0.5, 1.0, 2.0]
    assert report.rows[0].sign_distance_prev is None
    for row in report.rows:
        assert row.surface_cells > 0
        assert row.mesh_vertices > 0
        assert row.unknown_fraction == 0.0
    fractions = [row.inside_fraction for row in report.rows]
    assert fractions[0] < fractions[1] < fractions[2]
    for row in report.rows[1:]:
        assert 0.0 < row.sign_distance_prev <= 1.0


def test_sweep_report_json_layout_and_determinism():
    scene = SceneSpec(
        parse("x^2+y^2+z^2-m"), cube_spec(-2, 2, 5), {"m": 1.0}, name="spheres"
    )
    blobs = {sweep(scene, "m", [0.5, 1.5]).to_json() for _ in range(3)}
    assert len(blobs) == 1
    doc = json.loads(blobs.pop())
    assert list(doc) == ["scene", "param", "rows"]
    assert doc["scene"] == "spheres"
    assert doc["param"] == "m"
    first, second = doc["rows"]
    assert "sign_distance_prev" not in first
    assert list(second) == [
        "value", "surface_cells", "inside_fraction", "unknown_fraction",
        "sign_distance_prev", "mesh_vertices",
    ]


def test_sweep_keep_meshes():
    scene = SceneSpec(
        parse("x^2+y^2+z^2-m"), cube_spec(-2, 2, 7), {"m": 1.0}, name="s"
    )
    report, meshes = sweep(scene, "m", [1.0, 2.0], keep_meshes=True)
    assert len(meshes) == 2
    assert all(not m.is_empty for m in meshes)


def test_hausdorff_identity_and_empty():
    f = sample_field(parse("x^2+y^2+z^2-1"), cube_spec(-1.5, 1.5, 12))
    m = marching_cubes(f)
    assert hausdorff(m, m) == 0.0
    empty = TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=int))
    with pytest.raises(ValueError):
        hausdorff(m, empty)


def test_hausdorff_concentric_spheres():
    spec = cube_spec(-2.5, 2.5, 24)
    unit = marching_cubes(sample_field(parse("x^2+y^2+z^2-1"), spec))
    double = marching_cubes(sample_field(parse("x^2+y^2+z^2-4"), spec))
    d = hausdorff(unit, double)
    assert d == pytest.approx(1.0, abs=2 * spec.cell_diagonal)


def test_eqb_i3_vs_i4_sign_distance_positive():
    s3, s4 = preset("eqB-I3"), preset("eqB-I4")
    f3 = sample_field(s3.expr, s3.grid, s3.params)
    f4 = sample_field(s4.expr, s4.grid, s4.params)
    d = sign_distance(f3, f4)
    assert 0.0 < d <= 1.0
