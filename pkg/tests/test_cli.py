import json

import numpy as np
import pytest

from implicitforge.cli import run
from implicitforge.field import read_field
from implicitforge.mesh import TriangleMesh

from oracles import is_watertight

SPHERE_ARGS = [
    "--expr", "x^2+y^2+z^2-1",
    "--bounds", "-1.5,1.5,-1.5,1.5,-1.5,1.5",
    "--grid", "32,32,32",
]


def load_obj(path):
    verts, tris = [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if parts[0] == "v":
            verts.append([float(t) for t in parts[1:]])
        elif parts[0] == "f":
            tris.append([int(t) - 1 for t in parts[1:]])
    return TriangleMesh(np.asarray(verts), np.asarray(tris))


def test_check_prints_canonical_form(capsys):
    assert run(["check", "--expr", "x ^ 2 + m*y"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x^2+m*y"
    assert out[1] == "variables: x y"
    assert out[2] == "parameters: m"


def test_check_syntax_error_exit_1(capsys):
    assert run(["check", "--expr", "sin("]) == 1
    err = capsys.readouterr().err
    assert "offset 4" in err


def test_usage_error_exit_1(capsys):
    assert run(["sample", "--out", "x.ifld"]) == 1
    assert run(["nonsense"]) == 1


def test_unknown_preset_exit_2(capsys):
    assert run(["preset", "emit", "nope"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_missing_input_file_exit_3(tmp_path, capsys):
    out = tmp_path / "m.obj"
    assert run(["mesh", "--in", str(tmp_path / "missing.ifld"),
                "--out", str(out)]) == 3


def test_bad_field_file_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.ifld"
    bad.write_bytes(b"XFLD" + b"\0" * 60)
    assert run(["mesh", "--in", str(bad), "--out", str(tmp_path / "m.obj")]) == 3


def test_sample_then_mesh_round_trip(tmp_path):
    field_path = tmp_path / "sphere.ifld"
    assert run(["sample", *SPHERE_ARGS, "--out", str(field_path)]) == 0
    f = read_field(field_path)
    assert f.spec.nx == 32
    obj_path = tmp_path / "sphere.obj"
    assert run(["mesh", "--in", str(field_path), "--format", "obj",
                "--out", str(obj_path)]) == 0
    mesh = load_obj(obj_path)
    assert is_watertight(mesh)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radii - 1.0)) < 0.2


def test_mesh_direct_from_expression(tmp_path):
    out = tmp_path / "s.stl"
    assert run(["mesh", *SPHERE_ARGS, "--format", "stl", "--out", str(out)]) == 0
    data = out.read_bytes()
    assert data[:13] == b"implicitforge"
    assert (len(data) - 84) % 50 == 0


def test_mesh_outputs_identical_across_threads(tmp_path):
    blobs = []
    for threads, name in ((1, "a.obj"), (8, "b.obj")):
        out = tmp_path / name
        assert run(["mesh", "--preset", "eqB-I3", "--threads", str(threads),
                    "--format", "obj", "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] and len(blobs[0]) > 0


def test_mesh_parametric_preset(tmp_path):
    out = tmp_path / "cube.obj"
    assert run(["mesh", "--preset", "cube-sign", "--out", str(out)]) == 0
    mesh = load_obj(out)
    assert len(mesh.vertices) > 0
    assert set(np.unique(mesh.vertices)) <= {-1.0, 1.0}


def test_sample_parametric_preset_rejected(tmp_path, capsys):
    assert run(["sample", "--preset", "cube-sign",
                "--out", str(tmp_path / "c.ifld")]) == 2
    assert "parametric" in capsys.readouterr().err


def test_preset_list_and_emit(capsys):
    assert run(["preset", "list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["eqA", "eqB-I3", "eqB-I4", "eqB-I5", "eqC", "fig1-curve", "cube-sign"]

    assert run(["preset", "emit", "eqB-I5"]) == 0
    out = capsys.readouterr().out
    assert "bounds: -7.05,7.05,-7.05,7.05,-7.05,7.05" in out
    assert "grid: 33,33,33" in out


def test_preset_emit_feeds_check(tmp_path, capsys):
    assert run(["preset", "emit", "eqC"]) == 0
    out = capsys.readouterr().out
    expr_line = next(l for l in out.splitlines() if l.startswith("expr: "))
    assert run(["check", "--expr", expr_line[len("expr: "):]]) == 0


def test_preset_bounds_overridable(tmp_path):
    field_path = tmp_path / "b3.ifld"
    assert run(["sample", "--preset", "eqB-I3",
                "--bounds", "-7.05,7.05,-7.05,7.05,-7.05,7.05",
                "--grid", "33,33,33", "--out", str(field_path)]) == 0
    f = read_field(field_path)
    assert (f.spec.nx, f.spec.x_max) == (33, 7.05)


def test_family_config_json_input(tmp_path):
    cfg = {"d": 1.0, "terms": [[{"P1": [[1, 2, 0, 0], [1, 0, 2, 0], [1, 0, 0, 2]]}]]}
    cfg_path = tmp_path / "sphere.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "s.obj"
    assert run(["mesh", "--file", str(cfg_path),
                "--bounds", "-1.5,1.5,-1.5,1.5,-1.5,1.5", "--grid", "16,16,16",
                "--out", str(out)]) == 0
    assert is_watertight(load_obj(out))


def test_sweep_report_and_meshes(tmp_path):
    report_path = tmp_path / "r.json"
    mesh_dir = tmp_path / "meshes"
    assert run(["sweep", "--preset", "eqC", "--param-name", "m",
                "--from", "0.25", "--to", "1.0", "--step", "0.25",
                "--out", str(report_path), "--emit-meshes", str(mesh_dir)]) == 0
    doc = json.loads(report_path.read_text())
    assert doc["scene"] == "eqC"
    assert [row["value"] for row in doc["rows"]] == [0.25, 0.5, 0.75, 1.0]
    assert all(row["surface_cells"] > 0 for row in doc["rows"])
    names = sorted(p.name for p in mesh_dir.iterdir())
    assert names == [
        "eqC_m_0.25.obj", "eqC_m_0.5.obj", "eqC_m_0.75.obj", "eqC_m_1.0.obj",
    ]


def test_sweep_bad_step_exit_1(tmp_path, capsys):
    assert run(["sweep", "--preset", "eqC", "--param-name", "m",
                "--from", "1.0", "--to", "0.5", "--step", "0.25",
                "--out", str(tmp_path / "r.json")]) == 1


def test_sweep_param_not_in_scene_exit_2(tmp_path, capsys):
    assert run(["sweep", "--preset", "eqB-I3", "--param-name", "m",
                "--from", "0.1", "--to", "0.2", "--step", "0.1",
                "--out", str(tmp_path / "r.json")]) == 2


def test_identical_invocations_identical_bytes(tmp_path):
    paths = []
    for name in ("one.ifld", "two.ifld"):
        p = tmp_path / name
        assert run(["sample", "--preset", "eqB-I4", "--out", str(p)]) == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]
