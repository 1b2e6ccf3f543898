"""Command-line pipeline: check expressions, sample fields, mesh, sweep.

Exit codes: 0 success, 1 usage or expression-parse error, 2 numeric or
preset error, 3 I/O or file-format error.  Diagnostics go to stderr;
data goes to files or stdout only.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .expr import (
    Expr,
    ExprSyntaxError,
    UnboundParameterError,
    format_expr,
    free_names,
    parse,
)
from .family import (
    ParametricScene,
    SceneSpec,
    UnknownPresetError,
    build_family,
    config_from_json,
    preset,
    preset_names,
)
from .field import FieldFormatError, GridSpec, read_field, sample_field, write_field
from .mesh import export_obj, export_ply, export_stl, marching_cubes, sample_parametric_sign
from .sensitivity import sweep

__all__ = ["run", "main"]

_PRESET_BLURBS = {
    "eqA": "sharp power shell with arctangent folds; free parameter m (82^3 over +/-155)",
    "eqB-I3": "folded-ratio surface, bounds +/-7, grid 34^3",
    "eqB-I4": "same surface, bounds +/-7.05, grid 34^3",
    "eqB-I5": "same surface, bounds +/-7.05, grid 33^3 (lattice hits its singular planes)",
    "eqC": "cosine/sine lattice vs drifting cubic; free parameter m (64^3 over +/-10)",
    "fig1-curve": "eight concatenated chords in x (1D curve sampled as a field)",
    "cube-sign": "parametric patch with all axes quantized through w/|w|",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # let values like "-1.5,1.5,..." pass as arguments, not flags
        self._negative_number_matcher = re.compile(r"^-\.?\d")

    def error(self, message):  # keep argparse from sys.exit(2)
        raise _UsageError(message)


def _bounds(text: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(
            "bounds must be xmin,xmax,ymin,ymax,zmin,zmax"
        )
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bounds value in '{text}'") from None


def _grid(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be Nx,Ny,Nz")
    try:
        nx, ny, nz = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid value in '{text}'") from None
    return nx, ny, nz


def _param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError("parameter must be name=value")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad parameter value in '{text}'") from None


def _add_source_flags(p: _Parser, with_preset: bool) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--expr", help="inline expression text")
    group.add_argument("--file", help="expression file (or family config if .json)")
    if with_preset:
        group.add_argument("--preset", help="catalog scene name")


def _build_parser() -> _Parser:
    p = _Parser(prog="implicitforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse an expression and print its canonical form")
    _add_source_flags(c, with_preset=False)

    s = sub.add_parser("sample", help="sample an expression over a grid into an .ifld field")
    _add_source_flags(s, with_preset=True)
    s.add_argument("--bounds", type=_bounds, help="xmin,xmax,ymin,ymax,zmin,zmax")
    s.add_argument("--grid", type=_grid, help="Nx,Ny,Nz")
    s.add_argument("--param", action="append", type=_param, default=[], metavar="K=V")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True)

    m = sub.add_parser("mesh", help="extract an isosurface mesh and export it")
    group = m.add_mutually_exclusive_group(required=True)
    group.add_argument("--in", dest="infile", help="sampled .ifld field")
    group.add_argument("--expr", help="inline expression text")
    group.add_argument("--file", help="expression file (or family config if .json)")
    group.add_argument("--preset", help="catalog scene name")
    m.add_argument("--bounds", type=_bounds)
    m.add_argument("--grid", type=_grid)
    m.add_argument("--param", action="append", type=_param, default=[], metavar="K=V")
    m.add_argument("--iso", type=float, default=None)
    m.add_argument("--format", choices=("obj", "stl", "ply"), default="obj")
    m.add_argument("--threads", type=int, default=None)
    m.add_argument("--out", required=True)

    w = sub.add_parser("sweep", help="run a parameter sweep over a preset scene")
    w.add_argument("--preset", required=True)
    w.add_argument("--param-name", required=True)
    w.add_argument("--from", dest="start", type=float, required=True)
    w.add_argument("--to", dest="stop", type=float, required=True)
    w.add_argument("--step", type=float, required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--emit-meshes", metavar="DIR")
    w.add_argument("--threads", type=int, default=None)

    r = sub.add_parser("preset", help="list catalog scenes or print one")
    r.add_argument("action", choices=("list", "emit"))
    r.add_argument("name", nargs="?")

    return p


def _load_expr(args) -> Expr:
    if args.expr is not None:
        return parse(args.expr)
    path = Path(args.file)
    text = path.read_text()
    if path.suffix == ".json":
        return build_family(config_from_json(text))
    return parse(text)


def _grid_spec(bounds, grid) -> GridSpec:
    return GridSpec(*bounds, *grid)


def _resolve_scene(args) -> SceneSpec | ParametricScene:
    """Combine an expression source with bounds/grid/param flags."""
    if getattr(args, "preset", None) is not None:
        scene = preset(args.preset)
        if isinstance(scene, ParametricScene):
            return scene
        bounds = args.bounds
        grid = args.grid
        g = scene.grid
        if bounds is None:
            bounds = (g.x_min, g.x_max, g.y_min, g.y_max, g.z_min, g.z_max)
        if grid is None:
            grid = (g.nx, g.ny, g.nz)
        params = dict(scene.params)
        params.update(dict(args.param))
        return SceneSpec(scene.expr, _grid_spec(bounds, grid), params,
                         iso=scene.iso, name=scene.name)
    if args.bounds is None or args.grid is None:
        raise _UsageError("--bounds and --grid are required without --preset")
    e = _load_expr(args)
    return SceneSpec(e, _grid_spec(args.bounds, args.grid), dict(args.param))


def _cmd_check(args) -> int:
    e = _load_expr(args)
    variables, params = free_names(e)
    print(format_expr(e))
    print("variables:", " ".join(sorted(variables)) or "-")
    print("parameters:", " ".join(sorted(params)) or "-")
    return 0


def _cmd_sample(args) -> int:
    scene = _resolve_scene(args)
    if isinstance(scene, ParametricScene):
        raise ValueError(
            f"preset '{scene.name}' is parametric; use `mesh --preset {scene.name}`"
        )
    f = sample_field(scene.expr, scene.grid, scene.params, threads=args.threads)
    write_field(f, args.out)
    return 0


_EXPORTERS = {"obj": export_obj, "stl": export_stl, "ply": export_ply}


def _cmd_mesh(args) -> int:
    if args.infile is not None:
        f = read_field(args.infile)
        iso = 0.0 if args.iso is None else args.iso
        mesh = marching_cubes(f, iso)
    else:
        scene = _resolve_scene(args)
        if isinstance(scene, ParametricScene):
            mesh = sample_parametric_sign(scene.spec)
        else:
            iso = scene.iso if args.iso is None else args.iso
            f = sample_field(scene.expr, scene.grid, scene.params, threads=args.threads)
            mesh = marching_cubes(f, iso)
    _EXPORTERS[args.format](mesh, args.out)
    return 0


def _sweep_values(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise _UsageError("--step must be positive")
    if stop < start:
        raise _UsageError("--to must be >= --from")
    count = int(round((stop - start) / step))
    values = [start + k * step for k in range(count + 1)]
    while values and values[-1] > stop + abs(step) * 1e-9:
        values.pop()
    return values


def _cmd_sweep(args) -> int:
    scene = preset(args.preset)
    if isinstance(scene, ParametricScene):
        raise ValueError(f"preset '{scene.name}' is parametric and cannot be swept")
    values = _sweep_values(args.start, args.stop, args.step)
    result = sweep(scene, args.param_name, values,
                   threads=args.threads, keep_meshes=args.emit_meshes is not None)
    if args.emit_meshes is not None:
        report, meshes = result
        out_dir = Path(args.emit_meshes)
        out_dir.mkdir(parents=True, exist_ok=True)
        for value, mesh in zip(values, meshes):
            name = f"{scene.name}_{args.param_name}_{value!r}.obj"
            export_obj(mesh, out_dir / name)
    else:
        report = result
    Path(args.out).write_text(report.to_json())
    return 0


def _cmd_preset(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(f"{name}\t{_PRESET_BLURBS.get(name, '')}")
        return 0
    if not args.name:
        raise _UsageError("preset emit requires a name")
    scene = preset(args.name)
    print(f"name: {scene.name}")
    if isinstance(scene, ParametricScene):
        s = scene.spec
        print("kind: parametric")
        print(f"fx: {format_expr(s.fx)}")
        print(f"fy: {format_expr(s.fy)}")
        print(f"fz: {format_expr(s.fz)}")
        print(f"u: {s.u_min},{s.u_max},{s.nu}")
        print(f"v: {s.v_min},{s.v_max},{s.nv}")
        flags = [n for n, on in zip("xyz", s.sign_axes) if on]
        print(f"sign_axes: {','.join(flags) or '-'}")
        return 0
    g = scene.grid
    print("kind: implicit")
    print(f"expr: {format_expr(scene.expr)}")
    print(f"bounds: {g.x_min},{g.x_max},{g.y_min},{g.y_max},{g.z_min},{g.z_max}")
    print(f"grid: {g.nx},{g.ny},{g.nz}")
    params = " ".join(f"{k}={v}" for k, v in sorted(scene.params.items()))
    print(f"params: {params or '-'}")
    print(f"iso: {scene.iso}")
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "sample": _cmd_sample,
    "mesh": _cmd_mesh,
    "sweep": _cmd_sweep,
    "preset": _cmd_preset,
}


def run(argv=None) -> int:
    """Execute one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ExprSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FieldFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (UnknownPresetError, UnboundParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
