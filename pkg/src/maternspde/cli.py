"""Command-line front end.

Exit codes: 0 success, 1 verification failed, 2 invalid configuration,
3 file I/O problem, 4 solver failure. Every command writes
``manifest.json`` into its output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigurationError, DegenerateGeometryError, DomainError, FitError,
                     MeshIOError, SolverError)
from .fem import BoundaryCondition
from .grf import GrfConfig, GrfSampler
from .mesh import Mesh, StructuredGridSpec, generate_structured_grid
from .stats import probe_pairs, verify_covariance
from .transforms import PerturbSpec, ThresholdSpec, combine_fields, displace_vertices, threshold
from .vtkio import load_mesh, read_vtk, write_mesh, write_vtk

log = logging.getLogger("maternspde")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3, 4


class _Manifest:
    def __init__(self, command: str, argv: list[str]):
        self.data = {"tool": "maternspde", "version": __version__, "command": command,
                     "argv": argv, "python": platform.python_version(),
                     "numpy": np.__version__, "config": {}, "inputs": {}, "outputs": [],
                     "metrics": {}}
        self.start = time.perf_counter()

    def input(self, path):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.data["inputs"][str(path)] = digest

    def output(self, path):
        self.data["outputs"].append(str(path))

    def write(self, out_dir):
        self.data["metrics"]["wall_time_s"] = time.perf_counter() - self.start
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    return str(obj)


# ---- argument types -------------------------------------------------------

def _positive(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def _lengths(text):
    parts = text.split(",")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lx[,ly[,lz]], got {text!r}") from None
    if not 1 <= len(values) <= 3 or not all(v > 0 for v in values):
        raise argparse.ArgumentTypeError(f"need 1-3 positive lengths, got {text!r}")
    return values


def _grid(text):
    try:
        cells = [int(c) for c in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NX[xNY], got {text!r}") from None
    if not 1 <= len(cells) <= 2 or min(cells) < 1:
        raise argparse.ArgumentTypeError(f"expected NX[xNY] with positive counts, got {text!r}")
    return cells


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") \
            from None


def _bc(text):
    kind, _, attrs = text.partition(":")
    try:
        return BoundaryCondition(kind.strip().lower(), [int(a) for a in attrs.split(",") if a])
    except (ValueError, ConfigurationError):
        raise argparse.ArgumentTypeError(
            f"expected dirichlet:ATTRS or neumann:ATTRS, got {text!r}") from None


def _nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _seed(text):
    value = _nonneg_int(text)
    if value >= 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


# ---- shared helpers -------------------------------------------------------

def _add_mesh_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="mesh file (.vtk legacy ASCII or .obj)")
    src.add_argument("--grid", type=_grid, help="structured grid NX or NXxNY")
    p.add_argument("--lower", type=_floats, help="grid lower corner (default 0)")
    p.add_argument("--upper", type=_floats, help="grid upper corner (default 1)")


def _add_grf_args(p, sweep: bool):
    nargs = "+" if sweep else None
    p.add_argument("--nu", type=_positive, nargs=nargs, default=[1.0] if sweep else 1.0,
                   help="smoothness (several values sweep)" if sweep else "smoothness")
    p.add_argument("--l", type=_lengths, nargs=nargs, default=[(0.1,)] if sweep else (0.1,),
                   metavar="LX[,LY[,LZ]]", help="correlation length(s)")
    p.add_argument("--rotation", type=float, default=0.0, help="tensor rotation in radians")
    p.add_argument("--bc", type=_bc, action="append", default=[],
                   help="boundary condition KIND:ATTR[,ATTR...]; unlisted boundary is Neumann")
    p.add_argument("--sigma", type=_positive, default=1.0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--solver", choices=("cg", "direct"), default="cg")
    p.add_argument("--solver-tol", type=_positive, default=1e-10)
    p.add_argument("--rational-tol", type=_positive, default=1e-8)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _mesh_from_args(args, manifest, default_grid=None) -> Mesh:
    if args.mesh:
        mesh = load_mesh(args.mesh)
        manifest.input(args.mesh)
        return mesh
    cells = args.grid or default_grid
    if cells is None:
        raise ConfigurationError("one of --mesh or --grid is required")
    d = len(cells)
    lower = args.lower or [0.0] * d
    upper = args.upper or [1.0] * d
    if len(lower) != d or len(upper) != d:
        raise ConfigurationError(f"--lower/--upper need {d} values for a {d}D grid")
    spec = StructuredGridSpec(lower, upper, cells)
    manifest.data["config"]["grid"] = {"cells": cells, "lower": lower, "upper": upper}
    return generate_structured_grid(spec)


def _grf_config(args, nu, lengths, seed) -> GrfConfig:
    return GrfConfig(nu=nu, lengths=lengths, rotation=args.rotation, sigma=args.sigma,
                     bc=args.bc, seed=seed, rational_tol=args.rational_tol,
                     solver_tol=args.solver_tol, solver=args.solver)


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise MeshIOError(f"cannot create output directory {out}: {exc}", path=str(out)) \
            from exc
    return out


def _read_field(path, name=None):
    mesh, data = read_vtk(path)
    if not data:
        raise MeshIOError(f"{path} holds no point data", path=str(path))
    if name is None:
        name = "grf" if "grf" in data else next(iter(data))
    if name not in data:
        raise MeshIOError(f"{path} has no point array {name!r}", path=str(path))
    return mesh, np.asarray(data[name], dtype=float)


# ---- commands ---------------------------------------------------------------

def cmd_sample(args, manifest) -> int:
    mesh = _mesh_from_args(args, manifest)
    out = _out_dir(args.out)
    combos = list(itertools.product(args.nu, args.l))
    sweep = len(combos) > 1
    threads = max(1, args.threads)
    manifest.data["config"].update({"nu": args.nu, "l": args.l, "n": args.n,
                                    "seed": args.seed, "reuse_noise": args.reuse_noise,
                                    "threads": threads, "start_index": args.start_index})
    runs = []
    for c, (nu, lengths) in enumerate(combos):
        seed = args.seed if (args.reuse_noise or not sweep) else (args.seed + c) % 2 ** 64
        cfg = _grf_config(args, nu, lengths, seed)
        sampler = GrfSampler(mesh, cfg)
        target = out / f"nu{nu:g}_l{'x'.join(f'{v:g}' for v in lengths)}" if sweep else out
        target.mkdir(exist_ok=True)
        samples = sampler.batch(args.n, start=args.start_index, threads=threads)
        for s in samples:
            path = target / f"sample_{s.index:04d}.vtk"
            write_vtk(path, mesh, {"grf": s.values})
            manifest.output(path)
        runs.append({"grf": cfg.to_dict(), "fingerprint": cfg.fingerprint(),
                     "rational_terms": 0 if sampler.ra is None else sampler.ra.num_terms})
        log.info("wrote %d samples for nu=%g l=%s", args.n, nu, lengths)
    manifest.data["config"]["runs"] = runs
    return EXIT_OK


def cmd_verify(args, manifest) -> int:
    mesh = _mesh_from_args(args, manifest, default_grid=[1000])
    out = _out_dir(args.out)
    cfg = _grf_config(args, args.nu, args.l, args.seed)
    d = mesh.ambient_dim
    center = args.center or list(0.5 * (mesh.nodes.min(axis=0) + mesh.nodes.max(axis=0)))
    direction = np.zeros(d)
    direction[:len(args.direction[:d])] = args.direction[:d]
    if np.linalg.norm(direction) == 0:
        raise ConfigurationError("--direction must be nonzero")
    direction /= np.linalg.norm(direction)
    if len(center) != d:
        raise ConfigurationError(f"--center needs {d} coordinates")
    probes = probe_pairs(mesh, center, [r * direction for r in args.distances])
    manifest.data["config"].update({"grf": cfg.to_dict(), "n": args.n, "probes": probes,
                                    "allow_boundary": args.allow_boundary})
    report = verify_covariance(mesh, cfg, args.n, probes, args.allow_boundary,
                               args.abs_floor, threads=max(1, args.threads))
    csv_path = out / "covariance.csv"
    report.to_csv(csv_path)
    manifest.output(csv_path)
    manifest.data["metrics"]["passed"] = report.passed
    print(report.summary())
    if not report.passed:
        for p in report.pairs:
            if not p.passed:
                print(f"  FAIL pair {p.pair_id}: dist={p.distance:.6g} emp={p.empirical:.6g} "
                      f"analytic={p.analytic:.6g} stderr={p.stderr:.3g}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _optimize_mesh(spec: str, cfg, manifest):
    from .topopt.symmetry import heat_sink_mesh, mirror_map
    if spec.startswith("grid:"):
        cells = _grid(spec[5:])
        if len(cells) != 2 or cells[0] != cells[1]:
            raise ConfigurationError("heat-sink grids are square: mesh=grid:NxN")
        mesh, length = heat_sink_mesh(cells[0], cfg.symmetrize, cfg.dirichlet_length)
        if cfg.symmetrize:
            full, _ = heat_sink_mesh(cells[0], False, cfg.dirichlet_length)
            return mesh, length, full, mirror_map(full, mesh)[0]
        return mesh, length, None, None
    mesh = load_mesh(spec)
    manifest.input(spec)
    return mesh, None, None, None


def cmd_optimize(args, manifest) -> int:
    from .topopt import build_problem, optimize
    from .topopt.config import config_to_mapping, load_config
    cfg, run = load_config(args.config)
    manifest.input(args.config)
    if args.max_iters is not None:
        cfg = cfg.with_(max_iters=args.max_iters)
    out = _out_dir(args.out or run.get("out", "."))
    mesh_spec = args.mesh or run.get("mesh")
    if not mesh_spec:
        raise ConfigurationError("config needs a mesh key (file path or grid:NxN)")
    mesh, length, full, mapping = _optimize_mesh(mesh_spec, cfg, manifest)
    if length is not None:
        log.info("support segment realized with length %.6g (requested %.6g)", length,
                 cfg.dirichlet_length)
    manifest.data["config"].update({"optimization": config_to_mapping(cfg), "mesh": mesh_spec,
                                    "realized_support_length": length})
    problem = build_problem(mesh, cfg)
    try:
        state = optimize(problem, out_dir=out, output_map=mapping, output_mesh=full)
    except KeyboardInterrupt:
        manifest.data["metrics"]["interrupted"] = True
        manifest.output(out / "checkpoint.vtk")
        manifest.write(out)
        print("interrupted; latest design written to checkpoint.vtk", file=sys.stderr)
        return 130
    for name in ("history.csv", "design.vtk"):
        manifest.output(out / name)
    manifest.data["metrics"].update({"iterations": state.iterations,
                                     "objective": state.objective, "volume": state.volume,
                                     "converged": state.converged})
    print(f"objective {state.objective:.6g} volume {state.volume:.6f} after "
          f"{state.iterations} iterations")
    return EXIT_OK


def cmd_threshold(args, manifest) -> int:
    mesh, values = _read_field(args.field, args.name)
    manifest.input(args.field)
    spec = ThresholdSpec(args.lo, args.hi, args.inside, args.outside)
    out = Path(args.out)
    _out_dir(out.parent)
    write_vtk(out, mesh, {"grf": threshold(values, spec)})
    manifest.output(out)
    manifest.data["config"].update({"lo": args.lo, "hi": args.hi})
    manifest.write(out.parent)
    return EXIT_OK


def cmd_combine(args, manifest) -> int:
    meshes, fields = [], []
    for path in args.fields:
        m, v = _read_field(path, args.name)
        manifest.input(path)
        meshes.append(m)
        fields.append(v)
    ref = meshes[0]
    for m in meshes[1:]:
        if m.num_nodes != ref.num_nodes or not np.array_equal(m.elements, ref.elements):
            raise ConfigurationError("fields live on different meshes")
    post = ThresholdSpec(args.lo, args.hi) if args.lo is not None else None
    out = Path(args.out)
    _out_dir(out.parent)
    write_vtk(out, ref, {"grf": combine_fields(fields, args.mode, post)})
    manifest.output(out)
    manifest.data["config"].update({"mode": args.mode, "lo": args.lo, "hi": args.hi})
    manifest.write(out.parent)
    return EXIT_OK


def cmd_perturb(args, manifest) -> int:
    mesh = load_mesh(args.mesh)
    manifest.input(args.mesh)
    fmesh, values = _read_field(args.field, args.name)
    manifest.input(args.field)
    if fmesh.num_nodes != mesh.num_nodes:
        raise ConfigurationError("field and mesh have different node counts")
    warnings_out: list[str] = []
    moved = displace_vertices(mesh, values, PerturbSpec(args.alpha), warnings_out)
    for w in warnings_out:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.out)
    _out_dir(out.parent)
    write_mesh(out, moved)
    manifest.output(out)
    manifest.data["config"]["alpha"] = args.alpha
    manifest.data["metrics"]["inverted_faces"] = len(warnings_out)
    manifest.write(out.parent)
    return EXIT_OK


def cmd_replay(args, manifest) -> int:
    try:
        data = json.loads(Path(args.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise MeshIOError(f"cannot read manifest {args.manifest}: {exc}",
                          path=args.manifest) from exc
    argv = list(data["argv"])
    if args.out:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv, out):
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = out
    else:
        argv += ["--out", out]
    return argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maternspde",
                                     description="Matern random fields via the SPDE method")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw field realizations")
    _add_mesh_args(p)
    _add_grf_args(p, sweep=True)
    p.add_argument("--n", type=int, default=1, help="number of samples")
    p.add_argument("--start-index", type=_nonneg_int, default=0)
    p.add_argument("--reuse-noise", action="store_true",
                   help="use the same white noise for every (nu, l) combination")
    p.add_argument("--out", default="samples")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="compare empirical and analytic covariance")
    _add_mesh_args(p)
    _add_grf_args(p, sweep=False)
    p.set_defaults(nu=0.5)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--center", type=_floats)
    p.add_argument("--direction", type=_floats, default=[1.0, 0.0, 0.0])
    p.add_argument("--distances", type=_floats, default=[0.0, 0.05, 0.1, 0.2])
    p.add_argument("--allow-boundary", action="store_true")
    p.add_argument("--abs-floor", type=float, default=None)
    p.add_argument("--out", default="verify")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", help="heat-sink topology optimization")
    p.add_argument("config", help="key=value configuration file")
    p.add_argument("--mesh", help="override the mesh key of the config")
    p.add_argument("--max-iters", type=_nonneg_int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("threshold", help="indicator of [lo, hi)")
    p.add_argument("--field", required=True)
    p.add_argument("--name")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, default=math.inf)
    p.add_argument("--inside", type=float, default=1.0)
    p.add_argument("--outside", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("combine", help="pointwise sum or max of fields")
    p.add_argument("--fields", nargs="+", required=True)
    p.add_argument("--name")
    p.add_argument("--mode", choices=("sum", "max"), default="sum")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float, default=math.inf)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("perturb", help="displace surface vertices along normals")
    p.add_argument("--mesh", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--name")
    p.add_argument("--alpha", type=_positive, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write outputs here instead of the recorded directory")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = _Manifest(args.command, argv)
    try:
        code = args.func(args, manifest)
        if args.command in ("sample", "verify", "optimize"):
            manifest.write(_out_dir(getattr(args, "out", None) or "."))
        return code
    except (ConfigurationError, DomainError, DegenerateGeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, FitError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
