"""Command-line entry point: ``register``, ``bench``, ``gen`` and ``inspect``.

Exit status is 0 on success, 1 on a usage error and 2 when the run itself fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .characterize import format_report, report_rows
from .cloud import PointCloud, SpatialIndex, estimate_normals, load_cloud, save_cloud
from .detect import detect
from .errors import InvalidSpec, RegistrationError
from .linearize import assemble_system, find_correspondences
from .mitigate import Solver
from .pipeline import SolverConfig, register
from .scenes import SCENE_KINDS, SceneSpec, gen_scene
from .se3 import RigidTransform, exp_so3

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config_flags(p):
    d = SolverConfig()
    p.add_argument("--kappa-th", type=float, default=d.kappa_th)
    p.add_argument("--kappa-tg", type=float, default=d.kappa_tg)
    p.add_argument("--pcg-tol", type=float, default=d.pcg_tol)
    p.add_argument("--pcg-max-iter", type=int, default=d.pcg_max_iter)
    p.add_argument("--solver", choices=[s.value for s in Solver], default=d.solver.value)
    p.add_argument("--max-iter", type=int, default=d.max_icp_iterations)
    p.add_argument("--corr-radius", type=float, default=d.corr_radius)
    p.add_argument("--treg-lambda", type=float, default=d.treg_lambda)


def _scene_flags(p):
    d = SceneSpec()
    p.add_argument("--scene", choices=SCENE_KINDS, default=d.kind)
    p.add_argument("--points", type=int, default=d.point_count)
    p.add_argument("--noise", type=float, default=d.noise_sigma)
    p.add_argument("--radius", type=float, default=d.radius)
    p.add_argument("--height", type=float, default=d.height)
    p.add_argument("--extent", type=float, default=d.extent)
    p.add_argument("--wall-gap", type=float, default=d.wall_gap)
    p.add_argument("--seed", type=int, default=d.seed)


def _pose_flags(p):
    p.add_argument("--init-rotvec", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("RX", "RY", "RZ"),
                   help="initial rotation as an axis-angle vector in radians")
    p.add_argument("--init-trans", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("TX", "TY", "TZ"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schur-icp", description="Degeneracy-aware point-to-plane ICP.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("register", help="align SOURCE onto TARGET and print the result as JSON")
    p.add_argument("source")
    p.add_argument("target")
    _pose_flags(p)
    _config_flags(p)
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    p.add_argument("--aligned", help="write the aligned source cloud (.ply/.pcd/.xyz)")

    p = sub.add_parser("bench", help="self-register a perturbed synthetic scene with several solvers")
    _scene_flags(p)
    _config_flags(p)
    p.add_argument("--solvers", default="all", help="'all' or a comma-separated list")
    p.add_argument("--rot-axis", choices="xyz", default="z")
    p.add_argument("--rot-deg", type=float, default=bench.Perturbation.rot_deg)
    p.add_argument("--trans-axis", choices="xyz", default="z")
    p.add_argument("--trans-m", type=float, default=bench.Perturbation.trans_m)
    p.add_argument("--normals", choices=bench.NORMAL_SOURCES, default="estimated")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="report prefix or .jsonl path (a .csv summary is written beside it)")

    p = sub.add_parser("gen", help="write a synthetic scene to a cloud file")
    _scene_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect", help="one-shot detection and characterization report")
    p.add_argument("cloud")
    p.add_argument("--target", help="target cloud (defaults to CLOUD itself)")
    _pose_flags(p)
    p.add_argument("--kappa-th", type=float, default=SolverConfig().kappa_th)
    p.add_argument("--corr-radius", type=float, default=SolverConfig().corr_radius)
    p.add_argument("--json", action="store_true", help="emit rows as JSON instead of a table")
    return parser


def _config(a) -> SolverConfig:
    return SolverConfig(kappa_th=a.kappa_th, kappa_tg=a.kappa_tg, pcg_tol=a.pcg_tol, pcg_max_iter=a.pcg_max_iter,
                        solver=a.solver, max_icp_iterations=a.max_iter, corr_radius=a.corr_radius,
                        treg_lambda=a.treg_lambda)


def _scene(a) -> SceneSpec:
    return SceneSpec(kind=a.scene, radius=a.radius, height=a.height, extent=a.extent, wall_gap=a.wall_gap,
                     point_count=a.points, noise_sigma=a.noise, seed=a.seed)


def _init_pose(a) -> RigidTransform:
    return RigidTransform(exp_so3(np.array(a.init_rotvec)), np.array(a.init_trans))


def _with_normals(cloud: PointCloud) -> PointCloud:
    return cloud if cloud.has_normals else estimate_normals(cloud)


def _cmd_register(a, out):
    source, target = load_cloud(a.source), load_cloud(a.target)
    res = register(source, target, _init_pose(a), _config(a))
    payload = {
        "converged": res.converged,
        "reason": res.reason,
        "iterations": res.iterations,
        "final_pose": res.final_pose.as_matrix().tolist(),
        "metrics": res.metrics,
        "config": _config(a).to_dict(),
        "trace": [{"iteration": t.iteration, "rmse": t.rmse, "correspondences": t.correspondences,
                   "kappa_r": t.kappa_r, "kappa_t": t.kappa_t, "full_kappa": t.full_kappa,
                   "mask_rot": t.mask.bits()[0], "mask_trans": t.mask.bits()[1],
                   "pcg_iterations": t.pcg_iterations} for t in res.trace],
    }
    text = json.dumps(payload, indent=2)
    if a.out:
        Path(a.out).write_text(text + "\n")
    else:
        out.write(text + "\n")
    if a.aligned:
        save_cloud(source.transformed(res.final_pose), a.aligned)


def _cmd_bench(a, out):
    pert = bench.Perturbation(a.rot_axis, a.rot_deg, a.trans_axis, a.trans_m)
    solvers = bench.parse_solvers(a.solvers)
    report = bench.run_benchmark(_scene(a), solvers, _config(a), a.out, pert, a.normals, a.workers)
    out.write(bench.summary_csv(report))


def _cmd_gen(a, out):
    cloud = gen_scene(_scene(a))
    save_cloud(cloud, a.out)
    out.write(f"wrote {len(cloud)} points to {a.out}\n")


def _cmd_inspect(a, out):
    source = load_cloud(a.cloud)
    target = _with_normals(load_cloud(a.target) if a.target else source)
    corrs = find_correspondences(source, SpatialIndex(target), _init_pose(a), a.corr_radius)
    spec, mask = detect(assemble_system(corrs), a.kappa_th)
    rows = report_rows(spec, mask)
    if a.json:
        out.write(json.dumps({"mask_rot": mask.bits()[0], "mask_trans": mask.bits()[1],
                              "kappa_r": spec.kappa_r, "kappa_t": spec.kappa_t, "rows": rows}, indent=2) + "\n")
    else:
        rb, tb = mask.bits()
        out.write(f"correspondences {len(corrs)}  kappa_r {spec.kappa_r:.4g}  kappa_t {spec.kappa_t:.4g}  "
                  f"mask rot {rb} trans {tb}\n")
        out.write(format_report(rows) + "\n")


COMMANDS = {"register": _cmd_register, "bench": _cmd_bench, "gen": _cmd_gen, "inspect": _cmd_inspect}


def cli_main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.command == "bench":
            bench.parse_solvers(args.solvers)
        if hasattr(args, "solver"):
            _config(args)
        if hasattr(args, "scene"):
            _scene(args)
    except (UsageError, InvalidSpec) as exc:
        err.write(f"{exc}\n")
        parser.print_help(err)
        return EXIT_USAGE
    except ValueError as exc:  # unknown solver name
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        COMMANDS[args.command](args, out)
    except (RegistrationError, ValueError, OSError) as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
