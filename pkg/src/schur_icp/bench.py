"""Self-registration benchmark over synthetic scenes and solver variants.

Each run perturbs the generated scene, registers the perturbed copy back onto
the original and records pose error, fitness and timing. Reports are JSON
lines (one run per line) with a CSV summary next to them; the row layout is
described in ``docs/report_schema.md``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .cloud import PointCloud
from .mitigate import Solver
from .pipeline import RegistrationResult, SolverConfig, register
from .scenes import SceneSpec, gen_scene, perturb_pose
from .se3 import RigidTransform

SCHEMA_VERSION = 1
ALL_SOLVERS = tuple(s.value for s in Solver)
NORMAL_SOURCES = ("estimated", "analytic")

CSV_FIELDS = ("scene", "solver", "seed", "converged", "reason", "iterations", "rot_error_deg",
              "trans_error_m", "fitness_pct", "rmse_m", "chamfer_m", "first_mask_rot",
              "first_mask_trans", "wall_ms", "config_hash")


@dataclass(frozen=True)
class Perturbation:
    rot_axis: str = "z"
    rot_deg: float = 2.0
    trans_axis: str = "z"
    trans_m: float = 0.5

    def pose(self, seed: Optional[int] = None) -> RigidTransform:
        return perturb_pose(self.rot_axis, self.rot_deg, self.trans_axis, self.trans_m, seed)


@dataclass(frozen=True)
class BenchRecord:
    scene: dict
    solver: str
    perturbation: dict
    config: dict
    config_hash: str
    normals: str
    converged: bool
    reason: str
    iterations: int
    rot_error_deg: float
    trans_error_m: float
    fitness_pct: float
    rmse_m: float
    chamfer_m: float
    first_mask_rot: str
    first_mask_trans: str
    final_pose: list
    wall_ms: float
    schema_version: int = SCHEMA_VERSION

    def metrics(self) -> dict:
        """Everything except the wall-clock field, for determinism comparisons."""
        d = dataclasses.asdict(self)
        d.pop("wall_ms")
        return d


@dataclass
class BenchReport:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def by_solver(self) -> dict:
        return {r.solver: r for r in self.records}


def config_hash(scene: SceneSpec, config: SolverConfig, perturbation: Perturbation, normals: str) -> str:
    payload = {"scene": scene.to_dict(), "config": config.to_dict(),
               "perturbation": dataclasses.asdict(perturbation), "normals": normals}
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def parse_solvers(spec) -> list:
    """``"all"``, a comma-separated string or an iterable of names -> validated names."""
    if isinstance(spec, str):
        if spec.strip() == "all":
            return list(ALL_SOLVERS)
        spec = [s for s in spec.split(",") if s.strip()]
    return [Solver(s.strip()).value for s in spec]


def _record(scene, solver, pert, config, chash, normals, result: RegistrationResult, wall_ms) -> BenchRecord:
    m = result.metrics
    rot_bits, trans_bits = result.trace[0].mask.bits() if result.trace else ("", "")
    return BenchRecord(
        scene=scene.to_dict(),
        solver=solver,
        perturbation=dataclasses.asdict(pert),
        config=config.to_dict(),
        config_hash=chash,
        normals=normals,
        converged=result.converged,
        reason=result.reason,
        iterations=result.iterations,
        rot_error_deg=m["rot_error"],
        trans_error_m=m["trans_error"],
        fitness_pct=m["fitness"],
        rmse_m=m["rmse"],
        chamfer_m=m["chamfer"],
        first_mask_rot=rot_bits,
        first_mask_trans=trans_bits,
        final_pose=result.final_pose.as_matrix().tolist(),
        wall_ms=wall_ms,
    )


def benchmark_clouds(scene: SceneSpec, normals: str = "estimated"):
    """Target cloud for a scene; ``estimated`` drops analytic normals so registration re-estimates them."""
    if normals not in NORMAL_SOURCES:
        raise ValueError(f"normals must be one of {NORMAL_SOURCES}")
    cloud = gen_scene(scene)
    return cloud if normals == "analytic" else PointCloud(cloud.points)


def run_benchmark(scene: SceneSpec, solvers: Sequence = ALL_SOLVERS, config: Optional[SolverConfig] = None,
                  out=None, perturbation: Optional[Perturbation] = None, normals: str = "estimated",
                  workers: int = 1) -> BenchReport:
    """Self-register the perturbed scene with each solver; rows keep the solver order given."""
    config = config or SolverConfig()
    pert = perturbation or Perturbation()
    names = parse_solvers(solvers)
    chash = config_hash(scene, config, pert, normals)
    if not names:
        report = BenchReport([])
        if out is not None:
            write_report(report, out)
        return report

    target = benchmark_clouds(scene, normals)
    init = pert.pose(scene.seed)
    truth = RigidTransform.identity()

    def one(name):
        cfg = config.replace(solver=name)
        t0 = time.perf_counter()
        res = register(target, target, init, cfg, ground_truth=truth)
        return _record(scene, name, pert, cfg, chash, normals, res, 1000.0 * (time.perf_counter() - t0))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, names))  # map preserves input order
    else:
        records = [one(n) for n in names]
    report = BenchReport(records)
    if out is not None:
        write_report(report, out)
    return report


def serialize(report: BenchReport) -> str:
    return "".join(json.dumps(dataclasses.asdict(r), sort_keys=True) + "\n" for r in report.records)


def parse(text: str) -> BenchReport:
    records = []
    for ln, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        row = json.loads(line)
        if row.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"line {ln}: unsupported schema version {row.get('schema_version')!r}")
        records.append(BenchRecord(**row))
    return BenchReport(records)


def summary_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in report.records:
        row = {k: getattr(r, k, None) for k in CSV_FIELDS}
        row["scene"] = r.scene["kind"]
        row["seed"] = r.scene["seed"]
        w.writerow(row)
    return buf.getvalue()


def report_paths(out) -> tuple[Path, Path]:
    """``out`` may name the ``.jsonl`` file or a bare prefix; the CSV sits beside it."""
    p = Path(out)
    if p.suffix in (".jsonl", ".csv"):
        p = p.with_suffix("")
    return p.with_suffix(".jsonl"), p.with_suffix(".csv")


def write_report(report: BenchReport, out) -> tuple[Path, Path]:
    jsonl, csv_path = report_paths(out)
    if jsonl.parent and not jsonl.parent.exists():
        jsonl.parent.mkdir(parents=True)
    jsonl.write_text(serialize(report))
    csv_path.write_text(summary_csv(report))
    return jsonl, csv_path


def read_report(path) -> BenchReport:
    return parse(Path(path).read_text())
