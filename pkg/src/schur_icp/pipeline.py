"""Outer point-to-plane ICP loop and registration-quality metrics."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .characterize import orthogonalize
from . import mitigate as mt
from .cloud import DEFAULT_NORMAL_K, PointCloud, SpatialIndex, estimate_normals
from .detect import DEFAULT_KAPPA_TH, DegeneracyMask, condition_number, detect
from .errors import DivergedIncrement, InvalidSpec, NoCorrespondences, SingularSystem
from .linearize import assemble_system, find_correspondences
from .se3 import RigidTransform, apply_increment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    kappa_th: float = DEFAULT_KAPPA_TH
    kappa_tg: float = mt.DEFAULT_KAPPA_TG
    max_icp_iterations: int = 30
    trans_convergence: float = 1e-3
    rot_convergence: float = 1e-5
    corr_radius: float = 1.0
    pcg_tol: float = mt.DEFAULT_PCG_TOL
    pcg_max_iter: int = mt.DEFAULT_PCG_MAX_ITER
    solver: mt.Solver = mt.Solver.DCREG_PCG
    treg_lambda: float = mt.DEFAULT_TREG_LAMBDA
    normal_k: int = DEFAULT_NORMAL_K

    def __post_init__(self):
        object.__setattr__(self, "solver", mt.Solver(self.solver))
        numeric = [self.kappa_th, self.kappa_tg, self.max_icp_iterations, self.trans_convergence,
                   self.rot_convergence, self.corr_radius, self.pcg_tol, self.pcg_max_iter,
                   self.treg_lambda, self.normal_k]
        if any(not (v > 0) for v in numeric):
            raise InvalidSpec("all solver parameters must be positive")
        if not self.kappa_tg > 1 or not self.kappa_th > 1:
            raise InvalidSpec("kappa_th and kappa_tg must exceed 1")

    def replace(self, **kw) -> "SolverConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["solver"] = self.solver.value
        return d


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    pose: RigidTransform
    correspondences: int
    rmse: float
    rot_update: float
    trans_update: float
    kappa_r: float
    kappa_t: float
    diag_kappa_r: float
    diag_kappa_t: float
    full_kappa: float
    mask: DegeneracyMask
    pcg_iterations: int = 0
    preconditioned_kappa: float = float("nan")
    # Schur condition numbers of the clamped spectra the step was solved with
    mitigated_kappa_r: float = float("nan")
    mitigated_kappa_t: float = float("nan")


@dataclass
class RegistrationResult:
    final_pose: RigidTransform
    converged: bool
    reason: str
    trace: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.trace)


def _safe_kappa(w) -> float:
    try:
        return condition_number(w)
    except Exception:
        return float("inf")


def _solve_step(system, spec, mask, config: SolverConfig):
    """Return ``(PoseIncrement, pcg_iterations, preconditioned_kappa)``."""
    solver = config.solver
    if solver is mt.Solver.PLAIN:
        return mt.solve_plain(system, system.g), 0, float("nan")
    if solver is mt.Solver.TREG:
        if mask.any:
            return mt.solve_treg(system, system.g, config.treg_lambda), 0, float("nan")
        return mt.solve_plain(system, system.g), 0, float("nan")
    rot_basis = orthogonalize(spec.eigvecs_r).basis
    trans_basis = orthogonalize(spec.eigvecs_t).basis
    if solver is mt.Solver.SR:
        return mt.solve_sr(system, system.g, mask, (rot_basis, trans_basis)), 0, float("nan")
    if solver is mt.Solver.TSVD:
        return mt.solve_tsvd(system, system.g, mask, (rot_basis, trans_basis)), 0, float("nan")
    P = mt.build_preconditioner(spec, config.kappa_tg, rot_basis, trans_basis)
    out = mt.pcg_solve(system, system.g, P, config.pcg_tol, config.pcg_max_iter)
    return out.increment, out.inner_iterations, out.preconditioned_condition_estimate


def register(source: PointCloud, target: PointCloud, init: Optional[RigidTransform] = None,
             config: Optional[SolverConfig] = None, target_index: Optional[SpatialIndex] = None,
             ground_truth: Optional[RigidTransform] = None, inlier_radius: float = 0.05) -> RegistrationResult:
    """Align ``source`` onto ``target`` starting from ``init``.

    Each iteration re-matches correspondences, assembles the system, runs
    Schur detection and solves the step with the configured method.
    Convergence needs both the translation and the rotation update below
    their thresholds.
    """
    config = config or SolverConfig()
    pose = init or RigidTransform.identity()
    if len(source) == 0 or len(target) == 0:
        raise NoCorrespondences("empty input cloud")
    if not target.has_normals:
        target = estimate_normals(target, config.normal_k)
    index = target_index if target_index is not None and target_index.cloud is target else SpatialIndex(target)

    trace = []
    converged, reason = False, "max_iterations"
    for it in range(config.max_icp_iterations):
        try:
            corrs = find_correspondences(source, index, pose, config.corr_radius)
        except NoCorrespondences:
            reason = "no_correspondences"
            break
        system = assemble_system(corrs)
        spec, mask = detect(system, config.kappa_th)
        try:
            xi, inner, pkappa = _solve_step(system, spec, mask, config)
            pose = apply_increment(pose, xi)
        except (DivergedIncrement, SingularSystem) as exc:
            reason = type(exc).__name__
            log.warning("iteration %d aborted: %s", it, exc)
            break
        mk_r = mk_t = float("nan")
        if config.solver is mt.Solver.DCREG_PCG:
            mk_r = _safe_kappa(mt.clamp_eigenvalues(spec.eigvals_r, config.kappa_tg))
            mk_t = _safe_kappa(mt.clamp_eigenvalues(spec.eigvals_t, config.kappa_tg))
        trace.append(IterationTrace(
            iteration=it,
            pose=pose,
            correspondences=len(corrs),
            rmse=float(np.sqrt(system.residual_sq_sum / system.count)),
            rot_update=xi.rotation_norm,
            trans_update=xi.translation_norm,
            kappa_r=spec.kappa_r,
            kappa_t=spec.kappa_t,
            diag_kappa_r=_safe_kappa(np.linalg.eigvalsh(system.h_rr)),
            diag_kappa_t=_safe_kappa(np.linalg.eigvalsh(system.h_tt)),
            full_kappa=_safe_kappa(np.linalg.eigvalsh(system.H)),
            mask=mask,
            pcg_iterations=inner,
            preconditioned_kappa=pkappa,
            mitigated_kappa_r=mk_r,
            mitigated_kappa_t=mk_t,
        ))
        if xi.translation_norm < config.trans_convergence and xi.rotation_norm < config.rot_convergence:
            converged, reason = True, "converged"
            break

    metrics = registration_metrics(source, index, pose, inlier_radius, ground_truth)
    return RegistrationResult(pose, converged, reason, trace, metrics)


def registration_metrics(source: PointCloud, target_index: SpatialIndex, pose: RigidTransform,
                         inlier_radius: float = 0.05, ground_truth: Optional[RigidTransform] = None) -> dict:
    fit, rmse = fitness_and_rmse(source, target_index, pose, inlier_radius)
    aligned = source.transformed(pose)
    out = {"fitness": fit, "rmse": rmse, "chamfer": chamfer_distance(aligned, target_index.cloud)}
    if ground_truth is not None:
        te, re = pose_error(pose, ground_truth)
        out["trans_error"] = te
        out["rot_error"] = re
    return out


def fitness_and_rmse(source: PointCloud, target_index: SpatialIndex, pose: RigidTransform,
                     inlier_radius: float):
    """Percent of source points within ``inlier_radius`` of the target, and their RMS distance."""
    dist, _ = target_index.nearest(pose.apply(source.points), k=1)
    inl = dist <= inlier_radius
    if not np.any(inl):
        return 0.0, 0.0
    return 100.0 * float(np.mean(inl)), float(np.sqrt(np.mean(dist[inl] ** 2)))


def chamfer_distance(a: PointCloud, b: PointCloud) -> float:
    """Symmetric mean nearest-neighbour distance, averaged over both directions."""
    if len(a) == 0 or len(b) == 0:
        raise NoCorrespondences("chamfer distance of an empty cloud")
    d_ab, _ = SpatialIndex(b).nearest(a.points, k=1)
    d_ba, _ = SpatialIndex(a).nearest(b.points, k=1)
    return 0.5 * (float(np.mean(d_ab)) + float(np.mean(d_ba)))


def pose_error(estimate: RigidTransform, ground_truth: RigidTransform):
    """Translation error (m) and rotation angle of ``R_e R_g^T`` (degrees)."""
    te = float(np.linalg.norm(estimate.translation - ground_truth.translation))
    dR = estimate.rotation @ ground_truth.rotation.T
    # atan2 of (sin, cos) keeps precision for small angles where arccos(trace) does not
    cos_a = (np.trace(dR) - 1.0) / 2.0
    sin_a = 0.5 * np.linalg.norm([dR[2, 1] - dR[1, 2], dR[0, 2] - dR[2, 0], dR[1, 0] - dR[0, 1]])
    return te, float(np.degrees(np.arctan2(sin_a, cos_a)))
