"""Degeneracy-aware point-to-plane ICP.

Schur-complement detection of ill-conditioned motion directions, axis
characterization of those directions, and a clamped-spectrum preconditioned
conjugate-gradient step, plus baseline mitigations and a synthetic benchmark.
"""

from .characterize import AlignedBasis, AxisAlignment, characterize, format_report, orthogonalize, report_rows
from .cloud import PointCloud, SpatialIndex, build_index, estimate_normals, load_cloud, save_cloud, voxel_downsample
from .detect import DegeneracyMask, SchurSpectrum, detect, schur_complements, schur_spectrum, spectrum
from .errors import *  # noqa: F401,F403
from .linearize import CorrespondenceSet, HessianSystem, assemble_system, find_correspondences, stacked_jacobian
from .mitigate import (PcgStatus, Preconditioner, Solver, build_preconditioner, clamp_eigenvalues, pcg_solve,
                       solve_plain, solve_sr, solve_treg, solve_tsvd)
from .pipeline import (RegistrationResult, SolverConfig, chamfer_distance, fitness_and_rmse, pose_error, register,
                       registration_metrics)
from .scenes import SceneSpec, gen_scene, perturb_pose
from .se3 import PoseIncrement, RigidTransform, apply_increment, exp_so3, log_so3, skew

__version__ = "0.1.0"
