"""Correspondence search and Gauss-Newton system assembly for point-to-plane ICP.

Parameter order is ``[phi; dt]`` throughout. For a correspondence with
transformed source point ``p``, target point ``q`` and target normal ``n``::

    r = n . (p - q)
    J = n^T [ -[p]x | I3 ] = [ (p x n)^T , n^T ]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, SpatialIndex
from .errors import NoCorrespondences
from .se3 import RigidTransform, skew

# rows per partial sum; partial sums are added in index order so the result
# never depends on how chunks were scheduled
REDUCTION_CHUNK = 4096


@dataclass(frozen=True)
class Correspondence:
    source_point: np.ndarray
    target_point: np.ndarray
    target_normal: np.ndarray
    distance: float


@dataclass(frozen=True)
class CorrespondenceSet:
    """Struct-of-arrays form of a correspondence list, in source-index order."""

    source_index: np.ndarray
    target_index: np.ndarray
    source_points: np.ndarray
    target_points: np.ndarray
    target_normals: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.source_index)

    def __getitem__(self, i) -> Correspondence:
        return Correspondence(
            self.source_points[i], self.target_points[i], self.target_normals[i], float(self.distances[i])
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_list(cls, items) -> "CorrespondenceSet":
        items = list(items)
        n = len(items)
        if n == 0:
            z = np.zeros((0, 3))
            return cls(np.zeros(0, int), np.zeros(0, int), z, z, z, np.zeros(0))
        return cls(
            np.arange(n),
            np.arange(n),
            np.array([c.source_point for c in items], dtype=float),
            np.array([c.target_point for c in items], dtype=float),
            np.array([c.target_normal for c in items], dtype=float),
            np.array([c.distance for c in items], dtype=float),
        )

    def concat(self, other: "CorrespondenceSet") -> "CorrespondenceSet":
        return CorrespondenceSet(
            *(np.concatenate([a, b]) for a, b in zip(
                (self.source_index, self.target_index, self.source_points,
                 self.target_points, self.target_normals, self.distances),
                (other.source_index, other.target_index, other.source_points,
                 other.target_points, other.target_normals, other.distances),
            ))
        )


@dataclass(frozen=True)
class HessianSystem:
    """Blocks of ``H = sum J^T J`` and ``g = sum J^T r``."""

    h_rr: np.ndarray
    h_rt: np.ndarray
    h_tt: np.ndarray
    g_r: np.ndarray
    g_t: np.ndarray
    residual_sq_sum: float = 0.0
    count: int = 0

    @property
    def h_tr(self) -> np.ndarray:
        return self.h_rt.T

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.h_rr, self.h_rt], [self.h_rt.T, self.h_tt]])

    @property
    def g(self) -> np.ndarray:
        return np.concatenate([self.g_r, self.g_t])

    @classmethod
    def from_dense(cls, H, g=None, residual_sq_sum=0.0, count=0) -> "HessianSystem":
        H = np.asarray(H, dtype=float)
        H = 0.5 * (H + H.T)
        g = np.zeros(6) if g is None else np.asarray(g, dtype=float).reshape(6)
        return cls(H[:3, :3].copy(), H[:3, 3:].copy(), H[3:, 3:].copy(), g[:3].copy(), g[3:].copy(),
                   float(residual_sq_sum), int(count))


def find_correspondences(source: PointCloud, target_index: SpatialIndex, pose: RigidTransform,
                         max_distance: float) -> CorrespondenceSet:
    """Single nearest target neighbour per transformed source point, gated by distance."""
    if max_distance <= 0:
        raise ValueError("max_distance must be positive")
    target = target_index.cloud
    if target.normals is None:
        raise ValueError("target cloud has no normals")
    moved = pose.apply(source.points)
    dist, idx = target_index.nearest(moved, k=1)
    keep = (dist <= max_distance) & target.valid_normal_mask[idx]
    src = np.flatnonzero(keep)
    if len(src) == 0:
        raise NoCorrespondences(f"no source point within {max_distance} m of a valid target point")
    tgt = idx[keep]
    return CorrespondenceSet(
        source_index=src,
        target_index=tgt,
        source_points=moved[keep],
        target_points=target.points[tgt],
        target_normals=target.normals[tgt],
        distances=dist[keep],
    )


def residual_jacobian(c: Correspondence):
    """Scalar residual and 1x6 Jacobian row of a single correspondence."""
    p = np.asarray(c.source_point, dtype=float)
    n = np.asarray(c.target_normal, dtype=float)
    r = float(n @ (p - np.asarray(c.target_point, dtype=float)))
    J = np.concatenate([n @ (-skew(p)), n])
    return r, J


def stacked_jacobian(corrs: CorrespondenceSet):
    """Vectorised residuals (m,) and Jacobian (m, 6) for a whole set."""
    p, q, n = corrs.source_points, corrs.target_points, corrs.target_normals
    r = np.einsum("ij,ij->i", n, p - q)
    J = np.hstack([np.cross(p, n), n])
    return r, J


def assemble_system(corrs) -> HessianSystem:
    """Accumulate the blocks H_RR, H_Rt, H_tt and the gradient, chunk by chunk."""
    if not isinstance(corrs, CorrespondenceSet):
        corrs = CorrespondenceSet.from_list(corrs)
    m = len(corrs)
    if m == 0:
        raise NoCorrespondences("empty correspondence set")
    r, J = stacked_jacobian(corrs)
    H = np.zeros((6, 6))
    g = np.zeros(6)
    for start in range(0, m, REDUCTION_CHUNK):
        Jc = J[start:start + REDUCTION_CHUNK]
        rc = r[start:start + REDUCTION_CHUNK]
        H += Jc.T @ Jc
        g += Jc.T @ rc
    H = 0.5 * (H + H.T)
    return HessianSystem(
        h_rr=H[:3, :3].copy(),
        h_rt=H[:3, 3:].copy(),
        h_tt=H[3:, 3:].copy(),
        g_r=g[:3].copy(),
        g_t=g[3:].copy(),
        residual_sq_sum=float(r @ r),
        count=m,
    )
