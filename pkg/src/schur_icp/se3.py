"""Minimal SO(3)/SE(3) arithmetic.

Rotations are updated by *left* multiplication, ``R <- exp([phi]x) R`` and
``t <- t + dt``. The linearizer builds its Jacobians against points that are
already expressed in the target frame, so the rotational increment acts about
the target-frame origin; keep both sides consistent when changing either.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedIncrement

_SMALL_ANGLE = 1e-8


def skew(v) -> np.ndarray:
    """Return the 3x3 cross-product matrix ``[v]x`` so that ``[v]x @ w == v x w``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(phi) -> np.ndarray:
    """Rodrigues' formula. Falls back to a second-order series near zero."""
    phi = np.asarray(phi, dtype=float).reshape(3)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (inverse of :func:`exp_so3`)."""
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-7:
        return 0.5 * w
    if np.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; read the axis off R + I
        M = (R + np.eye(3)) / 2.0
        axis = M[:, int(np.argmax(np.diag(M)))]
        axis = axis / np.linalg.norm(axis)
        if np.dot(w, axis) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * np.sin(theta)) * w


def _project_to_so3(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RigidTransform:
    """Pose ``{R, t}`` mapping source coordinates into the target frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("non-finite pose")
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not in SO(3)")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, T) -> "RigidTransform":
        T = np.asarray(T, dtype=float)
        return cls(_project_to_so3(T[:3, :3]), T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self * other``: apply ``other`` first."""
        R = _project_to_so3(self.rotation @ other.rotation)
        return RigidTransform(R, self.rotation @ other.translation + self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform an (N, 3) array (or a single 3-vector)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class PoseIncrement:
    """Minimal update ``xi = [phi; dt]``: axis-angle rotation then translation."""

    phi: np.ndarray
    delta_t: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(3)
        dt = np.asarray(self.delta_t, dtype=float).reshape(3)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(dt))):
            raise DivergedIncrement("non-finite increment")
        object.__setattr__(self, "phi", _frozen(phi))
        object.__setattr__(self, "delta_t", _frozen(dt))

    @classmethod
    def from_vector(cls, xi) -> "PoseIncrement":
        xi = np.asarray(xi, dtype=float).reshape(6)
        return cls(xi[:3], xi[3:])

    @classmethod
    def zero(cls) -> "PoseIncrement":
        return cls(np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.phi, self.delta_t])

    @property
    def rotation_norm(self) -> float:
        return float(np.linalg.norm(self.phi))

    @property
    def translation_norm(self) -> float:
        return float(np.linalg.norm(self.delta_t))


def apply_increment(T: RigidTransform, xi: PoseIncrement) -> RigidTransform:
    """``R <- exp(phi) R``, ``t <- t + dt``. Rejects ``|phi| >= pi``."""
    if xi.rotation_norm >= np.pi:
        raise DivergedIncrement(f"rotation increment {xi.rotation_norm:.3f} rad >= pi")
    R = _project_to_so3(exp_so3(xi.phi) @ T.rotation)
    return RigidTransform(R, T.translation + xi.delta_t)


def transform_point(T: RigidTransform, p) -> np.ndarray:
    return T.rotation @ np.asarray(p, dtype=float).reshape(3) + T.translation
