"""Solvers for the Gauss-Newton step ``H xi = -g``.

The main route is preconditioned conjugate gradients whose preconditioner is
the block-diagonal approximate inverse built from the two Schur spectra with
their small eigenvalues clamped to ``lambda_max / kappa_tg``. Solution
remapping, truncated pseudoinverse and Tikhonov damping are kept as
baselines, plus a plain direct solve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .detect import DegeneracyMask, SchurSpectrum
from .errors import AllZeroSpectrum, SingularSystem
from .linearize import HessianSystem
from .se3 import PoseIncrement

DEFAULT_KAPPA_TG = 10.0
DEFAULT_PCG_TOL = 1e-6
DEFAULT_PCG_MAX_ITER = 10
DEFAULT_TREG_LAMBDA = 100.0
CURVATURE_BREAKDOWN = 1e-15


class Solver(str, enum.Enum):
    DCREG_PCG = "dcreg-pcg"
    SR = "sr"
    TSVD = "tsvd"
    TREG = "treg"
    PLAIN = "plain"


class PcgStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    CURVATURE_BREAKDOWN = "curvature_breakdown"


@dataclass(frozen=True)
class Preconditioner:
    rot_eigvecs: np.ndarray
    trans_eigvecs: np.ndarray
    rot_clamped: np.ndarray
    trans_clamped: np.ndarray
    kappa_tg: float

    def matrix(self) -> np.ndarray:
        """Dense 6x6 operator ``blkdiag(V_R L_R^-1 V_R^T, V_t L_t^-1 V_t^T)``."""
        P = np.zeros((6, 6))
        P[:3, :3] = (self.rot_eigvecs / self.rot_clamped) @ self.rot_eigvecs.T
        P[3:, 3:] = (self.trans_eigvecs / self.trans_clamped) @ self.trans_eigvecs.T
        return P

    @classmethod
    def identity(cls) -> "Preconditioner":
        return cls(np.eye(3), np.eye(3), np.ones(3), np.ones(3), np.inf)


@dataclass(frozen=True)
class SolveOutcome:
    increment: PoseIncrement
    inner_iterations: int = 0
    final_residual_norm: float = 0.0
    status: PcgStatus = PcgStatus.CONVERGED
    preconditioned_condition_estimate: float = float("nan")


def clamp_eigenvalues(eigvals, kappa_tg: float = DEFAULT_KAPPA_TG) -> np.ndarray:
    """Raise every eigenvalue below ``lambda_max / kappa_tg`` up to that floor."""
    if not kappa_tg > 1:
        raise ValueError("kappa_tg must exceed 1")
    w = np.asarray(eigvals, dtype=float)
    top = float(np.max(w))
    if top <= 0:
        raise AllZeroSpectrum("cannot clamp a spectrum with no positive eigenvalue")
    floor = top / kappa_tg
    return np.where(w > floor, w, floor)


def build_preconditioner(spectrum: SchurSpectrum, kappa_tg: float = DEFAULT_KAPPA_TG,
                         rot_basis=None, trans_basis=None) -> Preconditioner:
    """Clamp each Schur spectrum independently and keep the eigenvectors.

    ``rot_basis``/``trans_basis`` replace the raw eigenvectors (column-paired
    with the eigenvalues), e.g. with the axis-aligned Gram-Schmidt bases.
    """
    return Preconditioner(
        rot_eigvecs=np.asarray(spectrum.eigvecs_r if rot_basis is None else rot_basis, dtype=float),
        trans_eigvecs=np.asarray(spectrum.eigvecs_t if trans_basis is None else trans_basis, dtype=float),
        rot_clamped=clamp_eigenvalues(spectrum.eigvals_r, kappa_tg),
        trans_clamped=clamp_eigenvalues(spectrum.eigvals_t, kappa_tg),
        kappa_tg=float(kappa_tg),
    )


def apply_preconditioner(P: Preconditioner, r) -> np.ndarray:
    r = np.asarray(r, dtype=float).reshape(6)
    zr = P.rot_eigvecs @ ((P.rot_eigvecs.T @ r[:3]) / P.rot_clamped)
    zt = P.trans_eigvecs @ ((P.trans_eigvecs.T @ r[3:]) / P.trans_clamped)
    return np.concatenate([zr, zt])


def _dense(H) -> np.ndarray:
    return H.H if isinstance(H, HessianSystem) else np.asarray(H, dtype=float)


def pcg_solve(H, g, P: Preconditioner, tol: float = DEFAULT_PCG_TOL,
              max_iter: int = DEFAULT_PCG_MAX_ITER) -> SolveOutcome:
    """Preconditioned CG on ``H xi = -g`` starting from zero.

    Stops when ``|r_k| <= tol |r_0|``, after ``max_iter`` iterations, or when
    the curvature ``p^T H p`` collapses (semi-definite H).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _dense(H)
    r = -np.asarray(g, dtype=float).reshape(6)
    x = np.zeros(6)
    r0 = float(np.linalg.norm(r))
    if r0 == 0.0:
        return SolveOutcome(PoseIncrement.zero(), 0, 0.0, PcgStatus.CONVERGED)
    z = apply_preconditioner(P, r)
    p = z.copy()
    rz = float(r @ z)
    status = PcgStatus.MAX_ITER
    k = 0
    while k < max_iter:
        Ap = A @ p
        curv = float(p @ Ap)
        if curv <= CURVATURE_BREAKDOWN * float(p @ p):
            status = PcgStatus.CURVATURE_BREAKDOWN
            break
        alpha = rz / curv
        x = x + alpha * p
        r = r - alpha * Ap
        k += 1
        if np.linalg.norm(r) <= tol * r0:
            status = PcgStatus.CONVERGED
            break
        z = apply_preconditioner(P, r)
        rz_next = float(r @ z)
        beta = rz_next / rz
        rz = rz_next
        p = z + beta * p
    return SolveOutcome(
        increment=PoseIncrement.from_vector(x),
        inner_iterations=k,
        final_residual_norm=float(np.linalg.norm(r)),
        status=status,
        preconditioned_condition_estimate=preconditioned_condition(A, P),
    )


def preconditioned_condition(H, P: Preconditioner) -> float:
    """Condition number of ``P^{1/2} H P^{1/2}`` (same spectrum as ``P H``)."""
    Pm = P.matrix()
    w, V = np.linalg.eigh(Pm)
    half = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    lam = np.linalg.eigvalsh(half @ _dense(H) @ half)
    if lam[-1] <= 0:
        return float("inf")
    return float(lam[-1] / lam[0]) if lam[0] > 0 else float("inf")


def solve_plain(H, g) -> PoseIncrement:
    A = _dense(H)
    try:
        x = np.linalg.solve(A, -np.asarray(g, dtype=float))
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(A, -np.asarray(g, dtype=float), rcond=None)[0]
    return PoseIncrement.from_vector(x)


def _masked_basis(mask: DegeneracyMask, eigvecs, keep: bool) -> np.ndarray:
    """6 x k block-diagonal basis of the masked (``keep=False``) or unmasked directions."""
    V_r, V_t = eigvecs
    cols = []
    for i in range(3):
        if bool(mask.rot[i]) != keep:
            c = np.zeros(6)
            c[:3] = V_r[:, i]
            cols.append(c)
    for i in range(3):
        if bool(mask.trans[i]) != keep:
            c = np.zeros(6)
            c[3:] = V_t[:, i]
            cols.append(c)
    return np.array(cols).T.reshape(6, len(cols))


def solve_sr(H, g, mask: DegeneracyMask, eigvecs) -> PoseIncrement:
    """Solution remapping: full solve, then drop components along masked directions.

    ``eigvecs`` is the pair ``(V_R, V_t)`` of Schur eigenvector matrices.
    """
    A = _dense(H)
    w = np.linalg.eigvalsh(A)
    if w[-1] <= 0 or w[0] <= 1e-14 * w[-1]:
        raise SingularSystem("Hessian is numerically singular")
    x = np.linalg.solve(A, -np.asarray(g, dtype=float))
    B = _masked_basis(mask, eigvecs, keep=False)
    if B.shape[1]:
        x = x - B @ (B.T @ x)
    return PoseIncrement.from_vector(x)


def solve_tsvd(H, g, mask: DegeneracyMask, eigvecs) -> PoseIncrement:
    """Pseudoinverse solve restricted to the unmasked Schur eigendirections."""
    A = _dense(H)
    B = _masked_basis(mask, eigvecs, keep=True)
    if B.shape[1] == 0:
        return PoseIncrement.zero()
    y = np.linalg.pinv(B.T @ A @ B) @ (B.T @ -np.asarray(g, dtype=float))
    return PoseIncrement.from_vector(B @ y)


def solve_treg(H, g, lam: float = DEFAULT_TREG_LAMBDA) -> PoseIncrement:
    """Uniformly damped solve ``(H + lam I) xi = -g``."""
    if lam <= 0:
        raise ValueError("damping must be positive")
    A = _dense(H)
    return PoseIncrement.from_vector(np.linalg.solve(A + lam * np.eye(6), -np.asarray(g, dtype=float)))


def pinv_reduced_solve(S, g_reduced) -> np.ndarray:
    """Minimum-norm solution ``V L^+ V^T g`` of a reduced PSD system."""
    S = np.asarray(S, dtype=float)
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    top = max(float(w[-1]), 0.0)
    inv = np.zeros_like(w)
    pos = w > 1e-12 * top
    inv[pos] = 1.0 / w[pos]
    return V @ (inv * (V.T @ np.asarray(g_reduced, dtype=float)))


def clamp_regularizer(S, kappa_tg: float = DEFAULT_KAPPA_TG) -> np.ndarray:
    """``Gamma = V diag(clamped - lambda) V^T``, the prior added by clamping."""
    w, V = np.linalg.eigh(0.5 * (np.asarray(S, dtype=float) + np.asarray(S, dtype=float).T))
    return (V * (clamp_eigenvalues(w, kappa_tg) - w)) @ V.T
