"""Schur-complement decoupling and direction-specific degeneracy detection.

Rotation and translation are analysed separately after eliminating the other
block::

    S_R = H_RR - H_Rt H_tt^-1 H_tR
    S_t = H_tt - H_tR H_RR^-1 H_Rt

Each complement is eigendecomposed (ascending) and direction ``i`` is flagged
when ``lambda_max / lambda_i`` exceeds the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroSpectrum, NotSymmetric
from .linearize import HessianSystem

DEFAULT_KAPPA_TH = 10.0
DEFAULT_PINV_TOL = 1e-10


@dataclass(frozen=True)
class SchurSpectrum:
    s_r: np.ndarray
    s_t: np.ndarray
    eigvals_r: np.ndarray
    eigvals_t: np.ndarray
    eigvecs_r: np.ndarray
    eigvecs_t: np.ndarray
    kappa_r: float
    kappa_t: float
    normalized_r: np.ndarray
    normalized_t: np.ndarray
    # True when the eliminated block had to be pseudo-inverted
    pinv_used_r: bool = False
    pinv_used_t: bool = False


@dataclass(frozen=True)
class DegeneracyMask:
    """Per-direction flags, indexed by ascending eigenvalue position."""

    rot: tuple
    trans: tuple

    @property
    def any(self) -> bool:
        return any(self.rot) or any(self.trans)

    def bits(self) -> tuple[str, str]:
        return "".join("1" if b else "0" for b in self.rot), "".join("1" if b else "0" for b in self.trans)


def _block_inverse(A: np.ndarray, pinv_tol: float):
    """Inverse of a symmetric PSD 3x3 block, or its pseudoinverse if near singular."""
    w, V = np.linalg.eigh(A)
    top = w[-1]
    if top > 0 and w[0] >= pinv_tol * top:
        return np.linalg.inv(A), False
    keep = w > pinv_tol * max(top, 0.0)
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    return (V * inv_w) @ V.T, True


def schur_complements(H: HessianSystem, pinv_tol: float = DEFAULT_PINV_TOL, return_flags: bool = False):
    """Return ``(S_R, S_t)``; with ``return_flags`` also which branch used a pseudoinverse."""
    tt_inv, pinv_for_r = _block_inverse(H.h_tt, pinv_tol)
    rr_inv, pinv_for_t = _block_inverse(H.h_rr, pinv_tol)
    s_r = H.h_rr - H.h_rt @ tt_inv @ H.h_tr
    s_t = H.h_tt - H.h_tr @ rr_inv @ H.h_rt
    s_r = 0.5 * (s_r + s_r.T)
    s_t = 0.5 * (s_t + s_t.T)
    if return_flags:
        return s_r, s_t, pinv_for_r, pinv_for_t
    return s_r, s_t


def reduced_gradients(H: HessianSystem, pinv_tol: float = DEFAULT_PINV_TOL):
    """Gradients of the reduced problems, ``g_R - H_Rt H_tt^-1 g_t`` and its translation twin."""
    tt_inv, _ = _block_inverse(H.h_tt, pinv_tol)
    rr_inv, _ = _block_inverse(H.h_rr, pinv_tol)
    return H.g_r - H.h_rt @ tt_inv @ H.g_t, H.g_t - H.h_tr @ rr_inv @ H.g_r


def projection_form_schur(J_R, J_t) -> np.ndarray:
    """``J_R^T (I - J_t J_t^+) J_R``: the rotation complement from stacked Jacobian columns."""
    J_R = np.asarray(J_R, dtype=float)
    J_t = np.asarray(J_t, dtype=float)
    # J_R - P_t J_R, with P_t applied through the pseudoinverse rather than formed as m x m
    resid = J_R - J_t @ (np.linalg.pinv(J_t) @ J_R)
    S = J_R.T @ resid
    return 0.5 * (S + S.T)


def _canonical_columns(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for i in range(V.shape[1]):
        j = int(np.argmax(np.abs(V[:, i])))
        if V[j, i] < 0:
            V[:, i] = -V[:, i]
    return V


def _closed_form_eigvals(S: np.ndarray) -> np.ndarray:
    # trigonometric solution of the characteristic cubic for symmetric 3x3
    p1 = S[0, 1] ** 2 + S[0, 2] ** 2 + S[1, 2] ** 2
    q = np.trace(S) / 3.0
    if p1 == 0.0:
        return np.sort(np.diag(S).copy())
    p2 = (S[0, 0] - q) ** 2 + (S[1, 1] - q) ** 2 + (S[2, 2] - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    B = (S - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.array([lo, mid, hi])


def _closed_form_eigvecs(S: np.ndarray, w: np.ndarray) -> np.ndarray:
    V = np.zeros((3, 3))
    for i, lam in enumerate(w):
        A = S - lam * np.eye(3)
        crosses = [np.cross(A[0], A[1]), np.cross(A[0], A[2]), np.cross(A[1], A[2])]
        c = max(crosses, key=lambda v: float(v @ v))
        nrm = np.linalg.norm(c)
        if nrm == 0.0:
            return None
        V[:, i] = c / nrm
    return V


def spectrum(S, sym_tol: float = 1e-9):
    """Ascending eigenvalues and eigenvectors of a symmetric 3x3 matrix.

    The closed-form cubic solution is tried first and accepted only when it
    passes a residual and orthonormality check; clustered spectra fall back to
    LAPACK. Eigenvector signs are fixed so the largest-magnitude entry is positive.
    """
    S = np.asarray(S, dtype=float)
    scale = max(np.linalg.norm(S), 1e-300)
    if S.shape != (3, 3) or np.linalg.norm(S - S.T) > sym_tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    S = 0.5 * (S + S.T)
    w = _closed_form_eigvals(S)
    V = _closed_form_eigvecs(S, w)
    ok = (
        V is not None
        and np.linalg.norm(S @ V - V * w) <= 1e-10 * scale
        and np.linalg.norm(V.T @ V - np.eye(3)) <= 1e-10
    )
    if not ok:
        w, V = np.linalg.eigh(S)
    return w, _canonical_columns(V)


def condition_number(eigvals) -> float:
    """``lambda_max / lambda_min``; ``inf`` when the smallest eigenvalue is not positive."""
    w = np.asarray(eigvals, dtype=float)
    top = float(np.max(w))
    if top <= 0:
        raise AllZeroSpectrum("largest eigenvalue is not positive")
    low = float(np.min(w))
    if low <= 0:
        return float("inf")
    return top / low


def normalized_eigenvalues(eigvals) -> np.ndarray:
    """Direction-specific condition numbers ``lambda_max / lambda_i`` (``inf`` for ``lambda_i <= 0``)."""
    w = np.asarray(eigvals, dtype=float)
    top = float(w[-1])
    if top <= 0:
        raise AllZeroSpectrum("largest eigenvalue is not positive")
    out = np.full(3, np.inf)
    pos = w > 0
    out[pos] = top / w[pos]
    return out


def schur_spectrum(H: HessianSystem, pinv_tol: float = DEFAULT_PINV_TOL) -> SchurSpectrum:
    s_r, s_t, pinv_r, pinv_t = schur_complements(H, pinv_tol, return_flags=True)
    w_r, V_r = spectrum(s_r)
    w_t, V_t = spectrum(s_t)
    return SchurSpectrum(
        s_r=s_r, s_t=s_t,
        eigvals_r=w_r, eigvals_t=w_t,
        eigvecs_r=V_r, eigvecs_t=V_t,
        kappa_r=condition_number(w_r), kappa_t=condition_number(w_t),
        normalized_r=normalized_eigenvalues(w_r), normalized_t=normalized_eigenvalues(w_t),
        pinv_used_r=pinv_r, pinv_used_t=pinv_t,
    )


def detect(H: HessianSystem, kappa_th: float = DEFAULT_KAPPA_TH, pinv_tol: float = DEFAULT_PINV_TOL):
    """Flag the Schur eigendirections whose normalized eigenvalue exceeds ``kappa_th``."""
    if not kappa_th > 1:
        raise ValueError("kappa_th must exceed 1")
    spec = schur_spectrum(H, pinv_tol)
    mask = DegeneracyMask(
        rot=tuple(bool(k > kappa_th) for k in spec.normalized_r),
        trans=tuple(bool(k > kappa_th) for k in spec.normalized_t),
    )
    return spec, mask
