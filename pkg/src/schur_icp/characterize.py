"""Map Schur eigendirections onto physical motion axes.

Three ambiguities of an eigendecomposition are removed in turn: sign (absolute
inner products with the canonical axes), ordering (dominant-axis assignment)
and basis choice inside clustered eigenvalues (Gram-Schmidt, most
axis-aligned vector first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalCollapse

AXES = ("x", "y", "z")
ROT_AXES = ("roll", "pitch", "yaw")


@dataclass(frozen=True)
class AxisAlignment:
    coefficients: np.ndarray  # alpha[i, j] = |v_i . e_j|, row per eigenvector
    dominant_axis: tuple
    strength: np.ndarray  # gamma_i
    contributions: np.ndarray  # percent, rows sum to 100
    angles: np.ndarray  # degrees between v_i and its dominant axis


@dataclass(frozen=True)
class AlignedBasis:
    """Orthonormal basis; column ``i`` stays paired with input eigenvector ``i``."""

    basis: np.ndarray
    processing_order: tuple


def alignment_coefficients(eigvecs) -> np.ndarray:
    V = np.asarray(eigvecs, dtype=float)
    return np.abs(V.T)


def characterize(eigvecs) -> AxisAlignment:
    alpha = alignment_coefficients(eigvecs)
    # argmax returns the first maximum, i.e. x < y < z on ties
    dominant = np.argmax(alpha, axis=1)
    gamma = alpha[np.arange(len(alpha)), dominant]
    contributions = 100.0 * alpha / alpha.sum(axis=1, keepdims=True)
    angles = np.degrees(np.arccos(np.clip(gamma, -1.0, 1.0)))
    return AxisAlignment(
        coefficients=alpha,
        dominant_axis=tuple(AXES[j] for j in dominant),
        strength=gamma,
        contributions=contributions,
        angles=angles,
    )


def orthogonalize(eigvecs, alignment: AxisAlignment | None = None) -> AlignedBasis:
    """Classical Gram-Schmidt in descending alignment-strength order.

    Ties in strength keep ascending eigenvalue order. Output column ``i`` is the
    orthonormalised version of input column ``i``.
    """
    V = np.asarray(eigvecs, dtype=float)
    if alignment is None:
        alignment = characterize(V)
    order = sorted(range(V.shape[1]), key=lambda i: (-alignment.strength[i], i))
    P = np.zeros_like(V)
    done = []
    for i in order:
        v = V[:, i]
        w = v - sum((v @ P[:, k]) * P[:, k] for k in done) if done else v.copy()
        nrm = np.linalg.norm(w)
        if nrm < 1e-12:
            raise NumericalCollapse(f"eigenvector {i} vanished during orthogonalisation")
        P[:, i] = w / nrm
        done.append(i)
    return AlignedBasis(basis=P, processing_order=tuple(order))


def report_rows(spectrum, mask, subspace: str | None = None):
    """Per-direction table rows for both subspaces (or just one)."""
    rows = []
    parts = [("rot", spectrum.eigvals_r, spectrum.normalized_r, spectrum.eigvecs_r, mask.rot, ROT_AXES),
             ("trans", spectrum.eigvals_t, spectrum.normalized_t, spectrum.eigvecs_t, mask.trans, AXES)]
    for name, w, kappa, V, flags, labels in parts:
        if subspace is not None and name != subspace:
            continue
        al = characterize(V)
        for i in range(3):
            j = AXES.index(al.dominant_axis[i])
            rows.append({
                "subspace": name,
                "index": i,
                "eigenvalue": float(w[i]),
                "normalized_kappa": float(kappa[i]),
                "degenerate": bool(flags[i]),
                "dominant_axis": labels[j],
                "gamma": float(al.strength[i]),
                "angle_deg": float(al.angles[i]),
                "contributions_pct": [float(c) for c in al.contributions[i]],
            })
    return rows


def format_report(rows) -> str:
    head = f"{'sub':5} {'i':>1} {'eigenvalue':>12} {'kappa_i':>10} {'deg':>3} {'axis':>5} {'gamma':>6} {'angle':>7}  contributions x/y/z %"
    lines = [head]
    for r in rows:
        c = "/".join(f"{v:.1f}" for v in r["contributions_pct"])
        lines.append(
            f"{r['subspace']:5} {r['index']:>1} {r['eigenvalue']:>12.4g} {r['normalized_kappa']:>10.4g} "
            f"{'yes' if r['degenerate'] else 'no':>3} {r['dominant_axis']:>5} {r['gamma']:>6.3f} {r['angle_deg']:>7.2f}  {c}"
        )
    return "\n".join(lines)
