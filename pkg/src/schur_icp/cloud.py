"""Point-cloud container, ASCII file formats, nearest-neighbour index and normals."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, ParseError, TooFewPoints

FORMATS = ("ply-ascii", "pcd-ascii", "xyz")
DEFAULT_NORMAL_K = 5

_EXTENSIONS = {".ply": "ply-ascii", ".pcd": "pcd-ascii", ".xyz": "xyz", ".txt": "xyz"}


def worker_count() -> int:
    """Thread cap for neighbour queries, from ``DCREG_THREADS`` (0 = all cores)."""
    raw = os.environ.get("DCREG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return -1 if n <= 0 else n


@dataclass(frozen=True)
class PointCloud:
    """Immutable (N, 3) point array with optional per-point unit normals.

    A zero normal marks a point whose neighbourhood was degenerate; such points
    never take part in correspondences.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            n = np.array(self.normals, dtype=float).reshape(-1, 3)
            if n.shape != pts.shape:
                raise ValueError("normals and points differ in length")
            norms = np.linalg.norm(n, axis=1)
            bad = (np.abs(norms - 1.0) > 1e-6) & (norms > 0.0)
            if np.any(bad):
                raise ValueError("normals must be unit length (or zero for invalid)")
            n.setflags(write=False)
            object.__setattr__(self, "normals", n)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @property
    def valid_normal_mask(self) -> np.ndarray:
        if self.normals is None:
            return np.zeros(len(self), dtype=bool)
        return np.linalg.norm(self.normals, axis=1) > 0.5

    def transformed(self, T) -> "PointCloud":
        """Apply a rigid transform to points and normals."""
        normals = None if self.normals is None else self.normals @ T.rotation.T
        return PointCloud(T.apply(self.points), normals)


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    ext = Path(path).suffix.lower()
    if ext not in _EXTENSIONS:
        raise ValueError(f"cannot infer format from extension {ext!r}")
    return _EXTENSIONS[ext]


def _parse_rows(lines, ncols, expected, where):
    if len(lines) != expected:
        raise ParseError(f"{where}: header declares {expected} points, found {len(lines)} rows")
    try:
        data = np.array([[float(x) for x in ln.split()] for ln in lines], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{where}: non-numeric value ({exc})") from None
    if data.size == 0:
        return np.zeros((0, ncols))
    if data.ndim != 2 or data.shape[1] != ncols:
        raise ParseError(f"{where}: expected {ncols} columns per row")
    return data


def _from_columns(names, data, where):
    try:
        xyz = data[:, [names.index(c) for c in ("x", "y", "z")]]
    except ValueError:
        raise ParseError(f"{where}: missing x/y/z fields") from None
    normals = None
    for nn in (("nx", "ny", "nz"), ("normal_x", "normal_y", "normal_z")):
        if all(c in names for c in nn):
            normals = data[:, [names.index(c) for c in nn]]
    return xyz, normals


def _read_ply(text, where):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{where}: missing 'ply' magic")
    count = None
    names = []
    in_vertex = False
    for i, raw in enumerate(lines[1:], start=1):
        tok = raw.split()
        if not tok or tok[0] == "comment":
            continue
        if tok[0] == "format":
            if tok[1:2] != ["ascii"]:
                raise ParseError(f"{where}: only ASCII PLY is supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    count = int(tok[2])
                except (IndexError, ValueError):
                    raise ParseError(f"{where}: bad vertex element line") from None
            elif len(tok) > 2 and tok[2] != "0":
                raise ParseError(f"{where}: unsupported element {tok[1]!r}")
        elif tok[0] == "property":
            if in_vertex:
                names.append(tok[-1])
        elif tok[0] == "end_header":
            if count is None:
                raise ParseError(f"{where}: no vertex element")
            body = [ln for ln in lines[i + 1:] if ln.strip()]
            data = _parse_rows(body, len(names), count, where)
            return _from_columns(names, data, where)
        else:
            raise ParseError(f"{where}: unexpected header line {raw!r}")
    raise ParseError(f"{where}: missing end_header")


def _read_pcd(text, where):
    lines = text.splitlines()
    fields = None
    count = None
    for i, raw in enumerate(lines):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        key = tok[0].upper()
        if key == "FIELDS":
            fields = tok[1:]
        elif key == "POINTS":
            try:
                count = int(tok[1])
            except (IndexError, ValueError):
                raise ParseError(f"{where}: bad POINTS line") from None
        elif key == "DATA":
            if tok[1:2] != ["ascii"]:
                raise ParseError(f"{where}: only ASCII PCD is supported")
            if fields is None or count is None:
                raise ParseError(f"{where}: FIELDS/POINTS missing before DATA")
            body = [ln for ln in lines[i + 1:] if ln.strip()]
            data = _parse_rows(body, len(fields), count, where)
            return _from_columns(fields, data, where)
    raise ParseError(f"{where}: missing DATA line")


def _read_xyz(text, where):
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        return np.zeros((0, 3)), None
    ncols = len(body[0].split())
    if ncols not in (3, 6):
        raise ParseError(f"{where}: rows must have 3 or 6 values")
    data = _parse_rows(body, ncols, len(body), where)
    return data[:, :3], (data[:, 3:6] if ncols == 6 else None)


def load_cloud(path, format: Optional[str] = None) -> PointCloud:
    """Read an ASCII PLY, ASCII PCD or XYZ file; normals are renormalised."""
    fmt = _infer_format(path, format)
    text = Path(path).read_text()
    reader = {"ply-ascii": _read_ply, "pcd-ascii": _read_pcd, "xyz": _read_xyz}[fmt]
    xyz, normals = reader(text, str(path))
    if len(xyz) == 0:
        raise EmptyCloud(f"{path}: no points")
    if not np.all(np.isfinite(xyz)):
        raise ParseError(f"{path}: non-finite coordinates")
    if normals is not None:
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.divide(normals, norms, out=np.zeros_like(normals), where=norms > 0)
    return PointCloud(xyz, normals)


def save_cloud(cloud: PointCloud, path, format: Optional[str] = None) -> None:
    fmt = _infer_format(path, format)
    if len(cloud) == 0:
        raise EmptyCloud("refusing to write an empty cloud")
    data = cloud.points if cloud.normals is None else np.hstack([cloud.points, cloud.normals])
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in data)
    n = len(cloud)
    with_normals = cloud.normals is not None
    if fmt == "ply-ascii":
        props = ["x", "y", "z"] + (["nx", "ny", "nz"] if with_normals else [])
        header = ["ply", "format ascii 1.0", f"element vertex {n}"]
        header += [f"property float {p}" for p in props]
        header.append("end_header")
    elif fmt == "pcd-ascii":
        fields = ["x", "y", "z"] + (["normal_x", "normal_y", "normal_z"] if with_normals else [])
        k = len(fields)
        header = [
            "# .PCD v0.7 - Point Cloud Data file format",
            "VERSION 0.7",
            "FIELDS " + " ".join(fields),
            "SIZE " + " ".join(["8"] * k),
            "TYPE " + " ".join(["F"] * k),
            "COUNT " + " ".join(["1"] * k),
            f"WIDTH {n}",
            "HEIGHT 1",
            "VIEWPOINT 0 0 0 1 0 0 0",
            f"POINTS {n}",
            "DATA ascii",
        ]
    else:
        header = []
    text = "\n".join(header + [rows]) + "\n"
    Path(path).write_text(text)


class SpatialIndex:
    """Exact nearest-neighbour queries over an immutable cloud snapshot."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise EmptyCloud("cannot index an empty cloud")
        self.cloud = cloud
        self._tree = cKDTree(cloud.points)

    def __len__(self) -> int:
        return len(self.cloud)

    def nearest(self, queries, k: int = 1):
        """Distances and indices of the ``k`` nearest points to each query row."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        k = min(k, len(self))
        return self._tree.query(q, k=k, workers=worker_count())

    def within(self, query, radius: float) -> np.ndarray:
        """Sorted indices strictly closer than ``radius`` (radius 0 gives nothing)."""
        if radius <= 0:
            return np.zeros(0, dtype=int)
        idx = self._tree.query_ball_point(np.asarray(query, dtype=float), radius)
        p = self.cloud.points[idx] - np.asarray(query, dtype=float)
        idx = np.asarray(idx, dtype=int)[np.einsum("ij,ij->i", p, p) < radius * radius]
        return np.sort(idx)


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def canonical_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude component is positive."""
    v = np.array(vectors, dtype=float)
    lead = v[np.arange(len(v)), np.argmax(np.abs(v), axis=1)]
    return v * np.where(lead < 0, -1.0, 1.0)[:, None]


def estimate_normals(cloud: PointCloud, k: int = DEFAULT_NORMAL_K, index: SpatialIndex | None = None) -> PointCloud:
    """Per-point normal from the uniformly weighted covariance of its k nearest points.

    The point itself counts as one of the k. Collinear (or coincident)
    neighbourhoods get a zero normal.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    if len(cloud) < k:
        raise TooFewPoints(f"cloud has {len(cloud)} points, need at least k={k}")
    index = index or SpatialIndex(cloud)
    _, idx = index.nearest(cloud.points, k=k)
    nbrs = cloud.points[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    w, V = np.linalg.eigh(cov)
    normals = canonical_sign(V[:, :, 0])
    degenerate = w[:, 1] <= 1e-12 * np.maximum(w[:, 2], 1e-300)
    normals[degenerate] = 0.0
    return PointCloud(cloud.points, normals)


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """Keep the first point (in file order) of every occupied cubic voxel."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    normals = None if cloud.normals is None else cloud.normals[first]
    return PointCloud(cloud.points[first], normals)
