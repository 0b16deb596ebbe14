"""Geometry core: points, closed balls, finite point clouds with resolution
metadata, and an exact nearest-neighbor index.

A PointCloud is the universal set representation downstream: a finite h-net of
a closed set restricted to a window ball.  All distance computations in this
package bottom out in NeighborIndex.nearest, which is exact (KD-tree or the
brute-force fallback, same answers either way).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

try:
    from scipy.spatial import cKDTree
    _HAVE_KDTREE = True
except ImportError:  # pragma: no cover - scipy is a hard dep, kept for safety
    _HAVE_KDTREE = False


class EmptyCloudError(ValueError):
    """Raised when an operation requires a nonempty cloud."""


class DimensionMismatchError(ValueError):
    pass


def as_point(p: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """Validate and convert to a 1-D float64 coordinate vector."""
    q = np.asarray(p, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1)
    if q.ndim != 1 or q.size < 1:
        raise ValueError("point must be a 1-D coordinate sequence")
    if not np.all(np.isfinite(q)):
        raise ValueError("point coordinates must be finite")
    return q


@dataclass(frozen=True)
class Ball:
    """Closed ball: membership is |p - center| <= radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.radius > 0):
            raise ValueError("ball radius must be strictly positive")

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of `pts` inside the closed ball."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.n:
            raise DimensionMismatchError(
                f"ball is {self.n}-dimensional, points are {pts.shape[1]}-dimensional"
            )
        d2 = np.sum((pts - self.center) ** 2, axis=1)
        return d2 <= self.radius * self.radius + 0.0


def _dedup_rows(pts: np.ndarray) -> np.ndarray:
    """Remove exactly-equal duplicate rows, keeping first occurrences in order."""
    if pts.shape[0] <= 1:
        return pts
    _, idx = np.unique(pts, axis=0, return_index=True)
    if idx.shape[0] == pts.shape[0]:
        return pts
    return pts[np.sort(idx)]


@dataclass(frozen=True)
class PointCloud:
    """Finite sample of a closed set.

    points : (m, n) array
    h      : sampling resolution; every point of the true set inside `window`
             is within h of some sample point (h = 0 means the cloud IS the set)
    window : optional Ball recording where the cloud is a faithful h-net
    """

    points: np.ndarray
    h: float = 0.0
    window: Optional[Ball] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be an (m, n) array")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("cloud coordinates must be finite")
        if self.h < 0:
            raise ValueError("resolution h must be >= 0")
        pts = _dedup_rows(pts)
        object.__setattr__(self, "points", pts)
        if self.window is not None and self.window.n != pts.shape[1] and pts.size:
            raise DimensionMismatchError("window dimension does not match points")

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def translate(self, v) -> "PointCloud":
        v = as_point(v)
        w = None
        if self.window is not None:
            w = Ball(self.window.center + v, self.window.radius)
        return PointCloud(self.points + v, h=self.h, window=w)

    def rescale(self, x, r: float) -> "PointCloud":
        """Local coordinates (p - x)/r; resolution rescales to h/r."""
        x = as_point(x)
        if not (r > 0):
            raise ValueError("rescale radius must be positive")
        w = None
        if self.window is not None:
            w = Ball((self.window.center - x) / r, self.window.radius / r)
        return PointCloud((self.points - x) / r, h=self.h / r, window=w)


def make_cloud(points, h: float = 0.0, window: Optional[Ball] = None) -> PointCloud:
    return PointCloud(np.asarray(points, dtype=float), h=h, window=window)


def empty_cloud(n: int, h: float = 0.0, window: Optional[Ball] = None) -> PointCloud:
    return PointCloud(np.empty((0, n)), h=h, window=window)


def restrict(cloud: PointCloud, ball: Ball) -> PointCloud:
    """Sub-cloud inside the closed ball; window becomes the ball. May be empty."""
    if cloud.is_empty:
        return PointCloud(cloud.points, h=cloud.h, window=ball)
    if ball.n != cloud.n:
        raise DimensionMismatchError("ball/cloud dimension mismatch")
    mask = ball.contains(cloud.points)
    return PointCloud(cloud.points[mask], h=cloud.h, window=ball)


# ---------------------------------------------------------------------------
# Nearest-neighbor index
# ---------------------------------------------------------------------------

class NeighborIndex:
    """Exact nearest-point queries over an immutable cloud.

    Backed by a KD-tree when scipy is available; `force_brute=True` (or a
    missing scipy) switches to the linear-scan fallback.  Both return exactly
    the minimum Euclidean distance, so either backend is oracle-grade.
    """

    def __init__(self, cloud: PointCloud, force_brute: bool = False):
        if cloud.is_empty:
            raise EmptyCloudError("cannot index an empty cloud")
        self._pts = cloud.points
        self.n = cloud.n
        self._brute = force_brute or not _HAVE_KDTREE
        self._tree = None if self._brute else cKDTree(self._pts)

    @property
    def size(self) -> int:
        return self._pts.shape[0]

    def nearest(self, queries) -> np.ndarray:
        """Minimum distances from each query row to the indexed points."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if q.shape[1] != self.n:
            raise DimensionMismatchError(
                f"index is {self.n}-dimensional, queries are {q.shape[1]}-dimensional"
            )
        if self._brute:
            # chunked linear scan to bound memory
            out = np.empty(q.shape[0])
            step = max(1, int(2e7) // max(1, self._pts.shape[0]))
            for i in range(0, q.shape[0], step):
                block = q[i : i + step]
                d2 = (
                    np.sum(block * block, axis=1)[:, None]
                    - 2.0 * block @ self._pts.T
                    + np.sum(self._pts * self._pts, axis=1)[None, :]
                )
                np.sqrt(np.maximum(d2.min(axis=1), 0.0), out=out[i : i + step])
            # polish: the expansion above loses a few ulps; re-check tiny values
            small = out < 1e-6
            if np.any(small):
                for j in np.nonzero(small)[0]:
                    out[j] = np.sqrt(
                        np.min(np.sum((self._pts - q[j]) ** 2, axis=1))
                    )
            return out
        d, _ = self._tree.query(q, k=1)
        return np.asarray(d, dtype=float)


def build_index(cloud: PointCloud, force_brute: bool = False) -> NeighborIndex:
    return NeighborIndex(cloud, force_brute=force_brute)


def nearest_distance(index: NeighborIndex, q) -> float:
    """Exact distance from a single point to the indexed cloud."""
    return float(index.nearest(as_point(q)[None, :])[0])


# ---------------------------------------------------------------------------
# CSV + sidecar I/O
# ---------------------------------------------------------------------------

def save_cloud(cloud: PointCloud, path) -> None:
    """Write `path` (CSV, header x1..xn) and `path + .meta.json` sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{i+1}" for i in range(cloud.n)])
        for row in cloud.points:
            w.writerow([repr(float(v)) for v in row])
    meta = {
        "n": int(cloud.n),
        "h": float(cloud.h),
        "window": None
        if cloud.window is None
        else {
            "center": [float(v) for v in cloud.window.center],
            "radius": float(cloud.window.radius),
        },
    }
    with open(path.with_suffix(path.suffix + ".meta.json"), "w") as f:
        json.dump(meta, f, sort_keys=True)


def load_cloud(path) -> PointCloud:
    path = Path(path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or not rows[0][0].startswith("x"):
        raise ValueError(f"{path}: expected a header row x1,...,xn")
    n = len(rows[0])
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    if data.size == 0:
        data = np.empty((0, n))
    h, window = 0.0, None
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if meta_path.exists():
        with open(meta_path) as f:
            meta = json.load(f)
        if meta.get("n") != n:
            raise ValueError(f"{meta_path}: sidecar n={meta.get('n')} != header n={n}")
        h = float(meta.get("h", 0.0))
        w = meta.get("window")
        if w is not None:
            window = Ball(np.asarray(w["center"], dtype=float), float(w["radius"]))
    return PointCloud(data, h=h, window=window)
