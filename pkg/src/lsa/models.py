"""Parametric local approximation classes.

Every class is a family (or a union of families) of closed sets containing the
origin, closed under positive dilation.  Members are encoded as
``(branch_tag, *family_params)``; each family provides

  dist(params, pts)      exact analytic distance from points to the member
  points(params, R, h)   an h-net of member ∩ B(0, R), points ON the set
  coarse grids + per-axis refinement metadata for the search layer

Angles are radians; translation offsets and similarity scales are in the same
(local) units as the query points.  The search layer normally works at scale
r = 1, so offsets are multiples of the viewing radius.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Ball, PointCloud

SQRT2 = math.sqrt(2.0)


class UnsupportedClassError(ValueError):
    pass


# ---------------------------------------------------------------------------
# small rotation / sampling helpers
# ---------------------------------------------------------------------------

def rot2(w: float) -> np.ndarray:
    c, s = math.cos(w), math.sin(w)
    return np.array([[c, -s], [s, c]])


def rot_z(g: float) -> np.ndarray:
    c, s = math.cos(g), math.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_from_z(u: np.ndarray) -> np.ndarray:
    """Rotation taking e3 to the unit vector u (Rodrigues, deterministic)."""
    u = np.asarray(u, dtype=float)
    c = float(u[2])
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        # u = -e3: rotate pi about e1
        return np.diag([1.0, -1.0, -1.0])
    axis = np.array([-u[1], u[0], 0.0])
    axis /= np.linalg.norm(axis)
    s = math.sqrt(max(1.0 - c * c, 0.0))
    K = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def dir3(theta: float, phi: float) -> np.ndarray:
    """Unit vector in R3 from azimuth theta, polar phi (phi = 0 -> e3)."""
    sp = math.sin(phi)
    return np.array([math.cos(theta) * sp, math.sin(theta) * sp, math.cos(phi)])


def dir4(theta: float, phi: float, psi: float) -> np.ndarray:
    """Unit vector in R4; psi = 0 -> e4."""
    sp = math.sin(psi)
    v3 = dir3(theta, phi)
    return np.array([sp * v3[0], sp * v3[1], sp * v3[2], math.cos(psi)])


def fibonacci_sphere(k: int) -> np.ndarray:
    """k roughly-even points on the unit 2-sphere (deterministic)."""
    k = max(int(k), 1)
    i = np.arange(k) + 0.5
    phi = np.arccos(np.clip(1.0 - 2.0 * i / k, -1.0, 1.0))
    theta = math.pi * (1.0 + math.sqrt(5.0)) * i
    sp = np.sin(phi)
    return np.stack([np.cos(theta) * sp, np.sin(theta) * sp, np.cos(phi)], axis=1)


def orth_basis(u: np.ndarray) -> np.ndarray:
    """Rows: an orthonormal basis of the hyperplane orthogonal to unit u."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    # complete u to a basis, Gram-Schmidt against the most independent axes
    idx = np.argsort(np.abs(u))  # least-aligned coordinate axes first
    basis = [u]
    for j in idx:
        v = np.zeros(n)
        v[j] = 1.0
        for b in basis:
            v = v - np.dot(v, b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            basis.append(v / nv)
        if len(basis) == n:
            break
    return np.stack(basis[1:], axis=0)


def cube_mesh(dim: int, R: float, g: float) -> np.ndarray:
    """Centered cubic lattice covering [-R, R]^dim with step g (includes 0)."""
    m = int(math.ceil(R / g))
    ax = np.arange(-m, m + 1) * g
    grids = np.meshgrid(*([ax] * dim), indexing="ij")
    return np.stack([a.ravel() for a in grids], axis=1)


def _grid_product(axes_values) -> np.ndarray:
    grids = np.meshgrid(*axes_values, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def segment_net(lo: float, hi: float, g: float) -> np.ndarray:
    """1-D lattice with step <= g covering [lo, hi], anchored so 0 is a node."""
    if hi < lo:
        return np.empty(0)
    i0, i1 = math.floor(lo / g), math.ceil(hi / g)
    t = np.arange(i0, i1 + 1) * g
    return t[(t >= lo - 1e-12) & (t <= hi + 1e-12)]


# ---------------------------------------------------------------------------
# axis metadata for the search layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    name: str
    step: float          # coarse grid step (0 => frozen/discrete axis)
    lo: float
    hi: float
    periodic: bool = False
    lipschitz: float = 1.0  # |d(member) change| per unit param, per unit window


class Family:
    """One homogeneous parametric family inside a model class."""

    name: str = "family"
    n: int = 2
    surface_dim: int = 1  # dimension of members (controls sampler budgets)

    def axes(self, bound: float) -> list[Axis]:
        raise NotImplementedError

    def coarse(self, bound: float) -> np.ndarray:
        raise NotImplementedError

    def seeds(self, bound: float) -> np.ndarray:
        return np.empty((0, len(self.axes(bound))))

    def dist(self, params, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def points(self, params, R: float, h: float) -> np.ndarray:
        raise NotImplementedError

    def scale_params(self, params, lam: float):
        """Parameters of the dilated member lam*S (cone classes: unchanged)."""
        return tuple(params)

    def canon(self, params, bound: float):
        out = []
        for ax, v in zip(self.axes(bound), params):
            if ax.periodic:
                period = ax.hi - ax.lo
                v = (v - ax.lo) % period + ax.lo
            else:
                v = min(max(v, ax.lo), ax.hi)
            out.append(v)
        return tuple(out)


# ---------------------------------------------------------------------------
# lines and hyperplanes through the origin
# ---------------------------------------------------------------------------

_ANGLE_GRIDS = {
    2: [("theta", np.arange(64) * math.pi / 64, math.pi / 64, 0.0, math.pi, True)],
    3: [
        ("theta", np.arange(16) * 2 * math.pi / 16, 2 * math.pi / 16, 0.0, 2 * math.pi, True),
        ("phi", np.linspace(0.0, math.pi / 2, 9), math.pi / 16, 0.0, math.pi / 2, False),
    ],
    4: [
        ("theta", np.arange(12) * 2 * math.pi / 12, 2 * math.pi / 12, 0.0, 2 * math.pi, True),
        ("phi", np.linspace(0.0, math.pi, 7), math.pi / 6, 0.0, math.pi, False),
        ("psi", np.linspace(0.0, math.pi / 2, 5), math.pi / 8, 0.0, math.pi / 2, False),
    ],
}


def _direction(n: int, params) -> np.ndarray:
    if n == 2:
        return np.array([math.cos(params[0]), math.sin(params[0])])
    if n == 3:
        return dir3(params[0], params[1])
    return dir4(params[0], params[1], params[2])


def _axis_seed_angles(n: int) -> np.ndarray:
    """Parameters hitting every coordinate axis direction exactly."""
    if n == 2:
        return np.array([[0.0], [math.pi / 2]])
    if n == 3:
        return np.array(
            [[0.0, math.pi / 2], [math.pi / 2, math.pi / 2], [0.0, 0.0]]
        )
    return np.array(
        [
            [0.0, math.pi / 2, math.pi / 2],
            [math.pi / 2, math.pi / 2, math.pi / 2],
            [0.0, 0.0, math.pi / 2],
            [0.0, 0.0, 0.0],
        ]
    )


class LineFamily(Family):
    """Lines through 0 in R^n, direction on a half-sphere."""

    surface_dim = 1

    def __init__(self, n: int):
        if n not in _ANGLE_GRIDS:
            raise UnsupportedClassError(f"lines unsupported in dimension {n}")
        self.n = n
        self.name = f"line{n}"

    def axes(self, bound):
        return [
            Axis(nm, step, lo, hi, per, lipschitz=1.0)
            for (nm, _vals, step, lo, hi, per) in _ANGLE_GRIDS[self.n]
        ]

    def coarse(self, bound):
        return _grid_product([vals for (_n, vals, *_r) in _ANGLE_GRIDS[self.n]])

    def seeds(self, bound):
        return _axis_seed_angles(self.n)

    def dist(self, params, pts):
        v = _direction(self.n, params)
        t = pts @ v
        d2 = np.sum(pts * pts, axis=1) - t * t
        return np.sqrt(np.maximum(d2, 0.0))

    def points(self, params, R, h):
        v = _direction(self.n, params)
        t = segment_net(-R, R, h)
        return t[:, None] * v[None, :]


class HyperplaneFamily(Family):
    """Hyperplanes through 0 in R^n, unit normal on a half-sphere."""

    def __init__(self, n: int):
        if n not in _ANGLE_GRIDS:
            raise UnsupportedClassError(f"hyperplanes unsupported in dimension {n}")
        self.n = n
        self.name = f"hyperplane{n}"
        self.surface_dim = n - 1

    axes = LineFamily.axes
    coarse = LineFamily.coarse
    seeds = LineFamily.seeds

    def dist(self, params, pts):
        u = _direction(self.n, params)
        return np.abs(pts @ u)

    def points(self, params, R, h):
        u = _direction(self.n, params)
        B = orth_basis(u)  # (n-1, n)
        d = self.n - 1
        g = h / math.sqrt(d)
        coeffs = cube_mesh(d, R, g)
        pts = coeffs @ B
        keep = np.sum(pts * pts, axis=1) <= R * R * (1 + 1e-12)
        return pts[keep]


# ---------------------------------------------------------------------------
# Y and T minimal cones (R^3), their translates containing 0, and T spines
# ---------------------------------------------------------------------------

_Y_DIRS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-0.5, math.sqrt(3.0) / 2.0, 0.0],
        [-0.5, -math.sqrt(3.0) / 2.0, 0.0],
    ]
)

# regular tetrahedron inscribed in the unit sphere (even sign patterns)
_TETRA = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / math.sqrt(3.0)
_TETRA_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def _member_rotation(theta, phi, gamma):
    return rot_from_z(dir3(theta, phi)) @ rot_z(gamma)


def _y_dist_local(p: np.ndarray) -> np.ndarray:
    """Distance to the canonical Y cone (three half-planes along e3)."""
    pp = np.sum(p * p, axis=1)
    c = p[:, 2]
    best = None
    for d in _Y_DIRS:
        a = p @ d
        perp2 = np.maximum(pp - a * a - c * c, 0.0)
        on_sheet = np.sqrt(perp2)
        off_sheet = np.sqrt(perp2 + a * a)  # distance to the spine edge
        di = np.where(a >= 0.0, on_sheet, off_sheet)
        best = di if best is None else np.minimum(best, di)
    return best


def _t_dist_local(p: np.ndarray) -> np.ndarray:
    """Distance to the canonical T cone (six sectors over tetrahedron edges)."""
    pp = np.sum(p * p, axis=1)
    dots = p @ _TETRA.T  # (M, 4)
    ray2 = pp[:, None] - np.maximum(dots, 0.0) ** 2  # squared dist to each spine ray
    best2 = None
    for (i, j) in _TETRA_PAIRS:
        pi, pj = dots[:, i], dots[:, j]
        # solve alpha v_i + beta v_j projection with Gram [[1,-1/3],[-1/3,1]]
        alpha = (9.0 / 8.0) * (pi + pj / 3.0)
        beta = (9.0 / 8.0) * (pi / 3.0 + pj)
        inside = (alpha >= 0.0) & (beta >= 0.0)
        perp2 = pp - (alpha * pi + beta * pj)
        edge2 = np.minimum(ray2[:, i], ray2[:, j])
        d2 = np.where(inside, perp2, edge2)
        best2 = d2 if best2 is None else np.minimum(best2, d2)
    return np.sqrt(np.maximum(best2, 0.0))


class YFamily(Family):
    """Translates of the Y cone that contain 0.

    Translations along the spine fix the set, so offsets reduce to a slide
    w >= 0 down the first sheet direction: member = R(Y0 - w*d0).
    """

    n = 3
    name = "y_cone"
    surface_dim = 2

    def axes(self, bound):
        return [
            Axis("theta", 2 * math.pi / 8, 0.0, 2 * math.pi, True),
            Axis("phi", math.pi / 8, 0.0, math.pi / 2, False),
            Axis("gamma", (2 * math.pi / 3) / 6, 0.0, 2 * math.pi / 3, True),
            Axis("w", bound / 4 if bound > 0 else 0.0, 0.0, bound, False),
        ]

    def coarse(self, bound):
        return _grid_product(
            [
                np.arange(8) * 2 * math.pi / 8,
                np.linspace(0.0, math.pi / 2, 5),
                np.arange(6) * (2 * math.pi / 3) / 6,
                np.linspace(0.0, bound, 5) if bound > 0 else np.array([0.0]),
            ]
        )

    def seeds(self, bound):
        rows = []
        for (th, ph) in [(0.0, 0.0), (0.0, math.pi / 2), (math.pi / 2, math.pi / 2)]:
            rows.append([th, ph, 0.0, 0.0])
        return np.array(rows)

    def _local(self, params, pts):
        theta, phi, gamma, w = params
        R = _member_rotation(theta, phi, gamma)
        return pts @ R + w * _Y_DIRS[0]  # R^T p, translated back into Y0 frame

    def dist(self, params, pts):
        return _y_dist_local(self._local(params, pts))

    def points(self, params, R, h):
        theta, phi, gamma, w = params
        rot = _member_rotation(theta, phi, gamma)
        g = h / math.sqrt(2.0)
        tmax = R + abs(w) + g
        rows = [np.zeros((1, 3))]
        for d in _Y_DIRS:
            t = segment_net(0.0, tmax, g)
            s = segment_net(-tmax, tmax, g)
            T, S = np.meshgrid(t, s, indexing="ij")
            loc = (
                T.ravel()[:, None] * d[None, :]
                + S.ravel()[:, None] * np.array([0.0, 0.0, 1.0])[None, :]
            )
            rows.append(loc)
        loc = np.concatenate(rows, axis=0) - w * _Y_DIRS[0]
        pts = loc @ rot.T
        keep = np.sum(pts * pts, axis=1) <= (R + h) ** 2
        return pts[keep]

    def scale_params(self, params, lam):
        theta, phi, gamma, w = params
        return (theta, phi, gamma, w * lam)


class TFamily(Family):
    """Translates of the T cone (over tetrahedron edges) that contain 0:
    member = R(T0 - (a v0 + b v1)), a, b >= 0."""

    n = 3
    name = "t_cone"
    surface_dim = 2

    def axes(self, bound):
        return [
            Axis("theta", 2 * math.pi / 6, 0.0, 2 * math.pi, True),
            Axis("phi", math.pi / 4, 0.0, math.pi, False),
            Axis("gamma", (2 * math.pi / 3) / 4, 0.0, 2 * math.pi / 3, True),
            Axis("a", bound / 3 if bound > 0 else 0.0, 0.0, bound, False),
            Axis("b", bound / 3 if bound > 0 else 0.0, 0.0, bound, False),
        ]

    def coarse(self, bound):
        off = np.linspace(0.0, bound, 4) if bound > 0 else np.array([0.0])
        return _grid_product(
            [
                np.arange(6) * 2 * math.pi / 6,
                np.linspace(0.0, math.pi, 5),
                np.arange(4) * (2 * math.pi / 3) / 4,
                off,
                off,
            ]
        )

    def seeds(self, bound):
        return np.array([[0.0, 0.0, 0.0, 0.0, 0.0]])

    def _offset(self, a, b):
        return a * _TETRA[0] + b * _TETRA[1]

    def dist(self, params, pts):
        theta, phi, gamma, a, b = params
        R = _member_rotation(theta, phi, gamma)
        loc = pts @ R + self._offset(a, b)
        return _t_dist_local(loc)

    def points(self, params, R, h):
        theta, phi, gamma, a, b = params
        rot = _member_rotation(theta, phi, gamma)
        off = self._offset(a, b)
        g = h / 2.0
        tmax = R + float(np.linalg.norm(off)) + g
        rows = [np.zeros((1, 3))]
        t = segment_net(0.0, tmax, g)
        for (i, j) in _TETRA_PAIRS:
            A, B = np.meshgrid(t, t, indexing="ij")
            loc = A.ravel()[:, None] * _TETRA[i][None, :] + B.ravel()[:, None] * _TETRA[j][None, :]
            keep = np.sum(loc * loc, axis=1) <= (tmax + g) ** 2
            rows.append(loc[keep])
        loc = np.concatenate(rows, axis=0) - off
        pts = loc @ rot.T
        keep = np.sum(pts * pts, axis=1) <= (R + h) ** 2
        return pts[keep]

    def scale_params(self, params, lam):
        theta, phi, gamma, a, b = params
        return (theta, phi, gamma, a * lam, b * lam)


class TSpineFamily(Family):
    """Translates containing 0 of the T-cone spine (four rays through the
    tetrahedron vertices): member = R(Spine0 - t v0)."""

    n = 3
    name = "t_spine"
    surface_dim = 1

    def axes(self, bound):
        return [
            Axis("theta", 2 * math.pi / 8, 0.0, 2 * math.pi, True),
            Axis("phi", math.pi / 4, 0.0, math.pi, False),
            Axis("gamma", (2 * math.pi / 3) / 6, 0.0, 2 * math.pi / 3, True),
            Axis("t", bound / 4 if bound > 0 else 0.0, 0.0, bound, False),
        ]

    def coarse(self, bound):
        return _grid_product(
            [
                np.arange(8) * 2 * math.pi / 8,
                np.linspace(0.0, math.pi, 5),
                np.arange(6) * (2 * math.pi / 3) / 6,
                np.linspace(0.0, bound, 5) if bound > 0 else np.array([0.0]),
            ]
        )

    def seeds(self, bound):
        return np.array([[0.0, 0.0, 0.0, 0.0]])

    def dist(self, params, pts):
        theta, phi, gamma, t = params
        R = _member_rotation(theta, phi, gamma)
        loc = pts @ R + t * _TETRA[0]
        pp = np.sum(loc * loc, axis=1)
        dots = loc @ _TETRA.T
        ray2 = pp[:, None] - np.maximum(dots, 0.0) ** 2
        return np.sqrt(np.maximum(ray2.min(axis=1), 0.0))

    def points(self, params, R, h):
        theta, phi, gamma, t = params
        rot = _member_rotation(theta, phi, gamma)
        tmax = R + abs(t) + h
        rows = [np.zeros((1, 3))]
        s = segment_net(0.0, tmax, h)
        for v in _TETRA:
            rows.append(s[:, None] * v[None, :])
        loc = np.concatenate(rows, axis=0) - t * _TETRA[0]
        pts = loc @ rot.T
        keep = np.sum(pts * pts, axis=1) <= (R + h) ** 2
        return pts[keep]

    def scale_params(self, params, lam):
        theta, phi, gamma, t = params
        return (theta, phi, gamma, t * lam)


# ---------------------------------------------------------------------------
# light cone in R^4 (rotations; optionally translates containing 0)
# ---------------------------------------------------------------------------

def _light_cone_dist(u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Distance to {x : |x|^2 = 2 (x.u)^2} for unit u (axis direction)."""
    t = pts @ u
    rho2 = np.sum(pts * pts, axis=1) - t * t
    rho = np.sqrt(np.maximum(rho2, 0.0))
    return np.abs(rho - np.abs(t)) / SQRT2


def _cap_net(k_full: int, t1: float) -> np.ndarray:
    """Fibonacci-style net of the cap {v in S^2 : v_z >= t1}, at the surface
    density a k_full-point net would have on the whole sphere."""
    if t1 <= -1.0:
        return fibonacci_sphere(k_full)
    if t1 >= 1.0 - 1e-15:
        return np.array([[0.0, 0.0, 1.0]])
    frac = (1.0 - t1) / 2.0
    k = max(int(math.ceil(k_full * frac)), 4)
    i = np.arange(k) + 0.5
    z = 1.0 - (1.0 - t1) * i / k
    theta = math.pi * (1.0 + math.sqrt(5.0)) * i
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([np.cos(theta) * s, np.sin(theta) * s, z], axis=1)


def _light_cone_points(u: np.ndarray, center_off: np.ndarray, R: float, h: float) -> np.ndarray:
    """h-net of (C_u - center_off) ∩ B(0, R); c_off must lie on C_u.

    Shells are clipped to the spherical caps that can meet the target ball,
    so the cost scales with the ball, not with |center_off|.
    """
    Rh = R + h
    off = np.asarray(center_off, dtype=float)
    o_u = float(off @ u)
    base = orth_basis(u)  # (3, 4) spanning u-perp
    w3 = base @ off  # u-perp part of the offset, in base coordinates
    nw = float(np.linalg.norm(w3))
    w_hat = w3 / nw if nw > 1e-14 else np.array([0.0, 0.0, 1.0])
    rot = rot_from_z(w_hat)

    span = R + float(np.linalg.norm(off)) + h
    smax = span / SQRT2
    gs = h / 2.0
    rows = []
    if float(off @ off) <= Rh * Rh:
        rows.append(np.zeros((1, 4)) - off[None, :])
    s = gs
    while s <= smax:
        # lateral covering ~0.76h + radial h/2 keeps the combined pitch < h
        k = int(math.ceil(14.0 * (s / h) ** 2)) + 8
        m = (2.0 * s * s + float(off @ off) - Rh * Rh) / (2.0 * s)
        for sign in (1.0, -1.0):
            need = m - sign * o_u
            if nw > 1e-14:
                t1 = need / nw
                if t1 >= 1.0:
                    continue
                cap3 = _cap_net(k, t1) @ rot.T
            else:
                if need > 0.0:
                    continue
                cap3 = fibonacci_sphere(k)
            lateral = cap3 @ base  # (k', 4)
            rows.append(s * lateral + sign * s * u[None, :] - off[None, :])
        s += gs
    if not rows:
        return np.empty((0, 4))
    pts = np.concatenate(rows, axis=0)
    keep = np.sum(pts * pts, axis=1) <= Rh * Rh
    return pts[keep]


class LightConeFamily(Family):
    """Rotations of the light cone x1^2+x2^2+x3^2 = x4^2 (apex at 0)."""

    n = 4
    name = "light_cone"
    surface_dim = 3

    def axes(self, bound):
        return [
            Axis("theta", 2 * math.pi / 8, 0.0, 2 * math.pi, True, lipschitz=2.0),
            Axis("phi", math.pi / 4, 0.0, math.pi, False, lipschitz=2.0),
            Axis("psi", math.pi / 8, 0.0, math.pi / 2, False, lipschitz=2.0),
        ]

    def coarse(self, bound):
        return _grid_product(
            [
                np.arange(8) * 2 * math.pi / 8,
                np.linspace(0.0, math.pi, 5),
                np.linspace(0.0, math.pi / 2, 5),
            ]
        )

    def seeds(self, bound):
        return np.array(
            [
                [0.0, 0.0, 0.0],  # axis e4: the standard cone
                [0.0, 0.0, math.pi / 2],
                [math.pi / 2, math.pi / 2, math.pi / 2],
                [0.0, math.pi / 2, math.pi / 2],
            ]
        )

    def dist(self, params, pts):
        return _light_cone_dist(dir4(*params), pts)

    def points(self, params, R, h):
        return _light_cone_points(dir4(*params), np.zeros(4), R, h)


class LightConeOffsetFamily(Family):
    """Translates of light cones that contain 0: member = C_u - c with c on
    C_u.  The anchor c is parameterized on the cone itself:
    c = s*(m, sigma) in axis-adapted coordinates, |m| = 1."""

    n = 4
    name = "light_cone_offset"
    surface_dim = 3

    def axes(self, bound):
        smax = bound / SQRT2 if bound > 0 else 0.0
        return [
            Axis("theta", 2 * math.pi / 4, 0.0, 2 * math.pi, True, lipschitz=2.0 + bound),
            Axis("phi", math.pi / 2, 0.0, math.pi, False, lipschitz=2.0 + bound),
            Axis("psi", math.pi / 6, 0.0, math.pi / 2, False, lipschitz=2.0 + bound),
            Axis("sigma", 0.0, -1.0, 1.0),  # frozen two-point axis
            Axis("s", smax / 2 if smax > 0 else 0.0, 0.0, smax, False, lipschitz=SQRT2),
            Axis("mtheta", 2 * math.pi / 4, 0.0, 2 * math.pi, True, lipschitz=max(bound, 1.0)),
            Axis("mphi", math.pi / 2, 0.0, math.pi, False, lipschitz=max(bound, 1.0)),
        ]

    def coarse(self, bound):
        smax = bound / SQRT2 if bound > 0 else 0.0
        return _grid_product(
            [
                np.arange(4) * 2 * math.pi / 4,
                np.linspace(0.0, math.pi, 3),
                np.linspace(0.0, math.pi / 2, 3),
                np.array([-1.0, 1.0]),
                np.linspace(0.0, smax, 3) if smax > 0 else np.array([0.0]),
                np.arange(4) * 2 * math.pi / 4,
                np.linspace(0.0, math.pi, 3),
            ]
        )

    def seeds(self, bound):
        return np.array([[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]])

    def _anchor(self, params):
        theta, phi, psi, sigma, s, mth, mph = params
        u = dir4(theta, phi, psi)
        base = orth_basis(u)  # (3, 4)
        m = dir3(mth, mph) @ base  # unit vector in u-perp
        c = s * m + sigma * s * u
        return u, c

    def dist(self, params, pts):
        u, c = self._anchor(params)
        return _light_cone_dist(u, pts + c[None, :])

    def points(self, params, R, h):
        u, c = self._anchor(params)
        return _light_cone_points(u, c, R, h)

    def scale_params(self, params, lam):
        theta, phi, psi, sigma, s, mth, mph = params
        return (theta, phi, psi, sigma, s * lam, mth, mph)


# ---------------------------------------------------------------------------
# planar harmonic-polynomial zero sets (similarity orbits)
# ---------------------------------------------------------------------------

def hyperbola_dist_exact(p: np.ndarray, tol: float = 1e-13) -> float:
    """Distance from one 2-D point to {(1+t, 1+1/t)} (both branches), to ~1e-12.

    Dense log-spaced bracketing plus golden-section polish; used by the
    generator oracle.  The vectorized Newton path below is the fast variant.
    """
    px, py = float(p[0]), float(p[1])

    def f(t):
        return (px - 1.0 - t) ** 2 + (py - 1.0 - 1.0 / t) ** 2

    best = math.inf
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for sgn in (1.0, -1.0):
        ts = sgn * np.logspace(-8, 8, 400)
        vals = np.array([f(t) for t in ts])
        k = int(np.argmin(vals))
        lo = ts[max(k - 1, 0)]
        hi = ts[min(k + 1, len(ts) - 1)]
        if lo > hi:
            lo, hi = hi, lo
        a, b = lo, hi
        c = b - gr * (b - a)
        d = a + gr * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(200):
            if abs(b - a) < tol * max(1.0, abs(a)):
                break
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = f(d)
        best = min(best, f((a + b) / 2.0))
    return math.sqrt(max(best, 0.0))


def _hyperbola_dist_fast(pts: np.ndarray) -> np.ndarray:
    """Vectorized distance to {(1+t, 1+1/t)}: log grid + safeguarded Newton."""
    px = pts[:, 0] - 1.0
    py = pts[:, 1] - 1.0
    grid = np.concatenate([-np.logspace(-6, 6, 49)[::-1], np.logspace(-6, 6, 49)])
    # f(t) = (px - t)^2 + (py - 1/t)^2 evaluated on the grid
    T = grid[None, :]
    F = (px[:, None] - T) ** 2 + (py[:, None] - 1.0 / T) ** 2
    k = np.argmin(F, axis=1)
    t = grid[k]
    fbest = F[np.arange(len(t)), k]

    def f_at(tt):
        return (px - tt) ** 2 + (py - 1.0 / tt) ** 2

    # asymptote-adapted warm starts: t = 1/py matches the query's ordinate on
    # the vertical branch, t = px its abscissa on the horizontal one
    for cand in (
        np.where(np.abs(py) > 1e-12, 1.0 / np.where(np.abs(py) > 1e-12, py, 1.0), t),
        np.where(np.abs(px) > 1e-12, px, t),
    ):
        fc = f_at(cand)
        better = fc < fbest
        t = np.where(better, cand, t)
        fbest = np.where(better, fc, fbest)

    # Newton on g(t) = -(px - t) + (py - 1/t)/t^2 with backtracking so a
    # rejected full step cannot stall the iteration
    for _ in range(16):
        inv = 1.0 / t
        e2 = py - inv
        g = -(px - t) + e2 * inv * inv
        gp = 1.0 + inv ** 4 - 2.0 * e2 * inv ** 3
        safe = np.abs(gp) > 1e-30
        step = np.where(safe, g / np.where(safe, gp, 1.0), 0.0)
        step = np.clip(step, -0.45 * np.abs(t), 0.45 * np.abs(t))  # stay on branch
        taken = np.zeros(t.shape, dtype=bool)
        for frac in (1.0, 0.5, 0.25, 0.125):
            tn = t - frac * step
            fn = f_at(tn)
            take = ~taken & (fn < fbest)
            t = np.where(take, tn, t)
            fbest = np.where(take, fn, fbest)
            taken |= take
    return np.sqrt(np.maximum(fbest, 0.0))


def _hyperbola_points(R: float, h: float) -> np.ndarray:
    """h-net of {(1+t, 1+1/t)} ∩ B(0, R+h) by adaptive parameter walk."""
    rows = []
    lim = R + 2.0 * h + 3.0
    for sgn in (1.0, -1.0):
        t = sgn * 1.0 / lim
        t_end = sgn * lim
        while abs(t) <= abs(t_end):
            x, y = 1.0 + t, 1.0 + 1.0 / t
            if x * x + y * y <= (R + h) ** 2:
                rows.append((x, y))
            speed = math.sqrt(1.0 + 1.0 / t ** 4)
            t += sgn * max(h / speed, 1e-12) * 0.9
    if not rows:
        return np.empty((0, 2))
    return np.array(rows)


class HarmonicFamily(Family):
    """Similarity orbits s*R(Sigma_k) of the four planar model zero sets:
    k=1 a line, k=2 the coordinate cross, k=3 a line plus a parallel-offset
    line pair {x=-1} ∪ {y=0}, k=4 the hyperbola (x-1)(y-1)=1 through 0.
    Types 1-2 are cones (no scale parameter)."""

    n = 2
    surface_dim = 1
    LOG_S_RANGE = (-6.0, 3.0)

    def __init__(self, ktype: int, fast: bool = True):
        if ktype not in (1, 2, 3, 4):
            raise UnsupportedClassError(f"harmonic type {ktype}")
        self.k = ktype
        self.name = f"harmonic{ktype}"
        self.fast = fast

    def axes(self, bound):
        if self.k == 1:
            return [Axis("omega", math.pi / 64, 0.0, math.pi, True)]
        if self.k == 2:
            return [Axis("omega", (math.pi / 2) / 32, 0.0, math.pi / 2, True)]
        lo, hi = self.LOG_S_RANGE
        return [
            Axis("omega", 2 * math.pi / 24, 0.0, 2 * math.pi, True),
            Axis("log2s", 0.75, lo, hi, False, lipschitz=1.5),
        ]

    def coarse(self, bound):
        if self.k == 1:
            return np.arange(64)[:, None] * math.pi / 64
        if self.k == 2:
            return np.arange(32)[:, None] * (math.pi / 2) / 32
        lo, hi = self.LOG_S_RANGE
        return _grid_product(
            [np.arange(24) * 2 * math.pi / 24, np.arange(lo, hi + 1e-9, 0.75)]
        )

    def seeds(self, bound):
        if self.k <= 2:
            return np.array([[0.0]])
        return np.array([[0.0, 0.0]])

    def _local(self, params, pts):
        w = params[0]
        s = 2.0 ** params[1] if self.k >= 3 else 1.0
        return pts @ rot2(w) / s, s  # R(-w) applied from the right = R(w) cols

    def dist(self, params, pts):
        p, s = self._local(params, pts)
        if self.k == 1:
            return s * np.abs(p[:, 0])
        if self.k == 2:
            return s * np.minimum(np.abs(p[:, 0]), np.abs(p[:, 1]))
        if self.k == 3:
            return s * np.minimum(np.abs(p[:, 0] + 1.0), np.abs(p[:, 1]))
        if self.fast:
            return s * _hyperbola_dist_fast(p)
        return s * np.array([hyperbola_dist_exact(row) for row in p])

    def points(self, params, R, h):
        w = params[0]
        s = 2.0 ** params[1] if self.k >= 3 else 1.0
        Rl, hl = R / s, h / s
        if self.k == 1:
            loc = segment_net(-Rl - hl, Rl + hl, hl)[:, None] * np.array([[0.0, 1.0]])
        elif self.k == 2:
            t = segment_net(-Rl - hl, Rl + hl, hl)
            loc = np.concatenate(
                [
                    np.stack([t, np.zeros_like(t)], axis=1),
                    np.stack([np.zeros_like(t), t], axis=1),
                ]
            )
        elif self.k == 3:
            t = segment_net(-Rl - hl, Rl + hl, hl)
            loc = np.concatenate(
                [
                    np.stack([np.full_like(t, -1.0), t], axis=1),
                    np.stack([t, np.zeros_like(t)], axis=1),
                ]
            )
        else:
            loc = _hyperbola_points(Rl, hl)
        pts = s * (loc @ rot2(-w))
        keep = np.sum(pts * pts, axis=1) <= (R + h) ** 2
        return pts[keep]

    def scale_params(self, params, lam):
        if self.k <= 2:
            return tuple(params)
        return (params[0], params[1] + math.log2(lam))


# ---------------------------------------------------------------------------
# dilates of the sphere stack
# ---------------------------------------------------------------------------

class SphereStackFamily(Family):
    """Dilates lam*S0 of S0 = {0} ∪ ⋃_i ∂B(0, 2^i) in R^2.

    2*S0 = S0, so lam in [1, 2) (log2 lam in [0, 1)) covers every dilate.
    """

    n = 2
    name = "sphere_stack"
    surface_dim = 1

    def axes(self, bound):
        return [Axis("log2lam", 1.0 / 16, 0.0, 1.0, True, lipschitz=3.0)]

    def coarse(self, bound):
        return (np.arange(16) / 16.0)[:, None]

    def seeds(self, bound):
        return np.array([[0.0]])

    def dist(self, params, pts):
        lam = 2.0 ** params[0]
        r = np.sqrt(np.sum(pts * pts, axis=1))
        with np.errstate(divide="ignore"):
            k = np.where(r > 0, np.round(np.log2(np.maximum(r, 1e-300) / lam)), 0.0)
        d = r.copy()  # distance to the center point 0
        for dk in (-1.0, 0.0, 1.0):
            d = np.minimum(d, np.abs(r - lam * 2.0 ** (k + dk)))
        return d

    def points(self, params, R, h):
        lam = 2.0 ** params[0]
        rows = [np.zeros(2)]
        i = math.floor(math.log2(max(h, 1e-12) / lam))
        while lam * 2.0 ** i <= R + h:
            rho = lam * 2.0 ** i
            k = max(int(math.ceil(2 * math.pi * rho / h)), 4)
            ang = np.arange(k) * 2 * math.pi / k
            rows.append(np.stack([rho * np.cos(ang), rho * np.sin(ang)], axis=1))
            i += 1
        pts = np.concatenate([np.atleast_2d(r) for r in rows], axis=0)
        keep = np.sum(pts * pts, axis=1) <= (R + h) ** 2
        return pts[keep]

    def scale_params(self, params, lam):
        return ((params[0] + math.log2(lam)) % 1.0,)


class SingletonFamily(Family):
    """The class {{0}}."""

    def __init__(self, n: int):
        self.n = n
        self.name = "singleton"
        self.surface_dim = 0

    def axes(self, bound):
        return [Axis("unused", 0.0, 0.0, 0.0)]

    def coarse(self, bound):
        return np.zeros((1, 1))

    def dist(self, params, pts):
        return np.sqrt(np.sum(pts * pts, axis=1))

    def points(self, params, R, h):
        return np.zeros((1, self.n))


# ---------------------------------------------------------------------------
# model class = union of families + metadata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelMember:
    """One concrete member: params[0] is the branch tag (family index)."""

    class_id: str
    params: tuple

    def to_json(self) -> dict:
        return {"class": self.class_id, "params": [float(v) for v in self.params]}

    @staticmethod
    def from_json(obj: dict) -> "ModelMember":
        return ModelMember(str(obj["class"]), tuple(float(v) for v in obj["params"]))


class ModelClass:
    def __init__(self, class_id: str, n: int, families: Sequence[Family],
                 alpha: float, offset_bound: float = 2.0):
        self.id = class_id
        self.n = n
        self.families = list(families)
        self.alpha = float(alpha)  # analytic covering-growth exponent
        self.offset_bound = float(offset_bound)

    # -- members ------------------------------------------------------------

    def member(self, tag: int, params) -> ModelMember:
        return ModelMember(self.id, (float(tag),) + tuple(float(v) for v in params))

    def split(self, member_or_params):
        p = member_or_params.params if isinstance(member_or_params, ModelMember) else tuple(member_or_params)
        tag = int(round(p[0]))
        if not (0 <= tag < len(self.families)):
            raise ValueError(f"{self.id}: bad branch tag {tag}")
        return self.families[tag], p[1:]

    def distance(self, member_or_params, pts) -> np.ndarray:
        fam, p = self.split(member_or_params)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.n:
            raise ValueError(f"{self.id} lives in R^{self.n}")
        return fam.dist(p, pts)

    def member_points(self, member_or_params, R: float, h: float) -> np.ndarray:
        fam, p = self.split(member_or_params)
        return fam.points(p, R, h)

    def scale_member(self, member: ModelMember, lam: float) -> ModelMember:
        fam, p = self.split(member)
        tag = int(round(member.params[0]))
        return self.member(tag, fam.scale_params(p, lam))

    def sample_members(self, per_family: int = 8) -> list[ModelMember]:
        """Deterministic spread of members used by calibration and audits."""
        out = []
        for tag, fam in enumerate(self.families):
            grid = fam.coarse(self.offset_bound)
            k = min(per_family, grid.shape[0])
            idx = np.unique(np.linspace(0, grid.shape[0] - 1, k).astype(int))
            for i in idx:
                out.append(self.member(tag, grid[i]))
            for row in fam.seeds(self.offset_bound):
                out.append(self.member(tag, row))
        return out


def member_distance(member: ModelMember, q) -> float:
    """Exact distance from one point to a member set."""
    cls = get_class(member.class_id)
    return float(cls.distance(member, np.atleast_2d(np.asarray(q, dtype=float)))[0])


def sample_member(member: ModelMember, ball: Ball, h: float) -> PointCloud:
    """h-net PointCloud of (member ∩ ball); empty-tagged if it misses the ball."""
    if h <= 0:
        raise ValueError("sample_member needs h > 0")
    cls = get_class(member.class_id)
    if ball.n != cls.n:
        raise ValueError("ball dimension does not match the class")
    R0 = float(np.linalg.norm(ball.center)) + ball.radius
    pts = cls.member_points(member, R0, h)
    if pts.shape[0]:
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        pts = pts[keep]
    return PointCloud(pts if pts.shape[0] else np.empty((0, cls.n)), h=h, window=ball)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_GRASS_RE = re.compile(r"^grassmannian\((\d+),\s*(\d+)\)$")
_LC_RE = re.compile(r"^light_cone\((\d+)\)$")
_US_RE = re.compile(r"^uniform_support\((\d+)\)$")
_SP_RE = re.compile(r"^singular_parts\(([^,]+),\s*(.+)\)$")
_SINGLETON_RE = re.compile(r"^singleton\((\d+)\)$")

_CLASS_CACHE: dict[str, ModelClass] = {}


def _build_class(class_id: str) -> ModelClass:
    m = _GRASS_RE.match(class_id)
    if m:
        n, k = int(m.group(1)), int(m.group(2))
        if not (1 <= k < n):
            raise UnsupportedClassError(f"grassmannian({n},{k}) is not a proper subspace family")
        if k == 1:
            return ModelClass(class_id, n, [LineFamily(n)], alpha=1.0)
        if k == n - 1:
            return ModelClass(class_id, n, [HyperplaneFamily(n)], alpha=float(k))
        raise UnsupportedClassError(
            f"grassmannian({n},{k}): only lines and hyperplanes are parameterized"
        )
    m = _LC_RE.match(class_id)
    if m:
        n = int(m.group(1))
        if n != 4:
            raise UnsupportedClassError("light_cone is implemented for n = 4")
        return ModelClass(class_id, 4, [LightConeFamily()], alpha=3.0)
    m = _US_RE.match(class_id)
    if m:
        n = int(m.group(1))
        if n != 4:
            raise UnsupportedClassError("uniform_support is implemented for n = 4")
        # anchor bound 5r (not the generic 2r): hyperplane and offset-cone
        # regimes must overlap for on-cone points, see package docs
        return ModelClass(
            class_id, 4, [HyperplaneFamily(4), LightConeOffsetFamily()],
            alpha=3.0, offset_bound=5.0,
        )
    m = _SINGLETON_RE.match(class_id)
    if m:
        n = int(m.group(1))
        return ModelClass(class_id, n, [SingletonFamily(n)], alpha=0.0)
    m = _SP_RE.match(class_id)
    if m:
        base, detector = m.group(1).strip(), m.group(2).strip()
        if base == "minimal_cones":
            base = "minimal_cones_3_2"
        if detector in ("G", "G(3,2)"):
            detector = "grassmannian(3,2)"
        if base == "minimal_cones_3_2" and detector == "grassmannian(3,2)":
            # lines through 0 plus translates of T spines containing 0
            return ModelClass(class_id, 3, [LineFamily(3), TSpineFamily()], alpha=1.0)
        raise UnsupportedClassError(f"singular_parts({base},{detector}) not tabulated")
    if class_id == "minimal_cones_3_2":
        return ModelClass(class_id, 3, [HyperplaneFamily(3), YFamily(), TFamily()], alpha=2.0)
    if class_id == "y_cones_3_2":
        return ModelClass(class_id, 3, [YFamily()], alpha=2.0)
    if class_id == "harmonic_2_2":
        return ModelClass(
            class_id, 2, [HarmonicFamily(k) for k in (1, 2, 3, 4)], alpha=1.0
        )
    if class_id == "harmonic_prime_2_2":
        return ModelClass(
            class_id, 2, [HarmonicFamily(k) for k in (1, 2, 3)], alpha=1.0
        )
    if class_id == "sphere_stack":
        return ModelClass(class_id, 2, [SphereStackFamily()], alpha=1.0)
    if class_id == "axes_union_2d":
        return ModelClass(class_id, 2, [HarmonicFamily(2)], alpha=1.0)
    raise UnsupportedClassError(f"unknown model class {class_id!r}")


def get_class(class_id: str) -> ModelClass:
    class_id = class_id.strip()
    if class_id not in _CLASS_CACHE:
        _CLASS_CACHE[class_id] = _build_class(class_id)
    return _CLASS_CACHE[class_id]


def known_class_ids() -> list[str]:
    return [
        "grassmannian(n,1)/(n,n-1)",
        "minimal_cones_3_2",
        "y_cones_3_2",
        "harmonic_2_2",
        "harmonic_prime_2_2",
        "light_cone(4)",
        "uniform_support(4)",
        "sphere_stack",
        "axes_union_2d",
        "singular_parts(minimal_cones_3_2,grassmannian(3,2))",
        "singleton(n)",
    ]
