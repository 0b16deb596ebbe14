"""Analytic sample-set generators with exact distance oracles.

Each sampler describes a closed subset of R^n and can produce an h-net
PointCloud of (set ∩ ball) at any resolution, plus an exact point-to-set
distance used as ground truth by the test oracles.  Randomized specs
(reifenberg_graph) are pure functions of their seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Ball, PointCloud
from . import models
from .models import (
    HarmonicFamily,
    SphereStackFamily,
    TFamily,
    YFamily,
    cube_mesh,
    fibonacci_sphere,
    hyperbola_dist_exact,
    segment_net,
)

RESOLUTION_FLOOR = 1e-9


class UnsupportedSpecError(ValueError):
    pass


def _norms(pts: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.atleast_2d(pts) ** 2, axis=1))


def _golden_min(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-14) -> float:
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(300):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    m = (a + b) / 2.0
    return min(f(m), fc, fd)


def _min_1d(f: Callable[[float], float], lo: float, hi: float, coarse: int = 400) -> float:
    """Global 1-D minimum by dense bracketing + golden polish of best cells."""
    ts = np.linspace(lo, hi, coarse)
    vals = np.array([f(t) for t in ts])
    order = np.argsort(vals)[:3]
    best = math.inf
    for k in order:
        a = ts[max(k - 1, 0)]
        b = ts[min(k + 1, coarse - 1)]
        best = min(best, _golden_min(f, a, b))
    return best


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

class _Base:
    n: int = 2
    spec: str = ""
    params: dict = {}
    seed: int = 0

    def distance(self, q) -> float:
        return float(self.distance_many(np.atleast_2d(np.asarray(q, dtype=float)))[0])

    def distance_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.array([self._dist_one(p) for p in pts])

    def _dist_one(self, p: np.ndarray) -> float:  # pragma: no cover - overridden
        raise NotImplementedError

    def points_in(self, ball: Ball, h: float) -> np.ndarray:
        raise NotImplementedError


class _FamilyBacked(_Base):
    """Sampler delegating to a model-family member at fixed parameters."""

    def __init__(self, family, fparams, n):
        self.family = family
        self.fparams = tuple(fparams)
        self.n = n

    def distance_many(self, pts):
        return self.family.dist(self.fparams, np.atleast_2d(np.asarray(pts, dtype=float)))

    def points_in(self, ball, h):
        R0 = float(np.linalg.norm(ball.center)) + ball.radius
        pts = self.family.points(self.fparams, R0, h)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class SubspaceSampler(_Base):
    """span(e_1..e_m) inside R^n (m = n gives all of R^n)."""

    def __init__(self, n: int, m: int):
        if not (1 <= m <= n):
            raise UnsupportedSpecError(f"plane({n},{m})")
        self.n, self.m = n, m

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.m == self.n:
            return np.zeros(pts.shape[0])
        return np.sqrt(np.sum(pts[:, self.m:] ** 2, axis=1))

    def points_in(self, ball, h):
        c = np.asarray(ball.center, dtype=float)
        g = h / math.sqrt(self.m)
        mesh = cube_mesh(self.m, ball.radius + float(np.linalg.norm(c[: self.m])) + g, g)
        pts = np.zeros((mesh.shape[0], self.n))
        pts[:, : self.m] = mesh
        keep = np.sum((pts - c) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class CrossSampler(_FamilyBacked):
    def __init__(self):
        super().__init__(HarmonicFamily(2), (0.0,), 2)


class SphereSampler(_Base):
    """The sphere of radius R about 0 in R^n (n = 2 or 3)."""

    def __init__(self, n: int, R: float):
        if n not in (2, 3) or R <= 0:
            raise UnsupportedSpecError(f"sphere(n={n}, R={R})")
        self.n, self.R = n, float(R)

    def distance_many(self, pts):
        return np.abs(_norms(pts) - self.R)

    def points_in(self, ball, h):
        if self.n == 2:
            k = max(int(math.ceil(2 * math.pi * self.R / h)), 8)
            ang = np.arange(k) * 2 * math.pi / k
            pts = self.R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            k = max(int(math.ceil(16 * math.pi * self.R ** 2 / h ** 2)), 32)
            pts = self.R * fibonacci_sphere(k)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class GraphSampler(_Base):
    """Planar graph y = A*g(x) for a named profile g."""

    _PROFILES = {
        "sine": (np.sin, np.cos),
        "parabola": (lambda x: x * x, lambda x: 2.0 * x),
        "cubic": (lambda x: x ** 3, lambda x: 3.0 * x * x),
    }

    def __init__(self, profile: str, amplitude: float):
        if profile not in self._PROFILES:
            raise UnsupportedSpecError(f"graph profile {profile!r}")
        self.profile, self.amp = profile, float(amplitude)
        self.n = 2

    def _f(self, x):
        return self.amp * self._PROFILES[self.profile][0](x)

    def _dist_one(self, p):
        qx, qy = p

        def g(t):
            return math.hypot(t - qx, self._f(t) - qy)

        ub = g(qx)
        return _min_1d(g, qx - ub - 1e-9, qx + ub + 1e-9)

    def points_in(self, ball, h):
        cx = float(ball.center[0])
        span = ball.radius + h
        lip = abs(self.amp) * (3.0 * (abs(cx) + span) ** 2 + 1.0)  # generous bound
        g = h / math.sqrt(1.0 + min(lip, 50.0) ** 2)
        t = np.arange(cx - span, cx + span + g, g)
        pts = np.stack([t, self._f(t)], axis=1)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class SquareSampler(_Base):
    """The filled unit square [0,1]^2 (closed-form oracle)."""

    n = 2

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dx = np.maximum(np.abs(pts[:, 0] - 0.5) - 0.5, 0.0)
        dy = np.maximum(np.abs(pts[:, 1] - 0.5) - 0.5, 0.0)
        return np.sqrt(dx * dx + dy * dy)

    def points_in(self, ball, h):
        g = h / math.sqrt(2.0)
        ax = segment_net(0.0, 1.0, g)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class KochSampler(_Base):
    """Generalized von Koch polyline from (0,0) to (1,0).

    Each segment is replaced by four of equal length with bump angle theta;
    theta = 60 deg is the standard snowflake, small theta is nearly flat.
    The level-k polyline is the sampled set; its deviation from the limit
    curve is of order a^k with a = 1/(2+2cos(theta)).
    """

    n = 2

    def __init__(self, angle_deg: float = 60.0, level: int = 7):
        if not (0.0 <= angle_deg < 90.0) or level < 0 or level > 9:
            raise UnsupportedSpecError(f"koch(angle={angle_deg}, level={level})")
        self.angle = math.radians(angle_deg)
        self.level = int(level)
        self.ratio = 1.0 / (2.0 + 2.0 * math.cos(self.angle))
        self.vertices = self._build()
        self._segA = self.vertices[:-1]
        self._segV = self.vertices[1:] - self.vertices[:-1]
        self._segL2 = np.sum(self._segV ** 2, axis=1)

    def _build(self) -> np.ndarray:
        pts = np.array([[0.0, 0.0], [1.0, 0.0]])
        a = self.ratio
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot_p = np.array([[c, -s], [s, c]])
        rot_m = np.array([[c, s], [-s, c]])
        for _ in range(self.level):
            P = pts[:-1]
            u = pts[1:] - pts[:-1]
            p1 = P + a * u
            p2 = p1 + a * (u @ rot_p.T)
            p3 = p2 + a * (u @ rot_m.T)
            out = np.empty((4 * len(P) + 1, 2))
            out[0::4] = np.vstack([P, pts[-1:]])
            out[1::4] = p1
            out[2::4] = p2
            out[3::4] = p3
            pts = out
        return pts

    def dimension(self) -> float:
        """Self-similarity dimension of the limit curve (oracle only)."""
        return math.log(4.0) / math.log(1.0 / self.ratio)

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(pts.shape[0], np.inf)
        # chunk over segments to bound memory
        step = max(1, int(4e6 // max(pts.shape[0], 1)))
        for s0 in range(0, self._segA.shape[0], step):
            A = self._segA[s0 : s0 + step]
            V = self._segV[s0 : s0 + step]
            L2 = self._segL2[s0 : s0 + step]
            W = pts[:, None, :] - A[None, :, :]
            t = np.clip(np.einsum("mkd,kd->mk", W, V) / L2[None, :], 0.0, 1.0)
            D = W - t[:, :, None] * V[None, :, :]
            out = np.minimum(out, np.sqrt(np.sum(D * D, axis=2)).min(axis=1))
        return out

    def points_in(self, ball, h):
        seg_len = self.ratio ** self.level
        rows = [self.vertices]
        k = int(math.ceil(seg_len / h))
        if k > 1:
            t = (np.arange(1, k) / k)[None, :, None]
            mid = self._segA[:, None, :] + t * self._segV[:, None, :]
            rows.append(mid.reshape(-1, 2))
        pts = np.concatenate(rows, axis=0)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class LightConeSampler(_Base):
    """{x : x_1^2 + ... + x_{n-1}^2 = x_n^2} for n in {2, 3, 4}."""

    def __init__(self, n: int):
        if n not in (2, 3, 4):
            raise UnsupportedSpecError(f"light_cone({n})")
        self.n = n

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        t = pts[:, -1]
        rho = np.sqrt(np.maximum(np.sum(pts[:, :-1] ** 2, axis=1), 0.0))
        return np.abs(rho - np.abs(t)) / math.sqrt(2.0)

    def points_in(self, ball, h):
        R0 = float(np.linalg.norm(ball.center)) + ball.radius
        if self.n == 4:
            pts = models._light_cone_points(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(4), R0, h)
        else:
            smax = (R0 + h) / math.sqrt(2.0)
            gs = h / 2.0
            rows = [np.zeros(self.n)]
            s = gs
            while s <= smax:
                if self.n == 2:
                    lat = np.array([[1.0], [-1.0]])
                else:
                    k = max(int(math.ceil(2 * math.pi * s / (h / 2.0))), 6)
                    ang = np.arange(k) * 2 * math.pi / k
                    lat = np.stack([np.cos(ang), np.sin(ang)], axis=1)
                for sign in (1.0, -1.0):
                    blk = np.concatenate([s * lat, np.full((lat.shape[0], 1), sign * s)], axis=1)
                    rows.append(blk)
                s += gs
            pts = np.concatenate([np.atleast_2d(r) for r in rows], axis=0)
        keep = np.sum((pts - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class SphereStackSampler(_FamilyBacked):
    """S = {0} ∪ ⋃_i ∂B(0, 2^i); shells outside the window are irrelevant."""

    def __init__(self):
        super().__init__(SphereStackFamily(), (0.0,), 2)


class SphereStackPlusSampler(_Base):
    """The stack plus the extra points t_i*e1 with t_i = 2^{-i} - 3^{-i}."""

    n = 2
    _TI = np.array([2.0 ** (-i) - 3.0 ** (-i) for i in range(1, 64)])

    def __init__(self):
        self._stack = SphereStackSampler()

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = self._stack.distance_many(pts)
        dx = pts[:, 0, None] - self._TI[None, :]
        dpts = np.sqrt((dx ** 2 + pts[:, 1, None] ** 2).min(axis=1))
        return np.minimum(d, dpts)

    def points_in(self, ball, h):
        base = self._stack.points_in(ball, h)
        extra = np.stack([self._TI, np.zeros_like(self._TI)], axis=1)
        keep = np.sum((extra - ball.center) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return np.concatenate([base, extra[keep]], axis=0)


class AnnulusMixerSampler(_Base):
    """The x-axis plus vertical spike pairs {0} x ±[a_k/4, a_k], a_k = 4^{-2k-1}.

    Windows around scale a_k mix line and cross behaviour; the factor-4 gaps
    between spike bands keep the mixing scales isolated.
    """

    n = 2
    _AK = np.array([4.0 ** (-(2 * k + 1)) for k in range(32)])

    def distance_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d_axis = np.abs(pts[:, 1])
        ay = np.abs(pts[:, 1])[:, None]
        lo, hi = self._AK[None, :] / 4.0, self._AK[None, :]
        dy = np.maximum(np.maximum(lo - ay, ay - hi), 0.0)
        d_spike = np.sqrt(pts[:, 0, None] ** 2 + dy ** 2).min(axis=1)
        return np.minimum(d_axis, d_spike)

    def points_in(self, ball, h):
        c = np.asarray(ball.center, dtype=float)
        span = ball.radius + abs(c[0]) + h
        t = segment_net(-span, span, h)
        rows = [np.stack([t, np.zeros_like(t)], axis=1)]
        for a in self._AK:
            if a < h / 8 and a < max(ball.radius / 1e6, 1e-300):
                break
            s = segment_net(a / 4.0, a, min(h, a / 4.0))
            for sign in (1.0, -1.0):
                rows.append(np.stack([np.zeros_like(s), sign * s], axis=1))
        pts = np.concatenate(rows, axis=0)
        keep = np.sum((pts - c) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


class ReifenbergGraphSampler(_Base):
    """Graph in R^3 of a seeded multiscale bump sum over R^2.

    f(u) = eps * sum_{j<=J} 2^{-j} sin(2^j a_j.u + phi_j), so every dyadic
    scale contributes oscillation <= eps * scale; the graph stays within
    c*eps*r of a plane on every ball of radius r (c ~= 4, and the unit normal
    tilt is bounded by the Lipschitz constant (J+1)*eps).
    """

    n = 3

    def __init__(self, eps: float, seed: int = 0, levels: int = 6):
        if not (0.0 < eps < 0.2):
            raise UnsupportedSpecError(f"reifenberg_graph eps={eps}")
        self.eps = float(eps)
        self.seed = int(seed)
        self.levels = int(levels)
        rng = np.random.default_rng(self.seed)
        ang = rng.uniform(0.0, 2 * math.pi, size=self.levels + 1)
        self._dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        self._phases = rng.uniform(0.0, 2 * math.pi, size=self.levels + 1)
        self._freqs = 2.0 ** np.arange(self.levels + 1)

    def height(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        args = self._freqs[None, :] * (u @ self._dirs.T) + self._phases[None, :]
        return self.eps * np.sum(np.sin(args) / self._freqs[None, :], axis=1)

    def _grad(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        args = self._freqs[None, :] * (u @ self._dirs.T) + self._phases[None, :]
        return self.eps * (np.cos(args) @ self._dirs)

    def _dist_one(self, p):
        from scipy.optimize import minimize

        q2, q3 = p[:2], p[2]

        def obj(u):
            fu = float(self.height(u[None, :])[0])
            r = np.concatenate([u - q2, [fu - q3]])
            g = self._grad(u[None, :])[0]
            grad = 2.0 * (u - q2) + 2.0 * (fu - q3) * g
            return float(r @ r), grad

        res = minimize(obj, x0=np.asarray(q2, dtype=float), jac=True, method="L-BFGS-B",
                       options={"ftol": 1e-18, "gtol": 1e-14, "maxiter": 200})
        return math.sqrt(max(res.fun, 0.0))

    def points_in(self, ball, h):
        c = np.asarray(ball.center, dtype=float)
        lip = self.eps * (self.levels + 1)
        g = (h / math.sqrt(2.0)) / math.sqrt(1.0 + lip * lip)
        span = ball.radius + h
        mesh = cube_mesh(2, span, g) + c[:2]
        z = self.height(mesh)
        pts = np.concatenate([mesh, z[:, None]], axis=1)
        keep = np.sum((pts - c) ** 2, axis=1) <= ball.radius ** 2 * (1 + 1e-12)
        return pts[keep]


# ---------------------------------------------------------------------------
# public wrapper
# ---------------------------------------------------------------------------

_BUILDERS = {}


def _register(tag):
    def inner(fn):
        _BUILDERS[tag] = fn
        return fn
    return inner


@_register("line")
def _mk_line(params, seed):
    n = int(params.get("n", 2))
    return SubspaceSampler(n, 1)


@_register("plane")
def _mk_plane(params, seed):
    return SubspaceSampler(int(params.get("n", 3)), int(params.get("m", 2)))


@_register("cross_2d")
def _mk_cross(params, seed):
    return CrossSampler()


@_register("axes_union_2d")
def _mk_axes(params, seed):
    return CrossSampler()


@_register("graph")
def _mk_graph(params, seed):
    return GraphSampler(params.get("profile", "sine"), float(params.get("amplitude", 0.1)))


@_register("square_2d")
def _mk_square(params, seed):
    return SquareSampler()


@_register("koch")
def _mk_koch(params, seed):
    return KochSampler(float(params.get("angle", 60.0)), int(params.get("level", 7)))


@_register("circle")
def _mk_circle(params, seed):
    return SphereSampler(2, float(params.get("R", 1.0)))


@_register("sphere")
def _mk_sphere(params, seed):
    return SphereSampler(int(params.get("n", 3)), float(params.get("R", 1.0)))


@_register("light_cone")
def _mk_lc(params, seed):
    return LightConeSampler(int(params.get("n", 4)))


@_register("y_cone")
def _mk_y(params, seed):
    return _FamilyBacked(YFamily(), (0.0, 0.0, 0.0, 0.0), 3)


@_register("t_cone")
def _mk_t(params, seed):
    return _FamilyBacked(TFamily(), (0.0, 0.0, 0.0, 0.0, 0.0), 3)


@_register("harmonic_zero")
def _mk_h(params, seed):
    k = int(params.get("type", params.get("k", 1)))
    fam = HarmonicFamily(k, fast=False)  # exact hyperbola oracle
    p = (0.0,) if k <= 2 else (0.0, 0.0)
    return _FamilyBacked(fam, p, 2)


@_register("sphere_stack")
def _mk_stack(params, seed):
    return SphereStackSampler()


@_register("sphere_stack_plus")
def _mk_stackp(params, seed):
    return SphereStackPlusSampler()


@_register("annulus_mixer")
def _mk_mixer(params, seed):
    return AnnulusMixerSampler()


@_register("reifenberg_graph")
def _mk_reif(params, seed):
    return ReifenbergGraphSampler(
        float(params.get("eps", 0.05)), int(seed), int(params.get("levels", 6))
    )


@dataclass(frozen=True)
class SetSampler:
    """Tagged analytic set description; see module docstring."""

    spec: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "_impl", self._build())

    def _build(self):
        if self.spec not in _BUILDERS:
            raise UnsupportedSpecError(f"unknown sampler spec {self.spec!r}")
        return _BUILDERS[self.spec](self.params, self.seed)

    @property
    def n(self) -> int:
        return self._impl.n

    def distance(self, q) -> float:
        """Exact dist(q, set)."""
        return self._impl.distance(q)

    def distance_many(self, pts) -> np.ndarray:
        return self._impl.distance_many(pts)

    def to_json(self) -> dict:
        return {"spec": self.spec, "params": dict(self.params), "seed": self.seed}

    @staticmethod
    def from_json(obj: dict) -> "SetSampler":
        return SetSampler(str(obj["spec"]), dict(obj.get("params", {})), int(obj.get("seed", 0)))


def make_sampler(spec: str, seed: int = 0, **params) -> SetSampler:
    if isinstance(seed, dict):  # catch make_sampler(spec, {...}) misuse early
        raise TypeError("pass set parameters as keyword arguments, not a dict")
    return SetSampler(spec, params, seed)


def load_sampler(path) -> SetSampler:
    with open(path) as fh:
        return SetSampler.from_json(json.load(fh))


def generate_window(sampler: SetSampler, x, r: float, h: float) -> PointCloud:
    """h-net PointCloud of (set ∩ B(x, r)); empty-tagged off-set windows."""
    if h < RESOLUTION_FLOOR:
        raise ValueError(f"resolution h={h} below floor {RESOLUTION_FLOOR}")
    if r <= 0:
        raise ValueError("window radius must be positive")
    x = np.asarray(x, dtype=float)
    ball = Ball(x, float(r))
    pts = sampler._impl.points_in(ball, float(h))
    if pts.shape[0] == 0:
        return PointCloud(np.empty((0, sampler.n)), h=h, window=ball)
    return PointCloud(pts, h=float(h), window=ball)


def analytic_distance(sampler: SetSampler, q) -> float:
    return sampler.distance(q)
