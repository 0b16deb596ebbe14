"""Bilateral (theta) and unilateral (beta) approximability against model classes.

All evaluation happens in local coordinates: the query ball B(x, r) is mapped
to the unit ball, member parameters (angles, offsets, scales) are expressed in
units of r, and results are dimensionless.  The optimizer is a deterministic
coarse grid over each family's search box followed by two per-axis refinement
passes (step / 8 each) around the best cell; `optimizer_gap` is the
grid-resolution Lipschitz bound on sub-optimality, not a certificate of
global optimality.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Ball, PointCloud, build_index, restrict
from .setdist import EmptyRestrictionError
from .models import ModelClass, ModelMember, get_class
from . import generators

# sampler resolution (relative to r) by ambient dimension, when the caller
# hands us an analytic sampler instead of a fixed cloud
_DEFAULT_H_REL = {1: 0.005, 2: 0.005, 3: 0.025, 4: 0.05}

# member-net resolution by member surface dimension: coarse during search,
# fine for the final re-evaluation of the winner
_MEMBER_H_SEARCH = {0: 0.05, 1: 0.02, 2: 0.06, 3: 0.22}
_MEMBER_H_FINAL = {0: 0.02, 1: 0.008, 2: 0.025, 3: 0.08}

_SUBSAMPLE_TARGET = 4000
DEFAULT_PAD = 1.6


@dataclass(frozen=True)
class ApproxQuery:
    set: object  # SetSampler or PointCloud
    class_id: str
    x: object
    r: float
    tolerance: float = 0.01
    variant: str = "theta"

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("query radius must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.variant not in ("theta", "beta"):
            raise ValueError(f"variant {self.variant!r}")


@dataclass(frozen=True)
class ApproxResult:
    value: float
    best_member: ModelMember  # parameters in local units of the query ball
    optimizer_gap: float
    sampling_slack: float

    def __float__(self):
        return self.value

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "best_member": self.best_member.to_json(),
            "optimizer_gap": self.optimizer_gap,
            "sampling_slack": self.sampling_slack,
        }


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------

def _localize(set_like, x, r: float, pad: float, h_rel: Optional[float], n: int) -> PointCloud:
    """Local-coordinate cloud of set ∩ B(x, pad*r): points (p - x)/r."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if isinstance(set_like, PointCloud):
        if set_like.n != n:
            raise ValueError(f"cloud dimension {set_like.n} != class dimension {n}")
        local = set_like.rescale(x, r)
        return restrict(local, Ball(np.zeros(n), pad))
    # sampler path
    if set_like.n != n:
        raise ValueError(f"sampler dimension {set_like.n} != class dimension {n}")
    hr = h_rel if h_rel is not None else _DEFAULT_H_REL.get(n, 0.02)
    cloud = generators.generate_window(set_like, x, pad * r, hr * r)
    return cloud.rescale(x, r)


def _subsample(pts: np.ndarray, target: int = _SUBSAMPLE_TARGET) -> np.ndarray:
    if pts.shape[0] <= target:
        return pts
    stride = int(math.ceil(pts.shape[0] / target))
    return pts[::stride]


# ---------------------------------------------------------------------------
# the grid optimizer
# ---------------------------------------------------------------------------

class _Evaluator:
    """Caches one-sided evaluations for a fixed local cloud and class.

    `exact_dist`, when given, maps local member points to their distance from
    the full underlying set; it replaces nearest-sample queries on the
    member-to-set side (the set-to-member side always uses the sampled data).
    """

    def __init__(self, local: PointCloud, cls: ModelClass, variant: str,
                 exact_dist=None):
        self.cls = cls
        self.variant = variant
        self.exact_dist = exact_dist
        if local.is_empty:
            raise EmptyRestrictionError("no sample points near the query ball")
        self.index = build_index(local)
        pts = local.points
        inside = np.sum(pts * pts, axis=1) <= 1.0 + 1e-12
        self.q_full = pts[inside]
        self.q_sub = _subsample(self.q_full)
        self._q_tree = None
        self._mcache: dict = {}

    def aside(self, tag: int, params, full: bool = False) -> float:
        q = self.q_full if full else self.q_sub
        if q.shape[0] == 0:
            return 0.0
        fam = self.cls.families[tag]
        return float(np.max(fam.dist(params, q)))

    def member_side(self, tag: int, params, h: float) -> float:
        key = (tag, tuple(np.round(params, 12)), h)
        if key not in self._mcache:
            fam = self.cls.families[tag]
            mpts = fam.points(params, 1.0, h)
            if mpts.shape[0] == 0:
                val = math.inf  # cannot happen for members through 0
            elif self.exact_dist is not None:
                val = float(np.max(self.exact_dist(mpts)))
            else:
                val = float(np.max(self.index.nearest(mpts)))
            self._mcache[key] = val
        return self._mcache[key]

    def haus(self, tag: int, params, h: float) -> float:
        """Both excesses with member and set restricted to the unit ball."""
        key = ("H", tag, tuple(np.round(params, 12)), h)
        if key not in self._mcache:
            fam = self.cls.families[tag]
            mpts = fam.points(params, 1.0, h)
            mpts = mpts[np.sum(mpts * mpts, axis=1) <= 1.0 + 1e-12]
            if mpts.shape[0] == 0 or self.q_full.shape[0] == 0:
                val = math.inf
            else:
                if self._q_tree is None:
                    self._q_tree = cKDTree(self.q_full)
                tree = cKDTree(mpts)
                ex_set_member = float(np.max(tree.query(self.q_full)[0]))
                ex_member_set = float(np.max(self._q_tree.query(mpts)[0]))
                val = max(ex_set_member, ex_member_set)
            self._mcache[key] = val
        return self._mcache[key]

    def objective(self, tag: int, params, h_member: float,
                  aside_val: Optional[float] = None, full: bool = False) -> float:
        if self.variant == "hausdorff":
            return self.haus(tag, params, h_member)
        a = self.aside(tag, params, full=full) if aside_val is None else aside_val
        if self.variant == "beta":
            return a
        return max(a, self.member_side(tag, params, h_member))


def _candidate_list(cls: ModelClass, warm) -> list:
    """(tag, params) candidates: coarse grids, seeds, warm starts; deduped."""
    cands = []
    seen = set()

    def push(tag, params):
        params = cls.families[tag].canon(tuple(params), cls.offset_bound)
        key = (tag, tuple(np.round(params, 10)))
        if key not in seen:
            seen.add(key)
            cands.append((tag, params))

    for tag, fam in enumerate(cls.families):
        for row in fam.coarse(cls.offset_bound):
            push(tag, row)
        for row in fam.seeds(cls.offset_bound):
            push(tag, row)
    if warm:
        for m in warm:
            if isinstance(m, ModelMember):
                if m.class_id != cls.id:
                    continue
                tag, p = int(round(m.params[0])), m.params[1:]
            else:
                tag, p = int(round(m[0])), tuple(m[1:])
            if 0 <= tag < len(cls.families):
                push(tag, p)
    return cands


def _optimize(local: PointCloud, cls: ModelClass, variant: str, *,
              stop_below: Optional[float] = None,
              warm: Optional[Sequence] = None, exact_dist=None) -> ApproxResult:
    ev = _Evaluator(local, cls, variant, exact_dist=exact_dist)
    h_search = {tag: _MEMBER_H_SEARCH[f.surface_dim] for tag, f in enumerate(cls.families)}
    h_final = {tag: _MEMBER_H_FINAL[f.surface_dim] for tag, f in enumerate(cls.families)}

    def fine_value(tag, params) -> float:
        if variant == "hausdorff":
            return ev.haus(tag, params, h_final[tag])
        a = ev.aside(tag, params, full=True)
        if variant == "beta":
            return a
        return max(a, ev.member_side(tag, params, h_final[tag]))

    def slack_for(tag) -> float:
        s = local.h
        if variant != "beta":
            s += h_final[tag]
        return s

    def coarse_gap(tag) -> float:
        fam = cls.families[tag]
        return sum(ax.lipschitz * ax.step / 2.0 for ax in fam.axes(cls.offset_bound))

    def result(tag, params, value, gap) -> ApproxResult:
        member = cls.member(tag, params)
        return ApproxResult(value, member, gap, slack_for(tag))

    cands = _candidate_list(cls, warm)
    asides = np.array([ev.aside(t, p) for (t, p) in cands])
    order = np.argsort(asides, kind="stable")

    best_val = math.inf
    best = None  # (tag, params)
    for k in order:
        tag, params = cands[k]
        if asides[k] >= best_val:
            break  # the one-sided part alone already loses
        val = ev.objective(tag, params, h_search[tag], aside_val=float(asides[k]))
        if val < best_val:
            best_val, best = val, (tag, params)
            if stop_below is not None and best_val <= stop_below:
                fv = fine_value(tag, params)
                if fv <= stop_below:
                    return result(tag, params, fv, coarse_gap(tag))

    if best is None:  # every aside >= inf is impossible; defensive
        tag, params = cands[int(order[0])]
        best, best_val = (tag, params), ev.objective(tag, params, h_search[tag])

    # two per-axis refinement passes around the best cell (coordinate descent)
    tag = best[0]
    fam = cls.families[tag]
    axes = fam.axes(cls.offset_bound)
    params = list(best[1])
    final_step = [ax.step for ax in axes]
    offsets = np.arange(-4, 5)
    for pass_i in (1, 2):
        for i, ax in enumerate(axes):
            if ax.step <= 0:
                continue
            step = ax.step / (8.0 ** pass_i)
            final_step[i] = step
            trial = list(params)
            for off in offsets:
                if off == 0:
                    continue
                trial[i] = params[i] + off * step
                cp = fam.canon(tuple(trial), cls.offset_bound)
                a = ev.aside(tag, cp)
                if a >= best_val:
                    continue
                val = ev.objective(tag, cp, h_search[tag], aside_val=a)
                if val < best_val:
                    best_val, params = val, list(cp)
                    if stop_below is not None and best_val <= stop_below:
                        fv = fine_value(tag, tuple(cp))
                        if fv <= stop_below:
                            gap = sum(
                                ax2.lipschitz * fs / 2.0
                                for ax2, fs in zip(axes, final_step)
                                if ax2.step > 0
                            )
                            return result(tag, tuple(cp), fv, gap)

    gap = sum(ax.lipschitz * fs / 2.0 for ax, fs in zip(axes, final_step) if ax.step > 0)
    value = fine_value(tag, tuple(params))
    return result(tag, tuple(params), value, gap)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _run(set_like, class_id, x, r, variant, *, h_rel=None, pad=DEFAULT_PAD,
         stop_below=None, warm=None) -> ApproxResult:
    cls = get_class(class_id)
    local = _localize(set_like, x, float(r), pad, h_rel, cls.n)
    exact = None
    if hasattr(set_like, "distance_many"):
        xv = np.asarray(x, dtype=float)
        rr = float(r)

        def exact(pts, _x=xv, _r=rr):
            return set_like.distance_many(_x + _r * np.asarray(pts, dtype=float)) / _r

    return _optimize(local, cls, variant, stop_below=stop_below, warm=warm,
                     exact_dist=exact)


def theta(set_like, class_id=None, x=None, r=None, *, h_rel=None,
          pad=DEFAULT_PAD, stop_below=None, warm=None) -> ApproxResult:
    """Bilateral approximability: min over the search grid of the scaled
    two-sided distance between the set and x + r*member on B(x, r)."""
    if isinstance(set_like, ApproxQuery):
        q = set_like
        return _run(q.set, q.class_id, q.x, q.r, "theta", h_rel=h_rel, pad=pad,
                    stop_below=stop_below, warm=warm)
    return _run(set_like, class_id, x, r, "theta", h_rel=h_rel, pad=pad,
                stop_below=stop_below, warm=warm)


def beta(set_like, class_id=None, x=None, r=None, *, h_rel=None,
         pad=DEFAULT_PAD, stop_below=None, warm=None) -> ApproxResult:
    """Unilateral approximability: only the set-to-member excess is scored."""
    if isinstance(set_like, ApproxQuery):
        q = set_like
        return _run(q.set, q.class_id, q.x, q.r, "beta", h_rel=h_rel, pad=pad,
                    stop_below=stop_below, warm=warm)
    return _run(set_like, class_id, x, r, "beta", h_rel=h_rel, pad=pad,
                stop_below=stop_below, warm=warm)


def hausdorff_inf(set_like, class_id: str, x, r, *, h_rel=None,
                  pad=DEFAULT_PAD, stop_below=None, warm=None) -> ApproxResult:
    """Class-infimum of the ball-restricted (relative Hausdorff) distance.
    Stricter than theta: the member is clipped to the ball too, so mass of
    the member far from the set inside B(x,r) is not forgiven."""
    return _run(set_like, class_id, x, r, "hausdorff", h_rel=h_rel, pad=pad,
                stop_below=stop_below, warm=warm)


def evaluate(q: ApproxQuery, **kw) -> ApproxResult:
    return theta(q, **kw) if q.variant == "theta" else beta(q, **kw)


@dataclass
class Profile:
    class_id: str
    variant: str
    points: list
    scales: list
    entries: dict = field(default_factory=dict)  # (point_idx, scale_idx) -> ApproxResult

    def value(self, i: int, k: int) -> float:
        return self.entries[(i, k)].value

    def sup_per_scale(self) -> list:
        out = []
        for k in range(len(self.scales)):
            out.append(max(self.entries[(i, k)].value for i in range(len(self.points))))
        return out

    def rows(self):
        for (i, k), res in sorted(self.entries.items()):
            yield {
                "point": list(np.asarray(self.points[i], dtype=float)),
                "scale": self.scales[k],
                "value": res.value,
                "optimizer_gap": res.optimizer_gap,
                "sampling_slack": res.sampling_slack,
            }


def _threads() -> int:
    try:
        return max(int(os.environ.get("LSA_THREADS", "1")), 1)
    except ValueError:
        return 1


def profile(set_like, class_id: str, points, r0: float, *, lam: float = 0.5,
            depth: int = 8, variant: str = "theta", h_rel=None,
            pad: float = DEFAULT_PAD, stop_below=None) -> Profile:
    """theta/beta over base points x a geometric scale ladder r0 * lam^k.

    Ladder walks coarse-to-fine per point; the previous scale's best member
    (rescaled) seeds the next scale's search.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError("ladder ratio must be in (0, 1)")
    points = [np.asarray(p, dtype=float) for p in points]
    if not points:
        raise ValueError("need at least one base point")
    scales = [r0 * lam ** k for k in range(depth)]
    cls = get_class(class_id)
    prof = Profile(class_id, variant, points, scales)

    def run_point(i: int):
        out = {}
        warm = None
        for k, r in enumerate(scales):
            res = _run(set_like, class_id, points[i], r, variant,
                       h_rel=h_rel, pad=pad, stop_below=stop_below, warm=warm)
            out[(i, k)] = res
            warm = [cls.scale_member(res.best_member, 1.0 / lam)]
        return out

    nthreads = _threads()
    if nthreads > 1 and len(points) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            for out in ex.map(run_point, range(len(points))):
                prof.entries.update(out)
    else:
        for i in range(len(points)):
            prof.entries.update(run_point(i))
    return prof


@dataclass(frozen=True)
class EnlargementReport:
    member: bool
    eps: float
    variant: str
    scales: tuple
    values: tuple
    thresholds: tuple  # eps + gap + slack per scale
    worst_scale: float
    worst_margin: float  # max over scales of value - threshold

    def to_json(self) -> dict:
        return {
            "member": self.member,
            "eps": self.eps,
            "variant": self.variant,
            "scales": list(self.scales),
            "values": list(self.values),
            "thresholds": list(self.thresholds),
            "worst_scale": self.worst_scale,
            "worst_margin": self.worst_margin,
        }


def enlargement_membership(set_like, class_id: str, eps: float, variant: str,
                           r_min: float, r_max: float, *, x=None, h_rel=None,
                           pad: float = DEFAULT_PAD) -> EnlargementReport:
    """Finite surrogate for 'approximable within eps at every scale':
    checks value <= eps + gap + slack on the lam=1/2 ladder over [r_min, r_max]."""
    if not (0 < r_min <= r_max):
        raise ValueError("need 0 < r_min <= r_max")
    cls = get_class(class_id)
    if x is None:
        x = np.zeros(cls.n)
    x = np.asarray(x, dtype=float)

    # precondition: the base point lies on the set (within sampling slack)
    if isinstance(set_like, PointCloud):
        d0 = float(build_index(set_like).nearest(x[None])[0])
        tol0 = max(2.0 * set_like.h, 1e-9 * r_max)
    else:
        d0 = set_like.distance(x)
        tol0 = max((h_rel or _DEFAULT_H_REL.get(cls.n, 0.02)) * r_min, 1e-9 * r_max)
    if d0 > max(tol0, 1e-12):
        raise ValueError(f"base point is off the set (dist {d0:.3g})")

    scales, values, thresholds = [], [], []
    warm = None
    r = r_max
    while r >= r_min * (1.0 - 1e-12):
        res = _run(set_like, class_id, x, r, variant, h_rel=h_rel, pad=pad,
                   stop_below=eps, warm=warm)
        scales.append(r)
        values.append(res.value)
        thresholds.append(eps + res.optimizer_gap + res.sampling_slack)
        warm = [cls.scale_member(res.best_member, 2.0)]
        r /= 2.0
    margins = [v - t for v, t in zip(values, thresholds)]
    worst = int(np.argmax(margins))
    return EnlargementReport(
        member=bool(margins[worst] <= 0.0),
        eps=eps,
        variant=variant,
        scales=tuple(scales),
        values=tuple(values),
        thresholds=tuple(thresholds),
        worst_scale=scales[worst],
        worst_margin=margins[worst],
    )
