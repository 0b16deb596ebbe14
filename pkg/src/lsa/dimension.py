"""Covering numbers, Minkowski-dimension estimation, and the two audits
(covering lemma; dimension bound).

Covering numbers are intrinsic: centers are chosen among the cloud's own
points, balls are closed.  The greedy farthest-point construction gives the
upper bounds the lemma and the theorem need; the exact solver exists only to
quantify greedy slack on tiny inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .geometry import Ball, PointCloud, restrict
from .models import get_class, sample_member
from . import approx, generators


@dataclass(frozen=True)
class CoveringReport:
    s: float
    count_greedy: int
    count_exact: Optional[int]
    centers: np.ndarray

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "count_greedy": self.count_greedy,
            "count_exact": self.count_exact,
            "centers": [[float(v) for v in c] for c in self.centers],
        }


def _greedy_centers(pts: np.ndarray, s: float) -> np.ndarray:
    """Farthest-point greedy cover: seed = first point in input order."""
    centers = [0]
    d = np.sqrt(np.sum((pts - pts[0]) ** 2, axis=1))
    while True:
        k = int(np.argmax(d))
        if d[k] <= s * (1 + 1e-12):
            break
        centers.append(k)
        dk = np.sqrt(np.sum((pts - pts[k]) ** 2, axis=1))
        d = np.minimum(d, dk)
    return pts[centers]


def covering_number_greedy(cloud: PointCloud, s: float,
                           ball: Optional[Ball] = None) -> CoveringReport:
    if s <= 0:
        raise ValueError("covering radius must be positive")
    if ball is not None:
        cloud = restrict(cloud, ball)
    if cloud.is_empty:
        raise ValueError("empty cloud (after restriction)")
    centers = _greedy_centers(cloud.points, float(s))
    exact = None
    if cloud.size <= 20:
        exact = covering_number_exact(cloud, s)
    return CoveringReport(float(s), centers.shape[0], exact, centers)


def covering_number_exact(cloud: PointCloud, s: float) -> int:
    """Exact minimal cover by exhaustive subset search (<= 20 points)."""
    if cloud.is_empty:
        raise ValueError("empty cloud")
    pts = cloud.points
    m = pts.shape[0]
    if m > 20:
        raise ValueError("exact covering limited to 20 points")
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    cover = d2 <= (s * s) * (1 + 1e-12)  # cover[i, j]: center i covers point j
    masks = [int(sum(1 << j for j in range(m) if cover[i, j])) for i in range(m)]
    full = (1 << m) - 1
    for k in range(1, m + 1):
        for combo in combinations(range(m), k):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return k
    return m


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    intercept: float
    scales: tuple
    counts: tuple
    residual: float

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "scales": list(self.scales),
            "counts": list(self.counts),
            "residual": self.residual,
        }


def minkowski_estimate(set_like, x=None, *, r_window: float = 1.0,
                       s_max: float = 0.25, lam: float = 0.5, depth: int = 5,
                       h: Optional[float] = None) -> DimensionEstimate:
    """Regression slope of log N(A ∩ B(x, r_window), s_k) against log(1/s_k)
    along the geometric ladder s_k = s_max * lam^k, greedy counts."""
    if depth < 4:
        raise ValueError("need at least 4 ladder scales")
    if not (0 < lam < 1):
        raise ValueError("lam in (0,1)")
    scales = [s_max * lam ** k for k in range(depth)]
    s_min = scales[-1]
    if isinstance(set_like, PointCloud):
        cloud = set_like
        if x is not None:
            cloud = restrict(cloud, Ball(np.asarray(x, dtype=float), r_window))
        if cloud.h > 0 and cloud.h > s_min / 2:
            raise ValueError("cloud resolution too coarse for the smallest scale")
    else:
        if x is None:
            x = np.zeros(set_like.n)
        hh = h if h is not None else s_min / 5.0
        if hh < generators.RESOLUTION_FLOOR:
            raise ValueError("requested scales fall below the resolution floor")
        cloud = generators.generate_window(set_like, x, r_window, hh)
    if cloud.is_empty:
        raise ValueError("empty window")
    if cloud.size == 1:
        return DimensionEstimate(0.0, 0.0, tuple(scales), tuple([1] * depth), 0.0)
    counts = [covering_number_greedy(cloud, s).count_greedy for s in scales]
    xs = np.log(1.0 / np.array(scales))
    ys = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
    return DimensionEstimate(float(max(slope, 0.0)), float(intercept),
                             tuple(scales), tuple(counts), resid)


# ---------------------------------------------------------------------------
# covering profiles of model classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoveringProfile:
    class_id: str
    alpha: float
    C: float
    s0: float

    def to_json(self) -> dict:
        return {"class": self.class_id, "alpha": self.alpha, "C": self.C, "s0": self.s0}


def fit_covering_profile(class_id: str, members=None,
                         s_grid: Sequence[float] = (0.4, 0.2, 0.1, 0.05),
                         *, per_family: int = 5) -> CoveringProfile:
    """alpha is the class's analytic growth exponent; C = 1.25 * max over the
    member sample of count * s^alpha; s0 = largest audited grid scale."""
    cls = get_class(class_id)
    if members is None:
        members = cls.sample_members(per_family)
    if not members:
        raise ValueError("empty member sample")
    s_grid = sorted(set(float(s) for s in s_grid), reverse=True)
    alpha = cls.alpha
    worst = 0.0
    ball = Ball(np.zeros(cls.n), 1.0)
    hs = min(s_grid) / 4.0
    for m in members:
        cloud = sample_member(m, ball, hs)
        if cloud.is_empty:
            continue
        for s in s_grid:
            n = covering_number_greedy(cloud, s).count_greedy
            worst = max(worst, n * s ** alpha)
    if worst == 0.0:
        worst = 1.0
    C = 1.25 * worst
    # audit: by construction every sampled (member, s) satisfies N <= C s^-alpha
    return CoveringProfile(class_id, alpha, C, max(s_grid))


# ---------------------------------------------------------------------------
# covering lemma audit
# ---------------------------------------------------------------------------

@dataclass
class CoveringAuditRow:
    x: np.ndarray
    r: float
    beta: float
    status: str          # "pass" | "fail" | "precondition-unmet"
    count: Optional[int]
    bound: Optional[int]

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "r": self.r,
            "beta": self.beta,
            "status": self.status,
            "count": self.count,
            "bound": self.bound,
        }


@dataclass
class CoveringAudit:
    profile: CoveringProfile
    delta: float
    lam: float
    rows: list

    @property
    def all_pass(self) -> bool:
        return all(row.status != "fail" for row in self.rows)

    def to_json(self) -> dict:
        return {
            "profile": self.profile.to_json(),
            "delta": self.delta,
            "lambda": self.lam,
            "rows": [r.to_json() for r in self.rows],
            "all_pass": self.all_pass,
        }


def lemma_lambda(profile: CoveringProfile, delta: float) -> float:
    return delta * (2.0 + 2.0 * profile.C ** (1.0 / profile.alpha) * (1.0 + delta))


def verify_covering_lemma(set_like, class_id: str, profile: CoveringProfile,
                          delta: float, samples, *, h_rel: Optional[float] = None,
                          pad: float = 1.2) -> CoveringAudit:
    """For each (x, r): if measured beta < delta, the ball must be coverable
    by at most 1/delta^alpha balls of radius lambda*r."""
    if profile.alpha <= 0:
        raise ValueError("profile needs alpha > 0")
    if profile.C ** (1.0 / profile.alpha) * delta > profile.s0 * (1 + 1e-12):
        raise ValueError("delta violates the profile precondition C^{1/alpha} delta <= s0")
    lam = lemma_lambda(profile, delta)
    bound = int(math.ceil(1.0 / delta ** profile.alpha))
    rows = []
    for x, r in samples:
        x = np.asarray(x, dtype=float)
        r = float(r)
        b = approx.beta(set_like, class_id, x, r, h_rel=h_rel, pad=pad,
                        stop_below=0.0)
        if b.value >= delta:
            rows.append(CoveringAuditRow(x, r, b.value, "precondition-unmet", None, None))
            continue
        if isinstance(set_like, PointCloud):
            window = restrict(set_like, Ball(x, r))
        else:
            hh = (h_rel or approx._DEFAULT_H_REL.get(set_like.n, 0.02)) * r
            window = generators.generate_window(set_like, x, r, hh)
        n = covering_number_greedy(window, lam * r).count_greedy
        status = "pass" if n <= bound else "fail"
        rows.append(CoveringAuditRow(x, r, b.value, status, n, bound))
    return CoveringAudit(profile, delta, lam, rows)


# ---------------------------------------------------------------------------
# dimension bound audit
# ---------------------------------------------------------------------------

def _mu0(profile: CoveringProfile, eps0: float) -> float:
    return 2.0 + 2.0 * profile.C ** (1.0 / profile.alpha) * (1.0 + 2.0 * eps0)


def solve_eps0(profile: CoveringProfile) -> float:
    """Largest eps0 satisfying the theorem's three smallness conditions:
    lambda(2 eps0) <= 1/2, C^{1/alpha} * 2 eps0 <= s0,
    log(mu0) / log(1/(2 eps0)) <= 1/2.  All are monotone in eps0."""

    def ok(e: float) -> bool:
        if e <= 0:
            return False
        mu = _mu0(profile, e)
        if 2.0 * e * mu > 0.5:
            return False
        if profile.C ** (1.0 / profile.alpha) * 2.0 * e > profile.s0:
            return False
        if 2.0 * e >= 1.0:
            return False
        if math.log(mu) / math.log(1.0 / (2.0 * e)) > 0.5:
            return False
        return True

    lo, hi = 0.0, 0.25
    if not ok(1e-9):
        return 0.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class DimensionBoundReport:
    status: str            # "pass" | "fail" | "inadmissible"
    eps_measured: float
    eps0: float
    c_prime: float
    bound: float
    slope: float
    residual: float
    detail: str

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "eps_measured": self.eps_measured,
            "eps0": self.eps0,
            "c_prime": self.c_prime,
            "bound": self.bound,
            "slope": self.slope,
            "residual": self.residual,
            "detail": self.detail,
        }


def dimension_bound_audit(set_like, class_id: str, profile: CoveringProfile, *,
                          x=None, r0: float = 1.0, ladder_depth: int = 5,
                          lam_beta: float = 0.5, h_rel: Optional[float] = None,
                          est_kwargs: Optional[dict] = None) -> DimensionBoundReport:
    """Measured unilateral approximability eps = sup of beta over the ladder
    below r0; if eps <= eps0 the Minkowski slope must stay below
    alpha + C'/log(1/eps) with C' = 2 alpha log(mu0)."""
    cls = get_class(class_id)
    if x is None:
        x = np.zeros(cls.n)
    x = np.asarray(x, dtype=float)
    eps0 = solve_eps0(profile)
    betas = []
    warm = None
    for k in range(ladder_depth):
        r = r0 * lam_beta ** k
        b = approx.beta(set_like, class_id, x, r, h_rel=h_rel, warm=warm)
        warm = [cls.scale_member(b.best_member, 1.0 / lam_beta)]
        betas.append(b.value)
    eps = max(betas)
    mu = _mu0(profile, eps0)
    c_prime = 2.0 * profile.alpha * math.log(mu)
    if eps0 <= 0 or eps > eps0:
        return DimensionBoundReport(
            status="inadmissible", eps_measured=eps, eps0=eps0, c_prime=c_prime,
            bound=math.nan, slope=math.nan, residual=math.nan,
            detail=f"measured eps {eps:.4g} exceeds eps0 {eps0:.4g}",
        )
    bound = profile.alpha + c_prime / math.log(1.0 / eps)
    est = minkowski_estimate(set_like, x, r_window=r0, **(est_kwargs or {}))
    status = "pass" if est.slope <= bound + est.residual else "fail"
    return DimensionBoundReport(
        status=status, eps_measured=eps, eps0=eps0, c_prime=c_prime,
        bound=bound, slope=est.slope, residual=est.residual,
        detail=f"slope {est.slope:.4g} vs bound {bound:.4g}",
    )
