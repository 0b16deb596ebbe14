"""Set-to-set distance calculus on point clouds.

Four quantities, all built from the one-sided excess:

  excess(A, B)                 sup_{a in A} dist(a, B)          (length)
  relative_excess(A,B,x,r)     excess(A cap B(x,r), B) / r      (dimensionless)
  walkup_wets(A,B,x,r)         max of the two relative excesses
  relative_hausdorff(A,B,x,r)  both excesses between the ball-restricted sets

Conventions: excess(empty, B) = 0 and excess(A, empty) is an error; the
relative Hausdorff variant requires both sets to meet the ball.  Every
relative value carries a sampling_slack = (h_A + h_B)/r that callers must add
to tolerances when comparing against exact-set statements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Ball,
    EmptyCloudError,
    NeighborIndex,
    PointCloud,
    as_point,
    build_index,
    restrict,
)

KINDS = ("excess", "relative-excess", "walkup-wets", "relative-hausdorff")


class EmptyRestrictionError(ValueError):
    """A required A cap B(x,r) came out empty."""


@dataclass(frozen=True)
class DistanceValue:
    value: float
    kind: str
    sampling_slack: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if not (self.value >= 0):
            raise ValueError("distance value must be >= 0")

    def __float__(self):
        return float(self.value)


def _excess_raw(a_pts: np.ndarray, b_index: NeighborIndex) -> float:
    if a_pts.shape[0] == 0:
        return 0.0
    return float(np.max(b_index.nearest(a_pts)))


def excess(A: PointCloud, B: PointCloud, b_index: NeighborIndex | None = None) -> float:
    """One-sided excess of A over B, in length units.

    A empty gives 0; B empty is undefined and raises.
    """
    if B.is_empty:
        raise EmptyCloudError("excess over the empty set is undefined")
    if not A.is_empty and A.n != B.n:
        raise ValueError("excess: dimension mismatch")
    if b_index is None:
        b_index = build_index(B)
    return _excess_raw(A.points, b_index)


def relative_excess(
    A: PointCloud,
    B: PointCloud,
    x,
    r: float,
    b_index: NeighborIndex | None = None,
) -> DistanceValue:
    """Excess of A cap B(x,r) over B, normalized by r (scale invariant)."""
    if not (r > 0):
        raise ValueError("relative_excess needs r > 0")
    x = as_point(x)
    ball = Ball(x, r)
    Ar = restrict(A, ball)
    val = excess(Ar, B, b_index=b_index) / r
    return DistanceValue(val, "relative-excess", (A.h + B.h) / r)


def walkup_wets(
    A: PointCloud,
    B: PointCloud,
    x,
    r: float,
    a_index: NeighborIndex | None = None,
    b_index: NeighborIndex | None = None,
) -> DistanceValue:
    """max{d_{x,r}(A,B), d_{x,r}(B,A)} — the bilateral workhorse (not a metric)."""
    if A.is_empty or B.is_empty:
        raise EmptyCloudError("walkup_wets needs both clouds nonempty")
    dab = relative_excess(A, B, x, r, b_index=b_index)
    dba = relative_excess(B, A, x, r, b_index=a_index)
    return DistanceValue(max(dab.value, dba.value), "walkup-wets", (A.h + B.h) / r)


def relative_hausdorff(A: PointCloud, B: PointCloud, x, r: float) -> DistanceValue:
    """Both excesses between the ball-restricted sets; needs both restrictions
    nonempty (this variant is undefined otherwise, not zero)."""
    if not (r > 0):
        raise ValueError("relative_hausdorff needs r > 0")
    x = as_point(x)
    ball = Ball(x, r)
    Ar, Br = restrict(A, ball), restrict(B, ball)
    if Ar.is_empty or Br.is_empty:
        raise EmptyRestrictionError(
            "relative_hausdorff undefined: a set misses the ball"
        )
    ia, ib = build_index(Ar), build_index(Br)
    val = max(_excess_raw(Ar.points, ib), _excess_raw(Br.points, ia)) / r
    return DistanceValue(val, "relative-hausdorff", (A.h + B.h) / r)


def distance(kind: str, A: PointCloud, B: PointCloud, x=None, r: float | None = None):
    """Dispatch by kind string (CLI names: excess, rel-excess, ww, rel-hausdorff)."""
    aliases = {
        "excess": "excess",
        "rel-excess": "relative-excess",
        "relative-excess": "relative-excess",
        "ww": "walkup-wets",
        "walkup-wets": "walkup-wets",
        "rel-hausdorff": "relative-hausdorff",
        "relative-hausdorff": "relative-hausdorff",
    }
    if kind not in aliases:
        raise ValueError(f"unknown distance kind {kind!r}")
    kind = aliases[kind]
    if kind == "excess":
        return DistanceValue(excess(A, B), "excess", A.h + B.h)
    if x is None or r is None:
        raise ValueError(f"{kind} needs --x and --r")
    if kind == "relative-excess":
        return relative_excess(A, B, x, r)
    if kind == "walkup-wets":
        return walkup_wets(A, B, x, r)
    return relative_hausdorff(A, B, x, r)
