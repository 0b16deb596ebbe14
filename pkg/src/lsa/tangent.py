"""Blow-up traces, pseudotangent (directed) blow-ups, and the tangent dichotomy.

A blow-up step is the window (A ∩ B(x_i, R_max * r_i) - x_i) / r_i viewed as a
local PointCloud; successive steps are compared with the scaled two-sided
distance at each view radius.  Limits along r -> 0 are replaced by finite
ladders with an explicit convergence verdict (last three gaps below tolerance
at every view radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Ball, PointCloud, build_index, restrict
from .setdist import walkup_wets
from . import approx, generators

DEFAULT_VIEW_RADII = (1.0, 2.0, 4.0)
DEFAULT_DEPTH = 10
DEFAULT_TOL = 0.02


@dataclass
class BlowupTrace:
    mode: str                      # "tangent" | "directed"
    base: np.ndarray
    scales: list                   # r_i
    centers: list                  # x_i
    view_radii: tuple
    clouds: list                   # local PointClouds, window = B(0, max view)
    gaps: dict                     # view radius -> list of successive distances
    direction_mags: list           # |x_i - x| / r_i
    tolerance: float
    partial: bool = False          # resolution floor stopped the ladder early
    translate_check: Optional[dict] = None  # bounded directed mode only

    @property
    def verdict(self) -> str:
        nsteps = len(self.clouds)
        if nsteps < 4:
            return "partial" if self.partial else "not-convergent"
        ok = all(
            all(g <= self.tolerance for g in self.gaps[R][-3:])
            for R in self.view_radii
        )
        if ok:
            return "convergent"
        return "partial" if self.partial else "not-convergent"

    @property
    def terminal(self) -> PointCloud:
        return self.clouds[-1]

    def tail_gap(self, R: float) -> float:
        return max(self.gaps[R][-3:]) if self.gaps[R] else math.inf

    def bounded_directions(self) -> bool:
        if not self.direction_mags:
            return True
        return max(self.direction_mags) <= 2.0 * max(self.view_radii)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "verdict": self.verdict,
            "steps": len(self.clouds),
            "scales": [float(r) for r in self.scales],
            "view_radii": list(self.view_radii),
            "gaps": {str(R): list(map(float, g)) for R, g in self.gaps.items()},
            "direction_mags": list(map(float, self.direction_mags)),
            "bounded_directions": self.bounded_directions(),
            "partial": self.partial,
            "translate_check": self.translate_check,
        }


def _window_step(sampler, x_i, r_i: float, rmax: float, h_rel: float):
    """One rescaled window, or None once h drops below the sampler floor."""
    h_abs = h_rel * r_i
    if h_abs < generators.RESOLUTION_FLOOR:
        return None
    cloud = generators.generate_window(sampler, x_i, rmax * r_i, h_abs)
    return cloud.rescale(np.asarray(x_i, dtype=float), r_i)


def _successive_gaps(clouds, view_radii) -> dict:
    gaps = {R: [] for R in view_radii}
    for a, b in zip(clouds[:-1], clouds[1:]):
        for R in view_radii:
            gaps[R].append(walkup_wets(a, b, np.zeros(a.n), R).value)
    return gaps


def blow_up(sampler, x, *, r0: float = 1.0, lam: float = 0.5,
            depth: int = DEFAULT_DEPTH, view_radii=DEFAULT_VIEW_RADII,
            tolerance: float = DEFAULT_TOL, h_rel: Optional[float] = None) -> BlowupTrace:
    """Tangent-mode blow-up along the ladder r_k = r0 * lam^k at fixed x."""
    x = np.asarray(x, dtype=float)
    if sampler.distance(x) > max(2.0 * (h_rel or 0.01) * r0 * lam ** (depth - 1), 1e-9):
        raise ValueError("base point is not on the set")
    hr = h_rel if h_rel is not None else approx._DEFAULT_H_REL.get(sampler.n, 0.01)
    rmax = max(view_radii)
    scales, clouds = [], []
    partial = False
    for k in range(depth):
        r = r0 * lam ** k
        step = _window_step(sampler, x, r, rmax, hr)
        if step is None:
            partial = True
            break
        scales.append(r)
        clouds.append(step)
    if len(clouds) < 2:
        raise ValueError("ladder produced fewer than two usable windows")
    gaps = _successive_gaps(clouds, view_radii)
    return BlowupTrace(
        mode="tangent", base=x, scales=scales, centers=[x] * len(scales),
        view_radii=tuple(view_radii), clouds=clouds, gaps=gaps,
        direction_mags=[0.0] * len(scales), tolerance=tolerance, partial=partial,
    )


def directed_blow_up(sampler, x, sequence, *, view_radii=DEFAULT_VIEW_RADII,
                     tolerance: float = DEFAULT_TOL,
                     h_rel: Optional[float] = None) -> BlowupTrace:
    """Directed mode: windows at explicit (x_i, r_i); classifies the
    direction set (x_i - x)/r_i and, when bounded, compares the terminal
    cloud against the translated plain blow-up."""
    x = np.asarray(x, dtype=float)
    seq = [(np.asarray(xi, dtype=float), float(ri)) for xi, ri in sequence]
    if not seq:
        raise ValueError("directed sequence is empty")
    radii = [ri for _, ri in seq]
    if any(b > a * (1 + 1e-12) for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("directed radii must be non-increasing")
    hr = h_rel if h_rel is not None else approx._DEFAULT_H_REL.get(sampler.n, 0.01)
    for xi, ri in seq:
        if sampler.distance(xi) > max(2.0 * hr * ri, 1e-9):
            raise ValueError("directed center off the set (within slack)")
    rmax = max(view_radii)
    scales, centers, clouds, mags = [], [], [], []
    partial = False
    for xi, ri in seq:
        step = _window_step(sampler, xi, ri, rmax, hr)
        if step is None:
            partial = True
            break
        scales.append(ri)
        centers.append(xi)
        clouds.append(step)
        mags.append(float(np.linalg.norm(xi - x)) / ri)
    if len(clouds) < 2:
        raise ValueError("directed ladder produced fewer than two usable windows")
    gaps = _successive_gaps(clouds, view_radii)
    trace = BlowupTrace(
        mode="directed", base=x, scales=scales, centers=centers,
        view_radii=tuple(view_radii), clouds=clouds, gaps=gaps,
        direction_mags=mags, tolerance=tolerance, partial=partial,
    )
    if trace.bounded_directions():
        y = (centers[-1] - x) / scales[-1]
        plain = _window_step(sampler, x, scales[-1], rmax + float(np.linalg.norm(y)) + 0.5, hr)
        if plain is not None:
            shifted = plain.translate(-y)
            gap = walkup_wets(trace.terminal, shifted, np.zeros(sampler.n), 1.0).value
            trace.translate_check = {"translate": [float(v) for v in y], "gap": float(gap)}
    return trace


class NonConvergentTraceError(ValueError):
    pass


def tangent_membership(trace: BlowupTrace, class_id: str, eps: float,
                       *, pad: float = approx.DEFAULT_PAD) -> bool:
    """True iff the terminal cloud sits within eps (+ gaps and slack) of the
    class at every view radius."""
    if trace.verdict != "convergent":
        raise NonConvergentTraceError(f"trace verdict is {trace.verdict!r}")
    term = trace.terminal
    for R in trace.view_radii:
        res = approx.theta(term, class_id, np.zeros(term.n), R,
                           stop_below=eps, pad=pad)
        thr = eps + res.optimizer_gap + res.sampling_slack + trace.tail_gap(R)
        if res.value > thr:
            return False
    return True


@dataclass(frozen=True)
class DichotomyVerdict:
    verdict: str            # T-branch | Tperp-branch | not-in-S | inconclusive
    scales: tuple
    theta_T: tuple
    theta_S: tuple
    witness_scale: Optional[float]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "scales": list(self.scales),
            "theta_T": list(self.theta_T),
            "theta_S": list(self.theta_S),
            "witness_scale": self.witness_scale,
        }


def dichotomy_check(sampler, x, t_class: str, s_class: str, *,
                    r0: float = 1.0, lam: float = 0.5, depth: int = 8,
                    tol: float = 0.1, phi_level: float = 0.2,
                    s_threshold: float = 0.1,
                    h_rel: Optional[float] = None) -> DichotomyVerdict:
    """Tail behaviour of theta against the detector class T, after checking
    the set stays S-close: every tail scale small -> T-branch; every tail
    scale at the phi level -> Tperp-branch; mixed -> inconclusive."""
    x = np.asarray(x, dtype=float)
    scales = [r0 * lam ** k for k in range(depth)]
    t_vals, s_vals = [], []
    warm_t = warm_s = None
    t_cls, s_cls = approx.get_class(t_class), approx.get_class(s_class)
    for r in scales:
        rs = approx.theta(sampler, s_class, x, r, h_rel=h_rel,
                          stop_below=s_threshold, warm=warm_s)
        warm_s = [s_cls.scale_member(rs.best_member, 1.0 / lam)]
        s_vals.append(rs.value)
        if rs.value > s_threshold + rs.optimizer_gap + rs.sampling_slack:
            return DichotomyVerdict("not-in-S", tuple(scales[: len(s_vals)]),
                                    tuple(t_vals), tuple(s_vals), float(r))
        rt = approx.theta(sampler, t_class, x, r, h_rel=h_rel,
                          stop_below=tol, warm=warm_t)
        warm_t = [t_cls.scale_member(rt.best_member, 1.0 / lam)]
        t_vals.append(rt.value)
    ntail = max(3, depth // 2)
    tail = t_vals[-ntail:]
    # the S gate above gets the gap+slack allowance (measured values
    # overestimate); the tail classification uses the plain thresholds
    if all(v <= tol for v in tail):
        verdict = "T-branch"
    elif all(v >= phi_level for v in tail):
        verdict = "Tperp-branch"
    else:
        verdict = "inconclusive"
    return DichotomyVerdict(verdict, tuple(scales), tuple(t_vals), tuple(s_vals), None)
