"""Detectability calibration and flat/singular point classification.

The pipeline follows the decomposition machinery: calibrate a (phi, Phi)
detectability pair for a detector class T inside a host class S, derive the
theorem's threshold chain (gamma, s, beta, beta_tilde and the perturbed
delta, t, epsilon), then classify points of a sampled set by the minimum of
the theta profile against T, under the standing hypothesis that the set stays
S-approximable.  All gates are measurement-widened by (optimizer gap +
sampling slack), since measured values overestimate the ideal ones; ties at
the flat threshold classify singular (the singular part is the closed one).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Ball, PointCloud
from .models import ModelMember, get_class, sample_member
from . import approx


class CalibrationError(RuntimeError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class NotInScopeError(ValueError):
    """The standing S-approximability hypothesis failed at some scale."""

    def __init__(self, msg, scale=None, value=None):
        super().__init__(msg)
        self.scale = scale
        self.value = value


@dataclass(frozen=True)
class DetectabilityParams:
    t_class: str
    s_class: str
    phi: float
    phi_table: dict            # s -> measured Phi(s) requirement
    phi_slope: float           # fitted linear coefficient of Phi
    noise_floor: float         # measurement floor of the calibration runs
    gamma: float               # phi / 8
    s_improve: float           # s with Phi(8 s) <= gamma / 4
    beta_const: float          # s_improve * gamma
    beta_tilde: float          # min(beta_const / 6, 1/2)
    delta: float               # phi / 32
    t: float                   # scale with Phi(t) <= delta / 4
    epsilon: float             # t * delta / 32 (strictly below t*delta/16)

    def to_json(self) -> dict:
        out = {
            "t_class": self.t_class,
            "s_class": self.s_class,
            "phi": self.phi,
            "phi_table": {repr(float(k)): float(v) for k, v in self.phi_table.items()},
            "phi_slope": self.phi_slope,
            "noise_floor": self.noise_floor,
            "gamma": self.gamma,
            "s_improve": self.s_improve,
            "beta_const": self.beta_const,
            "beta_tilde": self.beta_tilde,
            "delta": self.delta,
            "t": self.t,
            "epsilon": self.epsilon,
        }
        return out

    @staticmethod
    def from_json(obj: dict) -> "DetectabilityParams":
        table = {float(k): float(v) for k, v in obj["phi_table"].items()}
        return DetectabilityParams(
            t_class=obj["t_class"], s_class=obj["s_class"], phi=float(obj["phi"]),
            phi_table=table, phi_slope=float(obj["phi_slope"]),
            noise_floor=float(obj["noise_floor"]), gamma=float(obj["gamma"]),
            s_improve=float(obj["s_improve"]), beta_const=float(obj["beta_const"]),
            beta_tilde=float(obj["beta_tilde"]), delta=float(obj["delta"]),
            t=float(obj["t"]), epsilon=float(obj["epsilon"]),
        )


def save_params(params: DetectabilityParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(params.to_json(), fh, indent=2, sort_keys=True)


def load_params(path) -> DetectabilityParams:
    with open(path) as fh:
        return DetectabilityParams.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _member_theta(t_class: str, member: ModelMember, r: float, h_rel: float,
                  warm=None) -> approx.ApproxResult:
    cls = get_class(member.class_id)
    ball = Ball(np.zeros(cls.n), approx.DEFAULT_PAD * r)
    cloud = sample_member(member, ball, h_rel * r)
    return approx.theta(cloud, t_class, np.zeros(cls.n), r, warm=warm)


_PHI_CANDIDATES = (0.7, 0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.075, 0.05)


def calibrate_detectability(t_class: str, s_class: str, members=None,
                            r_grid: Sequence[float] = (1.0, 0.25),
                            s_grid: Sequence[float] = (0.5, 0.25, 0.125, 0.0625),
                            *, per_family: int = 6,
                            h_rel: Optional[float] = None) -> DetectabilityParams:
    """Estimate the largest phi and tightest Phi(s) with
    theta_T(member, r) < phi  =>  theta_T(member, s*r) < Phi(s)
    over a deterministic member sample, then derive the threshold chain."""
    s_cls = get_class(s_class)
    if members is None:
        members = s_cls.sample_members(per_family)
    if not members:
        raise CalibrationError("empty member sample")
    hr = h_rel if h_rel is not None else approx._DEFAULT_H_REL.get(s_cls.n, 0.02)
    s_grid = sorted(set(float(s) for s in s_grid))
    r_grid = sorted(set(float(r) for r in r_grid), reverse=True)

    base = {}    # (mi, r) -> theta at scale r
    small = {}   # (mi, r, s) -> theta at scale s*r
    worst_meta = 0.0
    for mi, m in enumerate(members):
        for r in r_grid:
            res = _member_theta(t_class, m, r, hr)
            base[(mi, r)] = res.value
            worst_meta = max(worst_meta, res.optimizer_gap + res.sampling_slack)
            warm = None
            for s in sorted(s_grid, reverse=True):
                rs = _member_theta(t_class, m, s * r, hr, warm=warm)
                small[(mi, r, s)] = rs.value
                warm = [get_class(t_class).scale_member(rs.best_member, 2.0)]
                worst_meta = max(worst_meta, rs.optimizer_gap + rs.sampling_slack)

    noise_floor = 1.2 * worst_meta + 1e-4
    s_min = s_grid[0]

    cands = sorted(set(_PHI_CANDIDATES) | {round(v * 0.95, 6) for v in base.values() if v > 0.01},
                   reverse=True)
    chosen = None
    last_witness = None
    for phi in cands:
        adm = [(mi, r) for (mi, r), v in base.items() if v < phi]
        if not adm:
            continue
        table = {}
        for s in s_grid:
            vals = [small[(mi, r, s)] for (mi, r) in adm]
            table[s] = max(vals)
        wk = max(adm, key=lambda k: small[(k[0], k[1], s_min)])
        last_witness = {"member": members[wk[0]].to_json(), "r": wk[1],
                        "s": s_min, "value": table[s_min]}
        if table[s_min] <= max(2.0 * noise_floor, phi / 8.0):
            chosen = (phi, table)
            break
    if chosen is None:
        raise CalibrationError(
            f"no admissible phi for T={t_class} inside S={s_class}", witness=last_witness
        )
    phi, table = chosen

    # linear coefficient of Phi from table points above the measurement floor
    slopes = [v / s for s, v in table.items() if v > noise_floor]
    C = max(slopes) if slopes else noise_floor / s_min

    def phi_hat(u: float) -> float:
        """Monotone envelope of the table, linear-fit extrapolated below it."""
        if u < s_min:
            return min(table[s_min], C * u + 1e-12)
        best = 0.0
        for s in s_grid:
            if s <= u:
                best = max(best, table[s])
        return best

    gamma = phi / 8.0
    delta = phi / 32.0

    def largest_scale(bound: float, cap: float) -> float:
        # largest u <= cap with phi_hat(u) <= bound, via the table then the fit
        best = None
        for s in s_grid:
            if s <= cap and phi_hat(s) <= bound:
                best = s
        if best is not None:
            return best
        return min(cap, bound / max(C, 1e-12))

    t = largest_scale(delta / 4.0, cap=max(s_grid))
    s_improve = min(largest_scale(gamma / 4.0, cap=1.0) / 8.0, 1.0 / 8.0)
    beta_const = s_improve * gamma
    beta_tilde = min(beta_const / 6.0, 0.5)
    epsilon = t * delta / 32.0
    return DetectabilityParams(
        t_class=t_class, s_class=s_class, phi=phi, phi_table=table, phi_slope=C,
        noise_floor=noise_floor, gamma=gamma, s_improve=s_improve,
        beta_const=beta_const, beta_tilde=beta_tilde, delta=delta, t=t,
        epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass
class PointLabel:
    x: np.ndarray
    label: str                    # "flat" | "singular"
    scales: list
    theta_T: list                 # may stop early once flatness is witnessed
    theta_S: list
    flat_witness: Optional[float]  # scale realizing the flat gate, if any
    gates_T: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "label": self.label,
            "scales": list(map(float, self.scales)),
            "theta_T": list(map(float, self.theta_T)),
            "theta_S": list(map(float, self.theta_S)),
            "flat_witness": self.flat_witness,
        }


def _local_h(set_like, r: float, h_rel, n: int) -> float:
    if isinstance(set_like, PointCloud):
        return set_like.h / r
    return h_rel if h_rel is not None else approx._DEFAULT_H_REL.get(n, 0.02)


def classify_point(set_like, x, params: DetectabilityParams, *, r0: float = 0.5,
                   lam: float = 0.5, depth: int = 12,
                   h_rel: Optional[float] = None) -> PointLabel:
    """flat iff some ladder scale has theta_T below beta_tilde (plus the
    measurement allowance); requires theta_S within epsilon (same allowance)
    at every ladder scale."""
    t_cls = get_class(params.t_class)
    s_cls = get_class(params.s_class)
    x = np.asarray(x, dtype=float)
    scales = [r0 * lam ** k for k in range(depth)]
    theta_T, theta_S, gates = [], [], []
    flat_at = None
    warm_t = warm_s = None
    for r in scales:
        h_loc = _local_h(set_like, r, h_rel, s_cls.n)
        rs = approx.theta(set_like, params.s_class, x, r, h_rel=h_rel,
                          stop_below=params.epsilon + h_loc, warm=warm_s)
        warm_s = [s_cls.scale_member(rs.best_member, 1.0 / lam)]
        theta_S.append(rs.value)
        if rs.value > params.epsilon + rs.optimizer_gap + rs.sampling_slack:
            raise NotInScopeError(
                f"theta_S = {rs.value:.4g} exceeds the hypothesis gate at r = {r:.4g}",
                scale=r, value=rs.value,
            )
        if flat_at is None:
            rt = approx.theta(set_like, params.t_class, x, r, h_rel=h_rel,
                              stop_below=params.beta_tilde + h_loc, warm=warm_t)
            warm_t = [t_cls.scale_member(rt.best_member, 1.0 / lam)]
            theta_T.append(rt.value)
            gate = params.beta_tilde + rt.optimizer_gap + rt.sampling_slack
            gates.append(gate)
            if rt.value < gate:
                flat_at = r
    label = "flat" if flat_at is not None else "singular"
    return PointLabel(x=x, label=label, scales=scales, theta_T=theta_T,
                      theta_S=theta_S, flat_witness=flat_at, gates_T=gates)


@dataclass
class DecompositionReport:
    params: DetectabilityParams
    labels: list                   # PointLabel
    errors: list                   # (x, message)
    grid_h: float

    @property
    def flat_points(self) -> np.ndarray:
        pts = [l.x for l in self.labels if l.label == "flat"]
        return np.array(pts) if pts else np.empty((0, self._n()))

    @property
    def singular_points(self) -> np.ndarray:
        pts = [l.x for l in self.labels if l.label == "singular"]
        return np.array(pts) if pts else np.empty((0, self._n()))

    def _n(self) -> int:
        return len(self.labels[0].x) if self.labels else 0

    def singular_cloud(self) -> PointCloud:
        return PointCloud(self.singular_points, h=self.grid_h)

    def flat_theta_sup(self) -> dict:
        """sup of theta_T over flat points, per scale index actually reached."""
        out = {}
        for l in self.labels:
            if l.label != "flat":
                continue
            for k, v in enumerate(l.theta_T):
                out[k] = max(out.get(k, 0.0), v)
        return out

    def to_json(self) -> dict:
        return {
            "labels": [l.to_json() for l in self.labels],
            "errors": [{"x": [float(v) for v in x], "message": m} for x, m in self.errors],
            "flat_count": int(sum(1 for l in self.labels if l.label == "flat")),
            "singular_count": int(sum(1 for l in self.labels if l.label == "singular")),
        }


def decompose(set_like, grid_points, params: DetectabilityParams, *,
              r0: float = 0.5, lam: float = 0.5, depth: int = 12,
              h_rel: Optional[float] = None, grid_h: Optional[float] = None) -> DecompositionReport:
    """Classify every grid point; hypothesis failures become error rows."""
    labels, errors = [], []
    pts = [np.asarray(p, dtype=float) for p in grid_points]

    def one(p):
        try:
            return classify_point(set_like, p, params, r0=r0, lam=lam,
                                  depth=depth, h_rel=h_rel)
        except NotInScopeError as e:
            return (p, str(e))

    nthreads = approx._threads()
    if nthreads > 1 and len(pts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(one, pts))
    else:
        results = [one(p) for p in pts]
    for res in results:
        if isinstance(res, PointLabel):
            labels.append(res)
        else:
            errors.append(res)
    if grid_h is None:
        if len(pts) > 1:
            arr = np.array(pts)
            from scipy.spatial import cKDTree

            d, _ = cKDTree(arr).query(arr, k=2)
            grid_h = float(np.max(d[:, 1]))
        else:
            grid_h = 1.0
    return DecompositionReport(params=params, labels=labels, errors=errors, grid_h=grid_h)


# ---------------------------------------------------------------------------
# improving-step lemma check and singular-part profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImprovingStepReport:
    status: str            # "verified" | "violated" | "hypothesis-unmet"
    alpha_prime: float
    s_used: float
    theta_S_r: float
    theta_T_r: float
    theta_T_sr: float
    gates: dict

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "alpha_prime": self.alpha_prime,
            "s_used": self.s_used,
            "theta_S_r": self.theta_S_r,
            "theta_T_r": self.theta_T_r,
            "theta_T_sr": self.theta_T_sr,
            "gates": self.gates,
        }


def improving_step_check(set_like, x, r: float, beta_prime: float, gamma_prime: float,
                         params: DetectabilityParams, *,
                         h_rel: Optional[float] = None) -> ImprovingStepReport:
    """One-step improvement: theta_S(r) < alpha' and theta_T(r) < beta'
    should force theta_T(s*r) < gamma', with alpha' = min(phi/4 - beta',
    s*gamma'/2) and s the calibrated shrink factor for gamma'."""
    if beta_prime >= params.phi / 4.0:
        raise ValueError("beta' must be below phi/4")
    C = max(params.phi_slope, 1e-12)
    s_table = None
    for s, v in sorted(params.phi_table.items()):
        if s <= 1.0 / 8.0 and v <= gamma_prime / 4.0:
            s_table = s
    s_used = min((s_table if s_table is not None else gamma_prime / (4.0 * C)) / 8.0, 1.0 / 8.0)
    if s_used <= 0:
        s_used = 1.0 / 64.0
    alpha_prime = min(params.phi / 4.0 - beta_prime, s_used * gamma_prime / 2.0)

    x = np.asarray(x, dtype=float)
    rs = approx.theta(set_like, params.s_class, x, r, h_rel=h_rel)
    rt = approx.theta(set_like, params.t_class, x, r, h_rel=h_rel)
    gate_s = alpha_prime + rs.optimizer_gap + rs.sampling_slack
    gate_t = beta_prime + rt.optimizer_gap + rt.sampling_slack
    if rs.value >= gate_s or rt.value >= gate_t:
        status, tsr = "hypothesis-unmet", math.nan
    else:
        rt_small = approx.theta(set_like, params.t_class, x, s_used * r, h_rel=h_rel)
        gate_c = gamma_prime + rt_small.optimizer_gap + rt_small.sampling_slack
        status = "verified" if rt_small.value < gate_c else "violated"
        tsr = rt_small.value
    return ImprovingStepReport(
        status=status, alpha_prime=alpha_prime, s_used=s_used,
        theta_S_r=rs.value, theta_T_r=rt.value, theta_T_sr=tsr,
        gates={"alpha": gate_s, "beta": gate_t, "gamma": gamma_prime},
    )


def singular_unilateral(singular_cloud: PointCloud, sing_class: str, *,
                        base_points=None, r0: float = 0.5, lam: float = 0.5,
                        depth: int = 6) -> approx.Profile:
    """beta profile of the singular sub-cloud against the singular-parts class."""
    if singular_cloud.is_empty:
        raise ValueError("singular sub-cloud is empty")
    if base_points is None:
        base_points = [singular_cloud.points[0]]
    return approx.profile(singular_cloud, sing_class, base_points, r0,
                          lam=lam, depth=depth, variant="beta")
