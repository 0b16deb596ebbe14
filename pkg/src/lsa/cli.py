"""Command-line experiment runner.

Subcommands bind the library modules to config-driven pipelines that emit
JSON reports (and CSV tables where a tabular form exists).  Every top-level
numeric result in a report's ``values`` block is a ``{value, gap, slack}``
triple; raw module dumps live under ``detail``.

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 audit failure.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import approx, detect, dimension, generators, setdist, tangent
from .geometry import Ball, PointCloud, load_cloud, make_cloud, restrict, save_cloud
from .setdist import EmptyRestrictionError

__version__ = "0.1.0"


class AuditFailure(Exception):
    """An audit or verification row failed; carries the report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NumericFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def num(value, gap=0.0, slack=0.0) -> dict:
    """Report triple: no bare numbers in the ``values`` block."""
    return {"value": float(value), "gap": float(gap), "slack": float(slack)}


def build_report(op: str, config: dict, values: dict, detail=None,
                 status: str = "ok") -> dict:
    return {
        "op": op,
        "status": status,
        "provenance": {
            "config_hash": config_hash(config),
            "seed": config.get("seed"),
            "tool_version": __version__,
        },
        "config": config,
        "values": values,
        "detail": detail if detail is not None else {},
    }


def emit(report: dict, out=None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [float(v) for v in np.ravel(obj)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    click.echo(f"wrote {path}")


# ---------------------------------------------------------------------------
# input loaders
# ---------------------------------------------------------------------------

def load_set(src: str):
    """Point cloud (.csv) or analytic sampler (.json / inline JSON)."""
    s = src.strip()
    if s.startswith("{"):
        return generators.SetSampler.from_json(json.loads(s))
    p = Path(s)
    if not p.exists():
        raise click.UsageError(f"no such set source: {src}")
    if p.suffix == ".json":
        return generators.load_sampler(p)
    return load_cloud(p)


def parse_vec(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError as e:
        raise click.UsageError(f"bad vector {text!r}: {e}")


def load_points(src: str) -> np.ndarray:
    p = Path(src)
    if p.exists():
        cloud = load_cloud(p)
        return cloud.points
    # inline: semicolon-separated vectors
    vecs = [parse_vec(part) for part in src.split(";") if part.strip()]
    if not vecs:
        raise click.UsageError(f"no points in {src!r}")
    return np.array(vecs)


def set_json(set_like) -> dict:
    if isinstance(set_like, PointCloud):
        return {"kind": "cloud", "size": int(set_like.size), "h": float(set_like.h)}
    return {"kind": "sampler", **set_like.to_json()}


# ---------------------------------------------------------------------------
# stage functions (shared by subcommands and run_experiment)
# ---------------------------------------------------------------------------

def stage_generate(config: dict) -> dict:
    sampler = generators.SetSampler(config["spec"], config.get("params", {}),
                                    int(config.get("seed", 0)))
    x = np.asarray(config.get("x", [0.0] * sampler.n), dtype=float)
    cloud = generators.generate_window(sampler, x, float(config["r"]), float(config["h"]))
    out = config.get("out")
    if out:
        save_cloud(cloud, out)
    values = {
        "size": num(cloud.size),
        "h": num(cloud.h, slack=cloud.h),
    }
    return build_report("generate", config, values,
                        detail={"sampler": sampler.to_json(), "out": out})


def stage_distance(config: dict) -> dict:
    a = load_set(config["a"])
    b = load_set(config["b"])
    if not isinstance(a, PointCloud) or not isinstance(b, PointCloud):
        raise click.UsageError("distance operates on point clouds (CSV)")
    kw = {}
    if config.get("x") is not None:
        kw["x"] = np.asarray(config["x"], dtype=float)
    if config.get("r") is not None:
        kw["r"] = float(config["r"])
    dv = setdist.distance(config["kind"], a, b, **kw)
    values = {"distance": num(dv.value, slack=dv.sampling_slack)}
    return build_report("distance", config, values, detail={"kind": dv.kind})


def stage_approx(config: dict, variant: str) -> dict:
    set_like = load_set(config["set"])
    fn = approx.theta if variant == "theta" else approx.beta
    res = fn(set_like, config["class"], np.asarray(config["x"], dtype=float),
             float(config["r"]), h_rel=config.get("h_rel"),
             pad=float(config.get("pad", approx.DEFAULT_PAD)))
    values = {variant: num(res.value, gap=res.optimizer_gap, slack=res.sampling_slack)}
    return build_report(variant, config, values,
                        detail={"best_member": res.best_member.to_json(),
                                "set": set_json(set_like)})


def stage_profile(config: dict) -> dict:
    set_like = load_set(config["set"])
    pts = np.asarray(config["points"], dtype=float)
    prof = approx.profile(set_like, config["class"], pts, float(config["r0"]),
                          lam=float(config.get("lam", 0.5)),
                          depth=int(config.get("depth", 8)),
                          variant=config.get("variant", "theta"),
                          h_rel=config.get("h_rel"))
    rows = list(prof.rows())
    sup = prof.sup_per_scale()
    worst = max(
        (row["optimizer_gap"] + row["sampling_slack"] for row in rows), default=0.0
    )
    values = {
        "sup_over_points_worst_scale": num(max(sup), gap=worst),
        "sup_per_scale": [num(v, gap=worst) for v in sup],
    }
    out_csv = config.get("csv")
    if out_csv:
        header = [f"x{i+1}" for i in range(pts.shape[1])] + [
            "scale", "value", "optimizer_gap", "sampling_slack"]
        write_csv(out_csv, header,
                  [[*row["point"], row["scale"], row["value"],
                    row["optimizer_gap"], row["sampling_slack"]] for row in rows])
    return build_report("profile", config, values,
                        detail={"rows": rows, "scales": list(prof.scales),
                                "variant": prof.variant})


def stage_tangent(config: dict) -> dict:
    set_like = load_set(config["set"])
    if isinstance(set_like, PointCloud):
        raise click.UsageError("tangent blow-ups need an analytic sampler spec")
    x = np.asarray(config["x"], dtype=float)
    view = tuple(config.get("view_radii", (1.0, 2.0, 4.0)))
    tol = float(config.get("tolerance", 0.02))
    if config.get("sequence") is not None:
        seq = [(np.asarray(row[:-1], dtype=float), float(row[-1]))
               for row in np.asarray(config["sequence"], dtype=float)]
        trace = tangent.directed_blow_up(set_like, x, seq, view_radii=view,
                                         tolerance=tol, h_rel=config.get("h_rel"))
    else:
        trace = tangent.blow_up(set_like, x, r0=float(config.get("r0", 1.0)),
                                lam=float(config.get("lam", 0.5)),
                                depth=int(config.get("depth", 10)),
                                view_radii=view, tolerance=tol,
                                h_rel=config.get("h_rel"))
    worst_tail = max(trace.tail_gap(R) for R in trace.view_radii)
    values = {
        "tail_gap": num(worst_tail, slack=trace.clouds[-1].h),
        "converged": num(1.0 if trace.verdict == "convergent" else 0.0),
    }
    detail = {"trace": trace.summary()}
    if config.get("class") is not None:
        mem = tangent.tangent_membership(trace, config["class"],
                                         float(config.get("eps", 0.05)))
        detail["membership"] = bool(mem)
        values["membership"] = num(1.0 if mem else 0.0)
    return build_report("tangent", config, values, detail=detail)


def stage_calibrate(config: dict) -> dict:
    params = detect.calibrate_detectability(
        config["t_class"], config["s_class"],
        per_family=int(config.get("per_family", 6)),
        h_rel=config.get("h_rel"))
    out = config.get("out")
    if out:
        detect.save_params(params, out)
    values = {
        "phi": num(params.phi, slack=params.noise_floor),
        "epsilon": num(params.epsilon),
        "beta_tilde": num(params.beta_tilde),
        "delta": num(params.delta),
    }
    return build_report("calibrate", config, values,
                        detail={"params": params.to_json(), "out": out})


def stage_classify(config: dict) -> dict:
    set_like = load_set(config["set"])
    params = detect.load_params(config["params"])
    pts = np.asarray(config["points"], dtype=float)
    rep = detect.decompose(set_like, pts, params,
                           r0=float(config.get("r0", 0.5)),
                           lam=float(config.get("lam", 0.5)),
                           depth=int(config.get("depth", 12)),
                           h_rel=config.get("h_rel"))
    values = {
        "flat_count": num(len(rep.flat_points)),
        "singular_count": num(len(rep.singular_points)),
        "flat_theta_sup": num(max(rep.flat_theta_sup().values(), default=0.0),
                              slack=params.noise_floor),
    }
    out_csv = config.get("csv")
    if out_csv:
        nd = pts.shape[1]
        header = [f"x{i+1}" for i in range(nd)] + ["label"]
        rows = [[*map(float, lab.x), lab.label] for lab in rep.labels]
        write_csv(out_csv, header, rows)
    return build_report("classify", config, values, detail={"report": rep.to_json()})


def stage_dimension(config: dict) -> dict:
    set_like = load_set(config["set"])
    x = None if config.get("x") is None else np.asarray(config["x"], dtype=float)
    est = dimension.minkowski_estimate(
        set_like, x, r_window=float(config.get("r_window", 1.0)),
        s_max=float(config.get("s_max", 0.25)),
        lam=float(config.get("lam", 0.5)),
        depth=int(config.get("depth", 5)), h=config.get("h"))
    values = {"slope": num(est.slope, slack=est.residual)}
    return build_report("dimension", config, values, detail={"estimate": est.to_json()})


def stage_audit(config: dict) -> dict:
    which = config["which"]
    set_like = load_set(config["set"])
    prof = dimension.fit_covering_profile(config["class"])
    if which == "covering":
        rng = np.random.default_rng(int(config.get("seed", 0)))
        k = int(config.get("samples", 20))
        r_lo = float(config.get("r_min", 0.25))
        r_hi = float(config.get("r_max", 1.0))
        if isinstance(set_like, PointCloud):
            base = set_like.points
        else:
            base = generators.generate_window(
                set_like, np.zeros(set_like.n), r_hi * 2.0, 0.05).points
        idx = rng.integers(0, base.shape[0], size=k)
        rs = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=k))
        samples = [(base[i], r) for i, r in zip(idx, rs)]
        audit = dimension.verify_covering_lemma(
            set_like, config["class"], prof, float(config.get("delta", 0.05)),
            samples, h_rel=config.get("h_rel"))
        n_fail = sum(1 for row in audit.rows if row.status == "fail")
        values = {
            "rows": num(len(audit.rows)),
            "failures": num(n_fail),
            "lambda": num(audit.lam),
        }
        report = build_report("audit-covering", config, values,
                              detail={"audit": audit.to_json()},
                              status="ok" if audit.all_pass else "audit-failed")
        if not audit.all_pass:
            raise AuditFailure("covering lemma audit failed", report)
        return report
    if which == "dimension":
        x = None if config.get("x") is None else np.asarray(config["x"], dtype=float)
        rep = dimension.dimension_bound_audit(
            set_like, config["class"], prof, x=x,
            r0=float(config.get("r0", 1.0)), h_rel=config.get("h_rel"),
            est_kwargs=config.get("est_kwargs"))
        values = {
            "slope": num(0.0 if math.isnan(rep.slope) else rep.slope,
                         slack=0.0 if math.isnan(rep.residual) else rep.residual),
            "bound": num(0.0 if math.isnan(rep.bound) else rep.bound),
            "eps": num(rep.eps_measured),
        }
        report = build_report("audit-dimension", config, values,
                              detail={"audit": rep.to_json()},
                              status="ok" if rep.status == "pass" else rep.status)
        if rep.status == "fail":
            raise AuditFailure("dimension bound audit failed", report)
        return report
    raise click.UsageError(f"unknown audit kind {which!r}")


_STAGES = {
    "generate": stage_generate,
    "distance": stage_distance,
    "theta": lambda c: stage_approx(c, "theta"),
    "beta": lambda c: stage_approx(c, "beta"),
    "profile": stage_profile,
    "tangent": stage_tangent,
    "calibrate": stage_calibrate,
    "classify": stage_classify,
    "dimension": stage_dimension,
    "audit": stage_audit,
}


def run_experiment(config: dict) -> dict:
    """Config-driven pipeline: {"pipeline": [{"op": ..., ...}, ...], "seed": ...}.

    Returns the combined report; on audit failure the partial report carries
    the failure marker and an AuditFailure is raised with it attached.
    """
    if not isinstance(config, dict) or "pipeline" not in config:
        raise click.UsageError("config must be a dict with a 'pipeline' list")
    stages = []
    report = {
        "op": "run",
        "status": "ok",
        "provenance": {
            "config_hash": config_hash(config),
            "seed": config.get("seed"),
            "tool_version": __version__,
        },
        "stages": stages,
    }
    for entry in config["pipeline"]:
        op = entry.get("op")
        if op == "verify":
            rows, ok = verify_suite(int(entry.get("seed", config.get("seed", 0))))
            stages.append({"op": "verify", "status": "ok" if ok else "audit-failed",
                           "rows": rows})
            if not ok:
                report["status"] = "audit-failed"
                raise AuditFailure("verify suite failed", report)
            continue
        if op not in _STAGES:
            raise click.UsageError(f"unknown pipeline op {op!r}")
        sub = dict(entry)
        sub.setdefault("seed", config.get("seed", 0))
        try:
            stages.append(_STAGES[op](sub))
        except AuditFailure as e:
            if e.report is not None:
                stages.append(e.report)
            report["status"] = "audit-failed"
            e.report = report
            raise
    return report


# ---------------------------------------------------------------------------
# self-verification suite
# ---------------------------------------------------------------------------

def _rand_cloud(rng, n: int, lo: int = 2, hi: int = 8) -> PointCloud:
    k = int(rng.integers(lo, hi + 1))
    return make_cloud(rng.uniform(-2.0, 2.0, size=(k, n)))


def verify_suite(seed: int = 0, triples: int = 200):
    """Desk-scale property table: one row per exact lemma-derived property.

    Returns (rows, all_pass); each row has name, checks, worst_margin, status
    and a minimal reproduction config on failure.
    """
    rows = []

    def add(name, margins, tol=1e-9, repro=None, expect_checks=None):
        worst = float(min(margins)) if margins else math.inf
        ok = worst >= -tol
        row = {"name": name, "checks": len(margins),
               "worst_margin": worst, "status": "pass" if ok else "fail"}
        if not ok and repro is not None:
            row["repro"] = repro
        if expect_checks is not None and len(margins) != expect_checks:
            row["status"] = "fail"
            row["note"] = f"expected {expect_checks} checks"
        rows.append(row)

    rng = np.random.default_rng(seed)

    def d(A, B, x, r):
        return float(setdist.relative_excess(A, B, x, r))

    def D(A, B, x, r):
        return float(setdist.walkup_wets(A, B, x, r))

    tri, contain, mono = [], [], []
    strong, weak2, weak3, invar = [], [], [], []
    for t in range(triples):
        n = int(rng.integers(1, 4))
        A = _rand_cloud(rng, n)
        B = _rand_cloud(rng, n)
        C = _rand_cloud(rng, n)
        tri.append(setdist.excess(A, B) + setdist.excess(B, C) - setdist.excess(A, C))
        # containment: A subset of A|B has zero relative excess
        AB = make_cloud(np.vstack([A.points, B.points]))
        x = A.points[0]
        r = float(rng.uniform(0.5, 2.0))
        contain.append(-d(A, AB, x, r))
        # monotonicity: B(x2, r2) inside B(y, s)
        y = rng.uniform(-1.0, 1.0, size=n)
        s = float(rng.uniform(1.0, 3.0))
        x2 = y + rng.uniform(-0.3, 0.3, size=n)
        r2 = float(rng.uniform(0.1, 1.0)) * (s - float(np.linalg.norm(x2 - y)))
        if r2 > 1e-6:
            mono.append((s / r2) * d(A, B, y, s) - d(A, B, x2, r2))
        # strong quasitriangle for relative excess
        eps = d(A, B, x, r)
        strong.append(eps + (1 + eps) * d(B, C, x, r * (1 + eps)) - d(A, C, x, r))
        # weak quasitriangles for the Walkup-Wets distance
        Bx = make_cloud(np.vstack([B.points, x[None, :]]))      # x in B
        weak2.append(2 * D(A, Bx, x, 2 * r) + 2 * D(Bx, C, x, 2 * r)
                     - D(A, C, x, r))
        shift = x + rng.uniform(-0.9, 0.9) * r * _unit(rng, n)   # B meets B(x,r)
        Bm = make_cloud(np.vstack([B.points, shift[None, :]]))
        weak3.append(3 * D(A, Bm, x, 3 * r) + 3 * D(Bm, C, x, 3 * r)
                     - D(A, C, x, r))
        # scale + translation invariance (d and D)
        lam = float(rng.uniform(0.3, 3.0))
        z = rng.uniform(-1.0, 1.0, size=n)
        origin = np.zeros(n)
        # lam*A realized as the blow-up (p - 0)/(1/lam)
        As, Bs = A.rescale(origin, 1.0 / lam), B.rescale(origin, 1.0 / lam)
        At, Bt = A.translate(z), B.translate(z)
        for f in (d, D):
            base = f(A, B, x, r)
            invar.append(-abs(base - f(As, Bs, lam * x, lam * r)))
            invar.append(-abs(base - f(At, Bt, x + z, r)))

    repro = {"op": "verify", "seed": seed}
    add("excess-triangle", tri, repro=repro)
    add("relative-excess-containment", contain, repro=repro)
    add("relative-excess-monotonicity", mono, repro=repro)
    add("strong-quasitriangle", strong, repro=repro)
    add("weak-quasitriangle-2x2r", weak2, repro=repro)
    add("weak-quasitriangle-3x3r", weak3, repro=repro)
    add("scale-translation-invariance", invar, tol=1e-9, repro=repro)

    # relative-Hausdorff monotonicity failure: ratio (i+1) at unit scale
    haus = []
    for i in range(1, 101):
        A = make_cloud(np.array([[0.0], [1.0]]))
        B = make_cloud(np.array([[0.0], [1.0 + 1.0 / i]]))
        x0 = np.zeros(1)
        d1 = float(setdist.relative_hausdorff(A, B, x0, 1.0))
        d2 = float(setdist.relative_hausdorff(A, B, x0, 1.0 + 1.0 / i))
        haus.append(1e-12 - abs(d1 - 1.0))
        haus.append(1e-12 - abs(d2 - 1.0 / (i + 1)))
        haus.append(1e-12 - abs(d1 / d2 - (i + 1)))
    add("hausdorff-monotonicity-failure", haus, tol=0.0, repro=repro,
        expect_checks=300)

    # beta <= theta on a small analytic benchmark
    cross = generators.make_sampler("cross_2d")
    bt = []
    for r in (1.0, 0.5):
        th = approx.theta(cross, "grassmannian(2,1)", np.zeros(2), r)
        be = approx.beta(cross, "grassmannian(2,1)", np.zeros(2), r)
        bt.append(th.value + th.optimizer_gap + be.optimizer_gap
                  + th.sampling_slack + be.sampling_slack - be.value)
    add("beta-le-theta", bt, repro=repro)

    all_pass = all(row["status"] == "pass" for row in rows)
    return rows, all_pass


def _unit(rng, n: int) -> np.ndarray:
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------

@click.group()
def cli():
    """Local-approximability toolkit for finite samples of closed sets."""


def _common(config, out):
    emit(config, out)


@cli.command()
@click.option("--spec", required=True, help="sampler tag, e.g. koch, cross_2d")
@click.option("--params", default="{}", help="JSON sampler parameters")
@click.option("--seed", default=0, type=int)
@click.option("--x", default=None, help="window center, comma separated")
@click.option("--r", required=True, type=float, help="window radius")
@click.option("--h", required=True, type=float, help="net resolution")
@click.option("--out", default=None, help="CSV output path")
@click.option("--report", "report_out", default=None)
def generate(spec, params, seed, x, r, h, out, report_out):
    """Sample an h-net of an analytic set inside a ball window."""
    config = {"spec": spec, "params": json.loads(params), "seed": seed,
              "r": r, "h": h, "out": out}
    if x is not None:
        config["x"] = [float(v) for v in parse_vec(x)]
    emit(stage_generate(config), report_out)


@cli.command()
@click.argument("a")
@click.argument("b")
@click.option("--kind", default="walkup-wets",
              type=click.Choice(list(setdist.KINDS)))
@click.option("--x", default=None)
@click.option("--r", default=None, type=float)
@click.option("--report", "report_out", default=None)
def distance(a, b, kind, x, r, report_out):
    """Set-to-set distance between two point-cloud CSVs."""
    config = {"a": a, "b": b, "kind": kind, "r": r}
    if x is not None:
        config["x"] = [float(v) for v in parse_vec(x)]
    emit(stage_distance(config), report_out)


def _approx_cmd(variant):
    @click.option("--set", "set_src", required=True)
    @click.option("--class", "class_id", required=True)
    @click.option("--x", required=True)
    @click.option("--r", required=True, type=float)
    @click.option("--h-rel", default=None, type=float)
    @click.option("--pad", default=approx.DEFAULT_PAD, type=float)
    @click.option("--report", "report_out", default=None)
    def cmd(set_src, class_id, x, r, h_rel, pad, report_out):
        config = {"set": set_src, "class": class_id,
                  "x": [float(v) for v in parse_vec(x)], "r": r,
                  "h_rel": h_rel, "pad": pad}
        emit(stage_approx(config, variant), report_out)

    cmd.__name__ = variant
    cmd.__doc__ = ("Bilateral" if variant == "theta" else "Unilateral") + \
        " approximability of a set by a model class at (x, r)."
    return cmd


cli.command(name="theta")(_approx_cmd("theta"))
cli.command(name="beta")(_approx_cmd("beta"))


@cli.command()
@click.option("--set", "set_src", required=True)
@click.option("--class", "class_id", required=True)
@click.option("--points", required=True, help="CSV path or 'x,y;x,y' inline")
@click.option("--r0", required=True, type=float)
@click.option("--lam", default=0.5, type=float)
@click.option("--depth", default=8, type=int)
@click.option("--variant", default="theta", type=click.Choice(["theta", "beta"]))
@click.option("--h-rel", default=None, type=float)
@click.option("--csv", "csv_out", default=None)
@click.option("--report", "report_out", default=None)
def profile(set_src, class_id, points, r0, lam, depth, variant, h_rel, csv_out,
            report_out):
    """Approximability over a point grid and a geometric scale ladder."""
    config = {"set": set_src, "class": class_id,
              "points": [[float(v) for v in p] for p in load_points(points)],
              "r0": r0, "lam": lam, "depth": depth, "variant": variant,
              "h_rel": h_rel, "csv": csv_out}
    emit(stage_profile(config), report_out)


@cli.command(name="tangent")
@click.option("--set", "set_src", required=True)
@click.option("--x", required=True)
@click.option("--r0", default=1.0, type=float)
@click.option("--lam", default=0.5, type=float)
@click.option("--depth", default=10, type=int)
@click.option("--sequence", default=None,
              help="CSV of rows x1..xn,r for a directed blow-up")
@click.option("--view-radii", default="1,2,4")
@click.option("--tolerance", default=0.02, type=float)
@click.option("--class", "class_id", default=None)
@click.option("--eps", default=0.05, type=float)
@click.option("--h-rel", default=None, type=float)
@click.option("--report", "report_out", default=None)
def tangent_cmd(set_src, x, r0, lam, depth, sequence, view_radii, tolerance,
                class_id, eps, h_rel, report_out):
    """Blow-up trace at a point; optional tangent-membership test."""
    config = {"set": set_src, "x": [float(v) for v in parse_vec(x)],
              "r0": r0, "lam": lam, "depth": depth,
              "view_radii": [float(v) for v in parse_vec(view_radii)],
              "tolerance": tolerance, "h_rel": h_rel,
              "class": class_id, "eps": eps}
    if sequence is not None:
        rows = np.loadtxt(sequence, delimiter=",", skiprows=1, ndmin=2)
        config["sequence"] = [[float(v) for v in row] for row in rows]
    emit(stage_tangent(config), report_out)


@cli.command()
@click.option("--t-class", required=True)
@click.option("--s-class", required=True)
@click.option("--per-family", default=6, type=int)
@click.option("--h-rel", default=None, type=float)
@click.option("--out", default=None, help="write detectability params JSON")
@click.option("--report", "report_out", default=None)
def calibrate(t_class, s_class, per_family, h_rel, out, report_out):
    """Measure the detectability modulus of a flat class inside a scope class."""
    config = {"t_class": t_class, "s_class": s_class,
              "per_family": per_family, "h_rel": h_rel, "out": out}
    emit(stage_calibrate(config), report_out)


@cli.command()
@click.option("--set", "set_src", required=True)
@click.option("--params", required=True, help="detectability params JSON path")
@click.option("--points", required=True)
@click.option("--r0", default=0.5, type=float)
@click.option("--lam", default=0.5, type=float)
@click.option("--depth", default=12, type=int)
@click.option("--h-rel", default=None, type=float)
@click.option("--csv", "csv_out", default=None)
@click.option("--report", "report_out", default=None)
def classify(set_src, params, points, r0, lam, depth, h_rel, csv_out, report_out):
    """Flat/singular decomposition of sample points."""
    config = {"set": set_src, "params": params,
              "points": [[float(v) for v in p] for p in load_points(points)],
              "r0": r0, "lam": lam, "depth": depth, "h_rel": h_rel,
              "csv": csv_out}
    emit(stage_classify(config), report_out)


@cli.command(name="dimension")
@click.option("--set", "set_src", required=True)
@click.option("--x", default=None)
@click.option("--r-window", default=1.0, type=float)
@click.option("--s-max", default=0.25, type=float)
@click.option("--lam", default=0.5, type=float)
@click.option("--depth", default=5, type=int)
@click.option("--h", default=None, type=float)
@click.option("--report", "report_out", default=None)
def dimension_cmd(set_src, x, r_window, s_max, lam, depth, h, report_out):
    """Minkowski-dimension estimate from covering counts on a scale ladder."""
    config = {"set": set_src, "r_window": r_window, "s_max": s_max,
              "lam": lam, "depth": depth, "h": h}
    if x is not None:
        config["x"] = [float(v) for v in parse_vec(x)]
    emit(stage_dimension(config), report_out)


@cli.command()
@click.argument("which", type=click.Choice(["covering", "dimension"]))
@click.option("--set", "set_src", required=True)
@click.option("--class", "class_id", required=True)
@click.option("--delta", default=0.05, type=float)
@click.option("--samples", default=20, type=int)
@click.option("--r-min", default=0.25, type=float)
@click.option("--r-max", default=1.0, type=float)
@click.option("--r0", default=1.0, type=float)
@click.option("--x", default=None)
@click.option("--seed", default=0, type=int)
@click.option("--h-rel", default=None, type=float)
@click.option("--report", "report_out", default=None)
def audit(which, set_src, class_id, delta, samples, r_min, r_max, r0, x, seed,
          h_rel, report_out):
    """Machine-check the covering lemma or the dimension bound (exit 3 on fail)."""
    config = {"which": which, "set": set_src, "class": class_id,
              "delta": delta, "samples": samples, "r_min": r_min,
              "r_max": r_max, "r0": r0, "seed": seed, "h_rel": h_rel}
    if x is not None:
        config["x"] = [float(v) for v in parse_vec(x)]
    try:
        report = stage_audit(config)
    except AuditFailure as e:
        emit(e.report, report_out)
        raise
    emit(report, report_out)


@cli.command()
@click.option("--seed", default=0, type=int)
@click.option("--triples", default=200, type=int)
@click.option("--report", "report_out", default=None)
def verify(seed, triples, report_out):
    """Self-verification: exact distance properties at desk scale (exit 3 on fail)."""
    rows, all_pass = verify_suite(seed, triples)
    config = {"op": "verify", "seed": seed, "triples": triples}
    report = build_report("verify", config,
                          {"rows": num(len(rows)),
                           "failures": num(sum(r["status"] != "pass" for r in rows))},
                          detail={"rows": rows},
                          status="ok" if all_pass else "audit-failed")
    emit(report, report_out)
    for row in rows:
        click.echo(f"{row['status']:4s}  {row['name']:36s} "
                   f"checks={row['checks']:<5d} worst_margin={row['worst_margin']:+.3e}")
    if not all_pass:
        raise AuditFailure("verification suite failed", report)


@cli.command(name="run")
@click.argument("config_path")
@click.option("--report", "report_out", default=None)
def run_cmd(config_path, report_out):
    """Run a multi-stage experiment from a JSON config file."""
    try:
        config = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise click.UsageError(f"bad config {config_path}: {e}")
    try:
        report = run_experiment(config)
    except AuditFailure as e:
        if e.report is not None:
            emit(e.report, report_out)
        raise
    emit(report, report_out)


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except AuditFailure as e:
        click.echo(f"audit failure: {e}", err=True)
        sys.exit(3)
    except (detect.NotInScopeError, detect.CalibrationError,
            tangent.NonConvergentTraceError, EmptyRestrictionError,
            ArithmeticError, NumericFailure) as e:
        click.echo(f"numeric failure: {e}", err=True)
        sys.exit(2)
    except (generators.UnsupportedSpecError, ValueError, OSError, KeyError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
