"""Blow-up traces, directed blow-ups, and the tail dichotomy."""

import numpy as np
import pytest

from lsa import generators, setdist, tangent
from lsa.geometry import PointCloud


def x_axis_cloud(radius, h):
    t = np.arange(-radius, radius + h, h)
    return PointCloud(np.stack([t, np.zeros_like(t)], axis=1), h=h)


# ---------------------------------------------------------------------------
# plain blow-ups
# ---------------------------------------------------------------------------

def test_self_similar_stack_converges():
    # the shell stack is invariant under doubling, so the dyadic ladder
    # reproduces the same local picture at every step
    s = generators.make_sampler("sphere_stack")
    tr = tangent.blow_up(s, np.zeros(2), r0=1.0, lam=0.5, depth=6)
    assert tr.verdict == "convergent"
    for R in tr.view_radii:
        assert tr.tail_gap(R) <= 0.02
    assert tangent.tangent_membership(tr, "sphere_stack", 0.05)


def test_koch_ladder_ratio_controls_convergence():
    k = generators.make_sampler("koch", angle=60.0, level=9)
    tr3 = tangent.blow_up(k, np.zeros(2), r0=1.0, lam=1.0 / 3.0, depth=6)
    assert tr3.verdict == "convergent"
    tr2 = tangent.blow_up(k, np.zeros(2), r0=1.0, lam=0.5, depth=6)
    assert tr2.verdict == "not-convergent"
    assert max(tr2.tail_gap(R) for R in tr2.view_radii) > 0.1
    with pytest.raises(tangent.NonConvergentTraceError):
        tangent.tangent_membership(tr2, "grassmannian(2,1)", 0.05)


def test_blow_up_requires_on_set_base():
    s = generators.make_sampler("line", n=2)
    with pytest.raises(ValueError):
        tangent.blow_up(s, np.array([0.0, 0.7]))


def test_blow_up_dilation_match():
    # {(t, t^2/2)} = 2 * {(t, t^2)}, so windows at doubled scales coincide
    g1 = generators.make_sampler("graph", profile="parabola", amplitude=1.0)
    g2 = generators.make_sampler("graph", profile="parabola", amplitude=0.5)
    a = tangent.blow_up(g1, np.zeros(2), r0=0.25, lam=0.5, depth=4)
    b = tangent.blow_up(g2, np.zeros(2), r0=0.5, lam=0.5, depth=4)
    for ca, cb in zip(a.clouds, b.clouds):
        dv = setdist.walkup_wets(ca, cb, np.zeros(2), max(a.view_radii))
        assert float(dv) <= dv.sampling_slack + 1e-12


def test_cross_blow_up_membership():
    s = generators.make_sampler("cross_2d")
    tr = tangent.blow_up(s, np.zeros(2), r0=1.0, lam=0.5, depth=5)
    assert tr.verdict == "convergent"
    assert tangent.tangent_membership(tr, "axes_union_2d", 0.05)
    assert not tangent.tangent_membership(tr, "grassmannian(2,1)", 0.05)


# ---------------------------------------------------------------------------
# directed blow-ups
# ---------------------------------------------------------------------------

def test_directed_axes_union_escapes_to_line():
    # centers (1/i, 0) with radii 1/i^2 drift off at rate i: the directions
    # are unbounded and the windows see only the horizontal axis
    s = generators.make_sampler("axes_union_2d")
    seq = [((1.0 / i, 0.0), 1.0 / i**2) for i in range(2, 11)]
    tr = tangent.directed_blow_up(s, np.zeros(2), seq)
    assert tr.verdict == "convergent"
    assert not tr.bounded_directions()
    assert tr.direction_mags == pytest.approx(list(range(2, 11)))
    assert tr.translate_check is None

    x10, r10 = np.array([0.1, 0.0]), 0.01
    h = 0.005 * r10
    w = generators.generate_window(s, x10, 5 * r10, h).rescale(x10, r10)
    axis = x_axis_cloud(5.0, 0.5 * h / r10)
    dv = setdist.walkup_wets(w, axis, np.zeros(2), 5.0)
    assert float(dv) <= dv.sampling_slack


def test_directed_bounded_matches_translated_tangent():
    g = generators.make_sampler("graph", profile="parabola", amplitude=1.0)
    seq = [((2.0**-i, 4.0**-i), 2.0**-i) for i in range(1, 13)]
    tr = tangent.directed_blow_up(g, np.zeros(2), seq)
    assert tr.verdict == "convergent"
    assert tr.bounded_directions()
    assert max(tr.direction_mags) == pytest.approx(np.sqrt(1.25), abs=1e-12)
    chk = tr.translate_check
    assert chk is not None
    assert chk["translate"][0] == pytest.approx(1.0, abs=1e-9)
    h_rel = 0.005
    assert chk["gap"] <= 2.0 * (2.0 * h_rel)


def test_directed_validation():
    s = generators.make_sampler("axes_union_2d")
    with pytest.raises(ValueError):
        tangent.directed_blow_up(s, np.zeros(2), [])
    with pytest.raises(ValueError):
        tangent.directed_blow_up(
            s, np.zeros(2), [((0.5, 0.0), 0.1), ((0.25, 0.0), 0.2)])
    with pytest.raises(ValueError):
        tangent.directed_blow_up(
            s, np.zeros(2), [((0.5, 0.7), 0.1), ((0.25, 0.7), 0.05)])


def test_trace_summary_shape():
    s = generators.make_sampler("line", n=2)
    tr = tangent.blow_up(s, np.zeros(2), depth=4)
    d = tr.summary()
    assert d["mode"] == "tangent"
    assert d["verdict"] == "convergent"
    assert d["steps"] == 4
    assert set(d["gaps"]) == {str(R) for R in tr.view_radii}
    assert d["bounded_directions"] is True


# ---------------------------------------------------------------------------
# dichotomy
# ---------------------------------------------------------------------------

def test_dichotomy_line_is_t_branch():
    s = generators.make_sampler("line", n=2)
    v = tangent.dichotomy_check(s, np.zeros(2), "grassmannian(2,1)",
                                "grassmannian(2,1)", depth=5)
    assert v.verdict == "T-branch"
    assert max(v.theta_T) <= 0.05
    assert v.witness_scale is None


def test_dichotomy_cross_is_perp_branch():
    s = generators.make_sampler("cross_2d")
    v = tangent.dichotomy_check(s, np.zeros(2), "grassmannian(2,1)",
                                "axes_union_2d", depth=5)
    assert v.verdict == "Tperp-branch"
    assert min(v.theta_T) > 0.2
    assert max(v.theta_S) <= 0.05


def test_dichotomy_rejects_out_of_scope_set():
    s = generators.make_sampler("cross_2d")
    v = tangent.dichotomy_check(s, np.zeros(2), "grassmannian(2,1)",
                                "grassmannian(2,1)", depth=5)
    assert v.verdict == "not-in-S"
    assert v.witness_scale is not None
    assert v.to_json()["verdict"] == "not-in-S"
