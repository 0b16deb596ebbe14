"""Detectability calibration, flat/singular classification, decomposition."""

import math

import numpy as np
import pytest

from lsa import detect, generators, models
from lsa.geometry import PointCloud


@pytest.fixture(scope="module")
def params2():
    return detect.calibrate_detectability(
        "grassmannian(2,1)", "harmonic_2_2", per_family=4)


@pytest.fixture(scope="module")
def cross_cloud():
    s = generators.make_sampler("cross_2d")
    return generators.generate_window(s, np.zeros(2), 1.0, 1e-3)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def test_calibration_threshold_chain(params2):
    p = params2
    assert p.phi > 0
    assert p.gamma == pytest.approx(p.phi / 8.0)
    assert p.delta == pytest.approx(p.phi / 32.0)
    assert 0 < p.t < 1
    assert 0 < p.epsilon < p.t * p.delta / 16.0 + 1e-15
    assert p.beta_tilde == pytest.approx(min(p.beta_const / 6.0, 0.5))
    # the shrink table decays toward small scales
    svals = sorted(p.phi_table)
    assert p.phi_table[svals[0]] <= p.phi_table[svals[-1]]
    assert p.phi_table[svals[0]] <= max(2.0 * p.noise_floor, p.phi / 8.0)
    assert p.phi_slope > 0


def test_calibration_is_deterministic(params2):
    again = detect.calibrate_detectability(
        "grassmannian(2,1)", "harmonic_2_2", per_family=4)
    assert again.phi == params2.phi
    assert again.phi_slope == params2.phi_slope
    assert again.epsilon == params2.epsilon
    assert again.phi_table == params2.phi_table


def test_params_json_roundtrip(tmp_path, params2):
    path = tmp_path / "params.json"
    detect.save_params(params2, path)
    back = detect.load_params(path)
    assert back == params2


def test_calibration_failure_reports():
    # every member of the axes-union class carries the full corner, so no
    # admissible flatness threshold exists
    with pytest.raises(detect.CalibrationError):
        detect.calibrate_detectability("grassmannian(2,1)", "axes_union_2d",
                                       per_family=3)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def test_classify_cross_origin_singular(params2):
    s = generators.make_sampler("cross_2d")
    lab = detect.classify_point(s, np.zeros(2), params2, r0=0.5, depth=4)
    assert lab.label == "singular"
    assert lab.flat_witness is None
    assert all(v > 0.65 for v in lab.theta_T)
    # conservative rule: every probed scale stayed above its gate
    assert all(v >= g for v, g in zip(lab.theta_T, lab.gates_T))


def test_classify_cross_far_point_flat(params2):
    s = generators.make_sampler("cross_2d")
    lab = detect.classify_point(s, np.array([0.5, 0.0]), params2,
                                r0=0.25, depth=4)
    assert lab.label == "flat"
    assert lab.flat_witness == 0.25
    assert len(lab.theta_T) == 1  # witnessed at the first scale


def test_classify_out_of_scope(params2):
    # a two-dimensional blob is far from every curve in the class
    s = generators.make_sampler("square_2d")
    with pytest.raises(detect.NotInScopeError) as ei:
        detect.classify_point(s, np.zeros(2), params2, r0=0.5, depth=3)
    assert ei.value.scale == 0.5
    assert ei.value.value > 0.5


def test_classify_off_center_corner_eventually_flat(params2):
    # the offset line-pair members keep intermediate points in scope at every
    # scale; flatness is witnessed once the window clears the corner
    s = generators.make_sampler("cross_2d")
    lab = detect.classify_point(s, np.array([0.2, 0.0]), params2,
                                r0=0.5, depth=4)
    assert lab.label == "flat"
    assert lab.flat_witness <= 0.125
    assert max(lab.theta_S) <= 0.05


def test_classification_dilation_invariance(params2):
    # the cross is its own dilate, so classifying at (x, r0) and (2x, 2*r0)
    # sees exactly similar windows
    s = generators.make_sampler("cross_2d")
    la = detect.classify_point(s, np.array([0.2, 0.0]), params2,
                               r0=0.4, depth=3)
    lb = detect.classify_point(s, np.array([0.4, 0.0]), params2,
                               r0=0.8, depth=3)
    assert la.label == lb.label
    assert la.theta_T == pytest.approx(lb.theta_T, abs=1e-9)
    assert la.theta_S == pytest.approx(lb.theta_S, abs=1e-9)
    if la.flat_witness is not None:
        assert lb.flat_witness == pytest.approx(2.0 * la.flat_witness)


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def test_decompose_cross_grid(params2, cross_cloud):
    grid = [np.zeros(2)]
    for c in (0.1, 0.35, 0.7):
        grid += [np.array([sgn * c, 0.0]) for sgn in (1, -1)]
        grid += [np.array([0.0, sgn * c]) for sgn in (1, -1)]
    rep = detect.decompose(cross_cloud, grid, params2, r0=0.06, depth=4)
    assert not rep.errors
    assert len(rep.labels) == len(grid)
    sing = rep.singular_points
    assert sing.shape == (1, 2)
    assert np.allclose(sing[0], 0.0)
    assert rep.flat_points.shape[0] == len(grid) - 1
    sup = rep.flat_theta_sup()
    assert sup and max(sup.values()) <= 0.1
    j = rep.to_json()
    assert j["singular_count"] == 1
    assert j["flat_count"] == len(grid) - 1
    assert rep.singular_cloud().points.shape == (1, 2)


def test_decompose_propagates_scope_errors(params2):
    sq = generators.make_sampler("square_2d")
    rep = detect.decompose(sq, [np.zeros(2), np.array([0.1, 0.1])], params2,
                           r0=0.3, depth=2)
    assert len(rep.errors) == 2
    assert not rep.labels


# ---------------------------------------------------------------------------
# improving-step lemma
# ---------------------------------------------------------------------------

def test_improving_step_verified_on_line(params2):
    s = generators.make_sampler("line", n=2)
    rep = detect.improving_step_check(s, np.zeros(2), 0.5, 0.1, 0.05, params2)
    assert rep.status == "verified"
    assert rep.theta_T_r <= 0.02
    assert rep.theta_T_sr <= 0.05
    assert rep.alpha_prime <= min(params2.phi / 4.0 - 0.1,
                                  rep.s_used * 0.05 / 2.0) + 1e-15
    assert rep.to_json()["status"] == "verified"


def test_improving_step_hypothesis_unmet_on_cross(params2):
    s = generators.make_sampler("cross_2d")
    rep = detect.improving_step_check(s, np.zeros(2), 0.5, 0.1, 0.05, params2)
    assert rep.status == "hypothesis-unmet"
    assert math.isnan(rep.theta_T_sr)
    assert rep.theta_T_r > 0.65


def test_improving_step_validates_beta(params2):
    s = generators.make_sampler("line", n=2)
    with pytest.raises(ValueError):
        detect.improving_step_check(s, np.zeros(2), 0.5,
                                    params2.phi / 2.0, 0.05, params2)


# ---------------------------------------------------------------------------
# singular part
# ---------------------------------------------------------------------------

def test_singular_unilateral_spines():
    sp_id = "singular_parts(minimal_cones_3_2,grassmannian(3,2))"
    cls = models.get_class(sp_id)

    # a line through 0 is a member of both classes
    t = np.arange(-1.2, 1.2, 0.01)
    line = PointCloud(np.stack([t, np.zeros_like(t), np.zeros_like(t)], 1),
                      h=0.01)
    prof = detect.singular_unilateral(line, "grassmannian(3,1)", depth=4)
    assert max(prof.sup_per_scale()) <= 0.05

    # so is a T-type spine
    mem = cls.member(1, (0.0, 0.0, 0.0, 0.0))
    pts = cls.member_points(mem, 1.2, 0.01)
    spine = PointCloud(pts, h=0.01)
    prof = detect.singular_unilateral(spine, sp_id, depth=4)
    assert max(prof.sup_per_scale()) <= 0.05

    with pytest.raises(ValueError):
        detect.singular_unilateral(PointCloud(np.empty((0, 3))), sp_id)
