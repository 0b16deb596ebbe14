import math

import numpy as np
import pytest

from lsa import approx, generators
from lsa.geometry import make_cloud
from lsa.models import UnsupportedClassError, get_class
from lsa.setdist import EmptyRestrictionError

from . import oracles

SQRT2_OVER_2 = math.sqrt(2.0) / 2.0


def _cross():
    return generators.make_sampler("cross_2d")


def test_cross_theta_matches_line_sweep():
    s = _cross()
    for r in (1.0, 0.5, 0.25):
        res = approx.theta(s, "grassmannian(2,1)", np.zeros(2), r)
        tol = res.optimizer_gap + res.sampling_slack
        want = oracles.line_sweep_oracle(
            generators.generate_window(s, np.zeros(2), 1.2 * r, 0.002 * r).points,
            np.zeros(2), r, variant="theta")
        assert res.value == pytest.approx(want, abs=tol + 5e-3)
        assert res.value == pytest.approx(SQRT2_OVER_2, abs=0.01)


def test_cross_beta_matches_line_sweep():
    s = _cross()
    for r in (1.0, 0.5):
        res = approx.beta(s, "grassmannian(2,1)", np.zeros(2), r)
        want = oracles.line_sweep_oracle(
            generators.generate_window(s, np.zeros(2), 1.2 * r, 0.002 * r).points,
            np.zeros(2), r, variant="beta")
        assert res.value == pytest.approx(want, abs=res.optimizer_gap + 5e-3)
        assert res.value == pytest.approx(SQRT2_OVER_2, abs=0.01)


def test_line_window_is_exactly_approximable():
    s = generators.make_sampler("line", n=2)
    res = approx.theta(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    assert res.value <= res.sampling_slack + res.optimizer_gap + 1e-9
    resb = approx.beta(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    assert resb.value <= resb.sampling_slack + resb.optimizer_gap + 1e-9


def test_theta_size_bounds_and_beta_comparison():
    rng = np.random.default_rng(0)
    s = generators.make_sampler("graph", profile="sine", amplitude=0.1)
    for _ in range(25):
        x = np.array([rng.uniform(-1, 1), rng.uniform(-0.15, 0.25)])
        r = float(rng.uniform(0.3, 1.5))
        try:
            th = approx.theta(s, "grassmannian(2,1)", x, r)
        except EmptyRestrictionError:
            continue
        dist_xa = s.distance(x) / r
        slack = th.optimizer_gap + th.sampling_slack
        assert th.value >= dist_xa - slack - 1e-9
        assert th.value <= 1.0 + dist_xa + slack + 1e-9
        be = approx.beta(s, "grassmannian(2,1)", x, r)
        assert be.value <= th.value + th.optimizer_gap + be.optimizer_gap \
            + th.sampling_slack + be.sampling_slack + 1e-9


def test_bigger_class_never_loses():
    s = generators.make_sampler("harmonic_zero", k=3)
    x = np.zeros(2)
    for r in (1.0, 0.25):
        full = approx.theta(s, "harmonic_2_2", x, r)
        prime = approx.theta(s, "harmonic_prime_2_2", x, r)
        budget = full.optimizer_gap + prime.optimizer_gap + 1e-9
        assert full.value <= prime.value + budget


def test_scale_and_translation_invariance_on_clouds():
    s = _cross()
    base_cloud = generators.generate_window(s, np.zeros(2), 2.0, 0.004)
    th0 = approx.theta(base_cloud, "grassmannian(2,1)", np.zeros(2), 1.0)
    # same window in rescaled coordinates
    lam = 3.0
    scaled = make_cloud(base_cloud.points * lam, h=base_cloud.h * lam)
    th1 = approx.theta(scaled, "grassmannian(2,1)", np.zeros(2), lam)
    assert th1.value == pytest.approx(th0.value, abs=1e-9)
    # translated window, translated query
    z = np.array([0.7, -0.3])
    moved = base_cloud.translate(z)
    th2 = approx.theta(moved, "grassmannian(2,1)", z, 1.0)
    assert th2.value == pytest.approx(th0.value, abs=1e-9)


def test_hausdorff_variant_dominates_theta_on_cross():
    s = _cross()
    th = approx.theta(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    hs = approx.hausdorff_inf(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    assert hs.value >= th.value - th.optimizer_gap - hs.optimizer_gap \
        - th.sampling_slack - hs.sampling_slack
    # for a cone window and line members the clip changes almost nothing
    assert hs.value == pytest.approx(th.value, abs=0.02)


def test_sphere_stack_bilateral_vs_hausdorff_split():
    """At the in-between radii the stack looks like the model to theta but
    not to the ball-restricted Hausdorff variant.  The infimum is pinned by
    an interleaving dilate: the best member splits the radial gap between the
    window boundary point and the top interior shell, which a slow lambda
    sweep reproduces independently (0.1448 at i=3, rising toward 1/4)."""
    s = generators.make_sampler("sphere_stack_plus")
    for i, pinned in ((3, 0.1448), (5, 0.2121)):
        r = 2.0 ** (-i) - 3.0 ** (-i)
        th = approx.theta(s, "sphere_stack", np.zeros(2), r)
        hs = approx.hausdorff_inf(s, "sphere_stack", np.zeros(2), r)
        assert hs.value == pytest.approx(pinned, abs=hs.optimizer_gap
                                         + hs.sampling_slack + 5e-3)
        # restricting the comparison set can only increase the distance
        assert hs.value >= th.value - th.optimizer_gap - hs.optimizer_gap \
            - th.sampling_slack - hs.sampling_slack
    # on the dyadic ladder theta decays; at the awkward radii hausdorff holds
    th8 = approx.theta(s, "sphere_stack", np.zeros(2), 2.0 ** -8)
    assert th8.value <= 0.05
    hs5 = approx.hausdorff_inf(s, "sphere_stack", np.zeros(2),
                               2.0 ** -5 - 3.0 ** -5)
    assert hs5.value > th8.value + 0.15


def test_profile_ladder_warm_chain():
    s = _cross()
    prof = approx.profile(s, "grassmannian(2,1)", [np.zeros(2)], 1.0,
                          lam=0.5, depth=4)
    assert prof.scales == [1.0, 0.5, 0.25, 0.125]
    sups = prof.sup_per_scale()
    assert len(sups) == 4
    for v in sups:
        assert v == pytest.approx(SQRT2_OVER_2, abs=0.01)
    rows = list(prof.rows())
    assert len(rows) == 4
    assert {"point", "scale", "value", "optimizer_gap", "sampling_slack"} \
        <= set(rows[0])


def test_profile_input_validation():
    s = _cross()
    with pytest.raises(ValueError):
        approx.profile(s, "grassmannian(2,1)", [], 1.0)
    with pytest.raises(ValueError):
        approx.profile(s, "grassmannian(2,1)", [np.zeros(2)], 1.0, lam=1.0)


def test_enlargement_membership_cross():
    s = _cross()
    yes = approx.enlargement_membership(s, "grassmannian(2,1)", 0.72, "theta",
                                        0.25, 1.0)
    assert yes.member
    assert yes.worst_margin <= 0.0
    no = approx.enlargement_membership(s, "grassmannian(2,1)", 0.5, "theta",
                                       0.25, 1.0)
    assert not no.member
    assert no.worst_margin > 0.0
    assert no.worst_scale in no.scales
    # base point must lie on the set
    with pytest.raises(ValueError):
        approx.enlargement_membership(s, "grassmannian(2,1)", 0.5, "theta",
                                      0.25, 1.0, x=np.array([2.0, 3.0]))


def test_stop_below_early_exit_is_sound():
    s = generators.make_sampler("line", n=2)
    res = approx.theta(s, "grassmannian(2,1)", np.zeros(2), 1.0, stop_below=0.3)
    assert res.value <= 0.3
    # early exit still reports a genuine member evaluation
    assert res.best_member.class_id == "grassmannian(2,1)"


def test_evaluate_query_dispatch():
    s = _cross()
    q = approx.ApproxQuery(set=s, class_id="grassmannian(2,1)",
                           x=np.zeros(2), r=1.0, tolerance=0.01, variant="beta")
    res = approx.evaluate(q)
    direct = approx.beta(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    assert res.value == pytest.approx(direct.value, abs=1e-12)
    with pytest.raises(ValueError):
        approx.ApproxQuery(set=s, class_id="grassmannian(2,1)",
                           x=np.zeros(2), r=1.0, tolerance=0.0, variant="beta")


def test_error_paths():
    s = _cross()
    with pytest.raises(UnsupportedClassError):
        approx.theta(s, "no_such_class", np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        approx.theta(s, "grassmannian(2,1)", np.zeros(2), 0.0)
    with pytest.raises(EmptyRestrictionError):
        far = make_cloud(np.array([[50.0, 50.0]]))
        approx.theta(far, "grassmannian(2,1)", np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        # dimension mismatch between set and class
        approx.theta(generators.make_sampler("y_cone"), "grassmannian(2,1)",
                     np.zeros(3), 1.0)


def test_result_fields_are_reported():
    s = _cross()
    res = approx.theta(s, "grassmannian(2,1)", np.zeros(2), 1.0)
    assert res.optimizer_gap > 0.0
    assert res.sampling_slack > 0.0
    assert res.best_member.class_id == "grassmannian(2,1)"
