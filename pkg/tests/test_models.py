import math

import numpy as np
import pytest

from lsa.models import (
    UnsupportedClassError,
    get_class,
    hyperbola_dist_exact,
    known_class_ids,
    _hyperbola_dist_fast,
)

from . import oracles

ALL_IDS = [
    "grassmannian(2,1)",
    "grassmannian(3,1)",
    "grassmannian(3,2)",
    "grassmannian(4,1)",
    "grassmannian(4,3)",
    "minimal_cones_3_2",
    "y_cones_3_2",
    "harmonic_2_2",
    "harmonic_prime_2_2",
    "light_cone(4)",
    "uniform_support(4)",
    "sphere_stack",
    "axes_union_2d",
    "singleton(3)",
    "singular_parts(minimal_cones_3_2,grassmannian(3,2))",
]


def test_known_ids_listed_and_unknown_rejected():
    assert len(known_class_ids()) >= 10
    for cid in ALL_IDS:
        assert get_class(cid).id  # resolves
    for bad in ("grassmannian(3,3)", "grassmannian(4,2)", "harmonic_3_3",
                "light_cone(5)", "noclass", "singular_parts(x)"):
        with pytest.raises(UnsupportedClassError):
            get_class(bad)


def test_singular_parts_aliases():
    canon = get_class("singular_parts(minimal_cones_3_2,grassmannian(3,2))")
    alias = get_class("singular_parts(minimal_cones,G(3,2))")
    assert [f.name for f in alias.families] == [f.name for f in canon.families]
    alias2 = get_class("singular_parts(minimal_cones,G)")
    assert [f.name for f in alias2.families] == [f.name for f in canon.families]


def _net_h(cls):
    # 3-surfaces in R^4 get a coarser net to stay desk-scale
    return 0.1 if cls.n >= 4 else 0.02


@pytest.mark.parametrize("cid", ALL_IDS)
def test_member_nets_have_zero_distance(cid):
    """Every sampled net point lies on its own member."""
    cls = get_class(cid)
    h = max(_net_h(cls), 0.05)
    worst = 0.0
    for mem in cls.sample_members(per_family=2):
        pts = cls.member_points(mem, 1.0, h)
        assert len(pts) > 0
        assert float(np.linalg.norm(pts, axis=1).max()) <= 1.0 + h + 1e-9
        worst = max(worst, float(cls.distance(mem, pts).max()))
    assert worst <= 1e-6


@pytest.mark.parametrize("cid", ALL_IDS)
def test_analytic_distance_matches_net(cid):
    """dist(q, member) agrees with the minimum over a fine member net."""
    from scipy.spatial import cKDTree

    cls = get_class(cid)
    rng = np.random.default_rng(11)
    h = _net_h(cls)
    for mem in cls.sample_members(per_family=1):
        net = cls.member_points(mem, 2.0, h)
        Q = rng.uniform(-0.5, 0.5, size=(25, cls.n))
        ana = cls.distance(mem, Q)
        emp, _ = cKDTree(net).query(Q, k=1)
        # net min overshoots true distance by at most h
        assert np.all(emp - ana >= -1e-9)
        assert np.all(emp - ana <= h + 1e-9)


@pytest.mark.parametrize("cid", ALL_IDS)
def test_dilates_stay_in_class(cid):
    """dist(lam*q, lam*S) = lam*dist(q, S) through scale_member."""
    cls = get_class(cid)
    rng = np.random.default_rng(5)
    for mem in cls.sample_members(per_family=1):
        Q = rng.uniform(-1.0, 1.0, size=(20, cls.n))
        base = cls.distance(mem, Q)
        for lam in (0.5, 2.0):
            scaled = cls.scale_member(mem, lam)
            assert scaled.class_id == cls.id
            got = cls.distance(scaled, lam * Q)
            assert np.allclose(got, lam * base, atol=1e-8)


def test_member_split_roundtrip():
    cls = get_class("harmonic_2_2")
    mem = cls.member(3, [0.5, -1.0])
    fam, fparams = cls.split(mem)
    assert fam.name == "harmonic4"
    assert tuple(fparams) == (0.5, -1.0)
    assert mem.params == (3.0, 0.5, -1.0)


def test_line_angle_periodicity():
    cls = get_class("grassmannian(2,1)")
    rng = np.random.default_rng(2)
    Q = rng.normal(size=(30, 2))
    for w in (0.1, 1.0, 2.5):
        a = cls.distance(cls.member(0, [w]), Q)
        b = cls.distance(cls.member(0, [w + math.pi]), Q)
        assert np.allclose(a, b, atol=1e-12)


def test_axes_union_distance_closed_form():
    cls = get_class("axes_union_2d")
    rng = np.random.default_rng(4)
    Q = rng.normal(size=(50, 2))
    mem = cls.sample_members(per_family=1)[0]
    want = np.minimum(np.abs(Q[:, 0]), np.abs(Q[:, 1]))
    assert np.allclose(cls.distance(mem, Q), want, atol=1e-12)


def test_singleton_distance_is_norm():
    cls = get_class("singleton(3)")
    rng = np.random.default_rng(6)
    Q = rng.normal(size=(30, 3))
    mem = cls.sample_members(per_family=1)[0]
    assert np.allclose(cls.distance(mem, Q), np.linalg.norm(Q, axis=1), atol=1e-12)


def test_hyperbola_fast_matches_quartic_roots():
    rng = np.random.default_rng(7)
    P = np.vstack([
        rng.normal(scale=2.0, size=(200, 2)),
        # asymptote stress: x near 1 with huge |y|, and vice versa
        np.column_stack([1 + rng.uniform(-1e-3, 1e-3, 50), rng.uniform(-300, 300, 50)]),
        np.column_stack([rng.uniform(-300, 300, 50), 1 + rng.uniform(-1e-3, 1e-3, 50)]),
        rng.normal(scale=0.05, size=(50, 2)),                      # near the corner at 0
        rng.normal(scale=0.05, size=(50, 2)) + np.array([2.0, 2.0]),
    ])
    fast = _hyperbola_dist_fast(P)
    for p, f in zip(P, fast):
        want = oracles.hyperbola_distance_oracle(p)
        assert f == pytest.approx(want, abs=1e-9)
        assert hyperbola_dist_exact(p) == pytest.approx(want, abs=1e-9)


def test_hyperbola_passes_through_origin_and_two_two():
    cls = get_class("harmonic_2_2")
    mem = cls.member(3, [0.0, 0.0])
    ends = np.array([[0.0, 0.0], [2.0, 2.0]])
    assert np.allclose(cls.distance(mem, ends), 0.0, atol=1e-12)


def test_harmonic_prime_excludes_hyperbola():
    names = [f.name for f in get_class("harmonic_prime_2_2").families]
    assert names == ["harmonic1", "harmonic2", "harmonic3"]
    full = [f.name for f in get_class("harmonic_2_2").families]
    assert full == names + ["harmonic4"]


def _cone_halfplane_dist(q, u):
    # reduce to the (rho, t) half-plane and take the min over the two boundary
    # rays, projecting onto each and clipping at the apex
    t = float(q @ u)
    rho = math.sqrt(max(float(q @ q) - t * t, 0.0))
    best = math.hypot(rho, t)                 # apex
    for sgn in (1.0, -1.0):
        s = max((rho + sgn * t) / 2.0, 0.0)   # projection onto ray (s, sgn*s)
        best = min(best, math.hypot(rho - s, t - sgn * s))
    return best


def test_light_cone_distance_against_oracles():
    cls = get_class("light_cone(4)")
    mem = cls.member(0, [0.0, 0.0, 0.0])     # axis e4
    u = np.array([0.0, 0.0, 0.0, 1.0])
    rng = np.random.default_rng(8)
    Q = rng.normal(size=(15, 4))
    got = cls.distance(mem, Q)
    for q, g in zip(Q, got):
        assert g == pytest.approx(_cone_halfplane_dist(q, u), abs=1e-12)
        sweep = oracles.light_cone_distance_oracle(q, u)
        # the sweep is an upper bound with O(ray spacing * |q|) resolution
        assert g <= sweep + 1e-9
        assert sweep - g <= 0.05 * (1.0 + float(np.linalg.norm(q)))
    # apex and on-cone rays are exact zeros
    on = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, -2.0, 0.0, 2.0],
                   [0.0, 0.0, 0.0, 0.0]])
    assert np.allclose(cls.distance(mem, on / math.sqrt(2.0)), 0.0, atol=1e-12)


def test_sphere_stack_two_dilation_fixes_class():
    cls = get_class("sphere_stack")
    mem = cls.sample_members(per_family=1)[0]
    rng = np.random.default_rng(9)
    Q = rng.normal(size=(30, 2))
    doubled = cls.scale_member(mem, 2.0)
    # 2*(stack) is the same set, so distances to both members agree at 2q vs q
    assert np.allclose(cls.distance(doubled, 2 * Q),
                       2 * cls.distance(mem, Q), atol=1e-9)


def test_sampled_member_params_lie_on_axes():
    for cid in ("grassmannian(3,2)", "y_cones_3_2", "light_cone(4)"):
        cls = get_class(cid)
        for mem in cls.sample_members(per_family=3):
            tag = int(mem.params[0])
            fam = cls.families[tag]
            axes = fam.axes(cls.offset_bound)
            fparams = mem.params[1:]
            assert len(fparams) == len(axes)
            for v, ax in zip(fparams, axes):
                assert ax.lo - 1e-9 <= v <= ax.hi + 1e-9
