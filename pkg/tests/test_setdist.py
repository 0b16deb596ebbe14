import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsa.geometry import EmptyCloudError, empty_cloud, make_cloud
from lsa.setdist import (
    KINDS,
    DistanceValue,
    EmptyRestrictionError,
    distance,
    excess,
    relative_excess,
    relative_hausdorff,
    walkup_wets,
)

from . import oracles


# --- frozen hand values -----------------------------------------------------

def test_excess_hand_values():
    A = make_cloud([[0.0, 0.0]])
    B = make_cloud([[3.0, 4.0]])
    assert excess(A, B) == 5.0
    # excess is one-sided: adding points to B can only shrink it
    B2 = make_cloud([[3.0, 4.0], [1.0, 0.0]])
    assert excess(A, B2) == 1.0
    assert excess(B, B) == 0.0


def test_two_point_hausdorff_ladder():
    # D~ at radius 1 sees only {0}; at radius 1+1/i it sees everything
    for i in (1, 2, 7, 100):
        A = make_cloud([[0.0], [1.0]])
        B = make_cloud([[0.0], [1.0 + 1.0 / i]])
        d1 = float(relative_hausdorff(A, B, [0.0], 1.0))
        d2 = float(relative_hausdorff(A, B, [0.0], 1.0 + 1.0 / i))
        assert abs(d1 - 1.0) <= 1e-12
        assert abs(d2 - 1.0 / (i + 1)) <= 1e-12
        # growing the ball grew the distance by the factor i+1
        assert abs(d1 / d2 - (i + 1)) <= 1e-9


def test_two_point_walkup_wets_decay():
    # the bilateral distance at radius r only ever sees the 1/i discrepancy
    for r in (2.0, 4.0, 8.0):
        for i in (1, 3, 10, 100):
            A = make_cloud([[0.0], [1.0 + 1.0 / i]])
            B = make_cloud([[0.0], [1.0]])
            got = float(walkup_wets(A, B, [0.0], r))
            assert abs(got - 1.0 / (i * r)) <= 1e-12


def test_relative_excess_is_normalized():
    A = make_cloud([[0.5, 0.0]])
    B = make_cloud([[0.0, 0.0]])
    assert float(relative_excess(A, B, [0.0, 0.0], 1.0)) == 0.5
    assert float(relative_excess(A, B, [0.0, 0.0], 2.0)) == 0.25


# --- conventions at the empty set --------------------------------------------

def test_empty_conventions():
    B = make_cloud([[0.0, 0.0]])
    E = empty_cloud(2)
    assert excess(E, B) == 0.0
    with pytest.raises(EmptyCloudError):
        excess(B, E)
    # A misses the ball entirely -> restricted excess is 0, not an error
    far = make_cloud([[10.0, 0.0]])
    assert float(relative_excess(far, B, [0.0, 0.0], 1.0)) == 0.0
    # ... but the Hausdorff variant refuses
    with pytest.raises(EmptyRestrictionError):
        relative_hausdorff(far, B, [0.0, 0.0], 1.0)
    with pytest.raises(EmptyRestrictionError):
        relative_hausdorff(B, far, [0.0, 0.0], 1.0)


def test_bad_radius_rejected():
    A = make_cloud([[0.0]])
    with pytest.raises(ValueError):
        relative_excess(A, A, [0.0], 0.0)
    with pytest.raises(ValueError):
        relative_hausdorff(A, A, [0.0], -1.0)


# --- DistanceValue wrapper ----------------------------------------------------

def test_distance_value_contract():
    v = DistanceValue(0.25, "walkup-wets", 0.01)
    assert float(v) == 0.25
    assert v.sampling_slack == 0.01
    with pytest.raises(ValueError):
        DistanceValue(0.1, "nonsense", 0.0)
    with pytest.raises(ValueError):
        DistanceValue(-0.1, "excess", 0.0)


def test_sampling_slack_tracks_resolutions():
    A = make_cloud([[0.0]], h=0.02)
    B = make_cloud([[0.0]], h=0.03)
    assert relative_excess(A, B, [0.0], 2.0).sampling_slack == pytest.approx(0.025)
    assert walkup_wets(A, B, [0.0], 2.0).sampling_slack == pytest.approx(0.025)


def test_dispatcher_aliases_and_errors():
    A = make_cloud([[0.0], [1.0]])
    B = make_cloud([[0.0], [1.5]])
    assert distance("excess", A, B).kind == "excess"
    assert distance("ww", A, B, [0.0], 1.0).kind == "walkup-wets"
    assert distance("rel-excess", A, B, [0.0], 1.0).kind == "relative-excess"
    assert distance("rel-hausdorff", A, B, [0.0], 2.0).kind == "relative-hausdorff"
    for kind in KINDS:
        assert distance(kind, A, B, [0.0], 2.0).kind == kind
    with pytest.raises(ValueError):
        distance("hausdorff?", A, B)
    with pytest.raises(ValueError):
        distance("ww", A, B)   # needs x and r


# --- randomized agreement with the matrix oracles ----------------------------

clouds = st.integers(1, 12).flatmap(
    lambda m: st.integers(1, 3).flatmap(
        lambda n: st.lists(
            st.lists(st.floats(-3, 3, allow_nan=False, width=32),
                     min_size=n, max_size=n),
            min_size=1, max_size=m,
        )
    )
)


def _pair(draw_a, draw_b):
    A = np.array(draw_a, dtype=float)
    B = np.array(draw_b, dtype=float)
    if A.shape[1] != B.shape[1]:
        B = np.resize(B, (B.shape[0], A.shape[1]))
    return A, B


@settings(max_examples=120, deadline=None)
@given(clouds, clouds)
def test_excess_matches_matrix_oracle(a, b):
    A, B = _pair(a, b)
    got = excess(make_cloud(A), make_cloud(B))
    assert got == pytest.approx(oracles.excess_oracle(A, B), abs=1e-12)


@settings(max_examples=120, deadline=None)
@given(clouds, clouds, st.floats(0.3, 4.0))
def test_relative_variants_match_matrix_oracle(a, b, r):
    A, B = _pair(a, b)
    x = A[0]
    cA, cB = make_cloud(A), make_cloud(B)
    assert float(relative_excess(cA, cB, x, r)) == pytest.approx(
        oracles.relative_excess_oracle(A, B, x, r), abs=1e-9)
    assert float(walkup_wets(cA, cB, x, r)) == pytest.approx(
        oracles.walkup_wets_oracle(A, B, x, r), abs=1e-9)
    try:
        want = oracles.relative_hausdorff_oracle(A, B, x, r)
    except ValueError:
        with pytest.raises(EmptyRestrictionError):
            relative_hausdorff(cA, cB, x, r)
    else:
        assert float(relative_hausdorff(cA, cB, x, r)) == pytest.approx(
            want, abs=1e-9)


@settings(max_examples=120, deadline=None)
@given(clouds, clouds, clouds)
def test_excess_triangle_inequality(a, b, c):
    A, B = _pair(a, b)
    _, C = _pair(a, c)
    cA, cB, cC = make_cloud(A), make_cloud(B), make_cloud(C)
    assert excess(cA, cC) <= excess(cA, cB) + excess(cB, cC) + 1e-9


@settings(max_examples=80, deadline=None)
@given(clouds, clouds, st.floats(0.5, 3.0), st.floats(0.3, 3.0),
       st.floats(-2, 2), st.floats(-2, 2))
def test_scale_translation_invariance(a, b, r, lam, t0, t1):
    A, B = _pair(a, b)
    x = A[0]
    n = A.shape[1]
    z = np.resize(np.array([t0, t1]), n)
    base = float(walkup_wets(make_cloud(A), make_cloud(B), x, r))
    scaled = float(walkup_wets(make_cloud(lam * A), make_cloud(lam * B),
                               lam * x, lam * r))
    moved = float(walkup_wets(make_cloud(A + z), make_cloud(B + z), x + z, r))
    assert scaled == pytest.approx(base, abs=1e-9)
    assert moved == pytest.approx(base, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(clouds, clouds, clouds, st.floats(0.5, 2.5))
def test_strong_quasitriangle(a, b, c, r):
    A, B = _pair(a, b)
    _, C = _pair(a, c)
    x = A[0]
    cA, cB, cC = make_cloud(A), make_cloud(B), make_cloud(C)
    eps = float(relative_excess(cA, cB, x, r))
    lhs = float(relative_excess(cA, cC, x, r))
    rhs = eps + (1 + eps) * float(relative_excess(cB, cC, x, r * (1 + eps)))
    assert lhs <= rhs + 1e-9


@settings(max_examples=80, deadline=None)
@given(clouds, clouds, clouds, st.floats(0.5, 2.5))
def test_weak_quasitriangle_center_in_middle_set(a, b, c, r):
    A, B = _pair(a, b)
    _, C = _pair(a, c)
    x = A[0]
    Bx = make_cloud(np.vstack([B, x[None, :]]))      # force x into B
    cA, cC = make_cloud(A), make_cloud(C)
    lhs = float(walkup_wets(cA, cC, x, r))
    rhs = 2 * float(walkup_wets(cA, Bx, x, 2 * r)) \
        + 2 * float(walkup_wets(Bx, cC, x, 2 * r))
    assert lhs <= rhs + 1e-9


@settings(max_examples=60, deadline=None)
@given(clouds, clouds, st.floats(0.4, 2.0), st.floats(1.1, 2.5))
def test_relative_excess_ball_monotonicity(a, b, r, grow):
    # same center, bigger ball, same sets: d_{x,r} <= (s/r) d_{x,s}
    A, B = _pair(a, b)
    x = A[0]
    s = r * grow
    cA, cB = make_cloud(A), make_cloud(B)
    lhs = float(relative_excess(cA, cB, x, r))
    rhs = (s / r) * float(relative_excess(cA, cB, x, s))
    assert lhs <= rhs + 1e-9
