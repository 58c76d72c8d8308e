import math

import numpy as np
import pytest
from helpers import boundary_points, random_point_in, random_set, sampled_ordered_distance
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcbf.geometry import (
    Box,
    Disc,
    GeometryError,
    Polytope,
    closest_point,
    diameter,
    ordered_set_distance,
    point_set_distance,
    signed_distance,
    travel_times,
)

coord = st.floats(-20, 20, allow_nan=False)
radius = st.floats(0.1, 5)


@st.composite
def sets(draw):
    if draw(st.booleans()):
        return Disc((draw(coord), draw(coord)), draw(radius))
    lo = (draw(coord), draw(coord))
    size = (draw(st.floats(0.1, 6)), draw(st.floats(0.1, 6)))
    return Box(lo, (lo[0] + size[0], lo[1] + size[1]))


points = st.tuples(coord, coord).map(np.array)


def test_disc_outside():
    v, g = signed_distance([2.0, 0.0], Disc((0, 0), 1))
    assert v == pytest.approx(-1.0)
    assert g == pytest.approx([-1.0, 0.0])


def test_disc_centre_depth_is_radius():
    assert signed_distance([0.0, 0.0], Disc((0, 0), 1))[0] == pytest.approx(1.0)


def test_box_midpoint_depth():
    assert signed_distance([2.5], Box((2,), (3,)))[0] == pytest.approx(0.5)


def test_box_corner_region():
    v, g = signed_distance([4.0, 5.0], Box((0, 0), (1, 1)))
    assert v == pytest.approx(-5.0)
    assert g == pytest.approx([-0.6, -0.8])


def test_polytope_matches_box():
    P = Polytope(((1, 0), (-1, 0), (0, 1), (0, -1)), (1, 0, 1, 0))
    B = Box((0, 0), (1, 1))
    for x in ([0.5, 0.5], [0.2, 0.9], [3.0, -1.0], [0.5, 4.0]):
        assert P.signed_distance(np.array(x))[0] == pytest.approx(B.signed_distance(np.array(x))[0])


def test_empty_box_rejected():
    with pytest.raises(GeometryError):
        Box((3,), (2,))


def test_bad_radius_rejected():
    with pytest.raises(GeometryError):
        Disc((0, 0), 0)


def test_ordered_distance_example_boxes():
    assert ordered_set_distance(Box((5,), (6,)), Box((7,), (8,))) == pytest.approx(2.0)


def test_ordered_distance_discs_against_sampling():
    d1, d2 = Disc((0, 0), 1), Disc((5, 0), 1)
    assert ordered_set_distance(d1, d2) == pytest.approx(5.0)
    assert sampled_ordered_distance(d1, d2) == pytest.approx(5.0, abs=1e-6)


def test_ordered_distance_is_not_symmetric():
    big, small = Disc((0, 0), 3), Disc((0, 0), 1)
    assert ordered_set_distance(small, big) == 0.0
    assert ordered_set_distance(big, small) == pytest.approx(2.0)


def test_self_distance_is_zero():
    for P in (Disc((1, 2), 1.5), Box((0, 0), (2, 3))):
        assert ordered_set_distance(P, P) == pytest.approx(0.0, abs=1e-9)


def test_ordered_distance_mixed_shapes_against_sampling():
    rng = np.random.default_rng(0)
    for _ in range(40):
        Pi, Pj = random_set(rng), random_set(rng)
        assert ordered_set_distance(Pi, Pj) == pytest.approx(sampled_ordered_distance(Pi, Pj), abs=2e-3)


def test_ordered_distance_needs_compact_sets():
    with pytest.raises(GeometryError):
        ordered_set_distance(Box((0, -math.inf), (1, math.inf)), Box((0, 0), (1, 1)))


def test_travel_times():
    tt = travel_times([8.0], [Box((10,), (11,))], 2.0)
    assert tt.to_first[0] == pytest.approx(1.0)
    assert travel_times([10.5], [Box((10,), (11,))], 2.0).to_first[0] < 0
    between = travel_times([0.0], [Box((5,), (6,)), Box((7,), (8,))], 1.0).between
    assert between[0, 1] == pytest.approx(2.0)


def test_diameters():
    assert diameter(Disc((0, 0), 1)) == pytest.approx(2.0)
    assert diameter(Box((4,), (5,))) == pytest.approx(1.0)
    assert diameter(Box((0, 0), (3, 4))) == pytest.approx(5.0)


def test_closest_point_discs():
    assert closest_point(Disc((7, 2), 1), Disc((11, 2), 0.75)) == pytest.approx((8.0, 2.0))


def test_closest_point_box_to_disc():
    p = closest_point(Box((0, 0), (2, 2)), Disc((5, 1), 1))
    assert p == pytest.approx((2.0, 1.0), abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(sets(), points)
def test_sign_matches_membership(P, x):
    v = signed_distance(x, P)[0]
    inside = np.all(x >= np.array(P.lo)) and np.all(x <= np.array(P.hi)) if isinstance(P, Box) else (
        np.linalg.norm(x - np.array(P.center)) <= P.radius
    )
    if abs(v) > 1e-9:
        assert (v > 0) == bool(inside)


@settings(max_examples=200, deadline=None)
@given(sets(), points, points)
def test_signed_distance_is_1_lipschitz(P, x, y):
    dv = abs(signed_distance(x, P)[0] - signed_distance(y, P)[0])
    assert dv <= np.linalg.norm(x - y) + 1e-9


@settings(max_examples=100, deadline=None)
@given(sets(), sets(), st.integers(0, 2**32 - 1))
def test_ordered_distance_dominates_pointwise(Pi, Pj, seed):
    D = ordered_set_distance(Pi, Pj)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        assert point_set_distance(random_point_in(rng, Pi), Pj) <= D + 1e-6


@settings(max_examples=60, deadline=None)
@given(sets(), sets())
def test_ordered_distance_matches_boundary_sampling(Pi, Pj):
    sampled = sampled_ordered_distance(Pi, Pj)
    assert ordered_set_distance(Pi, Pj) == pytest.approx(sampled, abs=1e-3 + 1e-3 * sampled)


@settings(max_examples=60, deadline=None)
@given(sets(), sets(), sets())
def test_ordered_distance_triangle(Pa, Pb, Pc):
    assert ordered_set_distance(Pa, Pc) <= ordered_set_distance(Pa, Pb) + ordered_set_distance(Pb, Pc) + 1e-6


def test_boundary_points_lie_on_boundary():
    for P in (Disc((1, 1), 2), Box((0, 0), (1, 3))):
        assert np.allclose(P.signed_distance_many(boundary_points(P, 400)), 0.0, atol=1e-12)


def test_box_outside_by_a_subnormal_amount():
    v, g = Box((0, 0), (1, 1)).signed_distance(np.array([-5e-324, 0.5]))
    assert v == 0.0 and g == pytest.approx([1.0, 0.0])
