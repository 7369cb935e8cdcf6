import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardscatter.geometry import (
    GeometryError,
    PolyChain,
    Scatterer,
    assumption_b_check,
    boundary_components,
    disk,
    distance_to_set,
    dumps_geometry,
    empty_scatterer,
    euclidean_distance_to,
    exterior_connected,
    feature_separation,
    hausdorff_distance,
    in_thickening,
    loads_geometry,
    point_segment_distance,
    polygon,
    polyline,
    pseudo_distance,
    regular_polygon,
    thicken,
    thickening_gauge,
    unit_square,
)

SEGMENT = polyline([[0.0, 0.0], [1.0, 0.0]], 2.0)
L_SHAPE = polyline([[-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])


# -- primitives ---------------------------------------------------------------


def test_point_segment_distance_cases():
    seg = np.array([[[0.0, 0.0], [1.0, 0.0]]])
    pts = np.array([[0.5, 0.2], [2.0, 0.0], [-1.0, -1.0], [0.3, 0.0]])
    d, _ = point_segment_distance(pts, seg)
    assert d.ravel() == pytest.approx([0.2, 1.0, math.sqrt(2), 0.0])


def test_polychain_requires_enough_vertices():
    with pytest.raises(GeometryError):
        PolyChain(np.array([[0.0, 0.0], [1.0, 0.0]]), True)
    with pytest.raises(GeometryError):
        PolyChain(np.array([[0.0, 0.0]]), False)


def test_polychain_rejects_nonfinite():
    with pytest.raises(GeometryError):
        PolyChain(np.array([[0.0, 0.0], [np.nan, 1.0]]), False)


def test_closed_chain_normalised_counterclockwise():
    cw = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    c = PolyChain(cw, True)
    assert c.signed_area == pytest.approx(1.0)
    assert not c.vertices.flags.writeable


def test_validate_rejects_self_intersection():
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(GeometryError, match="self-intersects"):
        Scatterer((PolyChain(bowtie, True),), (), 2.0).validate()


def test_validate_rejects_duplicate_vertices():
    v = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(GeometryError, match="snap tolerance"):
        polygon(v, 2.0).validate()


def test_validate_rejects_touching_components():
    s = Scatterer(unit_square().loops, (PolyChain(np.array([[0.5, 0.0], [0.9, 0.0]]), False),), 1.0)
    with pytest.raises(GeometryError, match="touch"):
        s.validate()


def test_vertex_outside_bounding_disk():
    with pytest.raises(GeometryError):
        polygon(regular_polygon(5, 2.0), 1.0)


# -- Hausdorff ----------------------------------------------------------------


def test_hausdorff_identity():
    assert hausdorff_distance(unit_square(), unit_square(), 0.05).distance == 0.0


def test_hausdorff_points():
    r = hausdorff_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]), 0.1)
    assert r.distance == pytest.approx(5.0)


def test_hausdorff_segment_and_thickening():
    kh = thicken(SEGMENT, 0.1)
    r = hausdorff_distance(SEGMENT, kh, 0.01)
    assert r.distance == pytest.approx(0.1 * math.sqrt(2), abs=1e-9)
    assert r.sampling_resolution == 0.01


def test_hausdorff_empty_raises():
    with pytest.raises(GeometryError, match="empty set has no Hausdorff distance"):
        hausdorff_distance(empty_scatterer(), unit_square(), 0.1)


def test_hausdorff_witnesses_realise_distance():
    a = unit_square()
    b = unit_square((0.3, 0.0))
    r = hausdorff_distance(a, b, 0.01)
    assert r.distance == pytest.approx(0.3, abs=0.01)
    assert math.dist(r.witness_a, r.witness_b) == pytest.approx(r.distance)


squares = st.builds(
    lambda cx, cy, rot: unit_square().transformed(rot, (cx, cy), 3.0),
    st.floats(-1, 1),
    st.floats(-1, 1),
    st.floats(0, math.pi),
)


@settings(max_examples=20, deadline=None)
@given(a=squares, b=squares, c=squares)
def test_hausdorff_metric_properties(a, b, c):
    res = 0.05
    dab = hausdorff_distance(a, b, res).distance
    dba = hausdorff_distance(b, a, res).distance
    assert abs(dab - dba) <= 3 * res
    dac = hausdorff_distance(a, c, res).distance
    dcb = hausdorff_distance(c, b, res).distance
    assert dab <= dac + dcb + 3 * res


# -- thickening -----------------------------------------------------------------


def test_thicken_segment_is_rectangle():
    kh = thicken(SEGMENT, 0.1)
    assert not kh.screens and len(kh.loops) == 1
    v = kh.loops[0].vertices
    assert sorted(map(tuple, np.round(v, 12).tolist())) == sorted([(-0.1, -0.1), (1.1, -0.1), (1.1, 0.1), (-0.1, 0.1)])


def test_thicken_zero_is_identity():
    assert thicken(unit_square(), 0.0) == unit_square()
    assert thicken(SEGMENT, 0.0) == SEGMENT


def test_thicken_square_against_raster_oracle():
    """For a convex polygon K_h is the closed h-neighbourhood; rasterise it at h/32."""
    h = 0.05
    sq = unit_square()
    kh = thicken(sq, h)
    assert hausdorff_distance(sq, kh, h / 32).distance <= h * math.sqrt(2) + h / 16
    step = h / 32
    g = np.arange(-0.5 - 2 * h, 0.5 + 2 * h, step)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dx = np.maximum(np.abs(pts[:, 0]) - 0.5, 0)
    dy = np.maximum(np.abs(pts[:, 1]) - 0.5, 0)
    dist = np.hypot(dx, dy)
    # membership may only disagree within the polygonisation band around the true boundary
    differ = (dist <= h) != kh.contains_interior(pts)
    assert np.all(np.abs(dist[differ] - h) <= h / 16 + step)


def test_thicken_contains_k_and_within_neighbourhood():
    h = 0.08
    for k in (unit_square(), SEGMENT, L_SHAPE):
        kh = thicken(k, h)
        samples = np.concatenate([np.linspace(a, b, 30) for a, b in k.segments()])
        inside = kh.contains_interior(samples) | (distance_to_set(kh, samples)[0] < 1e-9)
        assert np.all(inside)
        bnd = np.concatenate([np.linspace(a, b, 30) for a, b in kh.segments()])
        assert np.max(distance_to_set(k, bnd)[0]) <= math.sqrt(2) * h * (1 + 1e-6)


def test_thicken_nesting_monotone():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.8, 0.8, (2000, 2))
    for h1, h2 in ((0.02, 0.05), (0.05, 0.1), (0.1, 0.2)):
        a = in_thickening(L_SHAPE, pts, h1)
        b = in_thickening(L_SHAPE, pts, h2)
        assert np.all(b[a])


def test_thicken_too_large():
    close = Scatterer((), (PolyChain(np.array([[0.0, 0.0], [1.0, 0.0]]), False), PolyChain(np.array([[0.0, 0.1], [1.0, 0.1]]), False)), 2.0)
    with pytest.raises(GeometryError, match="thickening self-intersects"):
        thicken(close, 0.06)


def test_thickened_output_exterior_connected():
    for k in (SEGMENT, L_SHAPE, unit_square()):
        kh = thicken(k, 0.05)
        assert exterior_connected(kh, kh.bounding_radius, 0.01)


def test_thicken_l_shape_single_loop():
    kh = thicken(L_SHAPE, 0.0125)
    assert len(kh.loops) == 1
    assert kh.loops[0].signed_area == pytest.approx(2 * 0.0125 * 2.025, rel=0.01)


# -- pseudo-distance and Euclidean distance ---------------------------------------------


def test_euclidean_distance_examples():
    assert euclidean_distance_to(SEGMENT, (0.3, 0.0)) == 0.0
    assert euclidean_distance_to(SEGMENT, (0.5, 0.2)) == pytest.approx(0.2)
    assert euclidean_distance_to(SEGMENT, (2.0, 0.0)) == pytest.approx(1.0)


def test_pseudo_distance_examples():
    assert pseudo_distance(SEGMENT, (0.4, 0.0), 1.0, 1e-9) == 0.0
    assert pseudo_distance(SEGMENT, (0.5, 0.2), 1.0, 1e-9) == pytest.approx(0.2, abs=1e-8)
    assert pseudo_distance(SEGMENT, (1.3, 0.0), 1.0, 1e-9) == pytest.approx(0.3, abs=1e-8)


def test_pseudo_distance_beyond_h_max():
    assert pseudo_distance(SEGMENT, (3.0, 0.0), 1.0, 1e-9) == pytest.approx(2.0)


def test_pseudo_distance_zero_iff_in_k():
    sq = unit_square()
    assert pseudo_distance(sq, (0.1, 0.1), 0.5, 1e-9) == 0.0
    assert pseudo_distance(sq, (0.51, 0.0), 0.5, 1e-9) > 0.0


def test_gauge_matches_bisection():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.0, 1.0, (40, 2))
    g = thickening_gauge(L_SHAPE, pts)
    for p, gv in zip(pts, g):
        if gv < 0.6:
            assert pseudo_distance(L_SHAPE, p, 0.6, 1e-10) == pytest.approx(gv, abs=1e-9)


def test_sandwich_ratio():
    rng = np.random.default_rng(5)
    for k in (SEGMENT, L_SHAPE, unit_square()):
        pts = rng.uniform(-1.0, 1.5, (4000, 2))
        d = distance_to_set(k, pts)[0]
        sel = (d > 1e-6) & (d <= 0.3)
        pts, d = pts[sel][:1000], d[sel][:1000]
        ratio = thickening_gauge(k, pts) / d
        a, b = float(ratio.min()), float(ratio.max())
        assert 0 < a <= 1 <= b < math.inf
        assert a >= 1 / math.sqrt(2) - 1e-12 and b <= 1 + 1e-12


# -- admissibility ------------------------------------------------------------------


def test_exterior_connected_examples():
    assert exterior_connected(polygon(regular_polygon(7, 0.8)), 1.0, 0.02)
    assert exterior_connected(SEGMENT, 2.0, 0.02)
    ring = Scatterer(
        (PolyChain(regular_polygon(64, 1.0), True), PolyChain(regular_polygon(64, 0.8), True), PolyChain(regular_polygon(32, 0.3), True)),
        (),
        1.0,
    )
    assert not exterior_connected(ring, 1.0, 0.02)


def test_exterior_connected_coarse_grid():
    near = Scatterer((PolyChain(regular_polygon(4, 0.3, (-0.5, 0)), True), PolyChain(regular_polygon(4, 0.3, (0.2, 0)), True)), (), 1.0)
    with pytest.raises(GeometryError, match="resolution too coarse"):
        exterior_connected(near, 1.0, 0.1)


def test_assumption_b_examples():
    r = assumption_b_check(unit_square(), 1, 4.0)
    assert (r.components, r.perimeter, r.passed) == (1, 4.0, True)
    two = Scatterer(unit_square((-1, 0)).loops + unit_square((1, 0)).loops, (), 2.0)
    r2 = assumption_b_check(two)
    assert (r2.components, r2.perimeter) == (2, pytest.approx(8.0))
    r3 = assumption_b_check(thicken(SEGMENT, 0.1))
    assert r3.components == 1 and r3.perimeter == pytest.approx(2.8, abs=1e-12)
    assert not assumption_b_check(two, max_components=1).passed


def test_boundary_components_merges_touching():
    s = Scatterer((), (PolyChain(np.array([[0.0, 0.0], [1.0, 0.0]]), False), PolyChain(np.array([[1.0, 0.0], [1.0, 1.0]]), False)), 2.0)
    assert boundary_components(s) == 1


def test_feature_separation_polygon():
    assert feature_separation(unit_square()) == pytest.approx(1.0)
    assert feature_separation(disk(1.0, 64), include_edges=False) == math.inf


# -- JSON ------------------------------------------------------------------------


def test_json_round_trip_bit_exact():
    rng = np.random.default_rng(2)
    v = regular_polygon(9, 0.7) + rng.normal(0, 0.01, (9, 2))
    k = Scatterer(polygon(v, 1.3).loops, (PolyChain(np.array([[1.0, 1.0 / 3.0], [1.1, 0.2]]), False),), 1.3)
    text = dumps_geometry(k)
    back = loads_geometry(text)
    assert back == k
    assert dumps_geometry(back) == text


def test_json_malformed():
    with pytest.raises(json.JSONDecodeError):
        loads_geometry('{"bounding_radius": 1, "loops": [}')
    with pytest.raises(GeometryError):
        loads_geometry('{"loops": []}')
