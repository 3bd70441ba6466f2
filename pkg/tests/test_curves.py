"""Curve realization: splitting, normals, Bezier, level extraction, exchange."""

import numpy as np
import pytest

from artifact.curves import (
    Curve,
    GridField,
    Partition,
    arc_length,
    bezier,
    curve_from_json,
    curve_to_json,
    from_document,
    level_curves,
    level_set,
    orient,
    polyline,
    realize,
    signed_area,
    to_document,
)
from artifact.errors import ConfigError, DegenerateCurve, EmptyCurve, ParseError
from artifact.simulate import get_pattern


def _point_in_polygon(pt, poly):
    # ray casting; poly closed (first == last)
    x, y = pt
    inside = False
    for (x1, y1), (x2, y2) in zip(poly[:-1], poly[1:]):
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if xc > x:
                inside = not inside
    return inside


def test_unit_segment_split():
    p = realize(polyline([[0, 0], [1, 0]]), max_norm=0.25)
    assert len(p.segments) == 4
    for s in p.segments:
        assert s.length == pytest.approx(0.25, abs=1e-15)
        np.testing.assert_allclose(s.direction, [1, 0])
        np.testing.assert_allclose(s.normal, [0, -1])
    assert arc_length(p) == pytest.approx(1.0, abs=1e-15)
    assert p.norm == pytest.approx(0.25)


def test_closed_square():
    pts = [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]
    p = realize(polyline(pts, closed=True), max_norm=10.0)
    assert len(p.segments) == 4
    assert arc_length(p) == pytest.approx(4.0)
    assert p.closed
    # counterclockwise square: fixed clockwise rotation gives outward normals
    for s in p.segments:
        mid = 0.5 * (s.start + s.end)
        assert np.dot(s.normal, mid - np.array([0.5, 0.5])) > 0
        det = s.direction[0] * s.normal[1] - s.direction[1] * s.normal[0]
        assert det == pytest.approx(-1.0, abs=1e-12)


def test_chaining_is_exact():
    rng = np.random.default_rng(2)
    pts = rng.uniform(size=(7, 2))
    p = realize(polyline(pts), max_norm=0.037)
    for a, b in zip(p.segments[:-1], p.segments[1:]):
        assert np.array_equal(a.end, b.start)  # no tolerance
    assert p.norm <= 0.037 + 1e-15


def test_refinement_halves_norm_keeps_length():
    pts = [[0.1, 0.2], [0.5, 0.9], [0.8, 0.3]]
    c = polyline(pts)
    p1 = realize(c, 0.2)
    p2 = realize(c, 0.1)
    assert p2.norm <= 0.5 * p1.norm + 1e-15
    assert p2.total_length == pytest.approx(p1.total_length, abs=1e-12)


def test_bezier_quarter_circle():
    k = 4.0 / 3.0 * (np.sqrt(2.0) - 1.0)
    ctrl = [[1, 0], [1, k], [k, 1], [0, 1]]
    p = realize(bezier(ctrl, resolution=1000), max_norm=0.01)
    assert arc_length(p) == pytest.approx(np.pi / 2, abs=1e-2)
    # all points near the unit circle
    v = p.vertices()
    assert np.max(np.abs(np.hypot(v[:, 0], v[:, 1]) - 1.0)) < 5e-4


def test_bezier_resplit_keeps_length():
    ctrl = [[0, 0], [0.3, 1.2], [0.9, -0.4], [1, 1]]
    c = bezier(ctrl, resolution=500)
    p1 = realize(c, 0.05)
    p2 = realize(c, 0.025)
    assert abs(p1.total_length - p2.total_length) <= 1e-9


def test_degenerate_and_empty():
    with pytest.raises(EmptyCurve):
        polyline([[0, 0]])
    with pytest.raises(DegenerateCurve):
        realize(polyline([[0.5, 0.5], [0.5, 0.5]]), 0.1)
    with pytest.raises(ConfigError):
        realize(polyline([[0, 0], [1, 1]]), 0.0)


def test_level_set_peak_contour():
    pat = get_pattern(1)
    ax = np.linspace(0.0, 1.0, 201)
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    vals = pat.mean(np.stack([gx, gy], axis=-1))
    field = GridField(ax, ax, vals)
    comps = level_curves(field, 18.0)
    assert all(c.level == 18.0 for c in comps)
    top = comps[0]
    assert top.closed
    c = realize(level_set(field, 18.0), max_norm=4e-3)
    assert c.norm <= 4e-3
    # encloses one of the interior peaks of the surface (value 20 > 18)
    verts = c.vertices()
    peaks = [np.array([1 / 6, 2 / 3]), np.array([5 / 6, 2 / 3])]
    assert any(_point_in_polygon(pk, verts) for pk in peaks)
    centroid = verts[:-1].mean(axis=0)
    assert pat.mean(centroid) > 18.0


def test_level_set_not_crossed():
    field = GridField([0, 1], [0, 1], np.zeros((2, 2)))
    with pytest.raises(EmptyCurve):
        level_curves(field, 5.0)


def test_level_set_hull_clipping():
    # plane z = x crossed at 0.5; hull restricted to lower-left triangle
    ax = np.linspace(0.0, 1.0, 41)
    vals = np.broadcast_to(ax[:, None], (41, 41)).copy()
    field = GridField(ax, ax, vals)
    hull = np.array([[0, 0], [1, 0], [0, 1]])
    comps = level_curves(field, 0.5, hull=hull)
    pts = np.vstack([c.points for c in comps])
    assert np.all(pts[:, 0] + pts[:, 1] <= 1.0 + 0.06)  # inside the triangle
    full = level_curves(field, 0.5)
    assert full[0].points[:, 1].max() > 0.9  # unclipped runs the whole band


def test_saddle_cell_is_deterministic():
    field = GridField([0, 1], [0, 1], np.array([[1.0, -1.0], [-1.0, 1.0]]))
    a = level_curves(field, 0.0)
    b = level_curves(field, 0.0)
    assert len(a) == 2
    for ca, cb in zip(a, b):
        np.testing.assert_array_equal(ca.points, cb.points)


def test_marching_squares_points_lie_on_level():
    pat = get_pattern(2)
    ax = np.linspace(0.0, 1.0, 101)
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    vals = pat.mean(np.stack([gx, gy], axis=-1))
    field = GridField(ax, ax, vals)
    for comp in level_curves(field, 3.0)[:3]:
        # linear interpolation error on a smooth field at h=0.01
        assert np.max(np.abs(pat.mean(comp.points) - 3.0)) < 0.05


def test_orientation_helpers():
    ccw = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    assert signed_area(ccw) == pytest.approx(1.0)
    cw = orient(ccw, clockwise=True)
    assert signed_area(cw) == pytest.approx(-1.0)
    same = orient(ccw, clockwise=False)
    np.testing.assert_array_equal(same, ccw)
    # clockwise closed square: normals point inward
    p = realize(polyline(cw, closed=True), max_norm=10)
    for s in p.segments:
        mid = 0.5 * (s.start + s.end)
        assert np.dot(s.normal, mid - np.array([0.5, 0.5])) < 0


def test_exchange_round_trip():
    c = polyline([[0.1, 0.2], [0.4, 0.9], [0.8, 0.8]], closed=False)
    doc = to_document(c)
    assert set(doc) == {"kind", "points", "closed", "level"}
    c2 = from_document(doc)
    assert c2.kind == "polyline" and c2.closed is False
    np.testing.assert_array_equal(c2.points, c.points)
    c3 = curve_from_json(curve_to_json(c))
    np.testing.assert_array_equal(c3.points, c.points)

    b = bezier([[0, 0], [1, 0], [1, 1]], resolution=100)
    b2 = from_document(to_document(b))
    assert b2.kind == "bezier"

    with pytest.raises(ParseError):
        curve_from_json("{not json")
    with pytest.raises(ParseError):
        from_document({"kind": "spiral", "points": [[0, 0], [1, 1]]})
    with pytest.raises(ParseError):
        from_document({"points": [[0, 0], [1, 1]]})


def test_levelset_document_realizes_as_traced():
    doc = {
        "kind": "levelset",
        "points": [[0.0, 0.0], [0.5, 0.1], [1.0, 0.0]],
        "closed": False,
        "level": 7.0,
    }
    c = from_document(doc)
    p = realize(c, max_norm=0.05)
    assert isinstance(p, Partition)
    assert p.total_length == pytest.approx(
        2 * np.hypot(0.5, 0.1), rel=1e-12
    )


def test_closed_polyline_invariant():
    c = polyline([[0, 0], [1, 0], [0.5, 1]], closed=True)
    np.testing.assert_array_equal(c.points[0], c.points[-1])
    assert c.points.shape[0] == 4
