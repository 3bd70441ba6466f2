"""Curves along which wombling measures are computed, and their rectilinear
partitions.

A Partition is an ordered chain of straight segments. Each segment carries
its unit tangent u and the normal obtained by rotating u clockwise:
u_perp = (u2, -u1). For a counterclockwise closed curve these normals point
outward; orientation is never guessed, use `orient` to fix it explicitly.

Level curves are traced by marching squares with linear interpolation on the
grid edges; ambiguous saddle cells are resolved by the cell-center average.
"""

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.spatial import Delaunay

from .errors import ConfigError, DegenerateCurve, EmptyCurve, ParseError

_EPS_LEN = 1e-12

KINDS = ("polyline", "bezier", "levelset")


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    end: np.ndarray
    length: float
    direction: np.ndarray
    normal: np.ndarray  # clockwise rotation of direction


@dataclass
class GridField:
    """Rectangular grid samples: values[i, j] is the field at (x[i], y[j])."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.ndim != 1 or self.y.ndim != 1:
            raise ConfigError("grid axes must be 1-D")
        if self.values.shape != (self.x.size, self.y.size):
            raise ConfigError("values must be (len(x), len(y))")
        if np.any(np.diff(self.x) <= 0) or np.any(np.diff(self.y) <= 0):
            raise ConfigError("grid axes must be strictly increasing")


@dataclass
class Curve:
    kind: str
    points: np.ndarray | None = None
    closed: bool = False
    level: float | None = None
    resolution: int = 1000
    field: GridField | None = None
    hull: np.ndarray | None = None  # clip level curves to hull of these points

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown curve kind {self.kind!r}")
        if self.points is not None:
            self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
            if not np.all(np.isfinite(self.points)):
                raise ConfigError("curve points must be finite")
        if self.kind in ("polyline", "bezier"):
            if self.points is None or self.points.shape[0] < 2:
                raise EmptyCurve("need at least two points")
        if self.kind == "levelset":
            if self.level is None:
                raise ConfigError("level sets need a level")
            if self.field is None and self.points is None:
                raise ConfigError("level sets need a grid field or traced points")
        if (
            self.kind == "polyline"
            and self.closed
            and not np.array_equal(self.points[0], self.points[-1])
        ):
            self.points = np.vstack([self.points, self.points[0]])


def polyline(points, closed=False) -> Curve:
    return Curve(kind="polyline", points=points, closed=closed)


def bezier(control_points, resolution=1000, closed=False) -> Curve:
    if resolution < 1:
        raise ConfigError("resolution must be >= 1")
    return Curve(
        kind="bezier", points=control_points, resolution=resolution, closed=closed
    )


def level_set(field: GridField, level: float, hull=None) -> Curve:
    hull = None if hull is None else np.asarray(hull, dtype=float).reshape(-1, 2)
    return Curve(kind="levelset", level=float(level), field=field, hull=hull)


@dataclass
class Partition:
    segments: list = dataclass_field(default_factory=list)

    @property
    def norm(self) -> float:
        return max(s.length for s in self.segments)

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    @property
    def closed(self) -> bool:
        return bool(
            np.array_equal(self.segments[0].start, self.segments[-1].end)
        )

    def vertices(self) -> np.ndarray:
        return np.vstack(
            [s.start for s in self.segments] + [self.segments[-1].end]
        )


def _partition_from_vertices(verts) -> Partition:
    segs = []
    for a, b in zip(verts[:-1], verts[1:]):
        d = b - a
        length = float(np.hypot(d[0], d[1]))
        if length <= _EPS_LEN:
            continue
        u = d / length
        segs.append(
            Segment(
                start=a,
                end=b,
                length=length,
                direction=u,
                normal=np.array([u[1], -u[0]]),
            )
        )
    if not segs:
        raise DegenerateCurve("all points coincide")
    return Partition(segments=segs)


def _refine(verts, max_norm) -> np.ndarray:
    # power-of-two splits so halving max_norm exactly halves the norm
    out = [verts[0]]
    for a, b in zip(verts[:-1], verts[1:]):
        length = float(np.linalg.norm(b - a))
        if length <= _EPS_LEN:
            continue
        k = 1
        if length > max_norm:
            k = 2 ** int(np.ceil(np.log2(length / max_norm) - 1e-12))
        for m in range(1, k):
            out.append(a + (b - a) * (m / k))
        out.append(b)
    return np.array(out)


def _de_casteljau(ctrl, ts):
    pts = np.repeat(ctrl[:, None, :], ts.size, axis=1)  # (m+1, T, 2)
    t = ts[None, :, None]
    while pts.shape[0] > 1:
        pts = (1.0 - t[: pts.shape[0] - 1]) * pts[:-1] + t[: pts.shape[0] - 1] * pts[1:]
    return pts[0]


def realize(curve: Curve, max_norm: float) -> Partition:
    """Rectilinear partition of the curve with every segment length <= max_norm."""
    if max_norm <= 0:
        raise ConfigError("max_norm must be positive")
    if curve.kind == "polyline" or (curve.kind == "levelset" and curve.field is None):
        verts = curve.points
    elif curve.kind == "bezier":
        ts = np.linspace(0.0, 1.0, curve.resolution + 1)
        verts = _de_casteljau(curve.points, ts)
        if curve.closed and not np.array_equal(verts[0], verts[-1]):
            verts = np.vstack([verts, verts[0]])
    else:
        components = level_curves(curve.field, curve.level, hull=curve.hull)
        verts = components[0].points
    if verts is None or verts.shape[0] < 2:
        raise EmptyCurve("need at least two points")
    return _partition_from_vertices(_refine(verts, max_norm))


def arc_length(p: Partition) -> float:
    return p.total_length


def signed_area(points) -> float:
    """Shoelace area of a closed polygon (positive = counterclockwise)."""
    pts = np.asarray(points, dtype=float)
    if not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[0]])
    x, y = pts[:-1, 0], pts[:-1, 1]
    x1, y1 = pts[1:, 0], pts[1:, 1]
    return 0.5 * float(np.sum(x * y1 - x1 * y))


def orient(points, clockwise=True) -> np.ndarray:
    """Return the polygon's points ordered the requested way.

    Clockwise closed curves have inward-pointing normals under the fixed
    (u2, -u1) rotation rule; counterclockwise ones have outward normals.
    """
    pts = np.asarray(points, dtype=float)
    area = signed_area(pts)
    if (area > 0 and clockwise) or (area < 0 and not clockwise):
        return pts[::-1].copy()
    return pts.copy()


# ---------------------------------------------------------------------------
# marching squares

# edge ids within a cell: 0 bottom (A-B), 1 right (B-C), 2 top (C-D), 3 left (D-A)
_CASES = {
    0: [],
    1: [(3, 0)],
    2: [(0, 1)],
    3: [(3, 1)],
    4: [(1, 2)],
    6: [(0, 2)],
    7: [(3, 2)],
    8: [(2, 3)],
    9: [(0, 2)],
    11: [(1, 2)],
    12: [(1, 3)],
    13: [(0, 1)],
    14: [(3, 0)],
    15: [],
}


def _cell_segments(xa, xb, ya, yb, va, vb, vc, vd, level):
    above = (va > level, vb > level, vc > level, vd > level)
    case = above[0] + 2 * above[1] + 4 * above[2] + 8 * above[3]
    if case in (5, 10):
        center_above = 0.25 * (va + vb + vc + vd) > level
        if case == 5:  # A and C above
            pairs = [(0, 1), (2, 3)] if center_above else [(3, 0), (1, 2)]
        else:  # B and D above
            pairs = [(0, 3), (1, 2)] if center_above else [(0, 1), (2, 3)]
    else:
        pairs = _CASES[case]

    def cross(edge):
        if edge == 0:
            p, q, vp, vq = (xa, ya), (xb, ya), va, vb
        elif edge == 1:
            p, q, vp, vq = (xb, ya), (xb, yb), vb, vc
        elif edge == 2:
            p, q, vp, vq = (xb, yb), (xa, yb), vc, vd
        else:
            p, q, vp, vq = (xa, yb), (xa, ya), vd, va
        t = (level - vp) / (vq - vp)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    return [(cross(e1), cross(e2)) for e1, e2 in pairs]


def _chain(segments, scale):
    """Join raw segments into components by shared endpoints (quantized)."""
    q = 1e-9 * max(scale, 1.0)

    def key(pt):
        return (round(pt[0] / q), round(pt[1] / q))

    adj = {}
    for i, (a, b) in enumerate(segments):
        adj.setdefault(key(a), []).append(i)
        adj.setdefault(key(b), []).append(i)

    used = [False] * len(segments)
    comps = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        for pos in (1, 0):  # extend forward from b, then backward from a
            while True:
                end = chain[-1] if pos else chain[0]
                nxt = next((j for j in adj.get(key(end), []) if not used[j]), None)
                if nxt is None:
                    break
                used[nxt] = True
                c, d = segments[nxt]
                point = d if key(c) == key(end) else c
                if pos:
                    chain.append(point)
                else:
                    chain.insert(0, point)
            if key(chain[0]) == key(chain[-1]):
                chain[-1] = chain[0]  # close exactly
                break
        comps.append(np.array(chain))
    return comps


def level_curves(field: GridField, level: float, hull=None) -> list:
    """All contour components of the field at the level, longest first.

    When hull points are given, grid nodes outside their convex hull are
    masked out, so contours stop at the hull boundary.
    """
    vals = field.values
    if hull is not None:
        hull = np.asarray(hull, dtype=float).reshape(-1, 2)
        tri = Delaunay(hull)
        gx, gy = np.meshgrid(field.x, field.y, indexing="ij")
        inside = tri.find_simplex(np.column_stack([gx.ravel(), gy.ravel()])) >= 0
        vals = np.where(inside.reshape(vals.shape), vals, np.nan)

    raw = []
    for i in range(field.x.size - 1):
        for j in range(field.y.size - 1):
            corners = (vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1])
            if any(np.isnan(c) for c in corners):
                continue
            raw.extend(
                _cell_segments(
                    field.x[i], field.x[i + 1], field.y[j], field.y[j + 1],
                    *corners, level,
                )
            )
    if not raw:
        raise EmptyCurve(f"level {level} is not crossed")
    scale = max(
        field.x[-1] - field.x[0], field.y[-1] - field.y[0]
    )
    comps = _chain(raw, scale)

    def length(pts):
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    comps = [c for c in comps if length(c) > _EPS_LEN and c.shape[0] >= 2]
    if not comps:
        raise EmptyCurve(f"level {level} yields no usable contour")
    comps.sort(key=length, reverse=True)
    out = []
    for c in comps:
        closed = bool(np.array_equal(c[0], c[-1]))
        out.append(
            Curve(kind="levelset", points=c, closed=closed, level=float(level))
        )
    return out


# ---------------------------------------------------------------------------
# exchange document: {kind, points, closed, level}

def to_document(curve: Curve) -> dict:
    if curve.points is None:
        raise ConfigError("trace the level set before exporting it")
    return {
        "kind": curve.kind,
        "points": [[float(a), float(b)] for a, b in curve.points],
        "closed": bool(curve.closed),
        "level": None if curve.level is None else float(curve.level),
    }


def from_document(doc: dict) -> Curve:
    try:
        kind = doc["kind"]
        points = doc["points"]
        closed = bool(doc.get("closed", False))
        level = doc.get("level")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad curve document: {exc}") from exc
    if kind not in KINDS:
        raise ParseError(f"bad curve document: unknown kind {kind!r}")
    try:
        return Curve(
            kind=kind,
            points=np.asarray(points, dtype=float).reshape(-1, 2),
            closed=closed,
            level=None if level is None else float(level),
        )
    except (ValueError, ConfigError, EmptyCurve) as exc:
        raise ParseError(f"bad curve document: {exc}") from exc


def curve_to_json(curve: Curve) -> str:
    return json.dumps(to_document(curve))


def curve_from_json(text: str) -> Curve:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad curve JSON: {exc}") from exc
    return from_document(doc)
