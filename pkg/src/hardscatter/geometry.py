"""Piecewise-linear scatterers: distances, thickenings and admissibility checks.

A scatterer is a compact set made of closed polygonal loops (obstacle
boundaries, interiors included by the even-odd rule) and open polylines
(screens).  The thickening ``K_h`` is the union of

* ``K`` itself,
* per-edge rectangles of normal offsets ``|t| <= h`` over the edge,
* discs of radius ``h`` at loop vertices and interior screen vertices
  (circular-arc joins where the normal field jumps),
* rectangular end-caps ``s in [0, h], |t| <= h`` beyond each screen endpoint.

Within ``K_h`` the pseudo-distance ``min{h : x in K_h}`` therefore has the
closed form computed by :func:`thickening_gauge`; :func:`pseudo_distance`
obtains it independently by bisection on the membership predicate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

SNAP_RELATIVE = 1e-9
_CHUNK = 1 << 21


class GeometryError(ValueError):
    """Invalid scatterer geometry or unsatisfiable geometric request."""


# ---------------------------------------------------------------------------
# primitive kernels
# ---------------------------------------------------------------------------


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected points of shape (n, 2), got {pts.shape}")
    return pts


def _chunks(n_rows: int, n_cols: int) -> Iterable[slice]:
    step = max(1, _CHUNK // max(1, n_cols))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def point_segment_distance(pts: np.ndarray, seg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum distance from each point to a set of segments.

    Returns ``(distance, closest_point)`` per point.  ``seg`` has shape
    ``(E, 2, 2)``.
    """
    pts = _as_points(pts)
    n = len(pts)
    dist = np.full(n, np.inf)
    closest = np.full((n, 2), np.nan)
    if len(seg) == 0 or n == 0:
        return dist, closest
    a = seg[:, 0, :]
    ab = seg[:, 1, :] - a
    ll = np.einsum("ij,ij->i", ab, ab)
    ll = np.where(ll > 0, ll, 1.0)
    for sl in _chunks(n, len(seg)):
        p = pts[sl, None, :]
        ap = p - a[None, :, :]
        s = np.clip(np.einsum("pij,ij->pi", ap, ab) / ll[None, :], 0.0, 1.0)
        foot = a[None, :, :] + s[:, :, None] * ab[None, :, :]
        d2 = np.sum((p - foot) ** 2, axis=2)
        idx = np.argmin(d2, axis=1)
        rows = np.arange(d2.shape[0])
        dist[sl] = np.sqrt(d2[rows, idx])
        closest[sl] = foot[rows, idx]
    return dist, closest


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def segment_pair_distance(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Pairwise distances between two segment sets, shape ``(len(s1), len(s2))``."""
    out = np.empty((len(s1), len(s2)))
    if out.size == 0:
        return out
    for sl in _chunks(len(s1), len(s2)):
        a = s1[sl, None, 0, :]
        b = s1[sl, None, 1, :]
        c = s2[None, :, 0, :]
        d = s2[None, :, 1, :]
        cross = (
            (np.sign(_orient(a, b, c)) * np.sign(_orient(a, b, d)) < 0)
            & (np.sign(_orient(c, d, a)) * np.sign(_orient(c, d, b)) < 0)
        )
        cand = []
        for p, (q0, q1) in ((a, (c, d)), (b, (c, d)), (c, (a, b)), (d, (a, b))):
            qq = q1 - q0
            ll = np.sum(qq * qq, axis=-1)
            ll = np.where(ll > 0, ll, 1.0)
            t = np.clip(np.sum((p - q0) * qq, axis=-1) / ll, 0.0, 1.0)
            foot = q0 + t[..., None] * qq
            cand.append(np.sqrt(np.sum((p - foot) ** 2, axis=-1)))
        dmin = np.minimum.reduce(np.broadcast_arrays(*cand))
        out[sl] = np.where(cross, 0.0, dmin)
    return out


def _loop_edges(v: np.ndarray) -> np.ndarray:
    return np.stack([v, np.roll(v, -1, axis=0)], axis=1)


def _open_edges(v: np.ndarray) -> np.ndarray:
    return np.stack([v[:-1], v[1:]], axis=1)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_loop(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Crossing-number test of points against one closed polygon."""
    pts = _as_points(pts)
    inside = np.zeros(len(pts), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for sl in _chunks(len(pts), len(v)):
        px = pts[sl, 0, None]
        py = pts[sl, 1, None]
        straddle = (y0[None, :] > py) != (y1[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        hits = straddle & (px < xc)
        inside[sl] = (np.count_nonzero(hits, axis=1) % 2) == 1
    return inside


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolyChain:
    """Polygonal chain; closed chains are stored counterclockwise."""

    vertices: np.ndarray
    closed: bool

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices must be a list of [x, y] pairs")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertex coordinates must be finite")
        need = 3 if self.closed else 2
        if len(v) < need:
            raise GeometryError(
                f"{'closed' if self.closed else 'open'} chain needs at least {need} vertices"
            )
        if self.closed and _signed_area(v) < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def edges(self) -> np.ndarray:
        return _loop_edges(self.vertices) if self.closed else _open_edges(self.vertices)

    @property
    def length(self) -> float:
        e = self.edges
        return float(np.sum(np.linalg.norm(e[:, 1] - e[:, 0], axis=1)))

    @property
    def signed_area(self) -> float:
        return _signed_area(self.vertices) if self.closed else 0.0

    def __eq__(self, other):
        return (
            isinstance(other, PolyChain)
            and self.closed == other.closed
            and self.vertices.shape == other.vertices.shape
            and bool(np.array_equal(self.vertices, other.vertices))
        )

    def __hash__(self):
        return hash((self.closed, self.vertices.tobytes()))


@dataclass(frozen=True, eq=False)
class Scatterer:
    """Compact set of obstacle loops and screen polylines inside ``B_R``."""

    loops: tuple[PolyChain, ...] = ()
    screens: tuple[PolyChain, ...] = ()
    bounding_radius: float = 1.0

    def __post_init__(self):
        loops = tuple(c if isinstance(c, PolyChain) else PolyChain(c, True) for c in self.loops)
        screens = tuple(c if isinstance(c, PolyChain) else PolyChain(c, False) for c in self.screens)
        if any(not c.closed for c in loops) or any(c.closed for c in screens):
            raise GeometryError("loops must be closed and screens open")
        r = float(self.bounding_radius)
        if not (r > 0 and math.isfinite(r)):
            raise GeometryError("bounding_radius must be positive")
        object.__setattr__(self, "loops", loops)
        object.__setattr__(self, "screens", screens)
        object.__setattr__(self, "bounding_radius", r)
        if self.vertices.size and np.max(np.linalg.norm(self.vertices, axis=1)) > r * (1 + 1e-12):
            raise GeometryError("scatterer vertex outside the bounding disk")

    # -- views ---------------------------------------------------------------
    @property
    def chains(self) -> tuple[PolyChain, ...]:
        return self.loops + self.screens

    @property
    def is_empty(self) -> bool:
        return not self.chains

    @property
    def vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate([c.vertices for c in self.chains])

    @property
    def snap_tolerance(self) -> float:
        return SNAP_RELATIVE * self.bounding_radius

    def segments(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2, 2))
        return np.concatenate([c.edges for c in self.chains])

    def loop_segments(self) -> np.ndarray:
        if not self.loops:
            return np.zeros((0, 2, 2))
        return np.concatenate([c.edges for c in self.loops])

    def contains_interior(self, pts) -> np.ndarray:
        """Even-odd membership in the union of obstacle regions."""
        pts = _as_points(pts)
        parity = np.zeros(len(pts), dtype=bool)
        for c in self.loops:
            parity ^= points_in_loop(pts, c.vertices)
        return parity

    @property
    def obstacle_area(self) -> float:
        """Area of the obstacle part (signed-area sum respects even-odd nesting
        only for non-nested loops)."""
        return float(sum(abs(c.signed_area) for c in self.loops))

    def validate(self) -> "Scatterer":
        """Full consistency check; returns self for chaining."""
        tol = self.snap_tolerance
        for c in self.chains:
            e = c.edges
            if np.min(np.linalg.norm(e[:, 1] - e[:, 0], axis=1)) <= tol:
                raise GeometryError("consecutive vertices closer than snap tolerance")
            d = segment_pair_distance(e, e)
            n = len(e)
            i, j = np.triu_indices(n, k=2)
            keep = ~(c.closed & (i == 0) & (j == n - 1))
            if np.any(d[i[keep], j[keep]] <= tol):
                raise GeometryError("polygonal chain self-intersects")
        chains = self.chains
        for a in range(len(chains)):
            for b in range(a + 1, len(chains)):
                if np.min(segment_pair_distance(chains[a].edges, chains[b].edges)) <= tol:
                    raise GeometryError("scatterer components touch or cross")
        return self

    def __eq__(self, other):
        return (
            isinstance(other, Scatterer)
            and self.bounding_radius == other.bounding_radius
            and self.loops == other.loops
            and self.screens == other.screens
        )

    def __hash__(self):
        return hash((self.loops, self.screens, self.bounding_radius))

    # -- transforms ------------------------------------------------------------
    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0), radius: float | None = None) -> "Scatterer":
        c, s = math.cos(rotation), math.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        off = np.asarray(shift, dtype=float)

        def tr(v):
            return v @ rot.T + off

        return Scatterer(
            tuple(PolyChain(tr(p.vertices), True) for p in self.loops),
            tuple(PolyChain(tr(p.vertices), False) for p in self.screens),
            self.bounding_radius if radius is None else radius,
        )

    def refined(self, max_edge: float) -> "Scatterer":
        """Same set with every edge split into pieces no longer than ``max_edge``."""
        def split(chain: PolyChain) -> PolyChain:
            out = []
            for a, b in chain.edges:
                m = max(1, int(math.ceil(np.linalg.norm(b - a) / max_edge - 1e-12)))
                t = np.arange(m)[:, None] / m
                out.append(a + t * (b - a))
            if not chain.closed:
                out.append(chain.vertices[-1:])
            return PolyChain(np.concatenate(out), chain.closed)

        return Scatterer(
            tuple(split(c) for c in self.loops),
            tuple(split(c) for c in self.screens),
            self.bounding_radius,
        )


EMPTY_RADIUS = 1.0


def empty_scatterer(bounding_radius: float = EMPTY_RADIUS) -> Scatterer:
    return Scatterer((), (), bounding_radius)


# ---------------------------------------------------------------------------
# shapes used throughout tests and experiments
# ---------------------------------------------------------------------------


def polygon(vertices, bounding_radius: float | None = None) -> Scatterer:
    v = np.asarray(vertices, dtype=float)
    r = float(np.max(np.linalg.norm(v, axis=1))) if bounding_radius is None else bounding_radius
    return Scatterer((PolyChain(v, True),), (), r)


def polyline(vertices, bounding_radius: float | None = None) -> Scatterer:
    v = np.asarray(vertices, dtype=float)
    r = float(np.max(np.linalg.norm(v, axis=1))) if bounding_radius is None else bounding_radius
    return Scatterer((), (PolyChain(v, False),), r)


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def unit_square(center=(0.0, 0.0)) -> Scatterer:
    cx, cy = center
    v = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]) + [cx, cy]
    return polygon(v)


def disk(radius: float = 1.0, n_edges: int = 512) -> Scatterer:
    return polygon(regular_polygon(n_edges, radius), bounding_radius=radius)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def distance_to_set(k: Scatterer, pts) -> tuple[np.ndarray, np.ndarray]:
    """Exact distance to ``K`` (obstacle interiors included) and nearest points."""
    pts = _as_points(pts)
    if k.is_empty:
        raise GeometryError("distance to an empty set is undefined")
    d, foot = point_segment_distance(pts, k.segments())
    if k.loops:
        inside = k.contains_interior(pts)
        d[inside] = 0.0
        foot[inside] = pts[inside]
    return d, foot


def euclidean_distance_to(k: Scatterer, x) -> float:
    """``dist(x, K)`` for a single point."""
    return float(distance_to_set(k, x)[0][0])


@dataclass(frozen=True)
class HausdorffResult:
    distance: float
    witness_a: tuple[float, float]
    witness_b: tuple[float, float]
    sampling_resolution: float


def sample_set(k: Scatterer, resolution: float) -> np.ndarray:
    """Points of ``K`` covering it at spacing at most ``resolution``.

    Boundary edges are subdivided; obstacle interiors get a square lattice.
    """
    parts = []
    for a, b in k.segments():
        m = max(1, int(math.ceil(np.linalg.norm(b - a) / resolution)))
        t = np.linspace(0.0, 1.0, m + 1)[:, None]
        parts.append(a + t * (b - a))
    if k.loops:
        lo = np.min(k.vertices, axis=0)
        hi = np.max(k.vertices, axis=0)
        gx = np.arange(lo[0], hi[0] + resolution, resolution)
        gy = np.arange(lo[1], hi[1] + resolution, resolution)
        grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        parts.append(grid[k.contains_interior(grid)])
    return np.concatenate(parts) if parts else np.zeros((0, 2))


def _directed(a_pts: np.ndarray, b: Scatterer | np.ndarray):
    if isinstance(b, Scatterer):
        d, foot = distance_to_set(b, a_pts)
    else:
        from scipy.spatial import cKDTree

        d, idx = cKDTree(b).query(a_pts)
        foot = b[idx]
    i = int(np.argmax(d))
    return float(d[i]), a_pts[i], foot[i]


def hausdorff_distance(a: Scatterer | np.ndarray, b: Scatterer | np.ndarray, resolution: float) -> HausdorffResult:
    """Hausdorff distance between two scatterers (or finite point sets).

    Each set is sampled at spacing ``<= resolution`` and distances from the
    samples to the other set are exact, so the result is within
    ``resolution`` of the true value.
    """
    if not resolution > 0:
        raise GeometryError("resolution must be positive")

    def pts_of(s):
        if isinstance(s, Scatterer):
            if s.is_empty:
                raise GeometryError("empty set has no Hausdorff distance")
            return sample_set(s, resolution)
        p = _as_points(s)
        if len(p) == 0:
            raise GeometryError("empty set has no Hausdorff distance")
        return p

    pa, pb = pts_of(a), pts_of(b)
    dab, xa, ya = _directed(pa, b if isinstance(b, Scatterer) else pb)
    dba, xb, yb = _directed(pb, a if isinstance(a, Scatterer) else pa)
    if dab >= dba:
        return HausdorffResult(dab, tuple(map(float, xa)), tuple(map(float, ya)), resolution)
    return HausdorffResult(dba, tuple(map(float, yb)), tuple(map(float, xb)), resolution)


# ---------------------------------------------------------------------------
# thickening
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Pieces:
    edges: np.ndarray  # (E, 2, 2) every edge of loops and screens
    joints: np.ndarray  # (J, 2) vertices receiving arc joins
    cap_points: np.ndarray  # (C, 2) screen endpoints
    cap_dirs: np.ndarray  # (C, 2) outward unit tangents at endpoints


def _pieces(k: Scatterer) -> _Pieces:
    joints = [c.vertices for c in k.loops] + [c.vertices[1:-1] for c in k.screens]
    caps, dirs = [], []
    for c in k.screens:
        v = c.vertices
        for end, nbr in ((v[0], v[1]), (v[-1], v[-2])):
            t = end - nbr
            caps.append(end)
            dirs.append(t / np.linalg.norm(t))
    return _Pieces(
        k.segments(),
        np.concatenate(joints) if joints else np.zeros((0, 2)),
        np.array(caps).reshape(-1, 2),
        np.array(dirs).reshape(-1, 2),
    )


def _edge_frames(edges: np.ndarray):
    a = edges[:, 0]
    tang = edges[:, 1] - a
    length = np.linalg.norm(tang, axis=1)
    tang = tang / length[:, None]
    normal = np.column_stack([-tang[:, 1], tang[:, 0]])
    return a, tang, normal, length


def thickening_gauge(k: Scatterer, pts) -> np.ndarray:
    """Smallest ``h`` with ``x in K_h``, evaluated piece by piece.

    Edge rectangles contribute ``|t|`` where the tangential coordinate lies on
    the edge, joins contribute the Euclidean distance to the vertex, end-caps
    contribute ``max(s, |t|)`` beyond the endpoint.
    """
    pts = _as_points(pts)
    g = np.full(len(pts), np.inf)
    pc = _pieces(k)
    if len(pc.edges):
        a, tang, normal, length = _edge_frames(pc.edges)
        for sl in _chunks(len(pts), len(a)):
            rel = pts[sl, None, :] - a[None, :, :]
            s = np.einsum("pij,ij->pi", rel, tang)
            t = np.abs(np.einsum("pij,ij->pi", rel, normal))
            t = np.where((s >= 0) & (s <= length[None, :]), t, np.inf)
            g[sl] = np.minimum(g[sl], t.min(axis=1))
    if len(pc.joints):
        for sl in _chunks(len(pts), len(pc.joints)):
            d = np.linalg.norm(pts[sl, None, :] - pc.joints[None, :, :], axis=2)
            g[sl] = np.minimum(g[sl], d.min(axis=1))
    if len(pc.cap_points):
        nrm = np.column_stack([-pc.cap_dirs[:, 1], pc.cap_dirs[:, 0]])
        rel = pts[:, None, :] - pc.cap_points[None, :, :]
        s = np.einsum("pij,ij->pi", rel, pc.cap_dirs)
        t = np.abs(np.einsum("pij,ij->pi", rel, nrm))
        cap = np.where(s >= 0, np.maximum(s, t), np.inf)
        g = np.minimum(g, cap.min(axis=1))
    if k.loops:
        g[k.contains_interior(pts)] = 0.0
    return g


def in_thickening(k: Scatterer, pts, h: float) -> np.ndarray:
    """Exact membership in ``K_h`` (edge rectangles, joins, end-caps, interiors)."""
    pts = _as_points(pts)
    inside = np.zeros(len(pts), dtype=bool)
    if k.loops:
        inside |= k.contains_interior(pts)
    pc = _pieces(k)
    if len(pc.edges):
        a, tang, normal, length = _edge_frames(pc.edges)
        rel = pts[:, None, :] - a[None, :, :]
        s = np.einsum("pij,ij->pi", rel, tang)
        t = np.einsum("pij,ij->pi", rel, normal)
        inside |= np.any((s >= 0) & (s <= length) & (np.abs(t) <= h), axis=1)
    if len(pc.joints):
        d2 = np.sum((pts[:, None, :] - pc.joints[None]) ** 2, axis=2)
        inside |= np.any(d2 <= h * h, axis=1)
    if len(pc.cap_points):
        nrm = np.column_stack([-pc.cap_dirs[:, 1], pc.cap_dirs[:, 0]])
        rel = pts[:, None, :] - pc.cap_points[None]
        s = np.einsum("pij,ij->pi", rel, pc.cap_dirs)
        t = np.einsum("pij,ij->pi", rel, nrm)
        inside |= np.any((s >= 0) & (s <= h) & (np.abs(t) <= h), axis=1)
    return inside


def _distance_to_rect(rel_s, rel_t, s0, s1, h):
    ds = np.maximum(np.maximum(s0 - rel_s, rel_s - s1), 0.0)
    dt = np.maximum(np.abs(rel_t) - h, 0.0)
    return np.hypot(ds, dt)


def distance_to_thickening(k: Scatterer, pts, h: float) -> np.ndarray:
    """Euclidean distance to the ideal set ``K_h``."""
    pts = _as_points(pts)
    d = np.full(len(pts), np.inf)
    pc = _pieces(k)
    if len(pc.edges):
        a, tang, normal, length = _edge_frames(pc.edges)
        rel = pts[:, None, :] - a[None]
        s = np.einsum("pij,ij->pi", rel, tang)
        t = np.einsum("pij,ij->pi", rel, normal)
        d = np.minimum(d, _distance_to_rect(s, t, 0.0, length[None, :], h).min(axis=1))
    if len(pc.joints):
        dj = np.linalg.norm(pts[:, None, :] - pc.joints[None], axis=2) - h
        d = np.minimum(d, np.maximum(dj, 0.0).min(axis=1))
    if len(pc.cap_points):
        nrm = np.column_stack([-pc.cap_dirs[:, 1], pc.cap_dirs[:, 0]])
        rel = pts[:, None, :] - pc.cap_points[None]
        s = np.einsum("pij,ij->pi", rel, pc.cap_dirs)
        t = np.einsum("pij,ij->pi", rel, nrm)
        d = np.minimum(d, _distance_to_rect(s, t, 0.0, h, h).min(axis=1))
    if k.loops:
        d[k.contains_interior(pts)] = 0.0
    return d


def pseudo_distance(k: Scatterer, x, h_max: float, tol: float) -> float:
    """``min{h >= 0 : x in K_h}`` by bisection, to within ``tol``.

    Beyond ``K_{h_max}`` the value is ``h_max + dist(x, K_{h_max})``.
    """
    if not (tol > 0 and h_max > 0):
        raise GeometryError("tol and h_max must be positive")
    x = _as_points(x)
    if not in_thickening(k, x, h_max)[0]:
        return h_max + float(distance_to_thickening(k, x, h_max)[0])
    if in_thickening(k, x, 0.0)[0]:
        return 0.0
    lo, hi = 0.0, h_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if in_thickening(k, x, mid)[0]:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _narrow_pairs(c: PolyChain) -> float:
    """Smallest gap between edges of one chain that are far apart along it.

    A pair only counts when the gap is below half the chain length separating
    the edges, so fine polygonisations of smooth curves do not register.
    """
    e = c.edges
    n = len(e)
    if n <= 2:
        return math.inf
    lengths = np.linalg.norm(e[:, 1] - e[:, 0], axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    d = segment_pair_distance(e, e)
    i, j = np.triu_indices(n, k=2)
    between = cum[j] - cum[i + 1]
    if c.closed:
        between = np.minimum(between, cum[-1] - cum[j + 1] + cum[i])
    narrow = d[i, j] < 0.5 * between
    if c.closed:
        narrow &= ~((i == 0) & (j == n - 1))
    return float(np.min(d[i, j][narrow])) if np.any(narrow) else math.inf


def feature_separation(k: Scatterer, include_edges: bool = True) -> float:
    """Smallest geometric feature: edge length (optional), gap between
    components, or a narrow channel within one chain."""
    best = math.inf
    chains = k.chains
    for idx, c in enumerate(chains):
        e = c.edges
        if include_edges:
            best = min(best, float(np.min(np.linalg.norm(e[:, 1] - e[:, 0], axis=1))))
        best = min(best, _narrow_pairs(c))
        for other in chains[idx + 1 :]:
            best = min(best, float(np.min(segment_pair_distance(e, other.edges))))
    return best


def simplify_closed(points: np.ndarray, tol: float) -> np.ndarray:
    """Douglas-Peucker simplification of a closed polyline."""
    n = len(points)
    if n <= 3:
        return points
    # anchor at the vertex farthest from the first one so both halves are proper
    far = int(np.argmax(np.sum((points - points[0]) ** 2, axis=1)))
    ring = np.concatenate([points, points[:1]])
    keep = np.zeros(n + 1, dtype=bool)
    keep[[0, far, n]] = True
    stack = [(0, far), (far, n)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = ring[i], ring[j]
        seg = np.array([[a, b]])
        d, _ = point_segment_distance(ring[i + 1 : j], seg)
        m = int(np.argmax(d))
        if d[m] > tol:
            keep[i + 1 + m] = True
            stack.append((i, i + 1 + m))
            stack.append((i + 1 + m, j))
    return ring[:-1][keep[:-1]]


def thicken(k: Scatterer, h: float, grid_divisions: int = 16, simplify_divisions: int = 64) -> Scatterer:
    """Polygonal boundary of ``K_h`` as a loops-only scatterer.

    The gauge field is sampled on a grid of spacing ``h / grid_divisions``,
    contoured at level ``h`` by marching squares and simplified at tolerance
    ``h / simplify_divisions``.
    """
    if h < 0:
        raise GeometryError("thickness must be non-negative")
    if h == 0 or k.is_empty:
        return k
    if h >= 0.5 * feature_separation(k):
        raise GeometryError("thickening self-intersects")
    # per-axis spacing <= h / grid_divisions, chosen so that both sides of the
    # offset bounding box fall on grid lines
    vmin = np.min(k.vertices, axis=0) - h
    vmax = np.max(k.vertices, axis=0) + h
    span = vmax - vmin
    cells = np.ceil(span / (h / grid_divisions) - 1e-9).astype(int)
    step = span / cells
    lo = vmin - 3 * step
    nx, ny = cells + 7
    gx = lo[0] + step[0] * np.arange(nx)
    gy = lo[1] + step[1] * np.arange(ny)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    gauge = np.empty(len(grid))
    for sl in _chunks(len(grid), 64):
        gauge[sl] = thickening_gauge(k, grid[sl])
    field_ = (gauge - h).reshape(nx, ny)
    field_[np.abs(field_) <= 1e-9 * h] = 0.0  # rounding at grid lines on the boundary
    contours = measure.find_contours(field_, 0.0)
    rings = []
    for c in contours:
        if len(c) < 4 or np.any(c[0] != c[-1]):
            raise GeometryError("thickening contour is not closed")
        xy = np.column_stack([lo[0] + step[0] * c[:-1, 0], lo[1] + step[1] * c[:-1, 1]])
        xy = _dedupe(xy, 1e-9 * float(step.min()))
        rings.append(xy)
    # a ring nested inside another ring bounds a cavity of the complement
    for i, r in enumerate(rings):
        probe = r[:1]
        depth = sum(bool(points_in_loop(probe, o)[0]) for j, o in enumerate(rings) if j != i)
        if depth % 2:
            raise GeometryError("thickening self-intersects")
    loops = []
    for r in rings:
        s = simplify_closed(r, h / simplify_divisions)
        if len(s) >= 3:
            loops.append(PolyChain(s, True))
    verts = np.concatenate([p.vertices for p in loops])
    radius = max(k.bounding_radius, float(np.max(np.linalg.norm(verts, axis=1))))
    return Scatterer(tuple(loops), (), radius)


def _dedupe(xy: np.ndarray, tol: float) -> np.ndarray:
    keep = np.ones(len(xy), dtype=bool)
    diff = np.linalg.norm(np.diff(xy, axis=0, append=xy[:1]), axis=1)
    keep[1:] = diff[:-1] > tol
    out = xy[keep]
    if len(out) > 1 and np.linalg.norm(out[-1] - out[0]) <= tol:
        out = out[:-1]
    return out


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


def exterior_connected(k: Scatterer, bbox_radius: float, grid_resolution: float) -> bool:
    """Whether the complement of ``K`` is connected, by grid flood fill.

    A cell counts as occupied when ``K`` comes within half a cell diagonal of
    its centre, so every cell that ``K`` touches is occupied.
    """
    if not grid_resolution > 0:
        raise GeometryError("grid_resolution must be positive")
    if k.is_empty:
        return True
    sep = feature_separation(k, include_edges=False)
    if 3.0 * grid_resolution > sep:
        raise GeometryError("resolution too coarse for reliable connectivity")
    half = bbox_radius + 2 * grid_resolution
    n = int(math.ceil(2 * half / grid_resolution))
    centres = -half + grid_resolution * (np.arange(n) + 0.5)
    grid = np.stack(np.meshgrid(centres, centres, indexing="ij"), axis=-1).reshape(-1, 2)
    d, _ = distance_to_set(k, grid)
    free = (d > grid_resolution / math.sqrt(2)).reshape(n, n)
    labels, _ = ndimage.label(free)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    border = border[border > 0]
    return bool(np.all(np.isin(labels[free], border)))


@dataclass(frozen=True)
class AssumptionBReport:
    components: int
    perimeter: float
    max_components: int | None
    max_perimeter: float | None

    @property
    def passed(self) -> bool:
        ok = True
        if self.max_components is not None:
            ok &= self.components <= self.max_components
        if self.max_perimeter is not None:
            ok &= self.perimeter <= self.max_perimeter * (1 + 1e-12)
        return bool(ok)

    def as_dict(self) -> dict:
        return {
            "components": self.components,
            "perimeter": self.perimeter,
            "max_components": self.max_components,
            "max_perimeter": self.max_perimeter,
            "pass": self.passed,
        }


def boundary_components(k: Scatterer) -> int:
    """Connected components of the boundary; chains that touch are merged."""
    chains = k.chains
    parent = list(range(len(chains)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tol = k.snap_tolerance
    for a in range(len(chains)):
        for b in range(a + 1, len(chains)):
            if np.min(segment_pair_distance(chains[a].edges, chains[b].edges)) <= tol:
                parent[find(a)] = find(b)
    return len({find(i) for i in range(len(chains))})


def assumption_b_check(k: Scatterer, max_components: int | None = None, max_perimeter: float | None = None) -> AssumptionBReport:
    """Component count and one-dimensional measure of the boundary."""
    perimeter = float(sum(c.length for c in k.chains))
    return AssumptionBReport(boundary_components(k), perimeter, max_components, max_perimeter)


# ---------------------------------------------------------------------------
# JSON geometry files
# ---------------------------------------------------------------------------


def to_json_dict(k: Scatterer) -> dict:
    return {
        "bounding_radius": k.bounding_radius,
        "loops": [c.vertices.tolist() for c in k.loops],
        "screens": [c.vertices.tolist() for c in k.screens],
    }


def from_json_dict(data: dict) -> Scatterer:
    if not isinstance(data, dict) or "bounding_radius" not in data:
        raise GeometryError("geometry must be an object with a 'bounding_radius' field")
    return Scatterer(
        tuple(PolyChain(np.asarray(v, dtype=float), True) for v in data.get("loops", [])),
        tuple(PolyChain(np.asarray(v, dtype=float), False) for v in data.get("screens", [])),
        float(data["bounding_radius"]),
    )


def dumps_geometry(k: Scatterer) -> str:
    return json.dumps(to_json_dict(k), indent=1)


def loads_geometry(text: str) -> Scatterer:
    return from_json_dict(json.loads(text)).validate()


def save_geometry(k: Scatterer, path) -> None:
    Path(path).write_text(dumps_geometry(k) + "\n")


def load_geometry(path) -> Scatterer:
    return loads_geometry(Path(path).read_text())
