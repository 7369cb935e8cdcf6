"""Quality triangulations of the truncated exterior domain ``B_R1 \\ K``.

Constrained Delaunay triangulation and Ruppert-style refinement are
delegated to Shewchuk's Triangle (through the ``triangle`` bindings);
this module prepares the planar straight-line graph, removes the scatterer
interior, pins boundary vertices onto the truncation circle and checks the
mesh invariants.  Point location uses uniform background bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle

from .geometry import GeometryError, Scatterer

OUTER_CIRCLE = 1
SCATTERER = 2
TAG_NAMES = {OUTER_CIRCLE: "OUTER_CIRCLE", SCATTERER: "SCATTERER"}
OUTSIDE = -1


class MeshError(RuntimeError):
    """Mesh generation failed or produced an invalid mesh."""


@dataclass(frozen=True)
class DomainSpec:
    scatterer: Scatterer
    truncation_radius: float
    target_edge_length: float
    min_angle: float = 20.0

    def __post_init__(self):
        r = 0.0 if self.scatterer.is_empty else self.scatterer.bounding_radius
        if not self.truncation_radius > r:
            raise ValueError(
                f"truncation radius {self.truncation_radius} must exceed bounding radius {r}"
            )
        if not 0 < self.target_edge_length < self.truncation_radius - r:
            raise ValueError("target edge length must lie in (0, R1 - R)")
        if not 0 < self.min_angle <= 34:
            raise ValueError("min_angle must lie in (0, 34] degrees")

    def with_scatterer(self, k: Scatterer) -> "DomainSpec":
        return DomainSpec(k, self.truncation_radius, self.target_edge_length, self.min_angle)

    def with_edge_length(self, h: float) -> "DomainSpec":
        return DomainSpec(self.scatterer, self.truncation_radius, h, self.min_angle)


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    radius: float

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_tags"):
            getattr(self, name).setflags(write=False)

    # -- basic geometry ----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three P1 basis functions per triangle, ``(T, 3, 2)``."""
        p = self.vertices[self.triangles]
        # gradient of lambda_i is rot90(edge opposite to i) / (2 area)
        opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        g = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
        return g / (2.0 * self.areas[:, None, None])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def outer_vertices(self) -> np.ndarray:
        """Vertices on the truncation circle, sorted by polar angle."""
        idx = np.unique(self.boundary_edges[self.boundary_tags == OUTER_CIRCLE])
        ang = np.arctan2(self.vertices[idx, 1], self.vertices[idx, 0])
        return idx[np.argsort(ang, kind="stable")]

    @cached_property
    def outer_angles(self) -> np.ndarray:
        v = self.vertices[self.outer_vertices]
        return np.arctan2(v[:, 1], v[:, 0])

    def min_angle_degrees(self) -> float:
        p = self.vertices[self.triangles]
        ang = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            ang.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
        return float(np.min(ang))

    def stats(self) -> dict:
        return {
            "vertices": int(self.n_vertices),
            "triangles": int(self.n_triangles),
            "outer_vertices": int(len(self.outer_vertices)),
            "min_angle_deg": round(self.min_angle_degrees(), 6),
            "radius": self.radius,
        }

    # -- point location --------------------------------------------------------------
    @cached_property
    def _bins(self):
        r = self.radius
        h = math.sqrt(2.0 * float(np.mean(self.areas)))
        nb = max(1, min(2048, int(2 * r / (1.5 * h))))
        size = 2 * r / nb
        p = self.vertices[self.triangles]
        lo = np.floor((p.min(axis=1) + r) / size).astype(int).clip(0, nb - 1)
        hi = np.floor((p.max(axis=1) + r) / size).astype(int).clip(0, nb - 1)
        span = hi - lo
        ids, tris = [], []
        for dx in range(int(span[:, 0].max()) + 1):
            for dy in range(int(span[:, 1].max()) + 1):
                ok = (dx <= span[:, 0]) & (dy <= span[:, 1])
                t = np.nonzero(ok)[0]
                ids.append((lo[t, 0] + dx) * nb + lo[t, 1] + dy)
                tris.append(t)
        ids = np.concatenate(ids)
        tris = np.concatenate(tris)
        order = np.argsort(ids, kind="stable")
        ids, tris = ids[order], tris[order]
        start = np.searchsorted(ids, np.arange(nb * nb))
        stop = np.searchsorted(ids, np.arange(nb * nb), side="right")
        return nb, size, tris, start, stop - start

    def locate_many(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle (or ``OUTSIDE``) and barycentric coordinates."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        n = len(pts)
        found = np.full(n, OUTSIDE)
        bary = np.zeros((n, 3))
        nb, size, tris, start, count = self._bins
        r = self.radius
        ix = np.floor((pts[:, 0] + r) / size).astype(int)
        iy = np.floor((pts[:, 1] + r) / size).astype(int)
        valid = (ix >= 0) & (ix < nb) & (iy >= 0) & (iy < nb)
        b = np.where(valid, ix * nb + iy, 0)
        cnt = np.where(valid, count[b], 0)
        tri_p = self.vertices[self.triangles]
        for j in range(int(cnt.max()) if n else 0):
            q = np.nonzero((found == OUTSIDE) & (cnt > j))[0]
            if len(q) == 0:
                break
            t = tris[start[b[q]] + j]
            lam = _barycentric(tri_p[t], pts[q])
            ok = np.all(lam >= -1e-12, axis=1)
            found[q[ok]] = t[ok]
            bary[q[ok]] = lam[ok]
        return found, bary

    def locate(self, x) -> tuple[int, np.ndarray]:
        t, lam = self.locate_many(np.asarray(x, dtype=float).reshape(1, 2))
        return int(t[0]), lam[0]

    # -- export -----------------------------------------------------------------------
    def to_text(self) -> str:
        lines = [str(self.n_vertices)]
        lines += [f"{x!r} {y!r}" for x, y in self.vertices.tolist()]
        lines.append(str(self.n_triangles))
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        lines.append(str(len(self.boundary_edges)))
        lines += [
            f"{i} {j} {TAG_NAMES[int(t)]}"
            for (i, j), t in zip(self.boundary_edges.tolist(), self.boundary_tags.tolist())
        ]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def _barycentric(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    v0, v1, v2 = b - a, c - a, pts - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def locate(mesh: TriMesh, x) -> tuple[int, np.ndarray]:
    """Triangle containing ``x`` with barycentric coordinates, or ``OUTSIDE``."""
    return mesh.locate(x)


def outer_circle_vertices(radius: float, h: float) -> np.ndarray:
    n = max(16, int(math.ceil(2 * math.pi * radius / h)))
    n += (-n) % 8  # keeps the polygon invariant under rotations by multiples of 45 degrees
    t = 2 * math.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)])


def triangulate(spec: DomainSpec, max_steiner_factor: float = 50.0) -> TriMesh:
    """Quality constrained Delaunay mesh of ``B_R1 \\ K`` with tagged boundary."""
    k = spec.scatterer
    if k.screens:
        raise GeometryError("thicken screens before meshing")
    r1, h = spec.truncation_radius, spec.target_edge_length
    outer = outer_circle_vertices(r1, h)
    n_out = len(outer)
    verts = [outer]
    segs = [np.column_stack([np.arange(n_out), (np.arange(n_out) + 1) % n_out])]
    marks = [np.full(n_out, OUTER_CIRCLE)]
    offset = n_out
    kk = k.refined(h) if k.loops else k
    for loop in kk.loops:
        v = loop.vertices
        m = len(v)
        verts.append(v)
        segs.append(offset + np.column_stack([np.arange(m), (np.arange(m) + 1) % m]))
        marks.append(np.full(m, SCATTERER))
        offset += m
    pslg = {
        "vertices": np.concatenate(verts),
        "segments": np.concatenate(segs).astype(np.int32),
        "segment_markers": np.concatenate(marks).astype(np.int32).reshape(-1, 1),
    }
    if kk.loops:
        coarse = triangle.triangulate(pslg, "pQ")
        cent = coarse["vertices"][coarse["triangles"]].mean(axis=1)
        holes = cent[kk.contains_interior(cent)]
        if len(holes):
            pslg["holes"] = holes
    area = math.sqrt(3.0) / 4.0 * h * h
    expected = math.pi * r1 * r1 / area
    steiner = int(max_steiner_factor * expected)
    opts = f"pq{spec.min_angle:.6g}a{area:.17g}S{steiner}Q"
    out = triangle.triangulate(pslg, opts)
    vertices = np.array(out["vertices"], dtype=float)
    tris = np.array(out["triangles"], dtype=np.int64)
    seg = np.array(out["segments"], dtype=np.int64)
    seg_mark = np.array(out["segment_markers"], dtype=np.int64).ravel()

    on_outer = np.unique(seg[seg_mark == OUTER_CIRCLE])
    rad = np.linalg.norm(vertices[on_outer], axis=1)
    vertices[on_outer] *= (r1 / rad)[:, None]

    mesh = TriMesh(vertices, tris, seg, seg_mark, r1)
    check_mesh(mesh, spec.min_angle)
    return mesh


def check_mesh(mesh: TriMesh, min_angle: float) -> None:
    """Raise :class:`MeshError` when a mesh invariant is violated."""
    if np.any(mesh.areas <= 0):
        raise MeshError(f"{int(np.sum(mesh.areas <= 0))} triangles with non-positive area")
    ang = mesh.min_angle_degrees()
    if ang < min_angle - 1e-6:
        raise MeshError(
            f"refinement limit: minimum angle {ang:.3f} deg below requested {min_angle} deg "
            f"({mesh.n_triangles} triangles)"
        )
    e = np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]])
    _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: edge shared by more than two triangles")
    n_boundary = int(np.sum(counts == 1))
    if n_boundary != len(mesh.boundary_edges):
        raise MeshError(
            f"boundary edge count mismatch: {n_boundary} free edges vs "
            f"{len(mesh.boundary_edges)} tagged"
        )
