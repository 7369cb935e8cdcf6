"""P1 finite elements for the Neumann problem and sound-hard Helmholtz scattering.

Two problems are assembled on a :class:`~hardscatter.mesh.TriMesh`:

* the coercive problem ``-Lap u + u = f`` with natural Neumann conditions on
  every boundary;
* ``Lap u_s + k^2 u_s = 0`` for the scattered field, with the incident flux
  moved to the right-hand side on the scatterer boundary and a truncated
  Dirichlet-to-Neumann closure on the outer circle.

The DtN form is low rank (``2 N + 1`` Fourier modes), so the scattering
system is solved as a sparse factorisation of ``K - k^2 M`` plus a Woodbury
correction; a bordered sparse system is the fallback when that factor is
(nearly) singular.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import OUTER_CIRCLE, OUTSIDE, SCATTERER, TriMesh
from .specfun import hankel1_orders

logger = logging.getLogger(__name__)

SourceTerm = Callable[[np.ndarray], np.ndarray]

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Linear solve failed or residual check did not pass."""


class FieldRole(str, Enum):
    TOTAL_FIELD = "TOTAL_FIELD"
    SCATTERED_FIELD = "SCATTERED_FIELD"
    ELLIPTIC_SOLUTION = "ELLIPTIC_SOLUTION"


@dataclass(frozen=True, eq=False)
class ComplexField:
    mesh: TriMesh
    values: np.ndarray
    role: FieldRole
    residual: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.mesh.n_vertices,):
            raise ValueError("field length does not match the vertex count")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def gradients(self) -> np.ndarray:
        """Constant P1 gradient per triangle, ``(T, 2)`` complex."""
        return np.einsum("tk,tkd->td", self.values[self.mesh.triangles], self.mesh.basis_gradients)

    def evaluate(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients at points, extended by zero outside the mesh."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        tri, lam = self.mesh.locate_many(pts)
        vals = np.zeros(len(pts), dtype=complex)
        grads = np.zeros((len(pts), 2), dtype=complex)
        ok = tri != OUTSIDE
        t = tri[ok]
        vals[ok] = np.sum(self.values[self.mesh.triangles[t]] * lam[ok], axis=1)
        grads[ok] = self.gradients[t]
        return vals, grads

    def l2_norm(self, radius: float | None = None) -> float:
        """``||u||_{L2}`` over the mesh, optionally restricted to ``|x| <= radius``."""
        return math.sqrt(integrate_abs2(self.mesh, self.values, radius))

    def h1_parts(self) -> tuple[float, float]:
        """``(||u||_{L2}, ||grad u||_{L2})`` over the whole mesh."""
        g = self.gradients
        grad2 = float(np.sum(self.mesh.areas * np.sum(np.abs(g) ** 2, axis=1)))
        return self.l2_norm(), math.sqrt(grad2)

    def with_values(self, values, role: FieldRole) -> "ComplexField":
        return ComplexField(self.mesh, values, role, self.residual)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def assemble_stiffness_mass(mesh: TriMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Global P1 stiffness and consistent mass matrices."""
    tri = mesh.triangles
    area = mesh.areas
    g = mesh.basis_gradients
    ke = area[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    stiff = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mass = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return stiff, mass


def load_vector(mesh: TriMesh, f: SourceTerm) -> np.ndarray:
    """``int f phi_i`` with the three-point edge-midpoint rule."""
    p = mesh.vertices[mesh.triangles]
    mids = np.stack([(p[:, 0] + p[:, 1]) / 2, (p[:, 1] + p[:, 2]) / 2, (p[:, 2] + p[:, 0]) / 2], axis=1)
    fm = np.asarray(f(mids.reshape(-1, 2)), dtype=complex).reshape(-1, 3)
    a6 = mesh.areas / 6.0
    # vertex 0 touches midpoints 0 and 2, vertex 1 touches 0 and 1, vertex 2 touches 1 and 2
    local = np.column_stack([fm[:, 0] + fm[:, 2], fm[:, 0] + fm[:, 1], fm[:, 1] + fm[:, 2]]) * a6[:, None]
    b = np.zeros(mesh.n_vertices, dtype=complex)
    np.add.at(b, mesh.triangles.ravel(), local.ravel())
    return b


def _subcell_rule(m: int) -> np.ndarray:
    """Barycentric centroids of the ``m * m`` congruent subtriangles (equal weights)."""
    pts = []
    for i in range(m):
        for j in range(m - i):
            pts.append(((i + 1 / 3) / m, (j + 1 / 3) / m))
            if i + j < m - 1:
                pts.append(((i + 2 / 3) / m, (j + 2 / 3) / m))
    c = np.array(pts)
    return np.column_stack([1 - c[:, 0] - c[:, 1], c[:, 0], c[:, 1]])


def _weighted_abs2(mesh: TriMesh, lam: np.ndarray, vals: np.ndarray, radius: float | None) -> float:
    """Sum of ``|vals|^2`` over subcell samples ``vals[t, s]`` with area weights."""
    w = mesh.areas[:, None] / lam.shape[0]
    a2 = np.abs(vals) ** 2
    if radius is not None and radius < mesh.radius:
        x = np.einsum("sk,tkd->tsd", lam, mesh.vertices[mesh.triangles])
        a2 = np.where(np.hypot(x[..., 0], x[..., 1]) <= radius, a2, 0.0)
    return float(np.sum(w * a2))


def integrate_abs2(mesh: TriMesh, values: np.ndarray, radius: float | None = None) -> float:
    """``int |u|^2`` for a P1 field; exact on the whole mesh.

    With ``radius < R1`` the integrand is cut off at ``|x| = radius`` and
    sampled at the centroids of an 8-fold subdivision of each triangle.
    """
    u = values[mesh.triangles]
    if radius is None or radius >= mesh.radius:
        mids = np.stack([(u[:, 0] + u[:, 1]) / 2, (u[:, 1] + u[:, 2]) / 2, (u[:, 2] + u[:, 0]) / 2], axis=1)
        return float(np.sum(mesh.areas * np.mean(np.abs(mids) ** 2, axis=1)))
    lam = _subcell_rule(8)
    return _weighted_abs2(mesh, lam, u @ lam.T, radius)


def total_field_l2_norm(us: "ComplexField", k: float, d, radius: float | None = None, subdivisions: int = 4) -> float:
    """``||u_s + u_i||_{L2}`` with the incident wave evaluated exactly.

    The P1 scattered field is added to ``exp(i k x.d)`` at subcell centroids,
    so the incident part carries no interpolation error.
    """
    mesh = us.mesh
    lam = _subcell_rule(subdivisions)
    x = np.einsum("sk,tkd->tsd", lam, mesh.vertices[mesh.triangles])
    vals = us.values[mesh.triangles] @ lam.T + np.exp(1j * k * (x @ np.asarray(d, dtype=float)))
    return math.sqrt(_weighted_abs2(mesh, lam, vals, radius))


def residual_norm(matrix, x: np.ndarray, b: np.ndarray) -> float:
    r = matrix @ x - b
    scale = max(np.linalg.norm(b), np.linalg.norm(matrix @ x), 1e-300)
    return float(np.linalg.norm(r) / scale)


def solve_elliptic(mesh: TriMesh, f: SourceTerm) -> ComplexField:
    """P1 Galerkin solution of ``-Lap u + u = f`` with natural boundary conditions."""
    stiff, mass = assemble_stiffness_mass(mesh)
    a = (stiff + mass).tocsc()
    b = load_vector(mesh, f)
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SolverError(f"factorisation of the coercive form failed: {exc}") from exc
    x = lu.solve(b.real) + 1j * lu.solve(b.imag)
    res = residual_norm(a, x, b) if np.any(b) else 0.0
    if res > RESIDUAL_TOL:
        cond = spla.norm(a, 1) * np.max(np.abs(x)) / max(np.max(np.abs(b)), 1e-300)
        raise SolverError(f"residual {res:.3e} above tolerance (condition indicator {cond:.3e})")
    return ComplexField(mesh, x, FieldRole.ELLIPTIC_SOLUTION, res)


# ---------------------------------------------------------------------------
# DtN closure
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DtnOperator:
    wavenumber: float
    radius: float
    mode_cutoff: int
    coefficients: np.ndarray  # lambda_n for n = -N..N

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.mode_cutoff, self.mode_cutoff + 1)

    def coefficient(self, n: int) -> complex:
        return complex(self.coefficients[n + self.mode_cutoff])


def default_mode_cutoff(k: float, radius: float) -> int:
    return int(math.ceil(k * radius)) + 15


def make_dtn(k: float, radius: float, n_modes: int | None = None) -> DtnOperator:
    """Symbols ``lambda_n = k H_n'(k R1) / H_n(k R1)`` for ``|n| <= n_modes``."""
    if not (k > 0 and radius > 0):
        raise ValueError("wavenumber and radius must be positive")
    if n_modes is None:
        n_modes = default_mode_cutoff(k, radius)
    if n_modes < k * radius + 10:
        raise ValueError(f"n_modes={n_modes} below k*R1 + 10 = {k * radius + 10:.3f}")
    h, hp = hankel1_orders(n_modes, k * radius)
    lam = k * hp / h
    full = np.concatenate([lam[:0:-1], lam])
    full.setflags(write=False)
    return DtnOperator(float(k), float(radius), int(n_modes), full)


def boundary_fourier_matrix(mesh: TriMesh, n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid-rule Fourier analysis on the outer circle.

    Returns ``(nodes, W)`` where ``W[j, m] = w_j exp(i n_m theta_j) / (2 pi)``
    so that ``c_n = W[:, m]^H u[nodes]`` is the coefficient of order
    ``n_m = m - n_modes``.
    """
    nodes = mesh.outer_vertices
    theta = mesh.outer_angles
    nxt = np.roll(theta, -1) - theta
    nxt[-1] += 2 * math.pi
    prv = np.roll(nxt, 1)
    w = 0.5 * (nxt + prv)
    orders = np.arange(-n_modes, n_modes + 1)
    return nodes, w[:, None] * np.exp(1j * np.outer(theta, orders)) / (2 * math.pi)


def trace_modes(u: ComplexField, n_modes: int) -> np.ndarray:
    """Fourier coefficients ``c_n``, ``|n| <= n_modes``, of the outer-circle trace."""
    nodes, w = boundary_fourier_matrix(u.mesh, n_modes)
    return w.conj().T @ u.values[nodes]


# ---------------------------------------------------------------------------
# scattering
# ---------------------------------------------------------------------------


def incident_flux_rhs(mesh: TriMesh, k: float, d) -> np.ndarray:
    """``-int_{dK} (grad u_i . n) phi_j`` with ``n`` the outward normal of the domain."""
    d = np.asarray(d, dtype=float)
    b = np.zeros(mesh.n_vertices, dtype=complex)
    sel = mesh.boundary_tags == SCATTERER
    if not np.any(sel):
        return b
    edges = mesh.boundary_edges[sel]
    third = _third_vertices(mesh, edges)
    pa = mesh.vertices[edges[:, 0]]
    pb = mesh.vertices[edges[:, 1]]
    tang = pb - pa
    length = np.linalg.norm(tang, axis=1)
    nrm = np.column_stack([tang[:, 1], -tang[:, 0]]) / length[:, None]
    flip = np.sum((mesh.vertices[third] - pa) * nrm, axis=1) > 0
    nrm[flip] *= -1.0
    dn = nrm @ d
    gp = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    for s in gp:
        x = pa + s * tang
        flux = 1j * k * dn * np.exp(1j * k * (x @ d))
        wgt = 0.5 * length * flux
        np.add.at(b, edges[:, 0], -wgt * (1 - s))
        np.add.at(b, edges[:, 1], -wgt * s)
    return b


def _third_vertices(mesh: TriMesh, edges: np.ndarray) -> np.ndarray:
    tri = mesh.triangles
    local = np.concatenate([tri[:, [0, 1, 2]], tri[:, [1, 2, 0]], tri[:, [2, 0, 1]]])
    key = np.sort(local[:, :2], axis=1)
    n = mesh.n_vertices
    code = key[:, 0] * n + key[:, 1]
    order = np.argsort(code)
    q = np.sort(edges, axis=1)
    qc = q[:, 0] * n + q[:, 1]
    pos = order[np.searchsorted(code[order], qc)]
    return local[pos, 2]


class HelmholtzSystem:
    """Factorised scattering operator for one mesh, wavenumber and DtN closure.

    Right-hand sides (e.g. several incident directions) reuse the
    factorisation.
    """

    def __init__(self, mesh: TriMesh, dtn: DtnOperator):
        if abs(dtn.radius - mesh.radius) > 1e-9 * mesh.radius:
            raise ValueError("DtN radius does not match the mesh outer circle")
        self.mesh = mesh
        self.dtn = dtn
        k = dtn.wavenumber
        stiff, mass = assemble_stiffness_mass(mesh)
        self.sparse_part = (stiff - k * k * mass).tocsc()
        self.nodes, w = boundary_fourier_matrix(mesh, dtn.mode_cutoff)
        self.weights = w
        self.cap = 2 * math.pi * dtn.radius * dtn.coefficients
        self._woodbury = None
        self._bordered = None
        try:
            self._factor_woodbury()
        except (RuntimeError, sla.LinAlgError, ValueError) as exc:
            logger.warning("Woodbury factorisation failed (%s); using bordered system", exc)

    # A = S - U C U^H with U supported on the outer nodes
    def _apply(self, x: np.ndarray) -> np.ndarray:
        y = self.sparse_part @ x
        c = self.weights.conj().T @ x[self.nodes]
        y[self.nodes] -= self.weights @ (self.cap * c)
        return y

    def _factor_woodbury(self):
        lu = spla.splu(self.sparse_part)
        n = self.mesh.n_vertices
        u_full = np.zeros((n, self.weights.shape[1]), dtype=complex)
        u_full[self.nodes] = self.weights
        y = lu.solve(np.ascontiguousarray(u_full.real)) + 1j * lu.solve(np.ascontiguousarray(u_full.imag))
        z = np.diag(1.0 / self.cap) - self.weights.conj().T @ y[self.nodes]
        self._woodbury = (lu, y, sla.lu_factor(z))

    def _factor_bordered(self):
        n = self.mesh.n_vertices
        m = self.weights.shape[1]
        ucol = sp.lil_matrix((n, m), dtype=complex)
        ucol[self.nodes, :] = self.weights * self.cap[None, :]
        uh = sp.lil_matrix((m, n), dtype=complex)
        uh[:, self.nodes] = self.weights.conj().T
        big = sp.bmat([[self.sparse_part.astype(complex), -ucol.tocsr()], [uh.tocsr(), -sp.identity(m)]]).tocsc()
        self._bordered = spla.splu(big)

    def solve(self, rhs: np.ndarray) -> tuple[np.ndarray, float]:
        rhs = np.asarray(rhs, dtype=complex)
        if not np.any(rhs):
            return np.zeros_like(rhs), 0.0
        x = None
        if self._woodbury is not None:
            lu, y, zf = self._woodbury
            y0 = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
            corr = sla.lu_solve(zf, self.weights.conj().T @ y0[self.nodes])
            x = y0 + y @ corr
            res = self._residual(x, rhs)
            if not (np.isfinite(res) and res <= RESIDUAL_TOL):
                logger.warning("Woodbury residual %.3e; retrying with bordered system", res)
                x = None
        if x is None:
            if self._bordered is None:
                try:
                    self._factor_bordered()
                except RuntimeError as exc:
                    raise SolverError(f"scattering system is singular: {exc}") from exc
            n = self.mesh.n_vertices
            full = np.concatenate([rhs, np.zeros(self.weights.shape[1], dtype=complex)])
            x = self._bordered.solve(full)[:n]
            res = self._residual(x, rhs)
            if not (np.isfinite(res) and res <= RESIDUAL_TOL):
                raise SolverError(f"scattering residual {res:.3e} above tolerance {RESIDUAL_TOL}")
        return x, res

    def _residual(self, x, rhs) -> float:
        ax = self._apply(x)
        scale = max(np.linalg.norm(rhs), np.linalg.norm(ax), 1e-300)
        return float(np.linalg.norm(ax - rhs) / scale)

    def residual_vector(self, x, rhs) -> np.ndarray:
        return self._apply(x) - rhs

    def scatter(self, d) -> ComplexField:
        d = np.asarray(d, dtype=float)
        rhs = incident_flux_rhs(self.mesh, self.dtn.wavenumber, d)
        x, res = self.solve(rhs)
        return ComplexField(self.mesh, x, FieldRole.SCATTERED_FIELD, res)


def solve_helmholtz_scattering(mesh: TriMesh, k: float, d, dtn: DtnOperator) -> ComplexField:
    """Scattered field of a plane wave ``exp(i k x.d)`` off a sound-hard scatterer."""
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    if abs(dtn.wavenumber - k) > 1e-12 * k:
        raise ValueError("DtN operator built for a different wavenumber")
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return HelmholtzSystem(mesh, dtn).scatter(d)


def incident_values(mesh: TriMesh, k: float, d) -> np.ndarray:
    return np.exp(1j * k * (mesh.vertices @ np.asarray(d, dtype=float)))


def total_field(us: ComplexField, k: float, d) -> ComplexField:
    return us.with_values(us.values + incident_values(us.mesh, k, d), FieldRole.TOTAL_FIELD)


# ---------------------------------------------------------------------------
# cross-mesh comparison
# ---------------------------------------------------------------------------


def background_grid(radius: float, resolution: float) -> np.ndarray:
    n = int(math.ceil(2 * radius / resolution))
    c = -radius + resolution * (np.arange(n) + 0.5)
    xx, yy = np.meshgrid(c, c, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[np.hypot(pts[:, 0], pts[:, 1]) < radius]


def l2_distance_extended(a: ComplexField, b: ComplexField, background_resolution: float) -> tuple[float, float]:
    """L2 distances of values and gradients, both fields extended by zero.

    Quadrature uses cell centres of a uniform background grid on ``B_R1``.
    """
    if abs(a.mesh.radius - b.mesh.radius) > 1e-9 * a.mesh.radius:
        raise ValueError("fields live on domains with different truncation radii")
    pts = background_grid(a.mesh.radius, background_resolution)
    w = background_resolution**2
    dv = dg = 0.0
    for start in range(0, len(pts), 200_000):
        chunk = pts[start : start + 200_000]
        va, ga = a.evaluate(chunk)
        vb, gb = b.evaluate(chunk)
        dv += float(np.sum(np.abs(va - vb) ** 2))
        dg += float(np.sum(np.abs(ga - gb) ** 2))
    return math.sqrt(dv * w), math.sqrt(dg * w)


def field_csv(u: ComplexField) -> str:
    lines = ["x,y,re,im"]
    for (x, y), v in zip(u.mesh.vertices.tolist(), u.values.tolist()):
        lines.append(f"{x!r},{y!r},{v.real!r},{v.imag!r}")
    return "\n".join(lines) + "\n"
