"""Batch studies: Mosco diagnostic, screen approximation, uniform bounds and decay.

Every study is a map over independent cases followed by an ordered
reduction, so serial and parallel runs give identical reports.  A case that
fails (mesh generation, solver) is recorded as a :class:`CaseFailure` and the
study carries on.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .geometry import Scatterer, hausdorff_distance, polygon, thicken
from .mesh import DomainSpec, TriMesh, triangulate
from .scattering import (
    FarFieldPattern,
    PlaneWave,
    decay_check,
    far_field,
    far_field_distance,
)
from .solver import (
    HelmholtzSystem,
    SourceTerm,
    l2_distance_extended,
    make_dtn,
    solve_elliptic,
    total_field_l2_norm,
)


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseFailure:
    case: str
    stage: str
    error: str

    def as_dict(self) -> dict:
        return {"case": self.case, "stage": self.stage, "error": self.error}


def _failure(case: str, stage: str, exc: BaseException) -> CaseFailure:
    return CaseFailure(case, stage, f"{type(exc).__name__}: {exc}")


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map; ``jobs > 1`` uses worker processes (``fn`` must pickle)."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _num(x: float | None) -> float | None:
    """JSON-safe float: non-finite values become ``None``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def dumps_report(data: dict) -> str:
    """Canonical JSON text, byte-stable across runs."""
    return json.dumps(data, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LinearSource:
    """Picklable source ``f(x) = c + a . x``."""

    constant: float = 0.0
    gradient: tuple[float, float] = (0.0, 0.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return (self.constant + x @ np.asarray(self.gradient, dtype=float)).astype(complex)

    def describe(self) -> str:
        c, (a, b) = self.constant, self.gradient
        return f"f(x) = {c!r} + {a!r}*x1 + {b!r}*x2"


CONSTANT_SOURCE = LinearSource(1.0)
COORDINATE_SOURCE = LinearSource(0.0, (1.0, 0.0))


def rotated_realization(spec: DomainSpec, angle: float) -> TriMesh:
    """An independent mesh of the same domain.

    The scatterer is rotated by ``angle``, meshed, and the vertices are rotated
    back, so only the triangulation differs from ``triangulate(spec)``.
    """
    m = triangulate(spec.with_scatterer(spec.scatterer.transformed(angle)))
    c, s = math.cos(-angle), math.sin(-angle)
    v = m.vertices @ np.array([[c, s], [-s, c]])
    return TriMesh(v, m.triangles, m.boundary_edges, m.boundary_tags, m.radius)


# ---------------------------------------------------------------------------
# Mosco diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScattererSequence:
    members: tuple[Scatterer, ...]
    limit: Scatterer
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("a sequence needs at least one member")

    def hausdorff_profile(self, resolution: float) -> list[float]:
        return [hausdorff_distance(k, self.limit, resolution).distance for k in self.members]

    def is_converging(self, resolution: float) -> bool:
        """Hausdorff distances to the limit are non-increasing up to sampling error."""
        h = self.hausdorff_profile(resolution)
        return all(b <= a + 2 * resolution for a, b in zip(h, h[1:]))

    @classmethod
    def vertex_perturbation(
        cls, base: np.ndarray, vertex: int, n_steps: int, scale: float = 1.0, direction=(1.0, 1.0)
    ) -> "ScattererSequence":
        """Polygons with ``base[vertex]`` moved a distance ``scale * 2**-n`` along ``direction``."""
        base = np.asarray(base, dtype=float)
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        members = []
        for n in range(n_steps + 1):
            v = base.copy()
            v[vertex] += scale * 2.0**-n * direction
            members.append(polygon(v))
        dirs = tuple(direction.tolist())
        desc = f"vertex {vertex} of a {len(base)}-gon moved {scale!r}*2^-n along {dirs}, n=0..{n_steps}"
        return cls(tuple(members), polygon(base), desc)


@dataclass(frozen=True)
class MoscoStep:
    index: int
    hausdorff: float | None
    value_distance: float | None
    gradient_distance: float | None


@dataclass(frozen=True)
class MoscoDiagnosticReport:
    rhs_description: str
    per_step: tuple[MoscoStep, ...]
    reference_norm: float
    realization_floor: tuple[float, float] | None = None
    failures: tuple[CaseFailure, ...] = ()
    description: str = ""

    def __post_init__(self):
        for s in self.per_step:
            for v in (s.hausdorff, s.value_distance, s.gradient_distance):
                if v is not None and v < 0:
                    raise ValueError("distances must be non-negative")

    def relative(self, which: str) -> list[float | None]:
        out = []
        for s in self.per_step:
            v = getattr(s, which)
            out.append(None if v is None or self.reference_norm == 0 else v / self.reference_norm)
        return out

    def decreasing_until(self, which: str, rel_tol: float) -> bool:
        """Strict decrease of a distance series until it first drops to ``rel_tol``."""
        r = self.relative(which)
        if any(v is None for v in r):
            return False
        for a, b in zip(r, r[1:]):
            if a <= rel_tol:
                return True
            if not b < a:
                return False
        return r[-1] <= rel_tol

    def as_dict(self) -> dict:
        floor = None
        if self.realization_floor is not None:
            floor = {"value_distance": _num(self.realization_floor[0]), "gradient_distance": _num(self.realization_floor[1])}
        return {
            "study": "mosco",
            "description": self.description,
            "rhs_description": self.rhs_description,
            "reference_norm": _num(self.reference_norm),
            "realization_floor": floor,
            "per_step": [
                {
                    "n": s.index,
                    "hausdorff": _num(s.hausdorff),
                    "value_distance": _num(s.value_distance),
                    "gradient_distance": _num(s.gradient_distance),
                }
                for s in self.per_step
            ],
            "failures": [f.as_dict() for f in self.failures],
        }

    def csv(self) -> str:
        rows = [(s.index, _num(s.hausdorff), _num(s.value_distance), _num(s.gradient_distance)) for s in self.per_step]
        return _csv(("n", "hausdorff", "value_distance", "gradient_distance"), rows)


def _mosco_step(args) -> tuple[MoscoStep, CaseFailure | None]:
    n, k, limit, ref, f, spec, res = args
    try:
        hd = hausdorff_distance(k, limit, res).distance
    except Exception as exc:  # noqa: BLE001 - recorded, study continues
        return MoscoStep(n, None, None, None), _failure(f"n={n}", "hausdorff", exc)
    try:
        mesh = triangulate(spec.with_scatterer(k))
    except Exception as exc:  # noqa: BLE001
        return MoscoStep(n, hd, None, None), _failure(f"n={n}", "mesh", exc)
    try:
        u = solve_elliptic(mesh, f)
        dv, dg = l2_distance_extended(u, ref, res)
    except Exception as exc:  # noqa: BLE001
        return MoscoStep(n, hd, None, None), _failure(f"n={n}", "solve", exc)
    return MoscoStep(n, hd, dv, dg), None


def mosco_diagnostic(
    seq: ScattererSequence,
    f: SourceTerm,
    spec_template: DomainSpec,
    background_resolution: float,
    rhs_description: str | None = None,
    realization_angle: float | None = 1.0,
    jobs: int = 1,
) -> MoscoDiagnosticReport:
    """Distances between ``u(K_n, f)`` and ``u(K, f)`` for ``-Lap u + u = f``.

    Both solutions are extended by zero inside the scatterers.  When
    ``realization_angle`` is set, the limit problem is also solved on an
    independent mesh (see :func:`rotated_realization`) and the distance
    between the two realizations is reported as the discretisation floor.
    """
    if rhs_description is None:
        rhs_description = f.describe() if hasattr(f, "describe") else repr(f)
    spec = spec_template.with_scatterer(seq.limit)
    ref = solve_elliptic(triangulate(spec), f)
    norm = math.hypot(*ref.h1_parts())
    floor = None
    failures = []
    if realization_angle is not None:
        try:
            alt = solve_elliptic(rotated_realization(spec, realization_angle), f)
            floor = l2_distance_extended(alt, ref, background_resolution)
        except Exception as exc:  # noqa: BLE001
            failures.append(_failure("limit", "realization", exc))
    tasks = [(n, k, seq.limit, ref, f, spec_template, background_resolution) for n, k in enumerate(seq.members)]
    out = parallel_map(_mosco_step, tasks, jobs)
    steps = tuple(s for s, _ in out)
    failures += [e for _, e in out if e is not None]
    return MoscoDiagnosticReport(rhs_description, steps, norm, floor, tuple(failures), seq.description)


# ---------------------------------------------------------------------------
# screens
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScreenStudyReport:
    screen: Scatterer
    thicknesses: tuple[float, ...]
    farfields: tuple[FarFieldPattern | None, ...]
    cauchy_deltas: tuple[float | None, ...]
    wavenumber: float
    direction: tuple[float, float]
    failures: tuple[CaseFailure, ...] = ()

    def __post_init__(self):
        h = self.thicknesses
        if any(not b < a for a, b in zip(h, h[1:])):
            raise ValueError("thicknesses must be strictly decreasing")
        if any(d is not None and d < 0 for d in self.cauchy_deltas):
            raise ValueError("Cauchy differences must be non-negative")

    @property
    def strictly_decreasing(self) -> bool:
        d = self.cauchy_deltas
        return all(x is not None for x in d) and all(b < a for a, b in zip(d, d[1:]))

    def as_dict(self) -> dict:
        from .geometry import to_json_dict

        return {
            "study": "screen",
            "screen": to_json_dict(self.screen),
            "wavenumber": self.wavenumber,
            "direction": list(self.direction),
            "thicknesses": list(self.thicknesses),
            "farfield_l2_norms": [None if f is None else _num(f.l2_norm()) for f in self.farfields],
            "cauchy_deltas": [_num(d) for d in self.cauchy_deltas],
            "strictly_decreasing": self.strictly_decreasing,
            "failures": [f.as_dict() for f in self.failures],
        }

    def csv(self) -> str:
        rows = []
        for i, h in enumerate(self.thicknesses):
            f = self.farfields[i]
            d = self.cauchy_deltas[i] if i < len(self.cauchy_deltas) else None
            rows.append((i, h, None if f is None else f.l2_norm(), _num(d)))
        return _csv(("k", "h", "farfield_l2", "delta"), rows)


def _screen_step(args) -> tuple[FarFieldPattern | None, CaseFailure | None]:
    i, screen, h, wave, spec, n_modes = args
    case = f"h={h!r}"
    try:
        kh = thicken(screen, h)
    except Exception as exc:  # noqa: BLE001
        return None, _failure(case, "thicken", exc)
    try:
        mesh = triangulate(spec.with_scatterer(kh))
    except Exception as exc:  # noqa: BLE001
        return None, _failure(case, "mesh", exc)
    try:
        dtn = make_dtn(wave.wavenumber, spec.truncation_radius, n_modes)
        us = HelmholtzSystem(mesh, dtn).scatter(wave.direction)
        return far_field(us, dtn), None
    except Exception as exc:  # noqa: BLE001
        return None, _failure(case, "solve", exc)


def screen_approximation_study(
    screen: Scatterer,
    h_list: Sequence[float],
    wave: PlaneWave,
    spec_template: DomainSpec,
    n_modes: int | None = None,
    jobs: int = 1,
) -> ScreenStudyReport:
    """Far fields of the thickenings ``K_h`` and their consecutive differences."""
    if screen.loops or not screen.screens:
        raise ValueError("screen study expects a scatterer made of screens only")
    h_list = tuple(float(h) for h in h_list)
    if not h_list:
        raise ValueError("h_list is empty")
    if any(not b < a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly decreasing")
    tasks = [(i, screen, h, wave, spec_template, n_modes) for i, h in enumerate(h_list)]
    out = parallel_map(_screen_step, tasks, jobs)
    ffs = tuple(f for f, _ in out)
    deltas = tuple(
        None if a is None or b is None else far_field_distance(b, a) for a, b in zip(ffs, ffs[1:])
    )
    failures = tuple(e for _, e in out if e is not None)
    return ScreenStudyReport(screen, h_list, ffs, deltas, wave.wavenumber, wave.direction, failures)


# ---------------------------------------------------------------------------
# uniform bound and decay sweeps
# ---------------------------------------------------------------------------


def perturbed_polygons(
    count: int, n_sides: int = 6, radius: float = 0.5, jitter: float = 0.15, seed: int = 0, bounding_radius: float = 1.0
) -> list[Scatterer]:
    """Regular polygons with independently jittered vertex radii and angles."""
    rng = np.random.default_rng(seed)
    out = []
    base = 2 * math.pi * np.arange(n_sides) / n_sides
    for _ in range(count):
        r = radius * (1.0 + jitter * rng.uniform(-1.0, 1.0, n_sides))
        t = base + jitter * (math.pi / n_sides) * rng.uniform(-1.0, 1.0, n_sides)
        out.append(polygon(np.column_stack([r * np.cos(t), r * np.sin(t)]), bounding_radius))
    return out


def wave_grid(k_lo: float, k_hi: float, n_k: int, n_d: int) -> tuple[list[float], list[float]]:
    """Equispaced wavenumbers in ``[k_lo, k_hi]`` and ``n_d`` equispaced angles."""
    if not 0 < k_lo < k_hi:
        raise ValueError("wavenumber interval requires 0 < k_lo < k_hi")
    if n_k < 1 or n_d < 1:
        raise ValueError("grid sizes must be positive")
    ks = [k_lo] if n_k == 1 else np.linspace(k_lo, k_hi, n_k).tolist()
    angles = (2 * math.pi * np.arange(n_d) / n_d).tolist()
    return ks, angles


def _family_radius(family: Sequence[Scatterer]) -> float:
    return max(k.bounding_radius for k in family)


def _solve_member(args) -> tuple[list[dict], list[CaseFailure]]:
    """All (k, d) cases for one scatterer; the mesh is shared across them."""
    idx, k_set, ks, angles, spec, radius, n_modes, decay = args
    rows, fails = [], []
    try:
        mesh = triangulate(spec.with_scatterer(k_set))
    except Exception as exc:  # noqa: BLE001
        return rows, [_failure(f"scatterer={idx}", "mesh", exc)]
    for k in ks:
        try:
            dtn = make_dtn(k, spec.truncation_radius, n_modes)
            system = HelmholtzSystem(mesh, dtn)
        except Exception as exc:  # noqa: BLE001
            fails.append(_failure(f"scatterer={idx} k={k!r}", "factor", exc))
            continue
        for a in angles:
            d = (math.cos(a), math.sin(a))
            case = f"scatterer={idx} k={k!r} d_angle={a!r}"
            try:
                us = system.scatter(d)
                row = {"scatterer_id": idx, "k": k, "d_angle": a}
                if decay is None:
                    row["l2_norm_total_field"] = total_field_l2_norm(us, k, d, radius)
                else:
                    r_min, r_max, n_radii, n_angles = decay
                    rep = decay_check(far_field(us, dtn), dtn, r_min, r_max, n_radii, n_angles)
                    row["E1_hat"] = rep.E1_hat
                    row["flatness"] = rep.flatness
                rows.append(row)
            except Exception as exc:  # noqa: BLE001
                fails.append(_failure(case, "solve", exc))
    return rows, fails


@dataclass(frozen=True)
class SweepReport:
    family_description: str
    k_grid: tuple[float, ...]
    d_grid: tuple[float, ...]
    per_case: tuple[dict, ...]
    E_hat: float | None
    norm_radius: float
    failures: tuple[CaseFailure, ...] = ()

    def __post_init__(self):
        vals = [c["l2_norm_total_field"] for c in self.per_case]
        expect = max(vals) if vals else None
        if expect != self.E_hat:
            raise ValueError("E_hat must equal the maximum over per_case")

    def as_dict(self) -> dict:
        return {
            "study": "sweep",
            "family_description": self.family_description,
            "k_grid": list(self.k_grid),
            "d_grid": list(self.d_grid),
            "norm_radius": self.norm_radius,
            "per_case": [dict(c) for c in self.per_case],
            "E_hat": _num(self.E_hat),
            "failures": [f.as_dict() for f in self.failures],
        }

    def csv(self) -> str:
        rows = [(c["scatterer_id"], c["k"], c["d_angle"], c["l2_norm_total_field"]) for c in self.per_case]
        return _csv(("scatterer_id", "k", "d_angle", "l2_norm_total_field"), rows)


def _run_family(family, ks, angles, spec, radius, n_modes, decay, jobs):
    tasks = [(i, k, ks, angles, spec, radius, n_modes, decay) for i, k in enumerate(family)]
    out = parallel_map(_solve_member, tasks, jobs)
    rows = [r for rs, _ in out for r in rs]
    fails = [f for _, fs in out for f in fs]
    return rows, fails


def uniform_bound_sweep(
    family: Sequence[Scatterer],
    k_lo: float,
    k_hi: float,
    n_k: int,
    n_d: int,
    spec_template: DomainSpec,
    family_description: str = "",
    n_modes: int | None = None,
    jobs: int = 1,
) -> SweepReport:
    """``max ||u_{K,k,d}||_{L2(B_{R+1})}`` over the family and the wave grid.

    ``R`` is the largest bounding radius in the family and the truncation
    radius of ``spec_template`` must be at least ``R + 1``; the total field is
    zero inside the scatterers.
    """
    family = list(family)
    if not family:
        raise ValueError("family is empty")
    radius = _family_radius(family) + 1.0
    if spec_template.truncation_radius < radius - 1e-12:
        raise ValueError(f"truncation radius must be at least R + 1 = {radius}")
    ks, angles = wave_grid(k_lo, k_hi, n_k, n_d)
    rows, fails = _run_family(family, ks, angles, spec_template, radius, n_modes, None, jobs)
    e_hat = max((r["l2_norm_total_field"] for r in rows), default=None)
    return SweepReport(family_description, tuple(ks), tuple(angles), tuple(rows), e_hat, radius, tuple(fails))


@dataclass(frozen=True)
class DecayStudyReport:
    family_description: str
    annulus: tuple[float, float]
    per_case: tuple[dict, ...]
    E1_hat: float | None
    worst_flatness: float | None
    failures: tuple[CaseFailure, ...] = ()

    def argmax(self) -> dict | None:
        if not self.per_case:
            return None
        return max(self.per_case, key=lambda c: c["E1_hat"])

    def as_dict(self) -> dict:
        return {
            "study": "decay",
            "family_description": self.family_description,
            "r_min": self.annulus[0],
            "r_max": self.annulus[1],
            "per_case": [{k: _num(v) if isinstance(v, float) else v for k, v in c.items()} for c in self.per_case],
            "E1_hat": _num(self.E1_hat),
            "worst_flatness": _num(self.worst_flatness),
            "failures": [f.as_dict() for f in self.failures],
        }

    def csv(self) -> str:
        rows = [(c["scatterer_id"], c["k"], c["d_angle"], c["E1_hat"], _num(c["flatness"])) for c in self.per_case]
        return _csv(("scatterer_id", "k", "d_angle", "E1_hat", "flatness"), rows)


def decay_uniformity_study(
    family: Sequence[Scatterer],
    wave_grid_spec: tuple[float, float, int, int],
    spec_template: DomainSpec,
    annulus: tuple[float, float],
    n_radii: int = 25,
    n_angles: int = 360,
    family_description: str = "",
    n_modes: int | None = None,
    jobs: int = 1,
) -> DecayStudyReport:
    """Family-wide maximum of the decay constant over ``r_min <= r <= r_max``."""
    family = list(family)
    if not family:
        raise ValueError("family is empty")
    r_min, r_max = map(float, annulus)
    big_r = _family_radius(family)
    if r_min < big_r + 2:
        raise ValueError(f"r_min={r_min} must be at least R + 2 = {big_r + 2}")
    if r_min < spec_template.truncation_radius:
        raise ValueError(f"r_min={r_min} lies inside the truncation circle R1 = {spec_template.truncation_radius}")
    ks, angles = wave_grid(*wave_grid_spec)
    decay = (r_min, r_max, n_radii, n_angles)
    rows, fails = _run_family(family, ks, angles, spec_template, None, n_modes, decay, jobs)
    e1 = max((r["E1_hat"] for r in rows), default=None)
    flat = max((r["flatness"] for r in rows), default=None)
    return DecayStudyReport(family_description, (r_min, r_max), tuple(rows), e1, flat, tuple(fails))


__all__ = [
    "CONSTANT_SOURCE",
    "COORDINATE_SOURCE",
    "CaseFailure",
    "DecayStudyReport",
    "LinearSource",
    "MoscoDiagnosticReport",
    "MoscoStep",
    "ScattererSequence",
    "ScreenStudyReport",
    "SweepReport",
    "decay_uniformity_study",
    "dumps_report",
    "mosco_diagnostic",
    "parallel_map",
    "perturbed_polygons",
    "rotated_realization",
    "screen_approximation_study",
    "uniform_bound_sweep",
    "wave_grid",
]
