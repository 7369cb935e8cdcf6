"""Plane waves, far-field patterns, exterior evaluation and decay measurement.

The scattered field outside the truncation circle is represented by its
trace modes ``c_n`` on ``r = R1``::

    u_s(r, theta) = sum_n c_n H_n(k r) / H_n(k R1) exp(i n theta)

and the far-field pattern uses the normalisation

    u_s(x) ~ exp(i k r) / sqrt(r) * F(theta),
    F(theta) = sum_n g_n exp(i n theta),
    g_n = sqrt(2 / (pi k)) exp(-i pi / 4) (-i)^n c_n / H_n(k R1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import ComplexField, DtnOperator, FieldRole, trace_modes
from .specfun import hankel1_orders

FAR_FIELD_SAMPLES = 360


@dataclass(frozen=True)
class PlaneWave:
    wavenumber: float
    direction: tuple[float, float]
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.wavenumber > 0:
            raise ValueError("wavenumber must be positive")
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (2,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector in the plane")
        object.__setattr__(self, "direction", (float(d[0]), float(d[1])))
        if self.interval is not None:
            lo, hi = self.interval
            if not (0 < lo < hi and lo <= self.wavenumber <= hi):
                raise ValueError(f"wavenumber {self.wavenumber} outside [{lo}, {hi}]")

    @classmethod
    def from_angle(cls, k: float, angle: float, interval=None) -> "PlaneWave":
        return cls(k, (math.cos(angle), math.sin(angle)), interval)

    @property
    def angle(self) -> float:
        return math.atan2(self.direction[1], self.direction[0])


def incident_field(w: PlaneWave, x) -> tuple[np.ndarray, np.ndarray]:
    """``exp(i k x.d)`` and its gradient ``i k d exp(i k x.d)`` at points ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    d = np.asarray(w.direction)
    val = np.exp(1j * w.wavenumber * (x @ d))
    grad = 1j * w.wavenumber * val[:, None] * d[None, :]
    return val, grad


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    wavenumber: float
    radius: float
    modes: np.ndarray  # g_n, n = -N..N
    trace_modes: np.ndarray  # c_n, n = -N..N
    samples: np.ndarray

    @property
    def mode_cutoff(self) -> int:
        return (len(self.modes) - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        n = self.mode_cutoff
        return np.arange(-n, n + 1)

    @property
    def angles(self) -> np.ndarray:
        return 2 * math.pi * np.arange(len(self.samples)) / len(self.samples)

    def __call__(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.exp(1j * np.outer(theta, self.orders)) @ self.modes

    def l2_norm(self) -> float:
        """``||F||_{L2(S^1)}`` from the modes (Parseval)."""
        return math.sqrt(2 * math.pi * float(np.sum(np.abs(self.modes) ** 2)))

    def cross_section(self) -> float:
        return self.l2_norm() ** 2

    def extinction(self, direction) -> float:
        """Optical-theorem prediction of the cross-section for incidence ``direction``."""
        ang = math.atan2(direction[1], direction[0])
        fwd = complex(self(ang)[0])
        return math.sqrt(8 * math.pi / self.wavenumber) * (np.exp(-1j * math.pi / 4) * fwd).imag

    def csv(self) -> str:
        lines = ["theta,re,im,abs"]
        for t, v in zip(self.angles.tolist(), self.samples.tolist()):
            lines.append(f"{t!r},{v.real!r},{v.imag!r},{abs(v)!r}")
        return "\n".join(lines) + "\n"


def far_field_distance(a: FarFieldPattern, b: FarFieldPattern) -> float:
    """``||F_a - F_b||_{L2(S^1)}`` by the trapezoid rule on the sample grid."""
    if len(a.samples) != len(b.samples):
        raise ValueError("far fields sampled on different grids")
    diff = a.samples - b.samples
    return math.sqrt(float(np.sum(np.abs(diff) ** 2)) * 2 * math.pi / len(diff))


def _hankel_signed(n_modes: int, x: float) -> np.ndarray:
    h, _ = hankel1_orders(n_modes, x)
    neg = h[:0:-1] * np.where(np.arange(n_modes, 0, -1) % 2, -1.0, 1.0)
    return np.concatenate([neg, h])


def far_field(u_s: ComplexField, dtn: DtnOperator, n_samples: int = FAR_FIELD_SAMPLES) -> FarFieldPattern:
    """Far-field pattern from the outer-circle trace modes of a scattered field."""
    if u_s.role is not FieldRole.SCATTERED_FIELD:
        raise ValueError("far_field expects a scattered field")
    if abs(u_s.mesh.radius - dtn.radius) > 1e-9 * dtn.radius:
        raise ValueError("field mesh radius does not match the DtN radius")
    c = trace_modes(u_s, dtn.mode_cutoff)
    return pattern_from_trace(c, dtn, n_samples)


def pattern_from_trace(c: np.ndarray, dtn: DtnOperator, n_samples: int = FAR_FIELD_SAMPLES) -> FarFieldPattern:
    k, r1, n = dtn.wavenumber, dtn.radius, dtn.mode_cutoff
    if len(c) != 2 * n + 1:
        raise ValueError("trace mode count does not match the DtN cutoff")
    orders = np.arange(-n, n + 1)
    h = _hankel_signed(n, k * r1)
    g = math.sqrt(2 / (math.pi * k)) * np.exp(-1j * math.pi / 4) * (-1j) ** orders * c / h
    theta = 2 * math.pi * np.arange(n_samples) / n_samples
    samples = np.exp(1j * np.outer(theta, orders)) @ g
    for arr in (g, c, samples):
        arr.setflags(write=False)
    return FarFieldPattern(k, r1, g, np.asarray(c), samples)


def _on_circle(dtn: DtnOperator, c: np.ndarray, r: float, theta: np.ndarray) -> np.ndarray:
    n = dtn.mode_cutoff
    ratio = _hankel_signed(n, dtn.wavenumber * r) / _hankel_signed(n, dtn.wavenumber * dtn.radius)
    return np.exp(1j * np.outer(theta, np.arange(-n, n + 1))) @ (c * ratio)


def evaluate_exterior(f: FarFieldPattern, dtn: DtnOperator, x, trace: np.ndarray | None = None) -> np.ndarray:
    """Scattered field at points outside the truncation circle."""
    c = f.trace_modes if trace is None else np.asarray(trace, dtype=complex)
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    r = np.hypot(x[:, 0], x[:, 1])
    if np.any(r <= dtn.radius):
        raise ValueError("exterior evaluation requires |x| > R1")
    th = np.arctan2(x[:, 1], x[:, 0])
    out = np.empty(len(x), dtype=complex)
    radii, inv = np.unique(r, return_inverse=True)
    for i, rr in enumerate(radii):
        sel = inv == i
        out[sel] = _on_circle(dtn, c, float(rr), th[sel])
    return out


@dataclass(frozen=True)
class DecayReport:
    E1_hat: float
    flatness: float
    probe_radii: tuple[float, ...]
    profile: tuple[float, ...]
    r_min: float
    r_max: float
    n_radii: int
    n_angles: int

    def as_dict(self) -> dict:
        return {
            "E1_hat": self.E1_hat,
            "flatness": self.flatness,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n_radii": self.n_radii,
            "n_angles": self.n_angles,
        }


def decay_check(
    f: FarFieldPattern,
    dtn: DtnOperator,
    r_min: float,
    r_max: float,
    n_radii: int = 25,
    n_angles: int = 360,
    trace: np.ndarray | None = None,
    bounding_radius: float | None = None,
) -> DecayReport:
    """Measure ``max_theta sqrt(r) |u_s(r, theta)|`` over an annulus.

    ``E1_hat`` is the maximum of that profile and ``flatness`` its max/min
    ratio (1 for the zero field).
    """
    if bounding_radius is not None and r_min < bounding_radius + 2:
        raise ValueError(f"r_min={r_min} must be at least R + 2 = {bounding_radius + 2}")
    if not r_max > r_min:
        raise ValueError("r_max must exceed r_min")
    if r_min < dtn.radius:
        raise ValueError("decay probes must lie on or outside the truncation circle")
    c = f.trace_modes if trace is None else np.asarray(trace, dtype=complex)
    radii = np.linspace(r_min, r_max, n_radii)
    theta = 2 * math.pi * np.arange(n_angles) / n_angles
    prof = np.array([math.sqrt(r) * float(np.max(np.abs(_on_circle(dtn, c, float(r), theta)))) for r in radii])
    e1 = float(prof.max())
    if prof.max() <= 0.0:
        flat = 1.0
    else:
        flat = float(prof.max() / prof.min()) if prof.min() > 0.0 else math.inf
    return DecayReport(e1, flat, tuple(radii.tolist()), tuple(prof.tolist()), float(r_min), float(r_max), int(n_radii), int(n_angles))
