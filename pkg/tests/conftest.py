"""Shared fixtures and independent oracles (scipy-based, never the package's own kernels)."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import h1vp, hankel1, jvp

from hardscatter.geometry import disk, polygon, regular_polygon, unit_square
from hardscatter.mesh import DomainSpec, triangulate
from hardscatter.solver import make_dtn, solve_helmholtz_scattering

MIE_ORDERS = 60


def mie_coefficients(k: float, a: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(MIE_ORDERS + 1)
    eps = np.where(n == 0, 1.0, 2.0)
    return n, eps * jvp(n, k * a) / h1vp(n, k * a)


def mie_scattered(k: float, x: np.ndarray, a: float = 1.0) -> np.ndarray:
    """Sound-hard disk, incidence along +x."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    r = np.hypot(x[:, 0], x[:, 1])
    th = np.arctan2(x[:, 1], x[:, 0])
    n, c = mie_coefficients(k, a)
    out = np.zeros(len(x), dtype=complex)
    for m in n:
        out -= c[m] * 1j**m * hankel1(m, k * r) * np.cos(m * th)
    return out


def mie_far_field(k: float, theta: np.ndarray, a: float = 1.0) -> np.ndarray:
    n, c = mie_coefficients(k, a)
    return -np.sqrt(2 / (np.pi * k)) * np.exp(-1j * np.pi / 4) * (np.cos(np.outer(theta, n)) @ c)


def hexagon(radius: float = 0.5):
    return polygon(regular_polygon(6, radius), 1.0)


@pytest.fixture(scope="session")
def mie_solution():
    """FEM solution of the disk benchmark (k=2, d=(1,0), R1=3, 30 modes, h=0.05)."""
    mesh = triangulate(DomainSpec(disk(1.0, 512), 3.0, 0.05))
    dtn = make_dtn(2.0, 3.0, 30)
    us = solve_helmholtz_scattering(mesh, 2.0, (1.0, 0.0), dtn)
    return mesh, dtn, us


@pytest.fixture(scope="session")
def square_mesh():
    return triangulate(DomainSpec(unit_square(), 3.0, 0.1))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
