"""Bessel and Hankel functions of integer order for real positive arguments.

Three evaluation regimes are used:

* backward (Miller) recurrence for ``J`` normalised by
  ``J_0 + 2 * sum_k J_2k = 1``, with ``Y_0`` and ``Y_1`` from the Neumann
  series over the same ``J_2k`` values;
* Hankel asymptotic expansions for ``J_0, J_1, Y_0, Y_1`` once
  ``x >= 50 * max(1, n)``;
* forward recurrence for ``Y`` (always stable) and, in the asymptotic
  regime, for ``J`` as well (stable while ``n < x``).

Derivatives follow from ``Z_n' = (Z_{n-1} - Z_{n+1}) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 200
ASYMPTOTIC_FACTOR = 50.0
EULER_GAMMA = 0.57721566490153286061

_RESCALE_AT = 1e250


class BesselDomainError(ValueError):
    """Raised for arguments outside the supported domain."""


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    j: float
    y: float
    jp: float
    yp: float

    @property
    def wronskian(self) -> float:
        return self.j * self.yp - self.jp * self.y


def _check(nmax: int, x: float) -> None:
    if not (x > 0.0) or not math.isfinite(x):
        raise BesselDomainError(f"argument must be positive and finite, got {x!r}")
    if nmax > MAX_ORDER:
        raise BesselDomainError(f"order {nmax} beyond supported cutoff {MAX_ORDER}")


def _miller_start(nmax: int, x: float) -> int:
    top = max(float(nmax), x)
    m = int(top + 30.0 + 8.0 * top ** (1.0 / 3.0))
    return m + (m % 2)


def _j_miller(nmax: int, x: float) -> np.ndarray:
    """J_0..J_m(x) by normalised backward recurrence, m >= nmax + 1."""
    m = _miller_start(nmax + 1, x)
    j = np.zeros(m + 2)
    j[m + 1] = 0.0
    j[m] = 1e-300
    for k in range(m, 0, -1):
        j[k - 1] = (2.0 * k / x) * j[k] - j[k + 1]
        if abs(j[k - 1]) > _RESCALE_AT:
            j[k - 1 :] /= _RESCALE_AT
    norm = j[0] + 2.0 * np.sum(j[2::2])
    return j / norm


def _jy_miller(nmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """J and Y for orders 0..nmax+1."""
    j = _j_miller(nmax, x)
    m = len(j) - 1
    log_term = math.log(x / 2.0) + EULER_GAMMA
    kk = np.arange(1, (m - 1) // 2 + 1)
    signs = np.where(kk % 2 == 0, 1.0, -1.0)
    y0 = (2.0 / math.pi) * log_term * j[0] - (4.0 / math.pi) * np.sum(signs * j[2 * kk] / kk)
    y1 = (
        -(2.0 / math.pi) * j[0] / x
        + (2.0 / math.pi) * log_term * j[1]
        + (2.0 / math.pi) * np.sum(signs * (j[2 * kk - 1] - j[2 * kk + 1]) / kk)
    )
    y = _forward_y(nmax + 1, x, y0, y1)
    return j[: nmax + 2].copy(), y


def _forward_y(top: int, x: float, y0: float, y1: float) -> np.ndarray:
    y = np.empty(top + 1)
    y[0] = y0
    if top >= 1:
        y[1] = y1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, top):
            y[k + 1] = (2.0 * k / x) * y[k] - y[k - 1]
    return y


def _pq(n: int, x: float) -> tuple[float, float]:
    mu = 4.0 * n * n
    p, q = 1.0, 0.0
    term = 1.0
    prev = math.inf
    for k in range(1, 60):
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > prev:
            break
        prev = abs(term)
        # terms alternate P, Q, P, Q with sign pattern (+,-,-,+)
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
        if abs(term) < 1e-17:
            break
    return p, q


def _jy_asymptotic(nmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    amp = math.sqrt(2.0 / (math.pi * x))
    jy = []
    for n in (0, 1):
        p, q = _pq(n, x)
        chi = x - (0.5 * n + 0.25) * math.pi
        c, s = math.cos(chi), math.sin(chi)
        jy.append((amp * (p * c - q * s), amp * (p * s + q * c)))
    top = nmax + 1
    j = np.empty(top + 1)
    j[0], j[1] = jy[0][0], jy[1][0]
    for k in range(1, top):
        j[k + 1] = (2.0 * k / x) * j[k] - j[k - 1]
    y = _forward_y(top, x, jy[0][1], jy[1][1])
    return j, y


def bessel_jy_orders(nmax: int, x: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """J_n, Y_n, J_n', Y_n' for n = 0..nmax at a single argument ``x``."""
    nmax = int(nmax)
    if nmax < 0:
        raise BesselDomainError("nmax must be non-negative")
    x = float(x)
    _check(nmax, x)
    if x >= ASYMPTOTIC_FACTOR * max(1, nmax + 1):
        j, y = _jy_asymptotic(nmax, x)
    else:
        j, y = _jy_miller(nmax, x)
    jp = np.empty(nmax + 1)
    yp = np.empty(nmax + 1)
    jp[0], yp[0] = -j[1], -y[1]
    if nmax >= 1:
        jp[1:] = 0.5 * (j[: nmax] - j[2 : nmax + 2])
        with np.errstate(over="ignore", invalid="ignore"):
            yp[1:] = 0.5 * (y[: nmax] - y[2 : nmax + 2])
    return j[: nmax + 1], y[: nmax + 1], jp, yp


def bessel_jy(n: int, x: float) -> BesselEval:
    """J_n(x), Y_n(x) and their derivatives for integer ``n``, ``x > 0``.

    Negative orders use ``Z_{-n} = (-1)^n Z_n`` for Z in {J, Y}.
    """
    n = int(n)
    _check(abs(n), float(x))
    j, y, jp, yp = bessel_jy_orders(abs(n), x)
    sign = -1.0 if (n < 0 and n % 2) else 1.0
    a = abs(n)
    return BesselEval(n, float(x), sign * j[a], sign * y[a], sign * jp[a], sign * yp[a])


def hankel1(n: int, x: float) -> tuple[complex, complex]:
    """H_n^(1)(x) and its derivative."""
    b = bessel_jy(n, x)
    return complex(b.j, b.y), complex(b.jp, b.yp)


def hankel1_orders(nmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """H_n^(1)(x) and H_n^(1)'(x) for n = 0..nmax."""
    j, y, jp, yp = bessel_jy_orders(nmax, x)
    return j + 1j * y, jp + 1j * yp
