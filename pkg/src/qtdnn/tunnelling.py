"""Transmission through a one-dimensional rectangular potential barrier.

Natural units are used throughout: hbar = 1 and 2m = 1 (so m = 1/2). A barrier
is then fully described by its height ``v0`` and the dimensionless thickness
``s = sqrt(2 m v0) a / hbar``, which gives the physical width ``a = s / sqrt(v0)``.

The three closed forms for the transmission coefficient are

    E < v0:  T = 1 / (1 - beta sinh^2(kappa1 a))
    E > v0:  T = 1 / (1 + beta sin^2(kappa a))
    E = v0:  T = 1 / (1 + m a^2 v0 / (2 hbar^2))

with alpha = E - v0, beta = v0^2 / (4 E alpha), kappa1 = sqrt(-2 m alpha) / hbar
and kappa = sqrt(2 m alpha) / hbar. Note that beta < 0 below the barrier top, so
the first denominator is always >= 1.

Energies E <= 0 are mapped to T = 0 and dT/dE = 0, the limit as E -> 0+.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .errors import DomainError, UsageError

HBAR = 1.0
MASS = 0.5

#: Relative half-width of the window around E = v0 where the E = v0 limits are used.
BRANCH_TOLERANCE = 1e-12

# Below this |delta| the combination sin(d) - d cos(d) is summed as a series.
_SERIES_CUTOFF = 0.1


@dataclass(frozen=True)
class BarrierParams:
    """Rectangular barrier of height ``v0`` and dimensionless thickness ``s``."""

    v0: float = 1.0
    s: float = 0.5

    def __post_init__(self):
        for name in ("v0", "s"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise DomainError(f"barrier {name} must be a real number, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f"barrier {name} must be finite and > 0, got {value!r}")
        object.__setattr__(self, "v0", float(self.v0))
        object.__setattr__(self, "s", float(self.s))

    @property
    def width(self) -> float:
        """Physical barrier width ``a``."""
        return self.s * HBAR / math.sqrt(2.0 * MASS * self.v0)


def _check_energy(energy) -> np.ndarray:
    e = np.asarray(energy, dtype=float)
    if not np.all(np.isfinite(e)):
        raise DomainError("energy must be finite")
    return e


def _check_barrier(barrier) -> BarrierParams:
    if not isinstance(barrier, BarrierParams):
        raise DomainError(f"expected BarrierParams, got {type(barrier).__name__}")
    return barrier


def _wrap(result: np.ndarray, like: np.ndarray):
    return float(result) if like.ndim == 0 else result


@njit(cache=True)
def _sin_minus_dcos(d):
    """sin(d) - d cos(d), accurate for small d."""
    if abs(d) < _SERIES_CUTOFF:
        d2 = d * d
        return d * d2 * (1 / 3 - d2 * (1 / 30 - d2 * (1 / 840 - d2 * (1 / 45360 - d2 / 3991680))))
    return math.sin(d) - d * math.cos(d)


@njit(cache=True)
def _sinh_minus_dcosh(d):
    """sinh(d) - d cosh(d), accurate for small d."""
    if abs(d) < _SERIES_CUTOFF:
        d2 = d * d
        return -d * d2 * (1 / 3 + d2 * (1 / 30 + d2 * (1 / 840 + d2 * (1 / 45360 + d2 / 3991680))))
    return math.sinh(d) - d * math.cosh(d)


@njit(cache=True)
def _at_top(v0, a):
    """T and dT/dE exactly at E = v0."""
    m, hb = MASS, HBAR
    t = 1.0 / (1.0 + m * a * a * v0 / (2.0 * hb * hb))
    a2 = a * a
    a4 = a2 * a2
    dt = (4 * v0 * a4 * m * m + 6 * a2 * hb * hb * m) / (
        3 * v0 * v0 * a4 * m * m + 12 * v0 * a2 * hb * hb * m + 12 * hb**4
    )
    return t, dt


@njit(cache=True, error_model="numpy")
def _point(e, v0, a, eps):
    if e <= 0.0:
        return 0.0, 0.0
    alpha = e - v0
    if alpha < -eps:
        d1 = math.sqrt(-2.0 * MASS * alpha) / HBAR * a
        beta = v0 * v0 / (4.0 * e * alpha)
        sh = math.sinh(d1)
        sh2 = sh * sh
        t = 1.0 / (1.0 - beta * sh2)
        dt = -beta * (sh2 / e + sh * _sinh_minus_dcosh(d1) / alpha) * t * t
        # beta -> -inf as E -> 0+, where both limits are 0
        if not math.isfinite(t):
            t = 0.0
        if not math.isfinite(dt):
            dt = 0.0
    elif alpha > eps:
        d = math.sqrt(2.0 * MASS * alpha) / HBAR * a
        beta = v0 * v0 / (4.0 * e * alpha)
        sn = math.sin(d)
        sn2 = sn * sn
        t = 1.0 / (1.0 + beta * sn2)
        dt = beta * (sn2 / e + sn * _sin_minus_dcos(d) / alpha) * t * t
    else:
        t, dt = _at_top(v0, a)
    return min(max(t, 0.0), 1.0), dt


@njit(cache=True)
def _evaluate(energies, v0, a, eps):
    n = energies.size
    t = np.empty(n)
    dt = np.empty(n)
    for i in range(n):
        t[i], dt[i] = _point(energies[i], v0, a, eps)
    return t, dt


def evaluate_unchecked(energies: np.ndarray, barrier: BarrierParams) -> tuple[np.ndarray, np.ndarray]:
    """``(T, dT/dE)`` for a finite 1-d float64 array; no validation."""
    return _evaluate(energies, barrier.v0, barrier.width, BRANCH_TOLERANCE * barrier.v0)


def transmission_with_derivative(energy, barrier: BarrierParams):
    """Return ``(T, dT/dE)`` evaluated elementwise at ``energy``.

    Below the barrier top the first closed form is used, above it the second,
    and within ``BRANCH_TOLERANCE * v0`` of the top the E = v0 limits.
    """
    barrier = _check_barrier(barrier)
    e = _check_energy(energy)
    flat = np.ascontiguousarray(e, dtype=np.float64).ravel()
    t, dt = evaluate_unchecked(flat, barrier)
    return _wrap(t.reshape(e.shape), e), _wrap(dt.reshape(e.shape), e)


def transmission(energy, barrier: BarrierParams):
    """Transmission probability through ``barrier`` at ``energy``.

    Accepts a scalar (returns ``float``) or an array (returns ``ndarray``).
    Raises :class:`DomainError` for non-finite energies.
    """
    return transmission_with_derivative(energy, barrier)[0]


def transmission_derivative(energy, barrier: BarrierParams):
    """dT/dE at ``energy``; 0 for E <= 0."""
    return transmission_with_derivative(energy, barrier)[1]


def transmission_textbook(energy, barrier: BarrierParams):
    """Transmission written without beta, as found in most textbooks.

    Below the barrier top this is ``[1 + v0^2 sinh^2(kappa1 a) / (4 E (v0 - E))]^-1``,
    above it ``[1 + v0^2 sin^2(kappa a) / (4 E (E - v0))]^-1``. Used to cross-check
    the sign convention of :func:`transmission`.
    """
    barrier = _check_barrier(barrier)
    e = _check_energy(energy)
    v0, a = barrier.v0, barrier.width
    flat = np.atleast_1d(e).ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    ep = flat[pos]
    k = np.sqrt((2.0 * MASS * (ep - v0)).astype(complex)) / HBAR
    d = k * a
    # |sin(i x)|^2 = sinh^2(x); sinc -> 1 at d = 0
    with np.errstate(all="ignore"):
        ratio = np.where(d == 0, 1.0, np.abs(np.sin(d) / np.where(d == 0, 1.0, d)) ** 2)
        out[pos] = 1.0 / (1.0 + v0 * v0 * a * a * 2.0 * MASS / HBAR**2 / (4.0 * ep) * ratio)
    out = np.where(np.isfinite(out), out, 0.0)
    return _wrap(out.reshape(e.shape), e)


def barrier_curve(barrier: BarrierParams, energies: Sequence[float]) -> list[tuple[float, float]]:
    """Sample ``(E / v0, T)`` on an increasing, non-negative energy grid."""
    barrier = _check_barrier(barrier)
    grid = np.asarray(list(energies), dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise UsageError("energy grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise UsageError("energy grid values must be finite and >= 0")
    if np.any(np.diff(grid) <= 0):
        raise UsageError("energy grid must be strictly increasing")
    t = transmission(grid, barrier)
    return [(float(e / barrier.v0), float(ti)) for e, ti in zip(grid, t)]


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def write_curve_csv(rows: Sequence[tuple[float, float]], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["E_over_V0", "T"])
        for e, t in rows:
            writer.writerow([format_float(e), format_float(t)])
    return path


def read_curve_csv(path) -> list[tuple[float, float]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["E_over_V0", "T"]:
            raise UsageError(f"unexpected curve header {header!r}")
        return [(float(e), float(t)) for e, t in reader]
