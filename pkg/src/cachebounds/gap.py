"""Multiplicative-gap machinery: restricted lower bound, its corner points,
the chordal upper bound through them, and numerical certification sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .bounds import (
    DEFAULT_SAMPLES,
    OutOfDomain,
    ProblemInstance,
    convexified_rate_mn_curve,
    lower_uniform_curve,
    rate_upper_relaxed_curve,
)

GAP_CONSTANT = 4.7


def kbar(n_files: int, n_users: int) -> int:
    return min(n_users, -(-n_files // 4))


def kappa(n_files: int, n_users: int) -> float:
    return min(float(n_users), n_files / 4)


def line(k: int, n_files: int, x, exact: bool = False):
    """The k-th piece (1 - (1-1/N)^k)(N - kx) of the uniform lower bound."""
    q = Fraction(n_files - 1, n_files) if exact else 1.0 - 1.0 / n_files
    return (1 - q ** k) * (n_files - k * x)


def omega(k: int, n_files: int, n_users: int, exact: bool = False):
    """Abscissa of the k-th corner of the restricted lower bound."""
    kb = kbar(n_files, n_users)
    if not 0 <= k <= kb:
        raise ValueError(f"corner index {k} outside [0, {kb}]")
    if k == 0:
        return Fraction(n_files) if exact else float(n_files)
    if k == kb:
        return Fraction(0) if exact else 0.0
    q = Fraction(n_files - 1, n_files) if exact else 1.0 - 1.0 / n_files
    qk = q ** k
    return n_files * qk / (n_files + (k + 1 - n_files) * qk)


@dataclass(frozen=True)
class CornerSet:
    n_files: int
    n_users: int
    kbar: int
    omegas: tuple

    def __post_init__(self):
        w = self.omegas
        if len(w) != self.kbar + 1:
            raise ValueError("need kbar + 1 corners")
        if w[0] != self.n_files or w[-1] != 0:
            raise ValueError("corners must run from N down to 0")
        if any(b >= a for a, b in zip(w, w[1:])):
            raise ValueError("corners must be strictly decreasing")


def corner_points(n_files: int, n_users: int, exact: bool = False) -> CornerSet:
    kb = kbar(n_files, n_users)
    w = tuple(omega(k, n_files, n_users, exact) for k in range(kb + 1))
    return CornerSet(n_files, n_users, kb, w)


def r_lower_restricted_curve(n_files: int, n_users: int, memories) -> np.ndarray:
    return lower_uniform_curve(n_files, kbar(n_files, n_users), memories)


def r_lower_restricted(inst: ProblemInstance) -> float:
    return float(r_lower_restricted_curve(inst.n_files, inst.n_users, inst.memory)[0])


def piecewise_upper(corners: CornerSet, memory):
    """Chord of the relaxed upper bound through consecutive corner abscissas."""
    m = np.asarray(memory, dtype=float)
    if np.any(m < 0) or np.any(m > corners.n_files):
        raise OutOfDomain(f"memory must lie in [0, {corners.n_files}]")
    xs = np.array([float(w) for w in reversed(corners.omegas)])
    ys = rate_upper_relaxed_curve(corners.n_files, corners.n_users, xs)
    out = np.interp(m, xs, ys)
    return float(out) if out.ndim == 0 else out


def corner_ratios(n_files: int, n_users: int) -> list[float]:
    """R'_upper / R_lower at omega_0..omega_kbar; omega_0 = N uses the limit 1."""
    cs = corner_points(n_files, n_users)
    w = np.array([float(x) for x in cs.omegas[1:]])
    num = piecewise_upper(cs, w)
    den = r_lower_restricted_curve(n_files, n_users, w)
    assert np.all(den > 0), "restricted lower bound vanishes below M = N"
    return [1.0] + (num / den).tolist()


def corner_ratio_check(n_files: int, n_users: int) -> float:
    return max(corner_ratios(n_files, n_users))


def analytic_constants() -> tuple[float, float]:
    """Bounds on the corner ratio at M = 0 and at the interior corners (N >= 5)."""
    c_zero = 1.0 / (1.0 - math.exp(-0.25))
    nu = 1.25
    c_corner = nu ** nu * (1.0 + nu * math.log(nu) / (nu ** nu - 1.0)) ** 2
    return c_zero, c_corner


def phi(z):
    """e^z (1 + z/(e^z - 1))^2, with the limit value 4 at z = 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("phi is defined for z >= 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(z > 0, z / np.expm1(np.where(z > 0, z, 1.0)), 1.0)
    out = np.exp(z) * (1.0 + ratio) ** 2
    return float(out) if out.ndim == 0 else out


def monotonicity_check(grid) -> bool:
    return bool(np.all(np.diff(phi(np.asarray(grid, dtype=float))) >= 0))


@dataclass(frozen=True)
class GapReport:
    max_ratio: float
    argmax: tuple[int, int, float]
    cells_checked: int
    grid_pitch: float

    def as_dict(self) -> dict:
        n, k, m = self.argmax
        return {
            "max_ratio": self.max_ratio,
            "argmax": {"n_files": n, "n_users": k, "memory": m},
            "cells_checked": self.cells_checked,
            "grid_pitch": self.grid_pitch,
        }


def memory_grid(n_files: int, grid_points: int) -> np.ndarray:
    """grid_points uniformly spaced memories on [0, N), excluding M = N."""
    return n_files * np.arange(grid_points) / grid_points


def gap_ratio_curve(n_files: int, n_users: int, memories, samples: int = DEFAULT_SAMPLES,
                    lower: str = "uniform") -> np.ndarray:
    """Convexified decentralized rate divided by a lower bound."""
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    if np.any(m >= n_files):
        raise OutOfDomain("ratio is taken over M in [0, N)")
    num = convexified_rate_mn_curve(n_files, n_users, m, samples)
    if lower == "uniform":
        den = lower_uniform_curve(n_files, n_users, m)
    elif lower == "restricted":
        den = r_lower_restricted_curve(n_files, n_users, m)
    else:
        raise ValueError(f"unknown lower bound {lower!r}")
    assert np.all(den > 0), "lower bound vanishes below M = N"
    return num / den


def gap_sweep(n_range: Iterable[int], k_range: Iterable[int], grid_points: int = 512,
              samples: int = DEFAULT_SAMPLES, lower: str = "uniform") -> GapReport:
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    n_range, k_range = list(n_range), list(k_range)
    if not n_range or not k_range:
        raise ValueError("ranges must be nonempty")
    best, where, pitch, cells = -math.inf, None, 0.0, 0
    for n in n_range:
        grid = memory_grid(n, grid_points)
        for k in k_range:
            ratios = gap_ratio_curve(n, k, grid, samples, lower)
            cells += ratios.size
            i = int(np.argmax(ratios))
            if ratios[i] > best:
                best, where, pitch = float(ratios[i]), (n, k, float(grid[i])), n / grid_points
    return GapReport(best, where, cells, pitch)


def corner_sweep(n_range: Iterable[int], k_range: Iterable[int]) -> tuple[float, tuple[int, int]]:
    best, where = -math.inf, None
    for n in n_range:
        for k in k_range:
            r = corner_ratio_check(n, k)
            if r > best:
                best, where = r, (n, k)
    return best, where
