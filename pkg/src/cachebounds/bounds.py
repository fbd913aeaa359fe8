"""Closed-form converse and achievability bounds for coded caching.

Memory is measured in file units throughout. File indices in the Python API
are 0-based; ``labels`` arrays map sorted positions back to the caller's
original indices.

Scalar functions take a :class:`ProblemInstance`; the ``*_curve`` variants
take ``(n_files, n_users, memories)`` and evaluate a whole grid at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
DEFAULT_SAMPLES = 1024


class OutOfDomain(ValueError):
    """Memory outside the range on which an achievability formula is defined."""


@dataclass(frozen=True)
class ProblemInstance:
    n_files: int
    n_users: int
    memory: float = 0.0

    def __post_init__(self):
        if int(self.n_files) != self.n_files or self.n_files < 1:
            raise ValueError(f"n_files must be a positive integer, got {self.n_files}")
        if int(self.n_users) != self.n_users or self.n_users < 1:
            raise ValueError(f"n_users must be a positive integer, got {self.n_users}")
        if not (self.memory >= 0) or not math.isfinite(self.memory):
            raise ValueError(f"memory must be finite and >= 0, got {self.memory}")

    def with_memory(self, memory) -> "ProblemInstance":
        return ProblemInstance(self.n_files, self.n_users, memory)


class RequestDistribution:
    """Per-file request probabilities, stored sorted nonincreasing.

    ``probs[i]`` is the probability of original file ``labels[i]``.
    """

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(-p, kind="stable")
        self.probs = p[order]
        self.labels = order
        self.probs.flags.writeable = False
        self.labels.flags.writeable = False

    @classmethod
    def uniform(cls, n_files: int) -> "RequestDistribution":
        return cls(np.full(n_files, 1.0 / n_files))

    @classmethod
    def zipf(cls, n_files: int, exponent: float) -> "RequestDistribution":
        w = np.arange(1, n_files + 1, dtype=float) ** (-float(exponent))
        return cls(w / w.sum())

    @property
    def n_files(self) -> int:
        return self.probs.size

    def __repr__(self):
        return f"RequestDistribution({self.probs.tolist()})"


class SubsetRequestDistribution:
    """Sparse distribution over subsets of the file library.

    Keys are frozensets of 0-based file indices; the empty set is allowed.
    Probabilities may be floats or :class:`fractions.Fraction`.
    """

    def __init__(self, support: Mapping[Iterable[int], Real], n_files: int):
        if n_files < 1:
            raise ValueError("n_files must be >= 1")
        table: dict[frozenset, Real] = {}
        for subset, prob in support.items():
            key = frozenset(int(i) for i in subset)
            if key in table:
                raise ValueError(f"duplicate subset {sorted(key)}")
            bad = [i for i in key if not 0 <= i < n_files]
            if bad:
                raise ValueError(f"file index {bad[0]} outside [0, {n_files})")
            if not prob > 0:
                raise ValueError(f"probability of {sorted(key)} must be positive")
            table[key] = prob
        total = sum(table.values())
        if abs(total - 1) > PROB_TOL * max(1, len(table)):
            raise ValueError(f"probabilities sum to {total}, not 1")
        self.support = table
        self.n_files = n_files

    def items(self):
        return self.support.items()

    def expected_size(self):
        return sum(p * len(y) for y, p in self.support.items())


@dataclass(frozen=True)
class InclusionProfile:
    """Inclusion probabilities ``s[n]`` sorted nonincreasing, ``s[N] = 0`` implied."""

    values: tuple
    labels: tuple

    def __post_init__(self):
        v = self.values
        if any(not (0 <= x <= 1 + PROB_TOL) for x in v):
            raise ValueError("inclusion coefficients must lie in [0, 1]")
        if any(v[i] < v[i + 1] for i in range(len(v) - 1)):
            raise ValueError("inclusion coefficients must be nonincreasing")

    def __len__(self):
        return len(self.values)

    @classmethod
    def sorted_from(cls, values: Sequence) -> "InclusionProfile":
        order = sorted(range(len(values)), key=lambda i: -values[i])
        return cls(tuple(values[i] for i in order), tuple(order))


@dataclass(frozen=True)
class RateCurve:
    """Piecewise-linear nonincreasing rate curve given by its breakpoints."""

    memories: np.ndarray
    rates: np.ndarray
    convex: bool = False

    def __post_init__(self):
        m = np.array(self.memories, dtype=float)
        r = np.array(self.rates, dtype=float)
        if m.ndim != 1 or m.shape != r.shape or m.size < 1:
            raise ValueError("memories and rates must be equal-length vectors")
        if np.any(np.diff(m) <= 0):
            raise ValueError("breakpoint memories must be strictly increasing")
        if np.any(r < 0):
            raise ValueError("rates must be nonnegative")
        m.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "memories", m)
        object.__setattr__(self, "rates", r)

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.memories.tolist(), self.rates.tolist()))

    def slopes(self) -> np.ndarray:
        return np.diff(self.rates) / np.diff(self.memories)

    def __call__(self, memory):
        return eval_curve(self, memory)


# --- request statistics -----------------------------------------------------

def inclusion_coefficients(p: RequestDistribution, k: int) -> InclusionProfile:
    """Probability that each file is requested by at least one of ``k`` users."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    s = 1.0 - (1.0 - p.probs) ** k
    return InclusionProfile(tuple(s.tolist()), tuple(p.labels.tolist()))


def inclusion_marginals(py: SubsetRequestDistribution, n_files: int | None = None) -> InclusionProfile:
    n = py.n_files if n_files is None else n_files
    s = [0] * n
    for subset, prob in py.items():
        for i in subset:
            if not 0 <= i < n:
                raise ValueError(f"file index {i} outside [0, {n})")
            s[i] = s[i] + prob
    return InclusionProfile.sorted_from(s)


# --- converse bounds ----------------------------------------------------------

def _weighted_clamp_matrix(s: np.ndarray, users: np.ndarray, memories: np.ndarray) -> np.ndarray:
    """sum_n (s[k,n] - s[k,n+1]) * (n - k M)^+ for each row k and memory M."""
    n_files = s.shape[1]
    drops = s - np.concatenate([s[:, 1:], np.zeros((s.shape[0], 1))], axis=1)
    n = np.arange(1, n_files + 1, dtype=float)
    gaps = np.maximum(n[None, :, None] - users[:, None, None] * memories[None, None, :], 0.0)
    return np.einsum("kn,knm->km", drops, gaps)


def argmax_k(values: Sequence[float]) -> int:
    """1-based index of the first (smallest) maximizer."""
    return int(np.argmax(np.asarray(values))) + 1


def lower_avg_terms(inst: ProblemInstance, p: RequestDistribution) -> np.ndarray:
    if p.n_files != inst.n_files:
        raise ValueError("distribution size does not match n_files")
    ks = np.arange(1, inst.n_users + 1, dtype=float)
    s = 1.0 - (1.0 - p.probs[None, :]) ** ks[:, None]
    return _weighted_clamp_matrix(s, ks, np.array([float(inst.memory)]))[:, 0]


def lower_avg(inst: ProblemInstance, p: RequestDistribution) -> float:
    return float(lower_avg_terms(inst, p).max())


def lower_avg_argmax(inst: ProblemInstance, p: RequestDistribution) -> tuple[float, int]:
    terms = lower_avg_terms(inst, p)
    return float(terms.max()), argmax_k(terms)


def lower_avg_curve(n_files: int, n_users: int, memories, p: RequestDistribution) -> np.ndarray:
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    ks = np.arange(1, n_users + 1, dtype=float)
    s = 1.0 - (1.0 - p.probs[None, :]) ** ks[:, None]
    return _weighted_clamp_matrix(s, ks, m).max(axis=0)


def uniform_terms(n_files: int, n_users: int, memories) -> np.ndarray:
    """Matrix of (1 - (1-1/N)^k)(N - kM)^+ with rows k = 1..K."""
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    ks = np.arange(1, n_users + 1, dtype=float)
    weight = -np.expm1(ks * math.log1p(-1.0 / n_files)) if n_files > 1 else np.ones_like(ks)
    return weight[:, None] * np.maximum(n_files - ks[:, None] * m[None, :], 0.0)


def lower_uniform_curve(n_files: int, n_users: int, memories) -> np.ndarray:
    return uniform_terms(n_files, n_users, memories).max(axis=0)


def lower_uniform(inst: ProblemInstance) -> float:
    return float(lower_uniform_curve(inst.n_files, inst.n_users, inst.memory)[0])


def lower_uniform_argmax(inst: ProblemInstance) -> tuple[float, int]:
    terms = uniform_terms(inst.n_files, inst.n_users, inst.memory)[:, 0]
    return float(terms.max()), argmax_k(terms)


def cutset_terms(n_files: int, n_users: int, memories) -> np.ndarray:
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    ks = np.arange(1, min(n_users, n_files) + 1)
    per = ks / (n_files // ks)
    return np.maximum(ks[:, None] - per[:, None] * m[None, :], 0.0)


def lower_cutset_curve(n_files: int, n_users: int, memories) -> np.ndarray:
    return cutset_terms(n_files, n_users, memories).max(axis=0)


def lower_cutset(inst: ProblemInstance) -> float:
    return float(lower_cutset_curve(inst.n_files, inst.n_users, inst.memory)[0])


def lower_cutset_argmax(inst: ProblemInstance) -> tuple[float, int]:
    terms = cutset_terms(inst.n_files, inst.n_users, inst.memory)[:, 0]
    return float(terms.max()), argmax_k(terms)


# --- achievability ------------------------------------------------------------

def _check_domain(n_files: int, m: np.ndarray):
    if np.any(m < 0) or np.any(m > n_files) or not np.all(np.isfinite(m)):
        raise OutOfDomain(f"memory must lie in [0, {n_files}]")


def rate_mn_curve(n_files: int, n_users: int, memories) -> np.ndarray:
    """Decentralized coded-caching rate; equals min{K, N} at M = 0."""
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    _check_domain(n_files, m)
    out = np.full(m.shape, float(min(n_users, n_files)))
    pos = m > 0
    mp = m[pos]
    # 1 - (1 - M/N)^K, kept accurate for tiny M
    with np.errstate(divide="ignore"):
        coded = -np.expm1(n_users * np.log1p(-mp / n_files)) / mp
    out[pos] = (n_files - mp) * np.minimum(coded, 1.0)
    return out


def rate_mn(inst: ProblemInstance) -> float:
    return float(rate_mn_curve(inst.n_files, inst.n_users, inst.memory)[0])


def rate_upper_relaxed_curve(n_files: int, n_users: int, memories) -> np.ndarray:
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    _check_domain(n_files, m)
    out = np.full(m.shape, float(min(n_users, n_files)))
    pos = m > 0
    mp = m[pos]
    out[pos] = (n_files - mp) / np.maximum(mp, 1.0)
    return out


def rate_upper_relaxed(inst: ProblemInstance) -> float:
    return float(rate_upper_relaxed_curve(inst.n_files, inst.n_users, inst.memory)[0])


# --- piecewise-linear curves --------------------------------------------------

def _turns_left(o, a, b) -> bool:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) > 0


def convex_envelope(samples: Sequence[tuple[float, float]]) -> RateCurve:
    """Lower convex envelope of ``(memory, rate)`` samples (monotone chain).

    Collinear interior points are dropped from the breakpoints.
    """
    pts = [(float(x), float(y)) for x, y in samples]
    if len(pts) < 2:
        raise ValueError("need at least 2 samples")
    if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
        raise ValueError("sample memories must be strictly increasing")
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2 and not _turns_left(hull[-2], hull[-1], p):
            hull.pop()
        hull.append(p)
    xs, ys = zip(*hull)
    return RateCurve(np.array(xs), np.array(ys), convex=True)


def eval_curve(curve: RateCurve, memory):
    m = np.asarray(memory, dtype=float)
    lo, hi = curve.memories[0], curve.memories[-1]
    if np.any(m < lo) or np.any(m > hi):
        raise OutOfDomain(f"memory outside curve range [{lo}, {hi}]")
    out = np.interp(m, curve.memories, curve.rates)
    return float(out) if out.ndim == 0 else out


def sample_grid(n_files: int, samples: int = DEFAULT_SAMPLES, extra=()) -> np.ndarray:
    """Uniform grid over [0, N] (endpoints exact) merged with extra abscissas."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    grid = np.linspace(0.0, float(n_files), samples)
    grid[-1] = float(n_files)
    extra = np.asarray(extra, dtype=float).ravel()
    extra = extra[(extra >= 0) & (extra <= n_files)]
    return np.unique(np.concatenate([grid, extra]))


def rate_mn_envelope(n_files: int, n_users: int, samples: int = DEFAULT_SAMPLES, extra=()) -> RateCurve:
    """Time-sharing (convexified) decentralized rate from a dense sampling."""
    xs = sample_grid(n_files, samples, extra)
    return convex_envelope(list(zip(xs, rate_mn_curve(n_files, n_users, xs))))


def convexified_rate_mn_curve(n_files: int, n_users: int, memories, samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Convexified rate at ``memories``; the query points join the sample set,
    so the result never exceeds the unconvexified rate at those points."""
    m = np.atleast_1d(np.asarray(memories, dtype=float))
    _check_domain(n_files, m)
    return np.atleast_1d(eval_curve(rate_mn_envelope(n_files, n_users, samples, extra=m), m))


def convexified_rate_mn(inst: ProblemInstance, samples: int = DEFAULT_SAMPLES) -> float:
    return float(convexified_rate_mn_curve(inst.n_files, inst.n_users, inst.memory, samples)[0])


# --- single user, multiple requests -------------------------------------------

def single_user_optimal_rate(s: InclusionProfile, memory):
    """sum_n (s_n - s_{n+1}) (n - M)^+ ; exact when inputs are Fractions."""
    v = s.values
    total = 0
    for n in range(1, len(v) + 1):
        nxt = v[n] if n < len(v) else 0
        gap = n - memory
        if gap > 0:
            total = total + (v[n - 1] - nxt) * gap
    return total


def prefix_cache_rate(s: InclusionProfile, memory):
    """Expected delivery cost when the most popular files are cached in order,
    with the fractional remainder taken from the next file."""
    n = len(s.values)
    if memory < 0 or memory > n:
        raise OutOfDomain(f"memory must lie in [0, {n}]")
    whole = math.floor(memory)
    frac = memory - whole
    rest = sum(s.values[whole + 1:], 0)
    if whole < n:
        rest = rest + (1 - frac) * s.values[whole]
    return rest


def to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)
