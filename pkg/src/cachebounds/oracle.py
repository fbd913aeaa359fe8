"""Exact-arithmetic and brute-force reference computations.

Nothing here calls the double-precision code paths it is meant to check.
The one exception is :func:`run_verification`, which imports the main
modules and compares them against these references.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

Rational = Fraction


def _pos(x: Fraction) -> Fraction:
    return x if x > 0 else Fraction(0)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _telescoped(s: Sequence[Fraction], shift: Fraction) -> Fraction:
    """sum_n (s_n - s_{n+1}) (n - shift)^+ with s_{N+1} = 0."""
    ext = list(s) + [Fraction(0)]
    return sum(((ext[i] - ext[i + 1]) * _pos(i + 1 - shift) for i in range(len(s))), Fraction(0))


def _avg(n, k_users, m, p):
    p = sorted((_frac(x) for x in p), reverse=True)
    if len(p) != n:
        raise ValueError("distribution size does not match n_files")
    return max(_telescoped([1 - (1 - x) ** k for x in p], k * m) for k in range(1, k_users + 1))


def _uniform(n, k_users, m, _):
    q = Fraction(n - 1, n)
    return max((1 - q ** k) * _pos(n - k * m) for k in range(1, k_users + 1))


def _cutset(n, k_users, m, _):
    return max(_pos(k - Fraction(k, n // k) * m) for k in range(1, min(k_users, n) + 1))


def _rate_mn(n, k_users, m, _):
    if not 0 <= m <= n:
        raise ValueError("memory outside [0, N]")
    if m == 0:
        return Fraction(min(k_users, n))
    return (n - m) * min((1 - (1 - m / n) ** k_users) / m, Fraction(1))


def _upper_relaxed(n, k_users, m, _):
    if m == 0:
        return Fraction(min(k_users, n))
    return (n - m) * min(1 / m, Fraction(1))


def _single_user(n, _k, m, s):
    s = sorted((_frac(x) for x in s), reverse=True)
    return _telescoped(s, m)


def _prefix(n, _k, m, s):
    s = sorted((_frac(x) for x in s), reverse=True)
    whole, frac = math.floor(m), m - math.floor(m)
    total = sum(s[whole + 1:], Fraction(0))
    if whole < len(s):
        total += (1 - frac) * s[whole]
    return total


FORMULAS: dict[str, Callable] = {
    "lower_avg": _avg,
    "lower_uniform": _uniform,
    "lower_cutset": _cutset,
    "rate_mn": _rate_mn,
    "upper_relaxed": _upper_relaxed,
    "single_user": _single_user,
    "prefix_cache": _prefix,
}


def exact_bound_eval(formula_id: str, n_files: int, n_users: int, memory, dist=None) -> Fraction:
    """Evaluate a closed form in rationals; ``dist`` is p_D or the s-profile."""
    if formula_id not in FORMULAS:
        raise ValueError(f"unknown formula {formula_id!r}; choose from {sorted(FORMULAS)}")
    return FORMULAS[formula_id](n_files, n_users, _frac(memory), dist)


def envelope_bruteforce(samples) -> list[tuple[float, float]]:
    """Lowest chord value over all sample pairs bracketing each abscissa. O(n^3)."""
    xs = np.array([float(x) for x, _ in samples])
    ys = np.array([float(y) for _, y in samples])
    if xs.size < 2:
        raise ValueError("need at least 2 samples")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("sample memories must be strictly increasing")
    i, j = np.triu_indices(xs.size, k=1)
    out = []
    for m, (x, y) in enumerate(zip(xs, ys)):
        sel = (xs[i] <= x) & (x <= xs[j])
        a, b = i[sel], j[sel]
        t = (x - xs[a]) / (xs[b] - xs[a])
        chords = (1 - t) * ys[a] + t * ys[b]
        out.append((float(x), float(min(y, chords.min()))))
    return out


def line_intersection(k: int, n_files: int) -> Fraction:
    """Where the k-th and (k+1)-th lower-bound lines cross, solved directly."""
    q = Fraction(n_files - 1, n_files)
    a, b = 1 - q ** k, 1 - q ** (k + 1)
    # a (N - k x) = b (N - (k+1) x)
    slope = b * (k + 1) - a * k
    assert slope != 0, "parallel lines"
    return n_files * (b - a) / slope


def inclusion_exact(support: dict, n_files: int) -> list[Fraction]:
    s = [Fraction(0)] * n_files
    for subset, prob in support.items():
        for i in subset:
            s[i] += _frac(prob)
    return s


def prefix_expectation_direct(support: dict, n_files: int, memory) -> Fraction:
    """E over Y of the bits missing from a most-popular-first prefix cache."""
    m = _frac(memory)
    s = inclusion_exact(support, n_files)
    order = sorted(range(n_files), key=lambda i: -s[i])
    whole, frac = math.floor(m), m - math.floor(m)
    missing = [Fraction(1)] * n_files
    for rank, f in enumerate(order):
        if rank < whole:
            missing[f] = Fraction(0)
        elif rank == whole:
            missing[f] = 1 - frac
    return sum((_frac(p) * sum((missing[i] for i in y), Fraction(0)) for y, p in support.items()), Fraction(0))


def prefix_identity_check(support: dict, n_files: int, memory, module_fns=None) -> bool:
    """Prefix caching cost equals the optimal-rate formula, exactly.

    Checks three routes: the two closed forms evaluated here, the direct
    expectation over Y, and (when ``module_fns`` is given) the library's own
    generic-arithmetic implementations fed with rationals.
    """
    m = _frac(memory)
    if not 0 <= m <= n_files:
        raise ValueError("memory outside [0, N]")
    s = inclusion_exact(support, n_files)
    a = _single_user(n_files, 1, m, s)
    b = _prefix(n_files, 1, m, s)
    c = prefix_expectation_direct(support, n_files, m)
    ok = a == b == c
    if module_fns is not None:
        marginals, optimal, prefix = module_fns
        prof = marginals(support, n_files)
        ok = ok and optimal(prof, m) == a and prefix(prof, m) == a
    return ok


def expected_rate_exhaustive(n_files: int, n_users: int, memory, probs) -> Fraction:
    """Exact expected uncoded cost for the pooled-cache decoder of all users.

    The users' caches are merged into one of size K*M filled most-popular
    first. Every demand tuple in [N]^K is enumerated with product weights.
    """
    if n_files ** n_users > 10 ** 6:
        raise ValueError("instance too large for exhaustive enumeration")
    p = [_frac(x) for x in probs]
    pooled = n_users * _frac(memory)
    order = sorted(range(n_files), key=lambda i: -p[i])
    whole = math.floor(pooled)
    frac = pooled - whole
    missing = [Fraction(1)] * n_files
    for rank, f in enumerate(order):
        if rank < whole:
            missing[f] = Fraction(0)
        elif rank == whole:
            missing[f] = 1 - frac
    total = Fraction(0)
    for d in itertools.product(range(n_files), repeat=n_users):
        w = math.prod((p[i] for i in d), start=Fraction(1))
        total += w * sum((missing[i] for i in set(d)), Fraction(0))
    return total


def random_subset_distribution(rng: random.Random, n_files: int, max_support: int = 6) -> dict:
    """Sparse rational p_Y over subsets of range(n_files)."""
    n_sup = rng.randint(1, min(max_support, 2 ** n_files))
    subsets = set()
    while len(subsets) < n_sup:
        subsets.add(frozenset(i for i in range(n_files) if rng.random() < 0.5))
    weights = [rng.randint(1, 12) for _ in subsets]
    total = sum(weights)
    return {y: Fraction(w, total) for y, w in zip(sorted(subsets, key=sorted), weights)}


# --- verification gate ------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _rel_ok(approx: float, exact: Fraction, tol: float = 1e-12) -> bool:
    e = float(exact)
    return abs(approx - e) <= tol * max(1.0, abs(e))


def run_verification(seed: int = 2016) -> list[Check]:
    """Every derived constant and identity the library relies on."""
    from . import bounds as b
    from . import gap as g

    checks: list[Check] = []

    def add(name, passed, detail):
        checks.append(Check(name, bool(passed), detail))

    v = exact_bound_eval("lower_uniform", 5, 5, 1)
    add("lower_uniform(5,5,1)", v == Fraction(27, 25) and _rel_ok(b.lower_uniform(b.ProblemInstance(5, 5, 1)), v),
        f"exact {v}")
    v = exact_bound_eval("lower_cutset", 5, 5, 1)
    add("lower_cutset(5,5,1)", v == 1 and _rel_ok(b.lower_cutset(b.ProblemInstance(5, 5, 1)), v), f"exact {v}")
    v = exact_bound_eval("rate_mn", 2, 2, 1)
    add("rate_mn(2,2,1)", v == Fraction(3, 4) and _rel_ok(b.rate_mn(b.ProblemInstance(2, 2, 1)), v), f"exact {v}")
    p = [Fraction(3, 4), Fraction(1, 4)]
    v = exact_bound_eval("lower_avg", 2, 2, Fraction(1, 2), p)
    add("lower_avg(2,2,1/2;3/4,1/4)",
        v == Fraction(5, 8) and _rel_ok(b.lower_avg(b.ProblemInstance(2, 2, 0.5), b.RequestDistribution([0.75, 0.25])), v),
        f"exact {v}")
    s = b.inclusion_coefficients(b.RequestDistribution([0.75, 0.25]), 2).values
    add("inclusion_coefficients((3/4,1/4),2)", s == (0.9375, 0.4375), f"{s}")
    v = line_intersection(1, 10)
    add("line_intersection(1,10)", v == Fraction(45, 14), f"exact {v}")
    v = line_intersection(1, 5)
    add("line_intersection(1,5)", v == Fraction(20, 13), f"exact {v}")

    bad = [(n, k) for n in range(5, 51) for k in range(1, g.kbar(n, n))
           if g.omega(k, n, n, exact=True) != line_intersection(k, n)]
    add("line_intersection", not bad, f"closed-form corners vs solver, N in [5,50]; mismatches {bad[:3]}")

    rng = random.Random(seed)
    fails = 0
    for _ in range(200):
        n = rng.randint(1, 8)
        sup = random_subset_distribution(rng, n)
        m = Fraction(rng.randint(0, 4 * n), 4)
        fns = (lambda sp, nf: b.inclusion_marginals(b.SubsetRequestDistribution(sp, nf)),
               b.single_user_optimal_rate, b.prefix_cache_rate)
        if not prefix_identity_check(sup, n, m, fns):
            fails += 1
    add("prefix_identity", fails == 0, f"200 random p_Y, N <= 8, quarter-integer M; failures {fails}")

    worst = 0.0
    for _ in range(100):
        n = rng.randint(2, 64)
        xs = np.cumsum([rng.uniform(0.05, 1.0) for _ in range(n)])
        ys = [rng.uniform(0, 10) for _ in range(n)]
        pts = list(zip(xs.tolist(), ys))
        env = b.convex_envelope(pts)
        ref = envelope_bruteforce(pts)
        worst = max(worst, max(abs(env(x) - y) for x, y in ref))
    add("envelope_bruteforce", worst <= 1e-9, f"100 random curves, max deviation {worst:.3e}")

    worst_rel, misses = 0.0, 0
    for n in range(1, 7):
        pz = [Fraction(i + 1, n * (n + 1) // 2) for i in range(n)]
        dist = b.RequestDistribution([float(x) for x in pz])
        for k in range(1, 7):
            for m in (Fraction(0), Fraction(1, 3), Fraction(1), Fraction(n, 2), Fraction(n)):
                inst = b.ProblemInstance(n, k, float(m))
                pairs = [
                    (b.lower_uniform(inst), exact_bound_eval("lower_uniform", n, k, m)),
                    (b.lower_cutset(inst), exact_bound_eval("lower_cutset", n, k, m)),
                    (b.rate_mn(inst), exact_bound_eval("rate_mn", n, k, m)),
                    (b.rate_upper_relaxed(inst), exact_bound_eval("upper_relaxed", n, k, m)),
                    (b.lower_avg(inst, dist), exact_bound_eval("lower_avg", n, k, m, pz)),
                ]
                for approx, exact in pairs:
                    e = float(exact)
                    worst_rel = max(worst_rel, abs(approx - e) / max(1.0, abs(e)))
                    misses += not _rel_ok(approx, exact)
    add("float_vs_rational", misses == 0, f"N, K <= 6; worst relative error {worst_rel:.3e}")

    pooled_ok = True
    for n, k, m, pz in [(2, 2, Fraction(1, 2), [Fraction(3, 4), Fraction(1, 4)]),
                        (3, 2, Fraction(1, 2), [Fraction(1, 3)] * 3),
                        (3, 3, Fraction(1, 3), [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]),
                        (4, 2, Fraction(3, 4), [Fraction(1, 4)] * 4)]:
        direct = expected_rate_exhaustive(n, k, m, pz)
        s_k = [1 - (1 - x) ** k for x in sorted(pz, reverse=True)]
        pooled_ok &= direct == _telescoped(s_k, k * m)
    add("expected_rate_exhaustive", pooled_ok and expected_rate_exhaustive(2, 2, Fraction(1, 2), p) == Fraction(7, 16),
        "pooled-cache enumeration vs inclusion-coefficient formula")
    return checks
