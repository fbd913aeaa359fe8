import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cachebounds import bounds as b
from cachebounds import gap as g
from cachebounds import oracle


def test_kbar_examples():
    assert g.kbar(10, 15) == 3
    assert g.kbar(10, 2) == 2
    assert g.kbar(4, 9) == 1


def test_restricted_lower_examples():
    assert g.r_lower_restricted(b.ProblemInstance(10, 15, 0)) == pytest.approx(2.71, abs=1e-12)
    w1 = g.omega(1, 10, 15)
    v = g.r_lower_restricted(b.ProblemInstance(10, 15, w1))
    assert v == pytest.approx(g.line(1, 10, w1), abs=1e-9)
    assert v == pytest.approx(g.line(2, 10, w1), abs=1e-9)


def test_corner_points_examples():
    cs = g.corner_points(10, 15, exact=True)
    assert cs.omegas[1] == Fraction(45, 14)
    assert cs.omegas[0] == 10 and cs.omegas[-1] == 0
    with pytest.raises(ValueError):
        g.omega(4, 10, 15)
    with pytest.raises(ValueError):
        g.CornerSet(10, 15, 3, (10, 2, 3, 0))


def test_line_intersection_n5():
    # 0.2 (5 - x) = 0.36 (5 - 2x)  =>  x = 20/13
    assert oracle.line_intersection(1, 5) == Fraction(20, 13)
    assert g.omega(1, 5, 5, exact=True) == Fraction(20, 13)


def test_piecewise_upper_examples():
    cs = g.corner_points(10, 15)
    for w in cs.omegas:
        assert g.piecewise_upper(cs, w) == pytest.approx(b.rate_upper_relaxed(b.ProblemInstance(10, 15, w)))
    assert g.piecewise_upper(cs, 10) == 0
    mid = (cs.omegas[0] + cs.omegas[1]) / 2
    ends = [b.rate_upper_relaxed(b.ProblemInstance(10, 15, w)) for w in cs.omegas[:2]]
    assert g.piecewise_upper(cs, mid) == pytest.approx(sum(ends) / 2)
    with pytest.raises(b.OutOfDomain):
        g.piecewise_upper(cs, 10.5)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_small_n_corner_ratio_bounded_by_n(n):
    for k in range(1, 30):
        assert g.corner_ratio_check(n, k) <= n + 1e-12


def test_corner_ratio_constants():
    c_zero, c_corner = g.analytic_constants()
    # the M = 0 corner
    for n in range(5, 120):
        for k in (n // 4, n, 3 * n):
            if k >= 1:
                assert g.corner_ratios(n, k)[-1] <= c_zero + 1e-9
    best, _ = g.corner_sweep(range(5, 80), range(1, 80))
    assert best < c_corner + 1e-3


def test_phi():
    assert g.phi(0) == 4.0
    z = -(5 / 4) * math.log(4 / 5)
    assert g.phi(z) == pytest.approx(4.607, abs=5e-4)
    assert g.monotonicity_check(np.arange(0, 10, 1e-3))
    assert not g.monotonicity_check([1.0, 0.5])
    with pytest.raises(ValueError):
        g.phi(-1)


def test_single_cell_ratio():
    r = g.gap_ratio_curve(5, 5, [1.0])[0]
    assert r == pytest.approx(b.convexified_rate_mn(b.ProblemInstance(5, 5, 1)) / 1.08)


def test_n_one_ratio_is_one():
    for k in (1, 2, 10):
        assert g.gap_ratio_curve(1, k, g.memory_grid(1, 64)) == pytest.approx(1.0, abs=1e-9)


def test_gap_sweep_report():
    rep = g.gap_sweep(range(1, 9), range(1, 9), 64)
    assert rep.cells_checked == 8 * 8 * 64
    assert 1.0 <= rep.max_ratio < g.GAP_CONSTANT
    n, k, m = rep.argmax
    assert rep.grid_pitch == n / 64
    assert g.gap_ratio_curve(n, k, [m])[0] == pytest.approx(rep.max_ratio)
    assert rep.as_dict()["argmax"] == {"n_files": n, "n_users": k, "memory": m}
    with pytest.raises(ValueError):
        g.gap_sweep([], [1])
    with pytest.raises(ValueError):
        g.gap_sweep([1], [1], lower="cutset")


def test_gap_requires_memory_below_n():
    with pytest.raises(b.OutOfDomain):
        g.gap_ratio_curve(3, 3, [3.0])


@given(st.integers(5, 200), st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_corner_consistency(n, k):
    cs = g.corner_points(n, k, exact=True)
    for j in range(1, cs.kbar):
        assert cs.omegas[j] == oracle.line_intersection(j, n)
        x = float(cs.omegas[j])
        assert abs(g.line(j, n, x) - g.line(j + 1, n, x)) < 1e-9
    assert all(a > c for a, c in zip(cs.omegas, cs.omegas[1:]))


@given(st.integers(1, 40), st.integers(1, 40))
@settings(max_examples=40, deadline=None)
def test_sandwich(n, k):
    m = np.linspace(0, n, 101)
    lower = g.r_lower_restricted_curve(n, k, m)
    uni = b.lower_uniform_curve(n, k, m)
    conv = b.convexified_rate_mn_curve(n, k, m)
    upper = g.piecewise_upper(g.corner_points(n, k), m)
    assert np.all(lower <= uni + 1e-9)
    assert np.all(uni <= conv + 1e-9)
    assert np.all(conv <= upper + 1e-9)


@given(st.integers(1, 40), st.integers(1, 40))
@settings(max_examples=40, deadline=None)
def test_endpoint_dominance(n, k):
    # at each corner the chord meets the relaxed upper bound, which dominates rate_mn
    cs = g.corner_points(n, k)
    for w in cs.omegas:
        inst = b.ProblemInstance(n, k, float(w))
        assert b.rate_mn(inst) <= g.piecewise_upper(cs, float(w)) + 1e-9
