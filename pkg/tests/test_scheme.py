import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cachebounds import bounds as b
from cachebounds import scheme as sc


def _setup(n, k, m, f, seed=0, mode="fixed", demands=None):
    rng = sc.trial_rng(seed, 0)
    files = sc.FileBits.random(n, f, rng)
    pl = sc.place_decentralized(b.ProblemInstance(n, k, m), f, mode, rng)
    d = sc.worst_distinct_demands(n, k) if demands is None else demands
    return files, pl, d


def test_fixed_placement_counts():
    _, pl, _ = _setup(2, 2, 1, 100_000)
    assert np.all(pl.cached.sum(axis=2) == 50_000)
    _, pl, _ = _setup(3, 2, 0, 100)
    assert not pl.cached.any()
    _, pl, _ = _setup(3, 2, 3, 100)
    assert pl.cached.all()
    _, pl, _ = _setup(3, 4, 1.3, 997)
    assert np.all(pl.cached.sum(axis=2) == math.floor(Fraction(1.3) * 997 / 3))


def test_bernoulli_placement_within_band():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, pl, _ = _setup(4, 4, 1, 50_000, mode="bernoulli")
    q = 1 / 4
    sd = math.sqrt(4 * 50_000 * q * (1 - q))
    assert np.all(np.abs(pl.cache_sizes() - 50_000) < 5 * sd)


def test_placement_rejects_bad_input():
    with pytest.raises(b.OutOfDomain):
        sc.place_decentralized(b.ProblemInstance(2, 2, 3), 10)
    with pytest.raises(ValueError):
        sc.place_decentralized(b.ProblemInstance(2, 17, 1), 10)
    with pytest.raises(ValueError):
        sc.place_decentralized(b.ProblemInstance(2, 2, 1), 10, "sometimes")


def test_single_user_coded_sends_uncached_bits():
    files, pl, d = _setup(3, 1, 1, 3000)
    tr = sc.coded_delivery(pl, files, d)
    assert len(tr.messages) == 1 and tr.messages[0].subset == 1
    missing = ~pl.cached[0, d[0]]
    assert np.array_equal(tr.messages[0].payload, files.bits[d[0], missing])
    assert tr.total_bits / 3000 == pytest.approx(1 - 1 / 3, abs=1e-3)


@pytest.mark.parametrize("strategy", sc.STRATEGIES)
def test_full_memory_empty_transcript(strategy):
    files, pl, d = _setup(3, 3, 3, 500)
    tr = sc.deliver(strategy, pl, files, d)
    assert tr.total_bits == 0 and tr.messages == ()
    assert sc.decode_all(pl, files, tr, d).success


def test_coded_one_message_per_subset():
    files, pl, d = _setup(3, 3, 1, 20_000)
    tr = sc.coded_delivery(pl, files, d)
    assert sorted(m.subset for m in tr.messages) == list(range(1, 8))
    assert all(m.payload.size > 0 for m in tr.messages)
    assert tr.total_bits == sum(m.payload.size for m in tr.messages)


def test_coded_rate_two_users():
    files, pl, d = _setup(2, 2, 1, 100_000)
    assert sc.coded_delivery(pl, files, d).total_bits / 100_000 == pytest.approx(0.75, rel=0.02)


def test_uncoded_all_files_requested():
    files, pl, d = _setup(4, 4, 1, 40_000)
    assert sc.uncoded_delivery(pl, files, d).total_bits / 40_000 == pytest.approx(3.0, rel=0.01)


def test_uncoded_shared_file_missing_fraction():
    files, pl, d = _setup(2, 2, 1, 200_000, mode="bernoulli", demands=[0, 0])
    q = 0.5
    assert sc.uncoded_delivery(pl, files, d).total_bits / 200_000 == pytest.approx(1 - q * q, abs=0.01)


def test_mds_shared_file_cost_is_max_missing():
    files, pl, d = _setup(2, 4, 1, 100_000, demands=[0, 0, 0, 0])
    tr = sc.mds_delivery(pl, files, d)
    assert tr.total_bits / 100_000 == pytest.approx(0.5, abs=0.01)
    assert sc.decode_all(pl, files, tr, d).success


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 5) for k in range(1, 5)])
def test_decodes_exhaustive_small(n, k):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = float(rng.choice([0, n / 4, n / 2, 3 * n / 4, n]))
        demands = rng.integers(0, n, size=k).tolist() if seed % 2 else None
        files, pl, d = _setup(n, k, m, 1000, seed, mode=("fixed", "bernoulli")[seed % 3 == 0], demands=demands)
        for s in sc.STRATEGIES:
            r = sc.decode_all(pl, files, sc.deliver(s, pl, files, d), d)
            assert r.success, (s, seed, r.detail)


@given(st.integers(1, 4), st.integers(1, 5), st.floats(0, 1), st.integers(16, 600),
       st.integers(0, 2 ** 31), st.sampled_from(sc.PLACEMENT_MODES))
@settings(max_examples=40, deadline=None)
def test_decodability_property(n, k, frac, f, seed, mode):
    rng = np.random.default_rng(seed)
    demands = rng.integers(0, n, size=k).tolist()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        files, pl, d = _setup(n, k, frac * n, f, seed, mode, demands)
    for s in sc.STRATEGIES:
        tr = sc.deliver(s, pl, files, d)
        assert sc.decode_all(pl, files, tr, d).success


@given(st.integers(1, 4), st.integers(1, 4), st.floats(0, 1), st.integers(1, 800), st.integers(0, 999))
@settings(max_examples=40, deadline=None)
def test_memory_compliance(n, k, frac, f, seed):
    m = frac * n
    _, pl, _ = _setup(n, k, m, f, seed)
    assert np.all(pl.cache_sizes() <= math.floor(m * f) + 1e-9)
    assert np.all(pl.cache_sizes() == n * math.floor(Fraction(m) * f / n))


@pytest.mark.parametrize("strategy", sc.STRATEGIES)
def test_corrupted_bit_fails_decode(strategy):
    files, pl, d = _setup(2, 3, 1, 4000, demands=[0, 0, 1])
    tr = sc.deliver(strategy, pl, files, d)
    msgs = list(tr.messages)
    bad = msgs[0].payload.copy()
    bad[0] ^= 1
    msgs[0] = sc.Message(msgs[0].subset, bad)
    broken = sc.DeliveryTranscript(tuple(msgs), tr.strategy, tr.piece_bits)
    r = sc.decode_all(pl, files, broken, d)
    assert not r.success and r.first_bad_subset is not None


def test_missing_message_fails_decode():
    files, pl, d = _setup(2, 2, 1, 4000)
    tr = sc.coded_delivery(pl, files, d)
    short = sc.DeliveryTranscript(tr.messages[1:], "coded")
    assert not sc.decode_all(pl, files, short, d).success


@pytest.mark.parametrize("strategy", sc.STRATEGIES)
def test_decoder_reads_only_cached_bits(strategy):
    files, pl, d = _setup(3, 3, 1.5, 2000, demands=[0, 0, 2])
    tr = sc.deliver(strategy, pl, files, d)
    noise = np.random.default_rng(9).integers(0, 2, files.bits.shape, dtype=np.uint8)
    scrambled = sc.FileBits(np.where(pl.cached.any(axis=0), files.bits, noise).astype(np.uint8))
    # every user's estimate must not depend on bits it does not cache
    for k in range(3):
        only_k = sc.FileBits(np.where(pl.cached[k], files.bits, noise).astype(np.uint8))
        est = sc.decode_all(pl, only_k, tr, d, check=False).estimates[k]
        assert np.array_equal(est, files.bits[d[k]])
    assert sc.decode_all(pl, scrambled, tr, d, check=False).success


def test_determinism_and_replay():
    inst = b.ProblemInstance(3, 3, 1)
    a = sc.empirical_rate(inst, 2000, 4, seed=11)
    c = sc.empirical_rate(inst, 2000, 4, seed=11)
    assert np.array_equal(a.rates, c.rates)
    t1 = sc.format_transcript(sc.coded_delivery(*_replay(inst, 11, 2)))
    t2 = sc.format_transcript(sc.coded_delivery(*_replay(inst, 11, 2)))
    assert t1 == t2 and t1.startswith("0x7 ")


def _replay(inst, seed, trial):
    rng = sc.trial_rng(seed, trial)
    files = sc.FileBits.random(inst.n_files, 2000, rng)
    pl = sc.place_decentralized(inst, 2000, "fixed", rng)
    return pl, files, sc.worst_distinct_demands(inst.n_files, inst.n_users)


def test_empirical_rate_full_memory_is_zero():
    r = sc.empirical_rate(b.ProblemInstance(4, 4, 4), 1000, 3)
    assert r.mean == 0 and r.analytic == 0 and r.decode_failures == 0


def test_many_users_two_files_min_branch():
    r = sc.empirical_rate(b.ProblemInstance(2, 8, 1), 100_000, 2)
    assert r.analytic == pytest.approx(1 - 2 ** -8)
    # zero padding over 255 subsets and 128-bit pieces cost a few percent at this F
    assert r.analytic - 0.01 < r.strategy_means["coded"] < 1.1
    assert r.strategy_means["mds"] == pytest.approx(1.0, abs=0.03)
    assert r.mean == pytest.approx(r.analytic, rel=0.02)
    assert r.decode_failures == 0


def test_demand_modes():
    rng = np.random.default_rng(0)
    assert sc.draw_demands("worst-distinct", 3, 5, rng) == [0, 1, 2, 0, 1]
    assert all(0 <= x < 3 for x in sc.draw_demands("iid-uniform", 3, 5, rng))
    p = b.RequestDistribution([0.0, 1.0, 0.0])
    assert sc.draw_demands("iid-given-p", 3, 4, rng, p) == [1, 1, 1, 1]
    with pytest.raises(ValueError):
        sc.draw_demands("iid-given-p", 3, 4, rng)
    with pytest.raises(ValueError):
        sc.empirical_rate(b.ProblemInstance(2, 2, 1), 10, 1, demand_mode="adversarial")


# --- single user ------------------------------------------------------------------

def _singletons(n):
    return b.SubsetRequestDistribution({(i,): Fraction(1, n) for i in range(n)}, n)


def test_single_user_sampling():
    py = _singletons(3)
    r = sc.simulate_single_user(py, 3, 1, 10_000, 10_000, seed=5)
    assert r.analytic == pytest.approx(2 / 3)
    assert r.decode_failures == 0
    sigma = math.sqrt((2 / 3) * (1 / 3) / 10_000)
    assert abs(r.mean - 2 / 3) <= 3 * sigma


def test_single_user_deterministic_request():
    py = b.SubsetRequestDistribution({(0, 2): 1}, 4)
    for m in (0, 0.3, 1.7, 3, 4):
        r = sc.simulate_single_user(py, 4, m, 1000, 5)
        assert r.stderr == 0
        assert abs(r.mean - r.analytic) <= 1 / 1000 + 1e-12


def test_single_user_zero_memory_is_expected_size():
    py = b.SubsetRequestDistribution({(): Fraction(1, 4), (0, 1): Fraction(1, 2), (2,): Fraction(1, 4)}, 3)
    r = sc.simulate_single_user(py, 3, 0, 64, 4000, seed=3)
    assert r.analytic == pytest.approx(1.25)
    assert r.mean == pytest.approx(1.25, abs=4 * r.stderr + 1e-12)


def test_prefix_cache_sizes_follow_popularity():
    py = b.SubsetRequestDistribution({(2,): Fraction(1, 2), (1, 2): Fraction(1, 2)}, 3)
    assert sc.prefix_cache_sizes(py, 1.5, 100).tolist() == [0, 50, 100]
