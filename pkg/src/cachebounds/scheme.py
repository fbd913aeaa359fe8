"""Bit-exact simulation of decentralized coded caching and of prefix caching
for a single user who requests several files.

Deliveries produce a :class:`DeliveryTranscript` of broadcast messages.
:func:`decode_all` rebuilds every user's demanded file from its own cache
and the transcript, then compares the result with the original bits.

Three delivery strategies are available:

* ``coded``: one XOR message per user subset S, combining the subfiles
  V_{k, S minus k}.
* ``uncoded``: each requested file's bits that are missing at one or more
  of its requesters, sent in the clear.
* ``mds``: per requested file, a non-systematic Vandermonde code over
  GF(2^16). It lets each requester recover its missing bits from
  ``max_k |missing_k|`` coded bits, up to piece padding.

Random streams come from one root seed. Trial ``t`` uses
``SeedSequence(seed, spawn_key=(t,))``, so any trial can be replayed on its own.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import gf
from .bounds import (
    OutOfDomain,
    ProblemInstance,
    RequestDistribution,
    SubsetRequestDistribution,
    inclusion_marginals,
    rate_mn,
    single_user_optimal_rate,
)

DEFAULT_SEED = 20160117
PLACEMENT_MODES = ("fixed", "bernoulli")
DEMAND_MODES = ("worst-distinct", "iid-uniform", "iid-given-p")
STRATEGIES = ("coded", "uncoded", "mds")
MAX_USERS = 16
DEFAULT_PIECE_BITS = 128


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def _members(subset: int) -> list[int]:
    return [k for k in range(subset.bit_length()) if subset >> k & 1]


@dataclass(frozen=True)
class FileBits:
    bits: np.ndarray  # (N, F) of 0/1 uint8

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.shape[1] < 1:
            raise ValueError("bits must have shape (n_files, F) with F >= 1")

    @property
    def n_files(self) -> int:
        return self.bits.shape[0]

    @property
    def file_size(self) -> int:
        return self.bits.shape[1]

    @classmethod
    def random(cls, n_files: int, file_size: int, seed=None) -> "FileBits":
        rng = _as_rng(seed)
        return cls(rng.integers(0, 2, size=(n_files, file_size), dtype=np.uint8))


@dataclass(frozen=True)
class BitPlacement:
    cached: np.ndarray  # (K, N, F) bool
    mode: str

    @property
    def n_users(self) -> int:
        return self.cached.shape[0]

    @property
    def n_files(self) -> int:
        return self.cached.shape[1]

    @property
    def file_size(self) -> int:
        return self.cached.shape[2]

    def masks(self) -> np.ndarray:
        """(N, F) array whose entry is the bitmask of users caching that bit."""
        weights = (np.uint32(1) << np.arange(self.n_users, dtype=np.uint32))
        return np.tensordot(weights, self.cached.astype(np.uint32), axes=(0, 0)).astype(np.uint32)

    def cache_sizes(self) -> np.ndarray:
        return self.cached.sum(axis=(1, 2))


def place_decentralized(inst: ProblemInstance, file_size: int, mode: str = "fixed", seed=None) -> BitPlacement:
    """Each user independently caches a random M/N fraction of every file."""
    n, k, m = inst.n_files, inst.n_users, inst.memory
    if not 0 <= m <= n:
        raise OutOfDomain(f"memory must lie in [0, {n}]")
    if int(file_size) != file_size or file_size < 1:
        raise ValueError("file_size must be a positive integer")
    if k > MAX_USERS:
        raise ValueError(f"at most {MAX_USERS} users are supported")
    if mode not in PLACEMENT_MODES:
        raise ValueError(f"unknown placement mode {mode!r}")
    rng = _as_rng(seed)
    cached = np.zeros((k, n, file_size), dtype=bool)
    if mode == "fixed":
        per_file = math.floor(Fraction(m) * file_size / n)
        for user in range(k):
            for f in range(n):
                cached[user, f, rng.permutation(file_size)[:per_file]] = True
    else:
        q = m / n
        cached = rng.random((k, n, file_size)) < q
        sd = math.sqrt(n * file_size * q * (1 - q))
        dev = np.abs(cached.sum(axis=(1, 2)) - m * file_size)
        if sd > 0 and np.any(dev > 5 * sd):
            warnings.warn("bernoulli cache size more than 5 sd from M*F", RuntimeWarning)
    return BitPlacement(cached, mode)


@dataclass(frozen=True)
class Message:
    subset: int
    payload: np.ndarray  # 0/1 uint8


@dataclass(frozen=True)
class DeliveryTranscript:
    messages: tuple
    strategy: str
    piece_bits: int | None = None
    total_bits: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_bits", int(sum(m.payload.size for m in self.messages)))

    def by_subset(self) -> dict[int, np.ndarray]:
        return {m.subset: m.payload for m in self.messages}


def format_transcript(t: DeliveryTranscript) -> str:
    """One line per message: subset bitmask (hex), payload length, payload digest."""
    lines = []
    for m in t.messages:
        digest = hashlib.sha256(np.packbits(m.payload).tobytes()).hexdigest()[:16]
        lines.append(f"{m.subset:#x} {m.payload.size} {digest}")
    return "\n".join(lines) + ("\n" if lines else "")


def _groups(mask_row: np.ndarray) -> dict[int, np.ndarray]:
    """Bit positions grouped by mask value, ascending within each group."""
    order = np.argsort(mask_row, kind="stable")
    vals = mask_row[order]
    keys, starts = np.unique(vals, return_index=True)
    ends = np.append(starts[1:], vals.size)
    return {int(key): order[a:b] for key, a, b in zip(keys, starts, ends)}


_EMPTY = np.zeros(0, dtype=np.int64)


def _requesters(demands, n: int) -> int:
    return sum(1 << k for k, d in enumerate(demands) if d == n)


def _check_demands(placement: BitPlacement, demands):
    if len(demands) != placement.n_users:
        raise ValueError("need one demand per user")
    if any(not 0 <= d < placement.n_files for d in demands):
        raise ValueError("demand outside the file library")


def coded_delivery(placement: BitPlacement, files: FileBits, demands) -> DeliveryTranscript:
    _check_demands(placement, demands)
    masks = placement.masks()
    groups = {n: _groups(masks[n]) for n in set(demands)}
    subsets = sorted(range(1, 1 << placement.n_users), key=lambda s: (-bin(s).count("1"), s))
    messages = []
    for s in subsets:
        operands = []
        for k in _members(s):
            pos = groups[demands[k]].get(s & ~(1 << k), _EMPTY)
            operands.append(files.bits[demands[k], pos])
        length = max(op.size for op in operands)
        if length == 0:
            continue
        payload = np.zeros(length, dtype=np.uint8)
        for op in operands:
            payload[:op.size] ^= op
        messages.append(Message(s, payload))
    return DeliveryTranscript(tuple(messages), "coded")


def _missing_positions(mask_row: np.ndarray, requesters: int) -> np.ndarray:
    r = np.uint32(requesters)
    return np.flatnonzero((mask_row & r) != r)


def uncoded_delivery(placement: BitPlacement, files: FileBits, demands) -> DeliveryTranscript:
    _check_demands(placement, demands)
    masks = placement.masks()
    messages = []
    for n in sorted(set(demands)):
        r = _requesters(demands, n)
        pos = _missing_positions(masks[n], r)
        if pos.size:
            messages.append(Message(r, files.bits[n, pos].copy()))
    return DeliveryTranscript(tuple(messages), "uncoded")


def _piece_layout(mask_row: np.ndarray, requesters: int, piece_bits: int):
    """Split a file's missing bits into equal pieces, each from one missing-set class.

    Returns (piece classes, list of position chunks).
    """
    missing = np.uint32(requesters) & ~mask_row
    classes, chunks = [], []
    for cls, pos in sorted(_groups(missing).items()):
        if cls == 0:
            continue
        for a in range(0, pos.size, piece_bits):
            classes.append(cls)
            chunks.append(pos[a:a + piece_bits])
    return np.array(classes, dtype=np.int64), chunks


def _pieces_to_symbols(bit_rows, piece_bits: int) -> np.ndarray:
    flat = np.zeros(len(bit_rows) * piece_bits, dtype=np.uint8)
    for i, row in enumerate(bit_rows):
        flat[i * piece_bits: i * piece_bits + row.size] = row
    return gf.bits_to_symbols(flat).reshape(len(bit_rows), piece_bits // 16)


def mds_delivery(placement: BitPlacement, files: FileBits, demands,
                 piece_bits: int = DEFAULT_PIECE_BITS) -> DeliveryTranscript:
    _check_demands(placement, demands)
    if piece_bits < 16 or piece_bits % 16:
        raise ValueError("piece_bits must be a positive multiple of 16")
    masks = placement.masks()
    messages = []
    for n in sorted(set(demands)):
        r = _requesters(demands, n)
        if bin(r).count("1") == 1:
            pos = _missing_positions(masks[n], r)
            if pos.size:
                messages.append(Message(r, files.bits[n, pos].copy()))
            continue
        classes, chunks = _piece_layout(masks[n], r, piece_bits)
        if not chunks:
            continue
        if len(chunks) > gf.ORDER:
            raise ValueError("too many pieces for GF(2^16); increase piece_bits")
        unknown = max(int(np.count_nonzero(classes >> k & 1)) for k in _members(r))
        symbols = _pieces_to_symbols([files.bits[n, c] for c in chunks], piece_bits)
        nodes = np.arange(1, len(chunks) + 1)
        coded = gf.vandermonde_encode(nodes, symbols, unknown)
        messages.append(Message(r, gf.symbols_to_bits(coded)))
    return DeliveryTranscript(tuple(messages), "mds", piece_bits=piece_bits)


def deliver(strategy: str, placement: BitPlacement, files: FileBits, demands) -> DeliveryTranscript:
    if strategy == "coded":
        return coded_delivery(placement, files, demands)
    if strategy == "uncoded":
        return uncoded_delivery(placement, files, demands)
    if strategy == "mds":
        return mds_delivery(placement, files, demands)
    raise ValueError(f"unknown strategy {strategy!r}")


@dataclass
class DecodeResult:
    estimates: list
    success: bool
    first_bad_subset: int | None = None
    detail: str = ""


class _Failure(Exception):
    def __init__(self, subset, detail):
        super().__init__(detail)
        self.subset = subset
        self.detail = detail


def _decode_coded(k, placement, view, masks, groups, msgs, demands, truth):
    n = demands[k]
    est = view[n].copy()
    bit = 1 << k
    for t, pos in sorted(groups[n].items()):
        if t & bit:
            continue
        s = t | bit
        if s not in msgs:
            raise _Failure(s, f"user {k}: no message for subset {s:#x}")
        payload = msgs[s].copy()
        if payload.size < pos.size:
            raise _Failure(s, f"user {k}: message for subset {s:#x} too short")
        for j in _members(s):
            if j == k:
                continue
            opos = groups[demands[j]].get(s & ~(1 << j), _EMPTY)
            if not placement.cached[k, demands[j], opos].all():
                raise _Failure(s, f"user {k}: operand of user {j} not in cache")
            payload[:opos.size] ^= view[demands[j]][opos]
        est[pos] = payload[:pos.size]
        if truth is not None and not np.array_equal(est[pos], truth[n, pos]):
            raise _Failure(s, f"user {k}: subfile from subset {s:#x} decoded wrongly")
    return est


def _decode_filewise(k, placement, view, masks, msgs, demands, truth, transcript):
    n = demands[k]
    est = view[n].copy()
    r = _requesters(demands, n)
    coded = transcript.strategy == "mds" and bin(r).count("1") > 1
    if not coded:
        pos = _missing_positions(masks[n], r)
        if pos.size:
            if r not in msgs or msgs[r].size != pos.size:
                raise _Failure(r, f"user {k}: missing or malformed message for subset {r:#x}")
            est[pos] = msgs[r]
    else:
        pb = transcript.piece_bits
        classes, chunks = _piece_layout(masks[n], r, pb)
        if chunks:
            if r not in msgs:
                raise _Failure(r, f"user {k}: no message for subset {r:#x}")
            coded_syms = gf.bits_to_symbols(msgs[r]).reshape(-1, pb // 16)
            nodes = np.arange(1, len(chunks) + 1)
            mine = (classes >> k & 1).astype(bool)
            n_unknown = int(mine.sum())
            if coded_syms.shape[0] < n_unknown:
                raise _Failure(r, f"user {k}: too few coded pieces for subset {r:#x}")
            known = [view[n][c] for c, m in zip(chunks, mine) if not m]
            rhs = coded_syms[:n_unknown].copy()
            if known:
                rhs ^= gf.vandermonde_encode(nodes[~mine], _pieces_to_symbols(known, pb), n_unknown)
            solved = gf.vandermonde_solve(nodes[mine], rhs)
            bits = gf.symbols_to_bits(solved).reshape(n_unknown, pb)
            for row, c in zip(bits, (c for c, m in zip(chunks, mine) if m)):
                est[c] = row[:c.size]
    if truth is not None and not np.array_equal(est, truth[n]):
        raise _Failure(r, f"user {k}: file {n} decoded wrongly from subset {r:#x}")
    return est


def decode_all(placement: BitPlacement, files: FileBits, transcript: DeliveryTranscript, demands,
               check: bool = True) -> DecodeResult:
    """Every user rebuilds its demanded file from its cache plus the broadcast.

    The decoder reads file bits only at positions the user caches. With
    ``check`` the result is compared bit for bit against ``files``.
    """
    _check_demands(placement, demands)
    masks = placement.masks()
    msgs = transcript.by_subset()
    truth = files.bits if check else None
    groups = {n: _groups(masks[n]) for n in set(demands)}
    estimates = []
    try:
        for k in range(placement.n_users):
            view = np.where(placement.cached[k], files.bits, 0).astype(np.uint8)
            if transcript.strategy == "coded":
                est = _decode_coded(k, placement, view, masks, groups, msgs, demands, truth)
            else:
                est = _decode_filewise(k, placement, view, masks, msgs, demands, truth, transcript)
            estimates.append(est)
    except _Failure as exc:
        return DecodeResult(estimates, False, exc.subset, exc.detail)
    return DecodeResult(estimates, True)


def worst_distinct_demands(n_files: int, n_users: int) -> list[int]:
    return [k % n_files for k in range(n_users)]


def draw_demands(mode: str, n_files: int, n_users: int, rng: np.random.Generator,
                 p: RequestDistribution | None = None) -> list[int]:
    if mode == "worst-distinct":
        return worst_distinct_demands(n_files, n_users)
    if mode == "iid-uniform":
        return rng.integers(0, n_files, size=n_users).tolist()
    if mode == "iid-given-p":
        if p is None:
            raise ValueError("iid-given-p demands need a request distribution")
        original = np.empty(p.n_files)
        original[p.labels] = p.probs
        return rng.choice(n_files, size=n_users, p=original).tolist()
    raise ValueError(f"unknown demand mode {mode!r}")


@dataclass
class EmpiricalRate:
    mean: float
    stderr: float
    analytic: float
    trials: int
    decode_failures: int
    strategy_means: dict
    rates: np.ndarray
    placement: str


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def empirical_rate(inst: ProblemInstance, file_size: int, trials: int, demand_mode: str = "worst-distinct",
                   seed: int = DEFAULT_SEED, p: RequestDistribution | None = None,
                   placement: str = "fixed", strategies=STRATEGIES) -> EmpiricalRate:
    """Monte Carlo rate of the best strategy per trial, with every transcript decoded."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if demand_mode not in DEMAND_MODES:
        raise ValueError(f"unknown demand mode {demand_mode!r}")
    per_strategy = {s: np.zeros(trials) for s in strategies}
    best = np.zeros(trials)
    failures = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        files = FileBits.random(inst.n_files, file_size, rng)
        pl = place_decentralized(inst, file_size, placement, rng)
        demands = draw_demands(demand_mode, inst.n_files, inst.n_users, rng, p)
        for s in strategies:
            tr = deliver(s, pl, files, demands)
            if not decode_all(pl, files, tr, demands).success:
                failures += 1
            per_strategy[s][t] = tr.total_bits / file_size
        best[t] = min(per_strategy[s][t] for s in strategies)
    mean, err = _mean_stderr(best)
    return EmpiricalRate(mean, err, rate_mn(inst), trials, failures,
                         {s: float(v.mean()) for s, v in per_strategy.items()}, best, placement)


# --- single user, multiple requests -------------------------------------------

def prefix_cache_sizes(py: SubsetRequestDistribution, memory, file_size: int) -> np.ndarray:
    """Cached prefix length of each file: most popular files in full, then a partial one."""
    n = py.n_files
    if not 0 <= memory <= n:
        raise OutOfDomain(f"memory must lie in [0, {n}]")
    profile = inclusion_marginals(py)
    whole = math.floor(memory)
    frac = Fraction(memory) - whole
    sizes = np.zeros(n, dtype=np.int64)
    for rank, label in enumerate(profile.labels):
        if rank < whole:
            sizes[label] = file_size
        elif rank == whole:
            sizes[label] = math.floor(frac * file_size)
    return sizes


@dataclass
class SingleUserResult:
    mean: float
    stderr: float
    analytic: float
    trials: int
    decode_failures: int
    cached_bits: np.ndarray


def simulate_single_user(py: SubsetRequestDistribution, n_files: int, memory, file_size: int,
                         trials: int, seed: int = DEFAULT_SEED) -> SingleUserResult:
    if n_files != py.n_files:
        raise ValueError("n_files does not match the distribution")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sizes = prefix_cache_sizes(py, memory, file_size)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    files = FileBits.random(n_files, file_size, rng)
    subsets = [sorted(y) for y in py.support]
    weights = np.array([float(v) for v in py.support.values()])
    draws = rng.choice(len(subsets), size=trials, p=weights / weights.sum())
    rates = np.zeros(trials)
    failures = 0
    for t, idx in enumerate(draws):
        request = subsets[idx]
        payload = np.concatenate([files.bits[n, sizes[n]:] for n in request]) if request else np.zeros(0, np.uint8)
        rates[t] = payload.size / file_size
        offset = 0
        for n in request:
            tail = file_size - sizes[n]
            est = np.concatenate([files.bits[n, :sizes[n]], payload[offset:offset + tail]])
            offset += tail
            if not np.array_equal(est, files.bits[n]):
                failures += 1
                break
    mean, err = _mean_stderr(rates)
    analytic = float(single_user_optimal_rate(inclusion_marginals(py), memory))
    return SingleUserResult(mean, err, analytic, trials, failures, sizes)
