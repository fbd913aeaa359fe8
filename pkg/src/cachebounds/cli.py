"""Command-line entry point: ``python -m cachebounds <command> ...``.

Exit status is 0 on success, 1 when a certification or decode check fails,
and 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import io
import json
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bounds as b
from . import gap as g
from . import oracle
from . import scheme as sc

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BOUNDS_COLUMNS = ["N", "K", "M", "lower_avg", "lower_uniform", "lower_cutset",
                  "rate_mn", "rate_mn_convex", "upper_relaxed"]
FIG2_COLUMNS = ["M", "R_MN", "R_MN_convexified", "R_upper_piecewise",
                "R_lower_restricted", "R_uniform_lower", "R_cutset"]
SIM_COLUMNS = ["N", "K", "M", "placement", "demand", "analytic", "mean", "stderr",
               "decode_ok", "decode_total"] + [f"mean_{s}" for s in sc.STRATEGIES]
SINGLE_COLUMNS = ["M", "optimal_rate", "prefix_rate", "identity", "simulated_mean", "simulated_stderr"]


class UsageError(Exception):
    pass


# --- parsing ------------------------------------------------------------------

def parse_int_range(text: str) -> list[int]:
    """'5', '1..64', '2,3,8..10' -> sorted unique positive integers."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\.\.(\d+)", part)
        try:
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if lo > hi:
                    raise UsageError(f"empty range {part!r}")
                out.update(range(lo, hi + 1))
            else:
                out.add(int(part))
        except ValueError:
            raise UsageError(f"cannot parse integer list {text!r}") from None
    if not out or min(out) < 1:
        raise UsageError(f"{text!r}: values must be positive integers")
    return sorted(out)


def parse_number(text: str) -> Fraction:
    try:
        v = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse number {text!r}") from None
    return v


def parse_memory_list(text: str) -> list[Fraction]:
    vals = [parse_number(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise UsageError("--m needs at least one value")
    if any(v < 0 for v in vals):
        raise UsageError("memory values must be >= 0")
    return vals


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def read_request_file(path: str) -> list[Fraction]:
    """One probability per line (decimal or a/b); '#' comments."""
    probs = []
    for lineno, raw in enumerate(_read_lines(path), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        try:
            probs.append(Fraction(line))
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"{path}:{lineno}: bad probability {line!r}") from None
    if not probs:
        raise UsageError(f"{path}: no probabilities found")
    if sum(probs) != 1 and abs(float(sum(probs)) - 1) > b.PROB_TOL * len(probs):
        raise UsageError(f"{path}: probabilities sum to {float(sum(probs))}, not 1")
    return probs


def read_subset_file(path: str, n_files: int | None = None) -> b.SubsetRequestDistribution:
    """Parse a p_Y file: '<i,j,...> <prob>' per line with 1-based indices; '-' is the empty set."""
    support: dict[frozenset, Fraction] = {}
    largest = 0
    for lineno, raw in enumerate(_read_lines(path), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected '<indices> <probability>', got {line!r}")
        idx_text, prob_text = parts
        if idx_text == "-":
            subset = frozenset()
        else:
            try:
                idx = [int(t) for t in idx_text.split(",")]
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad index list {idx_text!r}") from None
            if min(idx) < 1:
                raise UsageError(f"{path}:{lineno}: file indices start at 1")
            if len(set(idx)) != len(idx):
                raise UsageError(f"{path}:{lineno}: repeated file index")
            subset = frozenset(i - 1 for i in idx)
            largest = max(largest, max(idx))
        try:
            prob = Fraction(prob_text)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"{path}:{lineno}: bad probability {prob_text!r}") from None
        if prob <= 0 or prob > 1:
            raise UsageError(f"{path}:{lineno}: probability must lie in (0, 1]")
        if subset in support:
            raise UsageError(f"{path}:{lineno}: duplicate subset")
        support[subset] = prob
    if not support:
        raise UsageError(f"{path}: no entries found")
    if sum(support.values()) != 1:
        raise UsageError(f"{path}: probabilities sum to {sum(support.values())}, not 1")
    n = max(largest, 1) if n_files is None else n_files
    if largest > n:
        raise UsageError(f"{path}: file index {largest} exceeds N = {n}")
    return b.SubsetRequestDistribution(support, n)


def _read_lines(path: str) -> list[str]:
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


@dataclass(frozen=True)
class DistSpec:
    kind: str  # uniform | zipf | file
    exponent: float = 0.0
    probs: tuple = ()

    def build(self, n_files: int) -> b.RequestDistribution:
        if self.kind == "uniform":
            return b.RequestDistribution.uniform(n_files)
        if self.kind == "zipf":
            return b.RequestDistribution.zipf(n_files, self.exponent)
        if len(self.probs) != n_files:
            raise UsageError(f"distribution file has {len(self.probs)} entries but N = {n_files}")
        return b.RequestDistribution([float(p) for p in self.probs])


def parse_dist(text: str) -> DistSpec:
    if text == "uniform":
        return DistSpec("uniform")
    if text.startswith("zipf:"):
        a = parse_number(text[5:])
        if a < 0:
            raise UsageError("zipf exponent must be >= 0")
        return DistSpec("zipf", float(a))
    if text.startswith("file:"):
        return DistSpec("file", probs=tuple(read_request_file(text[5:])))
    raise UsageError(f"unknown distribution {text!r}; use uniform, zipf:<a> or file:<path>")


@dataclass
class RunConfig:
    command: str
    n_files: list[int]
    n_users: list[int]
    grid_count: int | None = None
    memories: list[Fraction] | None = None
    dist: DistSpec = field(default_factory=lambda: DistSpec("uniform"))
    file_bits: int = 100_000
    trials: int = 20
    seed: int = sc.DEFAULT_SEED
    fmt: str = "csv"
    out: str | None = None

    def __post_init__(self):
        if not self.n_files or not self.n_users:
            raise UsageError("N and K ranges must be nonempty")
        if self.grid_count is not None and self.grid_count < 2:
            raise UsageError("--m-grid needs at least 2 points")
        if self.file_bits < 1 or self.trials < 1:
            raise UsageError("--file-bits and --trials must be positive")

    def memory_values(self, upper) -> list[Fraction]:
        """Explicit list, or grid_count points evenly spaced on [0, upper]."""
        if self.memories is not None:
            return list(self.memories)
        count = self.grid_count or 11
        upper = Fraction(upper)
        return [upper * i / (count - 1) for i in range(count)]


# --- output -------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.12g" % float(v)


def render(columns: list[str], rows: list[list], fmt: str, preamble: dict | None = None) -> str:
    if fmt == "json":
        data = dict(preamble or {})
        for i, c in enumerate(columns):
            data[c] = [_json_value(r[i]) for r in rows]
        return json.dumps(data, indent=2) + "\n"
    buf = io.StringIO()
    for key, val in (preamble or {}).items():
        buf.write(f"# {key}: {val}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    return float(v)


def emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


# --- commands -----------------------------------------------------------------

def cmd_bounds(cfg: RunConfig, samples: int = b.DEFAULT_SAMPLES) -> tuple[list[str], list[list]]:
    rows = []
    for n in cfg.n_files:
        ms = cfg.memory_values(n)
        if any(m > n for m in ms):
            raise UsageError(f"memory values must lie in [0, N] (N = {n})")
        m = np.array([float(x) for x in ms])
        dist = cfg.dist.build(n)
        for k in cfg.n_users:
            cols = [
                b.lower_avg_curve(n, k, m, dist),
                b.lower_uniform_curve(n, k, m),
                b.lower_cutset_curve(n, k, m),
                b.rate_mn_curve(n, k, m),
                b.convexified_rate_mn_curve(n, k, m, samples),
                b.rate_upper_relaxed_curve(n, k, m),
            ]
            for i, mi in enumerate(m):
                rows.append([n, k, mi] + [float(c[i]) for c in cols])
    return BOUNDS_COLUMNS, rows


def fig2_table(n_files: int = 10, n_users: int = 15, points: int = 256,
               samples: int = b.DEFAULT_SAMPLES) -> tuple[list[str], list[list]]:
    """Plot data on [0, N/2]; the default instance is (N, K) = (10, 15)."""
    m = np.linspace(0.0, n_files / 2, points)
    corners = g.corner_points(n_files, n_users)
    cols = [
        b.rate_mn_curve(n_files, n_users, m),
        b.convexified_rate_mn_curve(n_files, n_users, m, samples),
        g.piecewise_upper(corners, m),
        g.r_lower_restricted_curve(n_files, n_users, m),
        b.lower_uniform_curve(n_files, n_users, m),
        b.lower_cutset_curve(n_files, n_users, m),
    ]
    rows = [[float(mi)] + [float(c[i]) for c in cols] for i, mi in enumerate(m)]
    return FIG2_COLUMNS, rows


def cmd_gap(cfg: RunConfig, samples: int, lower: str) -> tuple[str, int]:
    grid = cfg.grid_count or 512
    report = g.gap_sweep(cfg.n_files, cfg.n_users, grid, samples, lower)
    corner_max, corner_at = g.corner_sweep(cfg.n_files, cfg.n_users)
    c_zero, c_corner = g.analytic_constants()
    ok = report.max_ratio < g.GAP_CONSTANT and corner_max < g.GAP_CONSTANT
    if cfg.fmt == "json":
        data = report.as_dict()
        data.update(lower=lower, corner_max=corner_max,
                    corner_argmax={"n_files": corner_at[0], "n_users": corner_at[1]},
                    constants={"memory_zero": c_zero, "interior_corner": c_corner},
                    threshold=g.GAP_CONSTANT, certified=ok)
        return json.dumps(data, indent=2) + "\n", EXIT_OK if ok else EXIT_FAIL
    n, k, m = report.argmax
    lines = [
        f"max ratio: {report.max_ratio:.12g}",
        f"location: N={n} K={k} M={m:.12g}",
        f"cells checked: {report.cells_checked}",
        f"grid pitch at argmax: {report.grid_pitch:.12g}",
        f"lower bound: {lower}",
        f"corner max ratio: {corner_max:.12g} at N={corner_at[0]} K={corner_at[1]}",
        f"corner constants: {c_zero:.3f} / {c_corner:.3f}",
        f"threshold {g.GAP_CONSTANT}: {'PASS' if ok else 'FAIL'}",
    ]
    return "\n".join(lines) + "\n", EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(cfg: RunConfig, placement: str, demand: str) -> tuple[list[str], list[list], int]:
    big = [k for k in cfg.n_users if k > sc.MAX_USERS]
    if big:
        raise UsageError(f"K = {big[0]} exceeds {sc.MAX_USERS}; the coded delivery has 2^K subsets")
    if cfg.grid_count is None and cfg.memories is None:
        raise UsageError("simulate needs --m or --m-grid")
    rows, failures = [], 0
    for n in cfg.n_files:
        ms = cfg.memory_values(n)
        if any(m > n for m in ms):
            raise UsageError(f"memory values must lie in [0, N] (N = {n})")
        p = cfg.dist.build(n) if demand == "iid-given-p" else None
        for k in cfg.n_users:
            for m in ms:
                inst = b.ProblemInstance(n, k, float(m))
                r = sc.empirical_rate(inst, cfg.file_bits, cfg.trials, demand, cfg.seed, p, placement)
                failures += r.decode_failures
                total = r.trials * len(sc.STRATEGIES)
                rows.append([n, k, float(m), placement, demand, r.analytic, r.mean, r.stderr,
                             total - r.decode_failures, total]
                            + [r.strategy_means[s] for s in sc.STRATEGIES])
    return SIM_COLUMNS, rows, EXIT_OK if failures == 0 else EXIT_FAIL


def cmd_single_user(cfg: RunConfig, py: b.SubsetRequestDistribution) -> tuple[dict, list[list], int]:
    n = py.n_files
    ms = cfg.memory_values(n)
    if any(m > n for m in ms):
        raise UsageError(f"memory values must lie in [0, N] (N = {n})")
    profile = b.inclusion_marginals(py)
    rows, ok = [], True
    for m in ms:
        opt = b.single_user_optimal_rate(profile, m)
        pre = b.prefix_cache_rate(profile, m)
        same = opt == pre
        sim = sc.simulate_single_user(py, n, m, cfg.file_bits, cfg.trials, cfg.seed)
        ok &= same and sim.decode_failures == 0
        rows.append([float(m), float(opt), float(pre), same, sim.mean, sim.stderr])
    labels = ",".join(str(i + 1) for i in profile.labels)
    pre = {
        "s_profile": " ".join(str(Fraction(v)) for v in profile.values),
        "file_order": labels,
        "expected_request_size": str(py.expected_size()),
        "identity_prefix_equals_formula": "pass" if all(r[3] for r in rows) else "FAIL",
    }
    return pre, rows, EXIT_OK if ok else EXIT_FAIL


def cmd_verify(seed: int) -> tuple[str, int]:
    checks = oracle.run_verification(seed)
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in checks]
    cert = oracle.exact_bound_eval("lower_uniform", 5, 5, 1)
    lines.append(f"certificate lower_uniform(5,5,1) = {cert}")
    failed = [c for c in checks if not c.passed]
    if failed:
        lines.append(f"first failure: {failed[0].name}")
        return "\n".join(lines) + "\n", EXIT_FAIL
    lines.append(f"all {len(checks)} checks passed")
    return "\n".join(lines) + "\n", EXIT_OK


# --- argument handling ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachebounds", description="Coded caching memory-rate bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_default, k_default, fmt=True):
        p.add_argument("--n", default=n_default, help="file counts: value, list, or a..b range")
        p.add_argument("--k", default=k_default, help="user counts: value, list, or a..b range")
        grid = p.add_mutually_exclusive_group()
        grid.add_argument("--m-grid", type=int, help="number of evenly spaced memory points")
        grid.add_argument("--m", help="comma-separated memory values (decimal or a/b)")
        p.add_argument("--seed", type=int, default=sc.DEFAULT_SEED)
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("bounds", help="tabulate every bound on a memory grid")
    common(p, "5", "5")
    p.add_argument("--dist", default="uniform", help="uniform | zipf:<a> | file:<path>")
    p.add_argument("--samples", type=int, default=b.DEFAULT_SAMPLES)

    p = sub.add_parser("fig2", help="plot data for the bound comparison figure")
    common(p, "10", "15")
    p.add_argument("--samples", type=int, default=b.DEFAULT_SAMPLES)

    p = sub.add_parser("gap", help="certify the multiplicative gap over a range")
    common(p, "1..64", "1..64")
    p.add_argument("--samples", type=int, default=b.DEFAULT_SAMPLES)
    p.add_argument("--lower", choices=("uniform", "restricted"), default="uniform")

    p = sub.add_parser("simulate", help="bit-level Monte Carlo of decentralized coded caching")
    common(p, "2", "2")
    p.add_argument("--file-bits", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--placement", choices=sc.PLACEMENT_MODES, default="fixed")
    p.add_argument("--demand", choices=sc.DEMAND_MODES, default="worst-distinct")
    p.add_argument("--dist", default="uniform", help="request distribution for --demand iid-given-p")

    p = sub.add_parser("single-user", help="prefix caching for one user requesting a random file set")
    common(p, None, "1")
    p.add_argument("--py", required=True, help="file:<path> with the subset distribution")
    p.add_argument("--file-bits", type=int, default=4096)
    p.add_argument("--trials", type=int, default=200)

    p = sub.add_parser("verify", help="run the exact-arithmetic oracle gate")
    p.add_argument("--seed", type=int, default=2016)
    return parser


def _config(args) -> RunConfig:
    memories = parse_memory_list(args.m) if getattr(args, "m", None) else None
    n = parse_int_range(args.n) if getattr(args, "n", None) else [1]
    k = parse_int_range(args.k) if getattr(args, "k", None) else [1]
    dist = parse_dist(args.dist) if getattr(args, "dist", None) else DistSpec("uniform")
    return RunConfig(args.command, n, k, getattr(args, "m_grid", None), memories, dist,
                     getattr(args, "file_bits", 100_000), getattr(args, "trials", 20),
                     args.seed, getattr(args, "format", "csv"), getattr(args, "out", None))


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            text, code = cmd_verify(args.seed)
            sys.stdout.write(text)
            return code
        cfg = _config(args)
        if args.command == "bounds":
            emit(render(*cmd_bounds(cfg, args.samples), cfg.fmt), cfg.out)
            return EXIT_OK
        if args.command == "fig2":
            if cfg.memories is not None:
                raise UsageError("fig2 uses an evenly spaced grid; pass --m-grid")
            if len(cfg.n_files) != 1 or len(cfg.n_users) != 1:
                raise UsageError("fig2 takes a single N and K")
            cols, rows = fig2_table(cfg.n_files[0], cfg.n_users[0], cfg.grid_count or 256, args.samples)
            emit(render(cols, rows, cfg.fmt), cfg.out)
            return EXIT_OK
        if args.command == "gap":
            text, code = cmd_gap(cfg, args.samples, args.lower)
            emit(text, cfg.out)
            return code
        if args.command == "simulate":
            cols, rows, code = cmd_simulate(cfg, args.placement, args.demand)
            emit(render(cols, rows, cfg.fmt), cfg.out)
            return code
        if args.command == "single-user":
            if not args.py.startswith("file:"):
                raise UsageError("--py expects file:<path>")
            n = None
            if args.n is not None:
                ns = parse_int_range(args.n)
                if len(ns) != 1:
                    raise UsageError("single-user takes a single N")
                n = ns[0]
            py = read_subset_file(args.py[5:], n)
            cfg.n_files = [py.n_files]
            pre, rows, code = cmd_single_user(cfg, py)
            emit(render(SINGLE_COLUMNS, rows, cfg.fmt, pre), cfg.out)
            return code
    except (UsageError, b.OutOfDomain, ValueError) as exc:
        print(f"cachebounds: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
