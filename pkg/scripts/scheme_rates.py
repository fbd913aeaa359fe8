"""Monte Carlo rates of the bit-level scheme against the analytic decentralized rate."""
import argparse

from cachebounds.bounds import ProblemInstance
from cachebounds.scheme import DEFAULT_SEED, empirical_rate

CASES = [(2, 2, 1.0)] + [(n, k, n * f) for n, k in [(2, 4), (4, 4), (3, 2)] for f in (0.25, 0.5)]

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--file-bits", type=int, default=100_000)
parser.add_argument("--trials", type=int, default=20)
parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
parser.add_argument("--placement", default="fixed", choices=("fixed", "bernoulli"))
args = parser.parse_args()

print("N,K,M,analytic,mean,stderr,rel_err,decode_failures,coded,uncoded,mds")
for n, k, m in CASES:
    r = empirical_rate(ProblemInstance(n, k, m), args.file_bits, args.trials, seed=args.seed,
                       placement=args.placement)
    s = r.strategy_means
    print(f"{n},{k},{m:g},{r.analytic:.6f},{r.mean:.6f},{r.stderr:.2e},"
          f"{(r.mean - r.analytic) / r.analytic:+.4f},{r.decode_failures},"
          f"{s['coded']:.4f},{s['uncoded']:.4f},{s['mds']:.4f}")
