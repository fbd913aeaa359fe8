"""Gap sweep with both lower-bound denominators plus the corner sweep, as JSON."""
import argparse
import json
import time

from cachebounds import gap

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--max-n", type=int, default=64)
parser.add_argument("--max-k", type=int, default=64)
parser.add_argument("--grid", type=int, default=512)
parser.add_argument("--corner-max-n", type=int, default=200)
parser.add_argument("--out", default="gap_certificate.json")
args = parser.parse_args()

ns, ks = range(1, args.max_n + 1), range(1, args.max_k + 1)
result = {}
for lower in ("uniform", "restricted"):
    t0 = time.perf_counter()
    rep = gap.gap_sweep(ns, ks, args.grid, lower=lower)
    result[lower] = rep.as_dict() | {"seconds": round(time.perf_counter() - t0, 2)}

t0 = time.perf_counter()
best, where = gap.corner_sweep(range(5, args.corner_max_n + 1), range(1, args.corner_max_n + 1))
result["corners"] = {"max_ratio": best, "argmax": list(where), "seconds": round(time.perf_counter() - t0, 2)}
result["constants"] = list(gap.analytic_constants())
result["threshold"] = gap.GAP_CONSTANT

with open(args.out, "w") as fh:
    json.dump(result, fh, indent=2)
print(json.dumps(result, indent=2))
