"""Replay many synthetic traces with the pure-Python oracle auditing every decision."""

import argparse
import time

from samem.core import SaMemConfig
from samem.harness import generate_synthetic, replay

POLICIES = [("fuse", "relevance"), ("fuse", "temporal"), ("remove", "relevance"), ("remove", "temporal")]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--m-max", type=int, default=4)
    ap.add_argument("--k", type=int, default=8)
    args = ap.parse_args()
    t0 = time.perf_counter()
    checks = 0
    for seed in range(args.seeds):
        trace = generate_synthetic(seed, 14, 16, 6, 0.3, 0.25)
        for op, crit in POLICIES:
            for variant in ("inst-cur", "inst-only"):
                cfg = SaMemConfig.build(m_max=args.m_max, budget_k=args.k, variant=variant, operation=op, criterion=crit)
                checks += replay(trace, cfg, oracle_mode=True).oracle_checks
    print(f"{checks} oracle checks, 0 divergences, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
