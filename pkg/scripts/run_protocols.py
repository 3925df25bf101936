#!/usr/bin/env python3
"""Run the RockSample and RandomPOMDP benchmark protocols and print tables.

Results are cached under ``--cache`` (default ``results/cache``); the
acceptance suite reads the same cache, so running this first makes
``pytest tests/test_acceptance.py`` fast.

    python scripts/run_protocols.py --which all
    python scripts/run_protocols.py --which rocksample --rs 11,11
"""

import argparse
import sys
import time
from pathlib import Path

from fmp.experiments import RANDOM_POMDP_CONFIGS, cached_run, random_pomdp_configs, rocksample_config

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--which", choices=("rocksample", "random", "all"), default="all")
    p.add_argument("--rs", default="7,8", help="n,k of RockSample")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--cache", default=str(ROOT / "results" / "cache"))
    args = p.parse_args(argv)

    if args.which in ("rocksample", "all"):
        n, k = (int(v) for v in args.rs.split(","))
        t = time.perf_counter()
        s = cached_run(rocksample_config(n, k, args.episodes, args.seed), args.cache, args.parallel)
        print(f"RS[{n},{k}] fmp  mean={s.mean:.3f} sem={s.sem:.3f} "
              f"min_node_margin={min(s.node_margins):.2f} ({time.perf_counter() - t:.0f}s)", flush=True)

    if args.which in ("random", "all"):
        for states, sp in RANDOM_POMDP_CONFIGS:
            for name, cfg in random_pomdp_configs(states, sp, args.episodes, args.seed).items():
                t = time.perf_counter()
                s = cached_run(cfg, args.cache, args.parallel)
                print(f"RP[{states},{sp}] {name:12s} mean={s.mean:.3f} sem={s.sem:.3f} "
                      f"failures={s.failures} ({time.perf_counter() - t:.0f}s)", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
