#!/usr/bin/env python3
"""Sweep many probe seeds and summarize how often random small reward
chains admit a partition that passes the branching check but fails the
weak one.

    python3 scripts/probe_search.py --seeds 20 --count 400
"""

import argparse
from collections import Counter

from matbisim.generate import probe_branching_weak
from matbisim.mrc import format_mrc
from matbisim.partition import format_partition


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10, help="number of seeds to sweep")
    parser.add_argument("--count", type=int, default=500, help="instances per seed")
    parser.add_argument("--max-states", type=int, default=5)
    parser.add_argument("--show-first", action="store_true", help="print the first counterexample found")
    args = parser.parse_args()

    found = 0
    instances_to_hit = []
    violated = Counter()
    first = None
    for seed in range(args.seeds):
        result = probe_branching_weak(seed, args.count, max_states=args.max_states)
        if result.counterexample is not None:
            found += 1
            instances_to_hit.append(result.instances)
            violated[result.counterexample.weak_violated] += 1
            if first is None:
                first = result.counterexample
        print(
            f"seed {seed}: "
            + (
                f"counterexample after {result.instances} instances"
                if result.counterexample
                else f"none in {result.instances} instances"
            )
        )

    print()
    print(f"{found}/{args.seeds} seeds produced a counterexample")
    if instances_to_hit:
        print(f"instances to first hit: min {min(instances_to_hit)}, max {max(instances_to_hit)}")
        print("violated weak equalities:", dict(violated))
    if first is not None and args.show_first:
        print()
        print(format_mrc(first.model).rstrip())
        print(format_partition(first.partition).rstrip())


if __name__ == "__main__":
    main()
