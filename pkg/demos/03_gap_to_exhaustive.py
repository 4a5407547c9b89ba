"""How far the heuristics land from exhaustive search on small networks.

For each clone capacity the exhaustive search picks the best offloading
set under the priority order (mandatory first, then optional, then
power).  The gap column is relative sum-power excess over that optimum.

    python demos/03_gap_to_exhaustive.py --seed 3
"""

import argparse

from meran import classify, dispatch, exhaustive_search, generate
from meran.baselines import SubsetCache


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--n", type=int, default=8)
    args = ap.parse_args()

    base = generate(args.seed, args.n, 8, 2)
    cache = None
    print(f"{'F^C':>4s} {'ES W':>9s} " + " ".join(f"{a:>16s}" for a in ("CAR", "CAR-P", "CAR-D")))
    for fc in range(1, args.n + 1):
        sc = base.with_config(base.cfg.replace(clone_capacity=fc, bbu_capacity=1e8))
        cls, dec = classify(sc)
        if cache is None:
            cache = SubsetCache(sc)
        else:
            cache.rebind(sc)
        es = exhaustive_search(sc, dec, cache=cache)
        cells = []
        for algo in ("CAR", "CAR-P", "CAR-D"):
            a = dispatch(sc, cls, dec, algo)
            gap = (a.sum_power - es.sum_power) / es.sum_power
            cells.append(f"{a.sum_power:7.4f} {gap:+7.1%}")
        print(f"{fc:4d} {es.sum_power:9.4f} " + " ".join(f"{c:>16s}" for c in cells))


if __name__ == "__main__":
    main()
