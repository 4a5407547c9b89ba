"""One reference scenario, every algorithm side by side.

Pre-screening splits the 20 UEs into mandatory offloaders, optional
offloaders and local UEs.  The centralized step then decides who gets a
mobile clone and how much BBU rate, with the capacity given on the
command line.

    python demos/01_single_scenario.py --fb 4e6 --fc 20
"""

import argparse

from meran import classify, generate, run
from meran.checks import check_allocation
from meran.model import OH, OL, L


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--fb", type=float, default=4e6, help="BBU capacity, cycles/s")
    ap.add_argument("--fc", type=int, default=20, help="mobile clone capacity")
    args = ap.parse_args()

    sc = generate(args.seed, N=20, J=20, K=2)
    sc = sc.with_config(sc.cfg.replace(bbu_capacity=args.fb, clone_capacity=args.fc))
    cls, dec = classify(sc)
    print(f"pre-screening: OH={cls.members(OH)}")
    print(f"               OL={cls.members(OL)}")
    print(f"               L ={cls.members(L)}")
    print()
    print(f"{'algorithm':9s} {'case':5s} {'sum power W':>12s} {'completed':>9s} "
          f"{'offloaded':>9s}  check")
    for algo in ("Local", "CAR", "CAR-P", "CAR-D"):
        alloc = run(sc, algo)
        rep = check_allocation(sc, dec, alloc)
        print(f"{algo:9s} {alloc.case:5s} {alloc.sum_power:12.5f} "
              f"{alloc.completed_count():9d} {len(alloc.accepted):9d}  {rep}")


if __name__ == "__main__":
    main()
