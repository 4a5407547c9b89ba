"""Small BBU-capacity sweep written to CSV and SVG.

Uses fewer seeds than the acceptance sweep so it finishes in a few
minutes.  The trend report at the end is the same one the acceptance
suite applies.

    python demos/02_capacity_sweep.py --seeds 3 --out /tmp/fb_sweep
"""

import argparse
from pathlib import Path

from meran.experiments import SweepSpec, run_sweep, trend_checks, write_csv, write_svgs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="fb_sweep", help="output prefix")
    args = ap.parse_args()

    spec = SweepSpec("F_B", tuple(k * 1e6 for k in range(1, 10)), 20,
                     tuple(range(1, args.seeds + 1)), ("Local", "CAR", "CAR-P", "CAR-D"),
                     (args.n, 20, 2, 2000.0))
    res = run_sweep(spec, jobs=args.jobs)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(res.rows, args.out + ".csv", f"seeds=1..{args.seeds}")
    for path in write_svgs(res.rows, args.out):
        print("wrote", path)
    print(trend_checks(res.rows, res.saturation, args.n, completion_from=res.saturation))


if __name__ == "__main__":
    main()
