#!/usr/bin/env python3
"""Write a synthetic count file and monthly index files in the expected formats.

The series carry a known lagged dependence of counts on the indices but are
not observational data. ``--fabricate N`` appends N years of unrelated
values, for leakage audits.
"""

import argparse

from hurricast.synthetic import make_bundle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="synthetic_data")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--first-year", type=int, default=1981)
    ap.add_argument("--last-year", type=int, default=2022)
    ap.add_argument("--missing-rate", type=float, default=0.0,
                    help="share of monthly index cells replaced by the missing-value sentinel")
    ap.add_argument("--fabricate", type=int, default=0, metavar="N",
                    help="append N fabricated future years to every file")
    args = ap.parse_args()
    bundle = make_bundle(args.first_year, args.last_year, args.seed, args.missing_rate)
    if args.fabricate:
        bundle = bundle.with_fabricated_years(args.fabricate)
    for name, path in bundle.write(args.out).items():
        print(f"{name:7s} {path}")


if __name__ == "__main__":
    main()
