#!/usr/bin/env python3
"""Run the full eight-model backtest on a data directory and compare with the published table.

The directory must hold ``counts.csv`` (year,count) and the monthly index
files ``espi.txt``, ``li.txt`` and ``zt500.txt`` in PSL layout. Without
``--data`` a synthetic bundle is generated first, which exercises the
pipeline but cannot reproduce the published numbers.
"""

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

from hurricast.backtest import PUBLISHED
from hurricast.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default=None, help="directory with counts.csv, espi.txt, li.txt, zt500.txt")
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    if args.data is None:
        from hurricast.synthetic import make_bundle

        data = Path(tempfile.mkdtemp(prefix="hurricast-synthetic-"))
        make_bundle().write(data)
        print(f"no --data given; using synthetic inputs in {data}")
    else:
        data = Path(args.data)
    argv = ["backtest", "--counts", str(data / "counts.csv"), "--out", args.out, "--workers", str(args.workers)]
    for name in ("espi", "li", "zt500"):
        argv += ["--index", f"{name}={data / (name + '.txt')}"]

    t0 = time.perf_counter()
    rc = cli_main(argv)
    if rc:
        sys.exit(rc)
    print(f"\nbacktest finished in {time.perf_counter() - t0:.0f} s\n")

    report = json.loads((Path(args.out) / "report.json").read_text())
    print(f"{'model':<11} {'MAE':>6} {'pub':>5}  {'DA':>5} {'pub':>4}  {'APLF':>6} {'pub':>5}")
    for r in report["results"]:
        m = r["metrics"]
        pub = PUBLISHED.get(r["label"], (float("nan"),) * 3)
        if m is None:
            print(f"{r['label']:<11} all folds failed")
            continue
        print(f"{r['label']:<11} {m['mae']:6.2f} {pub[0]:5.2f}  {m['da']:5.2f} {pub[1]:4.1f}  "
              f"{m['aplf_small_grid']:6.2f} {pub[2]:5.2f}")
    cmp = report["comparison_with_published"]
    print(f"\ncorr(PP, counts) = {report['pp_count_correlation']}")
    print("deviations from the published findings:", ", ".join(cmp["deviations"]) or "none")


if __name__ == "__main__":
    main()
