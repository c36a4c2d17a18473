"""Full verification run: inequality sweep plus the truncation study.

Exits 0 only if every check is clean; the CSV reports land under --out.
"""

import argparse
import sys

from finslergp.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/verify")
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dims", default="2:1024:dyadic")
    ap.add_argument("--v-samples", type=int, default=64)
    args = ap.parse_args()

    sys.exit(cli(["verify", "--n", str(args.n), "--seed", str(args.seed),
                  "--dims", args.dims, "--v-samples", str(args.v_samples),
                  "--out", args.out]))


if __name__ == "__main__":
    main()
