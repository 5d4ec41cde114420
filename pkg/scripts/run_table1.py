"""Order-level sample complexities for every Table 1 setting over a small grid."""

import argparse

from ncdp.harness import run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--K", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.3)
    args = ap.parse_args()
    (path,) = run_preset("table1-grid", args.out, seed=0, K=args.K, alpha=args.alpha)
    print(path.read_text(), end="")


if __name__ == "__main__":
    main()
