"""Collapse diagnostics for a feature CSV (label,f0,...), or for a synthetic
draw when no file is given."""

import argparse
import json

from ncdp.analysis import beta_histogram, collapse_report, histogram_csv
from ncdp.geometry import make_etf
from ncdp.synth import ShiftModel, load_features, sample_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input")
    ap.add_argument("--normalize", action="store_true")
    ap.add_argument("--seed", type=int, default=0, help="for the synthetic fallback")
    ap.add_argument("--beta", type=float, default=0.1, help="synthetic shift size")
    ap.add_argument("--bins", type=int, default=10)
    args = ap.parse_args()
    if args.input:
        data = load_features(args.input, normalize=args.normalize)
    else:
        frame = make_etf(512, 10, seed=args.seed)
        data = sample_dataset(frame, 5000, shift=ShiftModel.stochastic(args.beta), seed=args.seed)
    report = collapse_report(data)
    print(json.dumps({k: v for k, v in report.to_dict().items() if k != "cosine_matrix"},
                     indent=2))
    rows = [r for r in beta_histogram(report, args.bins) if r["class"] == "all"]
    print(histogram_csv(rows), end="")


if __name__ == "__main__":
    main()
