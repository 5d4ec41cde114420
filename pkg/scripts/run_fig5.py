"""PCA mitigation under stochastic shift beta=0.2 on train and test.
Writes <out>/fig5.csv with a no-mitigation curve and one curve per rank."""

from _common import parser, setup_logging

from ncdp.harness import FIG5_PS, FIG5_RANKS, run_preset


def main():
    ap = parser(__doc__, 100)
    ap.add_argument("--ps", type=int, nargs="+", default=list(FIG5_PS))
    ap.add_argument("--ranks", type=int, nargs="+", default=list(FIG5_RANKS))
    args = ap.parse_args()
    setup_logging(args.verbose)
    for path in run_preset("fig5", args.out, args.seed, args.trials, args.workers,
                           ps=tuple(args.ps), ranks=tuple(args.ranks)):
        print(path.read_text(), end="")


if __name__ == "__main__":
    main()
