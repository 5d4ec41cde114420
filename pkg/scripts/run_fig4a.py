"""Accuracy vs feature dimension for the four robustness curves (K=10, n=1e4,
(1, 1e-4)-DP).  Writes <out>/fig4a.csv."""

from _common import parser, setup_logging

from ncdp.harness import FIG4A_PS, run_preset


def main():
    ap = parser(__doc__, 200)
    ap.add_argument("--ps", type=int, nargs="+", default=list(FIG4A_PS))
    ap.add_argument("--perturbation", choices=["adversarial", "uniform", "gaussian"],
                    default="adversarial")
    args = ap.parse_args()
    setup_logging(args.verbose)
    for path in run_preset("fig4a", args.out, args.seed, args.trials, args.workers,
                           ps=tuple(args.ps), perturbation=args.perturbation):
        print(path.read_text(), end="")


if __name__ == "__main__":
    main()
