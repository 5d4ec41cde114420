"""Monte Carlo error vs analytic bound on the full (n, beta, p, rho) grid.

Prints the summary, including which perfect-collapse spread survived.
"""

import json

from _common import parser, setup_logging

from ncdp.harness import run_preset


def main():
    ap = parser(__doc__, 100_000)
    args = ap.parse_args()
    setup_logging(args.verbose)
    paths = run_preset("bound-dominance", args.out, args.seed, args.trials)
    summary = json.loads(paths[1].read_text())
    print(json.dumps(summary, indent=2))
    failed = [line for line in paths[0].read_text().splitlines() if line.endswith(",False")]
    for line in failed:
        print("FAIL", line)


if __name__ == "__main__":
    main()
