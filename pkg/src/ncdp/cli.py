"""Command-line entry point: ``ncdp <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 when the command
itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def _emit_json(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, default=_json_default)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite(x):
    """JSON has no Infinity; report it as null."""
    return None if isinstance(x, float) and not math.isfinite(x) else x


def _privacy_args(p: argparse.ArgumentParser, allow_nonprivate: bool = True) -> None:
    g = p.add_argument_group("privacy (give rho, or epsilon with delta)")
    g.add_argument("--rho", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta", type=float)
    if allow_nonprivate:
        g.add_argument("--nonprivate", action="store_true")


def _resolve_rho(args, required: bool = True) -> Optional[float]:
    from .privacy import dp_to_zcdp

    has_eps = args.epsilon is not None or args.delta is not None
    nonpriv = getattr(args, "nonprivate", False)
    if sum([args.rho is not None, has_eps, nonpriv]) > 1:
        raise UsageError("give only one of --rho, --epsilon/--delta, --nonprivate")
    if has_eps:
        if args.epsilon is None or args.delta is None:
            raise UsageError("--epsilon and --delta go together")
        return dp_to_zcdp(args.epsilon, args.delta)
    if args.rho is not None:
        return args.rho
    if nonpriv:
        return math.inf
    if required:
        raise UsageError("a privacy budget is required (--rho or --epsilon/--delta)")
    return None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ncdp", description="Private last-layer training under Neural Collapse.")
    ap.add_argument("--version", action="version", version=f"ncdp {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("etf", help="build a simplex ETF and print it as JSON")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--canonical", action="store_true")
    p.add_argument("--seed", type=int, help="required unless --canonical")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="Monte Carlo test accuracy for one scenario")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--random-frame", action="store_true", help="use a seeded (non-canonical) frame")
    p.add_argument("--alpha", type=float, help="imbalance: mass of the first floor(K/2) classes")
    p.add_argument("--shift", choices=["none", "stochastic", "offset"], default="none")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--orthogonal", action="store_true", help="remove shift component along the prototype")
    p.add_argument("--offset-mode", choices=["auto", "label-signed", "common"], default="auto")
    p.add_argument("--test-shift", choices=["same", "none", "stochastic", "gaussian", "adversarial"],
                   default="same")
    p.add_argument("--test-beta", type=float, default=0.0,
                   help="attack size, uniform bound, or gaussian variance")
    _privacy_args(p)
    p.add_argument("--loss", choices=["ce", "squared", "logistic"], default="ce")
    p.add_argument("--reparameterized", action="store_true")
    p.add_argument("--eta", type=float)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--R", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--mitigation", choices=["none", "pca", "class-mean", "normalize"], default="none")
    p.add_argument("--rank", type=int)
    p.add_argument("--sensitivity", default="bound",
                   help='"bound", "empirical", or a number')
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("bounds", help="evaluate a bound or sample complexity")
    from .bounds import TABLE1_SETTINGS

    settings = list(TABLE1_SETTINGS) + ["gd", "noisygd", "offset", "projected",
                                        "perfect-nc-error", "pca", "random-init"]
    p.add_argument("--setting", choices=settings, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--K0", type=int)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--beta-tilde", type=float, default=0.0)
    _privacy_args(p)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--R", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--sigma", type=float, help="noise scale for perfect-nc-error")
    p.add_argument("--G", type=float, default=1.0, help="sensitivity for random-init")
    p.add_argument("--spread", choices=["stated", "sqrt2"], default="stated")
    p.add_argument("--independent", action="store_true")
    p.add_argument("--seed", type=int, help="required for random-init")
    p.add_argument("--out")

    p = sub.add_parser("analyze", help="collapse diagnostics for a feature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--cosine-tolerance", type=float, default=0.2)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", help="directory for report.json and beta_histogram.csv")
    p.add_argument("--hist", help="histogram CSV path when --out is not given")

    p = sub.add_parser("mitigate", help="fit a projection or normalize a feature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["pca", "class-mean", "normalize"], required=True)
    p.add_argument("--rank", type=int)
    p.add_argument("--public", help="CSV to fit the projection on (default: --input)")
    p.add_argument("--solver", choices=["eigh", "subspace"], default="eigh")
    p.add_argument("--seed", type=int, help="required for --solver subspace")
    p.add_argument("--features-out", help="write transformed features here")
    p.add_argument("--out")

    p = sub.add_parser("reproduce", help="run an experiment preset")
    from .harness import PRESETS

    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ps", type=lambda s: tuple(int(x) for x in s.split(",")),
                   help="comma-separated dimensions")
    p.add_argument("--ranks", type=lambda s: tuple(int(x) for x in s.split(",")),
                   help="fig5 PCA ranks")
    p.add_argument("--perturbation", choices=["adversarial", "uniform", "gaussian"],
                   default="adversarial", help="fig4a perturbed-test attack")
    return ap


# --- handlers ------------------------------------------------------------------

def _cmd_etf(args) -> None:
    from .geometry import make_etf

    if not args.canonical and args.seed is None:
        raise UsageError("etf: --seed is required unless --canonical is given")
    frame = make_etf(args.p, args.K, seed=args.seed or 0, canonical=args.canonical)
    frame.check()
    _emit_json(frame.to_dict(), args.out)


def _shift_from_args(kind, beta, orthogonal=False, offset_mode="auto"):
    from .synth import ShiftModel

    if kind == "none":
        return ShiftModel()
    if kind == "stochastic":
        return ShiftModel.stochastic(beta, orthogonal_to_prototype=orthogonal)
    if kind == "gaussian":
        return ShiftModel.gaussian(beta)
    if kind == "adversarial":
        return ShiftModel.adversarial(beta)
    return ShiftModel.offset(beta, orthogonal_to_prototype=orthogonal, offset_mode=offset_mode)


def _cmd_simulate(args) -> None:
    from .harness import Scenario, mc_error
    from .trainer import TrainConfig

    if args.seed is None:
        raise UsageError("simulate: --seed is required")
    rho = _resolve_rho(args)
    sens = args.sensitivity
    if sens not in ("bound", "empirical"):
        try:
            sens = float(sens)
        except ValueError:
            raise UsageError(f"--sensitivity must be bound, empirical or a number, got {sens!r}")
    cfg = TrainConfig(eta=args.eta, iterations=args.iterations, projection_radius=args.R,
                      tail_parameter=args.t, loss=args.loss,
                      reparameterized=args.reparameterized)
    test = None if args.test_shift == "same" else _shift_from_args(args.test_shift, args.test_beta)
    privacy = {"nonprivate": True} if math.isinf(rho) else {"rho": rho}
    scn = Scenario(p=args.p, K=args.K, n=args.n, canonical=not args.random_frame,
                   frame_seed=args.seed, alpha=args.alpha,
                   train_shift=_shift_from_args(args.shift, args.beta, args.orthogonal,
                                                args.offset_mode),
                   test_shift=test, trainer=cfg, mitigation=args.mitigation, rank=args.rank,
                   sensitivity=sens, trials=args.trials, seed=args.seed, **privacy)
    res = mc_error(scn, workers=args.workers)
    doc = res.to_dict()
    doc["scenario"]["rho"] = _finite(doc["scenario"]["rho"])
    _emit_json(doc, args.out)


def _cmd_bounds(args) -> None:
    from . import bounds as B

    needs_rho = args.setting in ("noisygd", "offset", "projected", "pca", "random-init") or (
        args.setting in B.TABLE1_SETTINGS and not args.nonprivate)
    rho = _resolve_rho(args, required=needs_rho)
    if rho is not None and math.isinf(rho):
        rho = None
    q = B.BoundQuery(n=args.n, p=args.p, K=args.K, K0=args.K0, beta=args.beta,
                     beta_tilde=args.beta_tilde, beta0=args.beta0, rho=rho, gamma=args.gamma,
                     alpha=args.alpha, R=args.R, k=args.k, t=args.t,
                     independent_coordinates=args.independent, sigma=args.sigma)
    s = args.setting
    if s in B.TABLE1_SETTINGS:
        res = B.table1_sample_complexity(s, q, private=not args.nonprivate)
    elif s == "gd":
        res = B.gd_error_bound(q)
    elif s == "noisygd":
        res = B.noisygd_error_bound(q)
    elif s == "offset":
        res = B.deterministic_shift_bound(q)
    elif s == "projected":
        res = B.projected_multi_iter_bound(q)
    elif s == "pca":
        res = B.pca_sample_complexity(q)
    elif s == "perfect-nc-error":
        if args.sigma is None or args.n is None:
            raise UsageError("perfect-nc-error needs --n and --sigma")
        res = B.perfect_nc_error(args.n, args.K, args.sigma, K0=args.K0, spread=args.spread)
    else:
        if args.seed is None:
            raise UsageError("random-init: --seed is required")
        if args.n is None:
            raise UsageError("random-init needs --n")
        res = B.random_init_error(args.n, rho, args.G, seed=args.seed)
    doc = res.to_dict()
    doc["setting"] = s
    _emit_json(doc, args.out)


def _cmd_analyze(args) -> None:
    from .analysis import beta_histogram, collapse_report, histogram_csv
    from .synth import load_features

    data = load_features(args.input, normalize=args.normalize)
    report = collapse_report(data, args.cosine_tolerance)
    hist = histogram_csv(beta_histogram(report, args.bins))
    doc = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "beta_histogram.csv").write_text(hist)
        _emit_json(doc, str(out / "report.json"))
    else:
        if args.hist:
            Path(args.hist).write_text(hist)
        _emit_json(doc, None)


def _cmd_mitigate(args) -> None:
    from .mitigations import fit_projection, normalize_dataset, project_dataset
    from .synth import load_features, save_features

    data = load_features(args.input)
    if args.method == "normalize":
        new, G = normalize_dataset(data)
        doc = {"method": "normalize", "n": data.n, "p": data.p, "sensitivity": G,
               "details": new.metadata.get("normalized")}
    else:
        if args.rank is None:
            raise UsageError(f"mitigate: --rank is required for {args.method}")
        if args.solver == "subspace" and args.seed is None:
            raise UsageError("mitigate: --seed is required with --solver subspace")
        public = load_features(args.public) if args.public else data
        if args.method == "pca":
            proj = fit_projection(public, "pca", args.rank, solver=args.solver,
                                  seed=args.seed or 0)
        else:
            proj = fit_projection(public, "class-mean", args.rank)
        new = project_dataset(data, proj)
        doc = proj.to_dict()
        doc["sensitivity"] = new.sensitivity
        doc["note"] = "non-private projection fit"
    if args.features_out:
        save_features(new, args.features_out)
    _emit_json(doc, args.out)


def _cmd_reproduce(args) -> None:
    from .harness import run_preset

    if args.seed is None:
        raise UsageError("reproduce: --seed is required")
    kw = {}
    if args.ps:
        if args.preset not in ("fig4a", "fig5"):
            raise UsageError("--ps applies to fig4a and fig5 only")
        kw["ps"] = args.ps
    if args.ranks:
        if args.preset != "fig5":
            raise UsageError("--ranks applies to fig5 only")
        kw["ranks"] = args.ranks
    if args.preset == "fig4a":
        kw["perturbation"] = args.perturbation
    if args.preset in ("fig4a", "fig5"):
        kw["workers"] = args.workers
    paths = run_preset(args.preset, args.out, seed=args.seed, trials=args.trials, **kw)
    _emit_json({"preset": args.preset, "files": [str(p) for p in paths]}, None)


HANDLERS = {
    "etf": _cmd_etf, "simulate": _cmd_simulate, "bounds": _cmd_bounds,
    "analyze": _cmd_analyze, "mitigate": _cmd_mitigate, "reproduce": _cmd_reproduce,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # any failure after parsing is a runtime error
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
