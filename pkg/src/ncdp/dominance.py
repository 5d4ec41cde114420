"""Monte Carlo dominance checks: simulated one-step error vs the analytic bounds.

Binary cells use the canonical frame [e1, -e1], balanced classes, the
sum-form update theta = sum_i y_i x_i (+ noise), and shifts orthogonal to e1.
Perfect-collapse cells run the K-class cross-entropy update from zero.
Common random numbers are shared across the two privacy levels and the
non-private run of each cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._rng import make_rng
from .bounds import (BoundQuery, deterministic_shift_bound, gd_error_bound,
                     noisygd_error_bound, perfect_nc_error)
from .evaluate import batch_errors
from .geometry import make_etf
from .privacy import calibrate, sensitivity_bound
from .synth import ShiftModel, draw_shifts
from .trainer import zero_init_direction

GRID_N = (8, 32, 128)
GRID_BETA = (0.0, 0.05, 0.1)
GRID_P = (16, 256)
GRID_RHO = (0.25, 1.0)
PERFECT_K = (2, 4)
_CELLS_PER_CHUNK = 2_000_000


@dataclass
class DominanceRow:
    theorem: str
    variant: str
    n: int
    beta: float
    p: int
    rho: float
    K: int
    mc_error: float
    stderr: float
    bound: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.mc_error <= self.bound + 3.0 * self.stderr

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out


def _mean_se(errs: np.ndarray) -> tuple[float, float]:
    m = float(errs.mean())
    se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0
    return m, se


def _chunks(trials: int, per_trial_cost: int) -> list[int]:
    size = max(1, min(trials, _CELLS_PER_CHUNK // max(1, per_trial_cost)))
    out = [size] * (trials // size)
    if trials % size:
        out.append(trials % size)
    return out


def _binary_setup(p: int):
    frame = make_etf(p, 2, canonical=True)
    return frame, np.array([0, 1])


def stochastic_cells(n: int, beta: float, p: int, rhos: Sequence[float], trials: int,
                     seed: int) -> list[DominanceRow]:
    """Non-private GD and NoisyGD on i.i.d. uniform shifts."""
    frame, y_test = _binary_setup(p)
    shift = ShiftModel.stochastic(beta, orthogonal_to_prototype=True)
    G = sensitivity_bound(shift, p)
    sigmas = {rho: calibrate(G, rho).sigma for rho in rhos}
    labels = np.repeat([0, 1], n // 2)
    proto = frame.M.T  # (2, p)
    gd, noisy = [], {rho: [] for rho in rhos}
    for c, B in enumerate(_chunks(trials, n * p)):
        rng = make_rng(seed, c)
        V = draw_shifts(shift, (B, n + 2, p), rng)
        V[:, :, 0] = 0.0  # orthogonal to the prototype axis e1
        X = proto[labels][None] + V[:, :n]
        S = np.stack([X[:, labels == 0].sum(axis=1), X[:, labels == 1].sum(axis=1)], axis=1)
        theta = zero_init_direction(S, loss="squared", reparameterized=True)
        X_test = proto[None] + V[:, n:]
        gd.append(batch_errors(theta, X_test, y_test, reparameterized=True))
        Z = rng.standard_normal(theta.shape)
        for rho in rhos:
            noisy[rho].append(batch_errors(theta - sigmas[rho] * Z, X_test, y_test, True))
    rows = []
    gd_err = np.concatenate(gd)
    m, se = _mean_se(gd_err)
    for indep in (False, True):
        q = BoundQuery(n=n, p=p, K=2, beta=beta, independent_coordinates=indep)
        rows.append(DominanceRow("gd-stochastic", "independent" if indep else "stated",
                                 n, beta, p, math.inf, 2, m, se, gd_error_bound(q).error_bound,
                                 trials))
    for rho in rhos:
        m, se = _mean_se(np.concatenate(noisy[rho]))
        for indep in (False, True):
            q = BoundQuery(n=n, p=p, K=2, beta=beta, rho=rho, independent_coordinates=indep)
            rows.append(DominanceRow("noisygd-stochastic", "independent" if indep else "stated",
                                     n, beta, p, rho, 2, m, se,
                                     noisygd_error_bound(q).error_bound, trials))
    return rows


def offset_cells(n: int, beta: float, p: int, rhos: Sequence[float], trials: int,
                 seed: int) -> list[DominanceRow]:
    """NoisyGD under a fixed label-signed offset orthogonal to e1."""
    frame, y_test = _binary_setup(p)
    G = math.sqrt(1.0 + beta * beta * p)
    rows = []
    errs = {rho: [] for rho in rhos}
    for c, B in enumerate(_chunks(trials, p)):
        rng = make_rng(seed, 10_000 + c)
        # a fresh random-sign offset per trial
        v = beta * rng.choice(np.array([-1.0, 1.0]), size=(B, p))
        v[:, 0] = 0.0  # orthogonal to e1; matches deterministic_class_rows
        R = np.stack([frame.M[:, 0] + v, frame.M[:, 1] - v], axis=1)
        S = (n // 2) * R
        theta = zero_init_direction(S, loss="squared", reparameterized=True)
        Z = rng.standard_normal(theta.shape)
        for rho in rhos:
            sigma = calibrate(G, rho).sigma
            errs[rho].append(batch_errors(theta - sigma * Z, R, y_test, True))
    for rho in rhos:
        m, se = _mean_se(np.concatenate(errs[rho]))
        q = BoundQuery(n=n, p=p, K=2, beta=beta, rho=rho)
        rows.append(DominanceRow("noisygd-offset", "stated", n, beta, p, rho, 2, m, se,
                                 deterministic_shift_bound(q).error_bound, trials))
    return rows


def perfect_cells(n: int, p: int, K: int, rhos: Sequence[float], trials: int,
                  seed: int) -> list[DominanceRow]:
    """K-class cross-entropy NoisyGD on perfectly collapsed balanced data."""
    frame = make_etf(p, K, canonical=True)
    S = (n / K) * frame.M.T  # requires K | n for exact balance
    W0 = zero_init_direction(S, loss="ce")
    y_test = np.arange(K)
    X_test = frame.M.T
    errs = {rho: [] for rho in rhos}
    for c, B in enumerate(_chunks(trials, K * p)):
        rng = make_rng(seed, 20_000 + c)
        Z = rng.standard_normal((B, K, p))
        for rho in rhos:
            sigma = calibrate(1.0, rho).sigma
            errs[rho].append(batch_errors(W0[None] - sigma * Z, X_test, y_test, False))
    rows = []
    for rho in rhos:
        m, se = _mean_se(np.concatenate(errs[rho]))
        sigma = calibrate(1.0, rho).sigma
        for spread in ("stated", "sqrt2"):
            b = perfect_nc_error(n, K, sigma, spread=spread).error_bound
            rows.append(DominanceRow("perfect-nc", spread, n, 0.0, p, rho, K, m, se, b, trials))
    return rows


def run_grid(trials: int = 100_000, seed: int = 0, ns: Iterable[int] = GRID_N,
             betas: Iterable[float] = GRID_BETA, ps: Iterable[int] = GRID_P,
             rhos: Sequence[float] = GRID_RHO, perfect_K: Iterable[int] = PERFECT_K
             ) -> list[DominanceRow]:
    rows: list[DominanceRow] = []
    ns, betas, ps = list(ns), list(betas), list(ps)
    for i, (n, beta, p) in enumerate(itertools.product(ns, betas, ps)):
        cell_seed = seed * 1_000 + i
        rows += stochastic_cells(n, beta, p, rhos, trials, cell_seed)
        rows += offset_cells(n, beta, p, rhos, trials, cell_seed)
    for j, (n, p, K) in enumerate(itertools.product(ns, ps, perfect_K)):
        rows += perfect_cells(n, p, K, rhos, trials, seed * 1_000 + 500 + j)
    return rows


def resolve_spread(rows: Sequence[DominanceRow]) -> str:
    """Keep the stated spread if it dominates everywhere, else fall back to sqrt2."""
    stated = [r for r in rows if r.theorem == "perfect-nc" and r.variant == "stated"]
    return "stated" if all(r.passed for r in stated) else "sqrt2"


def summarize(rows: Sequence[DominanceRow]) -> dict:
    spread = resolve_spread(rows)
    checks = {
        "gd-stochastic": [r for r in rows if r.theorem == "gd-stochastic"],
        "noisygd-stochastic": [r for r in rows if r.theorem == "noisygd-stochastic"],
        "noisygd-offset": [r for r in rows if r.theorem == "noisygd-offset"],
        "perfect-nc": [r for r in rows if r.theorem == "perfect-nc" and r.variant == spread],
    }
    out = {name: {"cells": len(rs), "failures": sum(not r.passed for r in rs)}
           for name, rs in checks.items()}
    stated = [r for r in rows if r.theorem == "perfect-nc" and r.variant == "stated"]
    out["perfect-nc"]["resolved_spread"] = spread
    out["perfect-nc"]["stated_spread_failures"] = sum(not r.passed for r in stated)
    out["all_pass"] = all(v["failures"] == 0 for v in out.values() if isinstance(v, dict))
    return out
