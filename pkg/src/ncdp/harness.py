"""Monte Carlo estimation of test accuracy and the experiment presets.

Randomness flows from ``Scenario.seed`` only.  Deterministic-feature
scenarios are simulated in blocks of trials, and block ``b`` draws from
``make_rng(seed, 0, b)``.  Scenarios with random training features run one
trial at a time, and trial ``t`` draws from ``make_rng(seed, 1, t)``.  Results
are reduced in index order, so they do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ._rng import make_rng
from .bounds import (TABLE1_SETTINGS, BoundQuery, deterministic_shift_bound,
                     noisygd_error_bound, perfect_nc_error, table1_sample_complexity)
from .evaluate import batch_errors
from .geometry import EtfFrame, make_etf
from .mitigations import accurate_mean, fit_projection, normalize_dataset, project_dataset
from .privacy import calibrate, dp_to_zcdp, sensitivity_bound
from .synth import (LabeledDataset, ShiftModel, class_counts_from_weights, draw_shifts,
                    imbalanced_weights, orthogonal_offset, random_sign_offset,
                    sample_dataset)
from .trainer import TrainConfig, train, zero_init_direction

logger = logging.getLogger(__name__)

MITIGATIONS = ("none", "pca", "class-mean", "normalize")
PRESETS = ("fig4a", "fig5", "table1-grid", "bound-dominance")
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo experiment.

    Privacy is given as exactly one of ``rho``, ``(epsilon, delta)`` or
    ``nonprivate=True``.  ``test_shift=None`` reuses the training shift
    (the same offset vector for ``offset`` shifts, fresh draws for
    stochastic ones).  ``sensitivity`` is "bound" (worst case over the
    shift's l_inf box), "empirical" (largest training row norm) or a number.
    With ``mitigation="pca"`` the basis is fit on the training features
    unless ``public_size`` asks for a separate public draw.
    """

    p: int
    K: int
    n: int
    canonical: bool = True
    frame_seed: int = 0
    class_weights: Optional[tuple] = None
    alpha: Optional[float] = None
    train_shift: ShiftModel = ShiftModel()
    test_shift: Optional[ShiftModel] = None
    rho: Optional[float] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    nonprivate: bool = False
    trainer: TrainConfig = TrainConfig()
    mitigation: str = "none"
    rank: Optional[int] = None
    public_size: Optional[int] = None
    sensitivity: Union[str, float] = "bound"
    trials: int = 200
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        given = [self.rho is not None, self.epsilon is not None or self.delta is not None,
                 self.nonprivate]
        if sum(given) != 1:
            raise ValueError("give exactly one of rho, (epsilon, delta), or nonprivate")
        if self.epsilon is not None and self.delta is None or \
                self.delta is not None and self.epsilon is None:
            raise ValueError("epsilon and delta go together")
        if self.class_weights is not None and self.alpha is not None:
            raise ValueError("give class_weights or alpha, not both")
        if self.mitigation not in MITIGATIONS:
            raise ValueError(f"unknown mitigation {self.mitigation!r}")
        if self.mitigation == "pca":
            if self.rank is None:
                raise ValueError("pca mitigation needs a rank")
            if self.rank > self.p:
                raise ValueError(f"infeasible mitigation: rank {self.rank} > p={self.p}")
        if isinstance(self.sensitivity, str) and self.sensitivity not in ("bound", "empirical"):
            raise ValueError(f"unknown sensitivity rule {self.sensitivity!r}")
        if self.train_shift.kind == "adversarial-test":
            raise ValueError("adversarial shifts apply to test points only")

    @property
    def resolved_rho(self) -> float:
        if self.nonprivate:
            return math.inf
        if self.rho is not None:
            return float(self.rho)
        return dp_to_zcdp(self.epsilon, self.delta)

    @property
    def effective_test_shift(self) -> ShiftModel:
        return self.train_shift if self.test_shift is None else self.test_shift

    def weights(self) -> np.ndarray:
        if self.alpha is not None:
            return imbalanced_weights(self.K, self.alpha)
        if self.class_weights is not None:
            return np.asarray(self.class_weights, dtype=float)
        return np.full(self.K, 1.0 / self.K)

    def frame(self) -> EtfFrame:
        return make_etf(self.p, self.K, seed=self.frame_seed, canonical=self.canonical)

    def to_dict(self) -> dict:
        out = {
            "label": self.label, "p": self.p, "K": self.K, "n": self.n,
            "canonical": self.canonical, "frame_seed": self.frame_seed,
            "class_weights": self.weights().tolist(), "alpha": self.alpha,
            "train_shift": self.train_shift.describe(),
            "test_shift": None if self.test_shift is None else self.test_shift.describe(),
            "rho": self.resolved_rho if not self.nonprivate else None,
            "epsilon": self.epsilon, "delta": self.delta, "nonprivate": self.nonprivate,
            "trainer": asdict(self.trainer), "mitigation": self.mitigation,
            "rank": self.rank, "public_size": self.public_size,
            "sensitivity": self.sensitivity, "trials": self.trials, "seed": self.seed,
        }
        return out


@dataclass
class TrialResult:
    accuracy_mean: float
    accuracy_stderr: float
    error_mean: float
    error_stderr: float
    trials: int
    seed_keys: list
    scenario: dict
    bound: Optional[dict] = None
    errors: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "accuracy_mean": self.accuracy_mean, "accuracy_stderr": self.accuracy_stderr,
            "error_mean": self.error_mean, "error_stderr": self.error_stderr,
            "trials": self.trials, "seed_keys": self.seed_keys,
            "scenario": self.scenario, "bound": self.bound,
        }


def _aggregate(scn: Scenario, errors: np.ndarray, seed_keys: list) -> TrialResult:
    errors = np.asarray(errors, dtype=float)
    mean = float(np.mean(errors))
    se = float(np.std(errors, ddof=1) / math.sqrt(errors.size)) if errors.size > 1 else 0.0
    return TrialResult(1.0 - mean, se, mean, se, int(errors.size), seed_keys, scn.to_dict(),
                       matching_bound(scn), errors)


# --- sensitivity and noise ----------------------------------------------------

def _bound_sensitivity(scn: Scenario, frame: EtfFrame) -> float:
    return sensitivity_bound(scn.train_shift, scn.p, frame=frame)


def _noise_sigma(G, rho: float):
    if math.isinf(rho):
        return np.zeros_like(G) if isinstance(G, np.ndarray) else 0.0
    if isinstance(G, np.ndarray):
        return G / math.sqrt(2.0 * rho)
    return calibrate(G, rho).sigma


# --- fast path: deterministic training features --------------------------------

def _fast_path_ok(scn: Scenario) -> bool:
    cfg = scn.trainer
    return (scn.train_shift.kind in ("none", "offset") and scn.mitigation == "none"
            and cfg.iterations == 1 and cfg.projection_radius is None and cfg.init_scale == 0)


def _offset_rows(scn: Scenario, frame: EtfFrame, rng: np.random.Generator, B: int) -> np.ndarray:
    """(B, K, p) class rows; a fresh sign vector per trial when none is fixed."""
    shift = scn.train_shift
    base = frame.M.T
    if shift.kind == "none":
        return np.broadcast_to(base, (B,) + base.shape)
    if shift.offset_vector is not None:
        V = np.broadcast_to(np.asarray(shift.offset_vector, dtype=float), (B, scn.p))
    else:
        V = shift.beta * rng.choice(np.array([-1.0, 1.0]), size=(B, scn.p))
    if shift.orthogonal_to_prototype:
        V = np.stack([orthogonal_offset(v, frame.M, shift.beta) for v in V])
    mode = shift.offset_mode
    if mode == "auto":
        mode = "label-signed" if scn.K == 2 else "common"
    signs = np.array([1.0, -1.0]) if mode == "label-signed" else np.ones(scn.K)
    return base[None] + signs[None, :, None] * V[:, None, :]


def _test_points(scn: Scenario, frame: EtfFrame, rows: np.ndarray,
                 rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """One test point per class for every trial, plus the attack size."""
    ts = scn.effective_test_shift
    base = rows if scn.test_shift is None else np.broadcast_to(frame.M.T, rows.shape)
    if ts.kind in ("none", "offset"):
        if scn.test_shift is not None and ts.kind == "offset":
            v = ts.offset_vector if ts.offset_vector is not None else \
                random_sign_offset(scn.p, ts.beta, rng)
            return base + np.asarray(v)[None, None, :], 0.0
        return base, 0.0
    if ts.kind == "stochastic":
        V = draw_shifts(ts, base.shape, rng)
        if ts.orthogonal_to_prototype:
            U = frame.M.T / np.linalg.norm(frame.M.T, axis=1, keepdims=True)
            V = V - np.einsum("bkp,kp->bk", V, U)[..., None] * U[None]
            if np.isfinite(ts.linf_bound):
                V = np.clip(V, -ts.beta, ts.beta)
        return base + V, 0.0
    return base, ts.beta  # adversarial-test


def _fast_block(scn: Scenario, frame: EtfFrame, counts: np.ndarray, rho: float,
                block: int, B: int) -> np.ndarray:
    rng = make_rng(scn.seed, 0, block)
    cfg = scn.trainer
    eta = 1.0 if cfg.eta is None else cfg.eta
    rows = _offset_rows(scn, frame, rng, B)
    S = counts[None, :, None] * rows
    direction = zero_init_direction(S, cfg.loss, cfg.reparameterized)
    if isinstance(scn.sensitivity, (int, float)):
        G = float(scn.sensitivity)
    elif scn.sensitivity == "bound":
        G = _bound_sensitivity(scn, frame)
    else:
        present = counts > 0
        G = np.linalg.norm(rows[:, present], axis=2).max(axis=1)
    sigma = np.asarray(_noise_sigma(G, rho), dtype=float)
    if np.any(sigma > 0):
        Z = rng.standard_normal(direction.shape)
        if sigma.ndim:  # one sigma per trial
            sigma = sigma.reshape((-1,) + (1,) * (direction.ndim - 1))
        direction = direction - sigma * Z
    params = eta * direction
    X_test, adv = _test_points(scn, frame, np.asarray(rows), rng)
    return batch_errors(params, X_test, np.arange(scn.K), cfg.reparameterized, adv)


# --- general path: one trial at a time -----------------------------------------

@dataclass(frozen=True)
class Variant:
    """A mitigation applied to a shared trial draw."""

    mitigation: str = "none"
    rank: Optional[int] = None

    @property
    def name(self) -> str:
        if self.mitigation == "pca":
            return f"pca-r{self.rank}"
        return self.mitigation


def _sample_trial(scn: Scenario, frame: EtfFrame, rng: np.random.Generator):
    train_shift = scn.train_shift
    if train_shift.kind == "offset" and train_shift.offset_vector is None:
        v = random_sign_offset(scn.p, train_shift.beta, rng)
        train_shift = replace(train_shift, offset_vector=v)
    data = sample_dataset(frame, scn.n, scn.weights(), train_shift,
                          seed=int(rng.integers(2**63)))
    if scn.test_shift is None:
        test_shift, adv = train_shift, 0.0
    elif scn.test_shift.kind == "adversarial-test":
        test_shift, adv = ShiftModel(), scn.test_shift.beta
    else:
        test_shift, adv = scn.test_shift, 0.0
    test = sample_dataset(frame, scn.K, None, test_shift, seed=int(rng.integers(2**63)))
    return data, test, adv


def _train_sensitivity(scn: Scenario, frame: EtfFrame, data: LabeledDataset) -> float:
    if isinstance(scn.sensitivity, (int, float)):
        return float(scn.sensitivity)
    if scn.sensitivity == "bound":
        return _bound_sensitivity(scn, frame)
    return data.max_row_norm()


def _heavy_trial(scn: Scenario, frame: EtfFrame, rho: float, variants: Sequence[Variant],
                 trial: int) -> np.ndarray:
    rng = make_rng(scn.seed, 1, trial)
    data, test, adv = _sample_trial(scn, frame, rng)
    noise_seed = int(rng.integers(2**63))
    pca_ranks = [v.rank for v in variants if v.mitigation == "pca"]
    basis = None
    if pca_ranks:
        r_max = max(pca_ranks)
        if scn.public_size:
            public = sample_dataset(frame, scn.public_size, scn.weights(), scn.train_shift,
                                    seed=int(rng.integers(2**63)))
        else:
            public = data
        basis = fit_projection(public, "pca", r_max, seed=noise_seed).basis
    out = np.empty(len(variants))
    Z_train = Z_test = None
    for i, var in enumerate(variants):
        tr, te = data, test
        if var.mitigation == "none":
            G = _train_sensitivity(scn, frame, data)
        elif var.mitigation == "pca":
            # prefixes of the largest basis; project once and slice
            if Z_train is None:
                Z_train, Z_test = data.features @ basis, test.features @ basis
            tr = data.with_features(Z_train[:, :var.rank])
            te = test.with_features(Z_test[:, :var.rank])
            G = float(np.linalg.norm(tr.features, axis=1).max())
        elif var.mitigation == "class-mean":
            proj = fit_projection(data, "class-mean", scn.K)
            tr, te = project_dataset(data, proj), project_dataset(test, proj)
            G = tr.sensitivity
        else:  # normalize
            mean = accurate_mean(data.features)
            tr, G = normalize_dataset(data)
            te = test.with_features(test.features - mean)
        calib = calibrate(G, rho)
        head = train(tr, scn.trainer, calib, seed=noise_seed,
                     enforce_row_bound=var.mitigation == "none")
        out[i] = batch_errors(head.W[None], te.features, te.labels, head.reparameterized,
                              adv)[0]
    return out


def _run_heavy(scn: Scenario, variants: Sequence[Variant], workers: int) -> np.ndarray:
    frame = scn.frame()
    rho = scn.resolved_rho

    def job(t):
        return _heavy_trial(scn, frame, rho, variants, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(job, range(scn.trials)))
    else:
        res = [job(t) for t in range(scn.trials)]
    return np.stack(res)  # (trials, variants)


def _block_plan(scn: Scenario) -> list[int]:
    per = max(1, _BLOCK_CELLS // (scn.K * scn.p))
    sizes = [per] * (scn.trials // per)
    if scn.trials % per:
        sizes.append(scn.trials % per)
    return sizes


def mc_error(scn: Scenario, workers: int = 1) -> TrialResult:
    """Estimate the test error of the scenario's trained head."""
    if scn.mitigation == "pca" and scn.rank > scn.p:
        raise ValueError(f"infeasible mitigation: rank {scn.rank} > p={scn.p}")
    if _fast_path_ok(scn):
        frame = scn.frame()
        counts = class_counts_from_weights(scn.n, scn.weights())
        rho = scn.resolved_rho
        sizes = _block_plan(scn)

        def job(b):
            return _fast_block(scn, frame, counts, rho, b, sizes[b])

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(job, range(len(sizes))))
        else:
            parts = [job(b) for b in range(len(sizes))]
        keys = [[scn.seed, 0, b] for b in range(len(sizes))]
        return _aggregate(scn, np.concatenate(parts), keys)
    errs = _run_heavy(scn, [Variant(scn.mitigation, scn.rank)], workers)[:, 0]
    return _aggregate(scn, errs, [[scn.seed, 1, t] for t in range(scn.trials)])


def mc_error_variants(scn: Scenario, variants: Sequence[Variant],
                      workers: int = 1) -> dict[str, TrialResult]:
    """Several mitigations evaluated on the same per-trial draws."""
    errs = _run_heavy(scn, list(variants), workers)
    keys = [[scn.seed, 1, t] for t in range(scn.trials)]
    return {v.name: _aggregate(replace(scn, mitigation=v.mitigation, rank=v.rank),
                               errs[:, i], keys)
            for i, v in enumerate(variants)}


def matching_bound(scn: Scenario) -> Optional[dict]:
    """The analytic value that applies to this scenario, if any."""
    if scn.mitigation != "none" or scn.trainer.iterations != 1 or scn.nonprivate:
        return None
    balanced = np.allclose(scn.weights(), 1.0 / scn.K)
    rho = scn.resolved_rho
    ts = scn.test_shift
    try:
        if scn.train_shift.kind == "none" and balanced and (ts is None or ts.kind == "none"):
            G = 1.0 if isinstance(scn.sensitivity, str) else float(scn.sensitivity)
            sigma = calibrate(G, rho).sigma
            if sigma == 0:
                return None
            if scn.K == 2 and scn.trainer.reparameterized:
                r = perfect_nc_error(scn.n, 2, sigma)
                return {**r.to_dict(), "exact": True}
            return perfect_nc_error(scn.n, scn.K, sigma, spread="sqrt2").to_dict()
        if scn.K == 2 and balanced and scn.trainer.loss == "squared" and ts is None:
            q = BoundQuery(n=scn.n, p=scn.p, K=2, beta=scn.train_shift.beta, rho=rho,
                           independent_coordinates=scn.train_shift.independent_coordinates)
            if scn.train_shift.kind == "stochastic":
                return noisygd_error_bound(q).to_dict()
            if scn.train_shift.kind == "offset":
                return deterministic_shift_bound(q).to_dict()
    except ValueError:
        return None
    return None


# --- presets -------------------------------------------------------------------

FIG4A_PS = (16, 64, 256, 1024, 4096)
FIG5_PS = (16, 64, 256, 1024, 4096)
FIG5_RANKS = (9, 10, 50, 100)
CSV_HEADER = ("curve", "p", "accuracy", "stderr", "trials")


@dataclass
class CurveRow:
    curve: str
    p: int
    accuracy: float
    stderr: float
    trials: int
    result: Optional[TrialResult] = field(default=None, repr=False)

    def as_csv(self) -> list:
        return [self.curve, self.p, repr(self.accuracy), repr(self.stderr), self.trials]


def fig4a_scenarios(p: int, trials: int, seed: int, n: int = 10_000, K: int = 10,
                    epsilon: float = 1.0, delta: float = 1e-4, perturbation: str = "adversarial",
                    beta: float = 0.1, alpha: float = 0.3) -> dict[str, Scenario]:
    """Curves of the dimension sweep under (epsilon, delta)-DP.

    ``perturbation`` selects the test-time attack for "perturbed-test":
    "adversarial" (worst l_inf vector), "uniform" (i.i.d. on [-beta, beta])
    or "gaussian" (variance beta).  With the adversarial default a uniform
    version is added as "perturbed-test-uniform" for reference.
    """
    common = dict(p=p, K=K, n=n, epsilon=epsilon, delta=delta, trials=trials)
    tests = {"adversarial": ShiftModel.adversarial(beta),
             "uniform": ShiftModel.stochastic(beta),
             "gaussian": ShiftModel.gaussian(beta)}
    if perturbation not in tests:
        raise ValueError(f"unknown perturbation {perturbation!r}")
    out = {
        "default": Scenario(**common, seed=seed, label="default"),
        "imbalance": Scenario(**common, alpha=alpha, seed=seed + 1, label="imbalance"),
        "offset+imbalance": Scenario(**common, alpha=alpha, train_shift=ShiftModel.offset(beta),
                                     seed=seed + 2, label="offset+imbalance"),
        "perturbed-test": Scenario(**common, test_shift=tests[perturbation], seed=seed + 3,
                                   label="perturbed-test"),
    }
    if perturbation == "adversarial":
        out["perturbed-test-uniform"] = Scenario(**common, test_shift=tests["uniform"],
                                                 seed=seed + 4, label="perturbed-test-uniform")
    return out


def run_fig4a(trials: int = 200, seed: int = 0, ps: Sequence[int] = FIG4A_PS,
              workers: int = 1, **kw) -> list[CurveRow]:
    rows = []
    for p in ps:
        for name, scn in fig4a_scenarios(p, trials, seed, **kw).items():
            res = mc_error(scn, workers=workers)
            rows.append(CurveRow(name, p, res.accuracy_mean, res.accuracy_stderr, res.trials, res))
            logger.info("fig4a %s p=%d acc=%.4f", name, p, res.accuracy_mean)
    return rows


def fig5_scenario(p: int, trials: int, seed: int, n: int = 10_000, K: int = 10,
                  epsilon: float = 1.0, delta: float = 1e-4, beta: float = 0.2,
                  public_size: Optional[int] = None) -> Scenario:
    return Scenario(p=p, K=K, n=n, epsilon=epsilon, delta=delta, trials=trials, seed=seed,
                    train_shift=ShiftModel.stochastic(beta), public_size=public_size,
                    label="fig5")


def run_fig5(trials: int = 100, seed: int = 0, ps: Sequence[int] = FIG5_PS,
             ranks: Sequence[int] = FIG5_RANKS, workers: int = 1, **kw) -> list[CurveRow]:
    """No-mitigation baseline and PCA at each rank, sharing draws per trial.

    Ranks larger than p are skipped.
    """
    rows = []
    for p in ps:
        scn = fig5_scenario(p, trials, seed, **kw)
        variants = [Variant()] + [Variant("pca", r) for r in ranks if r <= p]
        res = mc_error_variants(scn, variants, workers=workers)
        for v in variants:
            r = res[v.name]
            rows.append(CurveRow(v.name, p, r.accuracy_mean, r.accuracy_stderr, r.trials, r))
            logger.info("fig5 %s p=%d acc=%.4f", v.name, p, r.accuracy_mean)
    return rows


TABLE1_GRID = {
    "gamma": (0.1, 0.01, 0.001),
    "rho": (0.1, 1.0),
    "p": (100, 1000),
    "beta": (0.05, 0.1),
}
TABLE1_HEADER = ("setting", "private", "gamma", "rho", "p", "K", "beta", "beta_tilde",
                 "alpha", "sample_complexity")


def run_table1_grid(K: int = 10, alpha: float = 0.3) -> list[dict]:
    rows = []
    for setting in TABLE1_SETTINGS:
        for gamma, rho, p, beta in itertools.product(*TABLE1_GRID.values()):
            q = BoundQuery(p=p, K=K, beta=beta, beta_tilde=beta, rho=rho, gamma=gamma,
                           alpha=alpha)
            for private in (True, False):
                try:
                    res = table1_sample_complexity(setting, q, private=private)
                except ValueError:
                    continue
                rows.append({"setting": setting, "private": private, "gamma": gamma,
                             "rho": rho if private else "", "p": p, "K": K, "beta": beta,
                             "beta_tilde": beta, "alpha": alpha,
                             "sample_complexity": res.sample_complexity})
    return rows


DOMINANCE_HEADER = ("theorem", "variant", "n", "beta", "p", "rho", "K", "mc_error",
                    "stderr", "bound", "trials", "pass")


def run_bound_dominance(trials: int = 100_000, seed: int = 0, **kw):
    from .dominance import run_grid, summarize

    rows = run_grid(trials=trials, seed=seed, **kw)
    return rows, summarize(rows)


def curves_csv(rows: Sequence[CurveRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def dicts_csv(rows: Sequence[dict], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_preset(name: str, out_dir: Union[str, Path], seed: int, trials: Optional[int] = None,
               workers: int = 1, **overrides) -> list[Path]:
    """Run a preset and write its CSV (plus a JSON summary for dominance)."""
    import json

    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if name == "fig4a":
        rows = run_fig4a(trials=trials or 200, seed=seed, workers=workers, **overrides)
        path = out / "fig4a.csv"
        path.write_text(curves_csv(rows))
        written.append(path)
    elif name == "fig5":
        rows = run_fig5(trials=trials or 100, seed=seed, workers=workers, **overrides)
        path = out / "fig5.csv"
        path.write_text(curves_csv(rows))
        written.append(path)
    elif name == "table1-grid":
        path = out / "table1.csv"
        path.write_text(dicts_csv(run_table1_grid(**overrides), TABLE1_HEADER))
        written.append(path)
    else:
        rows, summary = run_bound_dominance(trials=trials or 100_000, seed=seed, **overrides)
        path = out / "bound_dominance.csv"
        path.write_text(dicts_csv([r.to_dict() for r in rows], DOMINANCE_HEADER))
        spath = out / "bound_dominance_summary.json"
        spath.write_text(json.dumps(summary))
        written += [path, spath]
    return written
