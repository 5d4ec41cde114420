"""Linear last-layer training: one-step NoisyGD from zero and projected NoisyGD.

Parameters are either a K x p matrix ``W`` with prediction ``argmax(W x)``, or,
for binary tasks in the reparameterized form, a p-vector ``theta`` standing for
``W = [theta/2, -theta/2]``.  Under that map cross-entropy on ``W`` becomes the
logistic loss on ``theta`` and ``argmax`` becomes ``sign(theta^T x)``.  Class 0
carries label +1, class 1 carries label -1.

From zero initialization the first gradient depends on the data only through
the class sums ``S_k = sum_{i: y_i = k} x_i``; the helpers below work on those
sums directly (with any leading batch shape) so Monte Carlo loops can skip
materializing datasets.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, log_softmax, softmax

from ._rng import as_seed
from .privacy import NoiseCalibration
from .synth import LabeledDataset

logger = logging.getLogger(__name__)

LOSSES = ("ce", "squared", "logistic")
_ROW_TOL = 1e-9


@dataclass
class LinearHead:
    """Trained last layer.  ``W`` is (K, p), or (p,) when reparameterized."""

    W: np.ndarray
    reparameterized: bool = False
    log: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.reparameterized and self.W.ndim != 1:
            raise ValueError("a reparameterized head stores a single p-vector")
        if not self.reparameterized and self.W.ndim != 2:
            raise ValueError("W must be a K x p matrix")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("head has non-finite entries")

    @property
    def theta(self) -> np.ndarray:
        if not self.reparameterized:
            raise AttributeError("theta exists only for reparameterized heads")
        return self.W

    @property
    def K(self) -> int:
        return 2 if self.reparameterized else self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[-1]

    def as_matrix(self) -> np.ndarray:
        """The K x p matrix this head represents."""
        if self.reparameterized:
            return np.stack([self.W / 2.0, -self.W / 2.0])
        return self.W

    def to_dict(self) -> dict:
        return {"K": self.K, "p": self.p, "W": self.W.ravel().tolist(),
                "reparameterized": self.reparameterized}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearHead":
        W = np.asarray(doc["W"], dtype=float)
        if doc.get("reparameterized", False):
            return cls(W.reshape(int(doc["p"])), reparameterized=True)
        return cls(W.reshape(int(doc["K"]), int(doc["p"])))


@dataclass(frozen=True)
class TrainConfig:
    """``eta=None`` means 1 for a single step, and the prescribed schedule
    (see :func:`default_step_size`) for projected multi-step runs."""

    eta: Optional[float] = None
    iterations: int = 1
    projection_radius: Optional[float] = None
    tail_parameter: Optional[float] = None
    loss: str = "ce"
    reparameterized: bool = False
    init_scale: float = 0.0  # opt-in N(0, init_scale^2) initialization

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"learning rate must be positive, got {self.eta}")
        if self.iterations > 1 and self.projection_radius is None:
            raise ValueError("projection_radius is required when iterations > 1")
        if self.projection_radius is not None and not self.projection_radius > 0:
            raise ValueError("projection_radius must be positive")
        if self.loss == "logistic" and not self.reparameterized:
            raise ValueError("the logistic loss needs the binary reparameterization")
        if self.init_scale < 0:
            raise ValueError("init_scale must be nonnegative")


# --- gradients -----------------------------------------------------------------

def _check_dims(W: np.ndarray, data: LabeledDataset) -> None:
    if W.shape[-1] != data.p:
        raise ValueError(f"dimension mismatch: head has p={W.shape[-1]}, data p={data.p}")


def ce_gradient(head: LinearHead, data: LabeledDataset) -> np.ndarray:
    """Gradient of the summed cross-entropy w.r.t. the K x p matrix."""
    W = head.as_matrix()
    _check_dims(W, data)
    if W.shape[0] != data.num_classes:
        raise ValueError(f"head has K={W.shape[0]} classes, data has {data.num_classes}")
    P = softmax(data.features @ W.T, axis=1)
    P[np.arange(data.n), data.labels] -= 1.0
    return P.T @ data.features


def ce_loss(head: LinearHead, data: LabeledDataset) -> float:
    W = head.as_matrix()
    _check_dims(W, data)
    logp = log_softmax(data.features @ W.T, axis=1)
    return float(-logp[np.arange(data.n), data.labels].sum())


def theta_gradient(G: np.ndarray) -> np.ndarray:
    """Chain rule through W = [theta/2, -theta/2]."""
    return (G[..., 0, :] - G[..., 1, :]) / 2.0


def label_signs(labels: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(labels) == 0, 1.0, -1.0)


def _batched_gradient(params: np.ndarray, X: np.ndarray, labels: np.ndarray, K: int,
                      loss: str, reparameterized: bool) -> np.ndarray:
    """Summed loss gradient for a batch of parameters with leading shape (B, ...)."""
    if reparameterized:
        y = label_signs(labels)  # (n,)
        margins = (params @ X.T) * y  # (B, n)
        if loss == "squared":
            coef = (margins - 1.0) * y
        else:  # logistic and ce coincide under the reparameterization
            coef = -y * expit(-margins)
        return coef @ X
    scores = np.einsum("bkp,np->bnk", params, X)
    if loss == "squared":
        R = scores.copy()
        R[:, np.arange(X.shape[0]), labels] -= 1.0
    else:
        R = softmax(scores, axis=2)
        R[:, np.arange(X.shape[0]), labels] -= 1.0
    return np.einsum("bnk,np->bkp", R, X)


def zero_init_direction(S: np.ndarray, loss: str = "ce", reparameterized: bool = False) -> np.ndarray:
    """Negative loss gradient at zero from class sums ``S`` of shape (..., K, p).

    ce:        W_j = S_j - (1/K) sum_k S_k
    squared:   W_j = S_j                        (or theta = S_0 - S_1)
    logistic:  theta = (S_0 - S_1) / 2          (ce with reparameterization too)
    """
    S = np.asarray(S, dtype=float)
    if reparameterized:
        if S.shape[-2] != 2:
            raise ValueError("reparameterization is for binary tasks")
        diff = S[..., 0, :] - S[..., 1, :]
        return diff if loss == "squared" else diff / 2.0
    if loss == "squared":
        return S.copy()
    if loss == "logistic":
        raise ValueError("the logistic loss needs the binary reparameterization")
    return S - S.mean(axis=-2, keepdims=True)


def one_step_from_class_sums(S: np.ndarray, eta: float, sigma: float, rng: np.random.Generator,
                             loss: str = "ce", reparameterized: bool = False) -> np.ndarray:
    """theta_1 = -eta (g(0) + xi) for every leading batch entry of ``S``."""
    d = zero_init_direction(S, loss, reparameterized)
    if sigma > 0:
        d = d - rng.normal(0.0, sigma, size=d.shape)
    return eta * d


# --- trainers ------------------------------------------------------------------

def check_sensitivity(data: LabeledDataset, G: float) -> None:
    worst = data.max_row_norm()
    if worst > G * (1.0 + _ROW_TOL) + _ROW_TOL:
        raise ValueError(
            f"sensitivity violation: a row has norm {worst:.6g} > declared G={G:.6g}"
        )


def _run_log(calib: NoiseCalibration, T: int) -> dict:
    G, s2 = calib.sensitivity_G, calib.sigma_sq
    rho = math.inf if s2 == 0 else G * G / (2.0 * s2)
    return {"G": G, "rho": rho, "sigma_sq": s2, "T": T, "total_rho": T * rho}


def _init_params(shape: tuple, cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.init_scale > 0:
        return rng.normal(0.0, cfg.init_scale, size=shape)
    return np.zeros(shape)


def one_step_noisygd(data: LabeledDataset, cfg: TrainConfig, calib: NoiseCalibration,
                     seed: int = 0, enforce_row_bound: bool = True) -> LinearHead:
    """One NoisyGD update with noise N(0, sigma^2) per coordinate.

    With ``sigma_sq = 0`` this is plain gradient descent.
    """
    if enforce_row_bound:
        check_sensitivity(data, calib.sensitivity_G)
    if cfg.reparameterized and data.num_classes != 2:
        raise ValueError("reparameterization is for binary tasks")
    eta = 1.0 if cfg.eta is None else cfg.eta
    rng = np.random.default_rng(as_seed(seed))
    shape = (data.p,) if cfg.reparameterized else (data.num_classes, data.p)
    if cfg.init_scale == 0:
        params = one_step_from_class_sums(data.class_sums(), eta, calib.sigma, rng,
                                          cfg.loss, cfg.reparameterized)
    else:
        W0 = _init_params(shape, cfg, rng)
        g = _batched_gradient(W0[None], data.features, data.labels, data.num_classes,
                              cfg.loss, cfg.reparameterized)[0]
        noise = rng.normal(0.0, calib.sigma, size=shape) if calib.sigma > 0 else 0.0
        params = W0 - eta * (g + noise)
    return LinearHead(params, reparameterized=cfg.reparameterized, log=_run_log(calib, 1))


def default_tail(n: int, k: int) -> float:
    return n * n + math.log(1.0 / k)


def default_step_size(R: float, n: int, p: int, G: float, t: float) -> float:
    """R / (n G^2 + p + sqrt(p t) + t); G^2 plays the role of 1 + beta^2 p."""
    return R / (n * G * G + (p + math.sqrt(p * max(t, 0.0)) + t))


def project_l2(params: np.ndarray, R: float) -> np.ndarray:
    """Euclidean projection of each leading-batch entry onto the radius-R ball."""
    flat = params.reshape(params.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    scale = np.where(norms > R, R / np.where(norms > 0, norms, 1.0), 1.0)
    return params * scale.reshape((-1,) + (1,) * (params.ndim - 1))


def projected_noisygd_batch(X: np.ndarray, labels: np.ndarray, K: int, cfg: TrainConfig,
                            sigma: float, eta: float, rng: np.random.Generator,
                            batch: int) -> np.ndarray:
    """Run ``batch`` independent projected NoisyGD chains on one dataset."""
    shape = (batch, X.shape[1]) if cfg.reparameterized else (batch, K, X.shape[1])
    params = _init_params(shape, cfg, rng)
    R = cfg.projection_radius if cfg.projection_radius is not None else math.inf
    for _ in range(cfg.iterations):
        g = _batched_gradient(params, X, labels, K, cfg.loss, cfg.reparameterized)
        if sigma > 0:
            g = g + rng.normal(0.0, sigma, size=shape)
        params = params - eta * g
        if math.isfinite(R):
            params = project_l2(params, R)
    return params


def resolve_eta(cfg: TrainConfig, n: int, p: int, G: float) -> float:
    if cfg.eta is not None:
        return cfg.eta
    if cfg.iterations == 1 and cfg.projection_radius is None:
        return 1.0
    t = cfg.tail_parameter if cfg.tail_parameter is not None else default_tail(n, cfg.iterations)
    return default_step_size(cfg.projection_radius, n, p, G, t)


def projected_noisygd(data: LabeledDataset, cfg: TrainConfig, calib: NoiseCalibration,
                      seed: int = 0, enforce_row_bound: bool = True) -> LinearHead:
    """``cfg.iterations`` steps of theta <- Proj_R(theta - eta (g + xi)).

    Each step spends the budget encoded in ``calib``; the log reports the
    composed total.
    """
    if cfg.projection_radius is None:
        raise ValueError("projected NoisyGD needs projection_radius")
    if enforce_row_bound:
        check_sensitivity(data, calib.sensitivity_G)
    eta = resolve_eta(cfg, data.n, data.p, calib.sensitivity_G)
    rng = np.random.default_rng(as_seed(seed))
    params = projected_noisygd_batch(data.features, data.labels, data.num_classes, cfg,
                                     calib.sigma, eta, rng, batch=1)[0]
    log = _run_log(calib, cfg.iterations)
    log["eta"] = eta
    return LinearHead(params, reparameterized=cfg.reparameterized, log=log)


def train(data: LabeledDataset, cfg: TrainConfig, calib: NoiseCalibration, seed: int = 0,
          enforce_row_bound: bool = True) -> LinearHead:
    if cfg.iterations == 1 and cfg.projection_radius is None:
        return one_step_noisygd(data, cfg, calib, seed, enforce_row_bound)
    return projected_noisygd(data, cfg, calib, seed, enforce_row_bound)


# --- prediction ----------------------------------------------------------------

def predict_batch(head: LinearHead, X: np.ndarray) -> np.ndarray:
    """Class index per row; argmax ties go to the lowest index, and the sign
    rule maps a zero score to class 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != head.p:
        raise ValueError(f"dimension mismatch: head has p={head.p}, input p={X.shape[1]}")
    if head.reparameterized:
        return np.where(X @ head.W >= 0.0, 0, 1)
    return np.argmax(X @ head.W.T, axis=1)


def predict(head: LinearHead, x: np.ndarray) -> int:
    return int(predict_batch(head, np.asarray(x, dtype=float)[None, :])[0])


def error_rate(head: LinearHead, data: LabeledDataset) -> float:
    return float(np.mean(predict_batch(head, data.features) != data.labels))
