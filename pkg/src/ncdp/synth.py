"""Labeled feature sets under perfect or approximate Neural Collapse.

Rows are ``M_{y_i} + v_i`` where ``M`` holds the class prototypes and the
shift ``v_i`` follows a :class:`ShiftModel`.  Also holds the feature CSV
reader/writer and test-time perturbations.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ._rng import as_seed

logger = logging.getLogger(__name__)

SHIFT_KINDS = ("none", "stochastic", "offset", "adversarial-test")


@dataclass(frozen=True)
class ShiftModel:
    """How a feature deviates from its class prototype.

    ``beta`` is the l_inf bound (the attack magnitude for test-time kinds).
    ``distribution`` is "uniform" (coordinates i.i.d. on [-beta, beta]) or
    "gaussian" (i.i.d. N(0, variance), no finite bound).  For ``offset`` a
    missing ``offset_vector`` means "draw beta * random signs from the seed".
    ``offset_mode`` picks the sign convention: "label-signed" adds +v to class
    0 and -v to class 1 (binary only), "common" adds +v to every row, "auto"
    is label-signed for K=2 and common otherwise.
    """

    kind: str = "none"
    beta: float = 0.0
    offset_vector: Optional[np.ndarray] = field(default=None, compare=False)
    orthogonal_to_prototype: bool = False
    independent_coordinates: bool = True
    distribution: str = "uniform"
    variance: Optional[float] = None
    offset_mode: str = "auto"

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise ValueError(f"unknown shift kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "gaussian" and (self.variance is None or self.variance < 0):
            raise ValueError("gaussian shifts need a nonnegative variance")
        if self.offset_mode not in ("auto", "label-signed", "common"):
            raise ValueError(f"unknown offset mode {self.offset_mode!r}")
        if self.kind == "offset" and self.offset_vector is not None:
            v = np.asarray(self.offset_vector, dtype=float)
            if np.abs(v).max(initial=0.0) > self.beta + 1e-12:
                raise ValueError(
                    f"offset vector has l_inf norm {np.abs(v).max():.4g} > beta={self.beta}"
                )

    @property
    def linf_bound(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "stochastic" and self.distribution == "gaussian":
            return math.inf
        return float(self.beta)

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "beta": self.beta,
            "distribution": self.distribution,
            "orthogonal_to_prototype": self.orthogonal_to_prototype,
            "independent_coordinates": self.independent_coordinates,
        }
        if self.distribution == "gaussian":
            out["variance"] = self.variance
        if self.kind == "offset":
            out["offset_mode"] = self.offset_mode
        return out

    @classmethod
    def stochastic(cls, beta: float, **kw) -> "ShiftModel":
        return cls(kind="stochastic", beta=beta, **kw)

    @classmethod
    def gaussian(cls, variance: float, **kw) -> "ShiftModel":
        return cls(kind="stochastic", beta=math.sqrt(variance), distribution="gaussian",
                   variance=variance, **kw)

    @classmethod
    def offset(cls, beta: float, vector: Optional[np.ndarray] = None, **kw) -> "ShiftModel":
        return cls(kind="offset", beta=beta, offset_vector=vector, **kw)

    @classmethod
    def adversarial(cls, beta: float) -> "ShiftModel":
        return cls(kind="adversarial-test", beta=beta)


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, p)
    labels: np.ndarray  # (n,), ints in [0, K)
    num_classes: int
    sensitivity: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per row required")
        if self.features.shape[0] < 1:
            raise ValueError("empty dataset")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError("labels out of range")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    @property
    def alpha(self) -> Optional[float]:
        """Minority-class fraction for binary data, None otherwise."""
        if self.num_classes != 2:
            return None
        return float(self.class_counts.min()) / self.n

    def class_sums(self) -> np.ndarray:
        """(K, p) matrix whose row k sums the class-k features."""
        onehot = np.zeros((self.num_classes, self.n))
        onehot[self.labels, np.arange(self.n)] = 1.0
        return onehot @ self.features

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.features, axis=1)

    def max_row_norm(self) -> float:
        return float(self.row_norms().max())

    def with_features(self, features: np.ndarray, **kw) -> "LabeledDataset":
        return replace(self, features=features, metadata=dict(self.metadata), **kw)

    def to_csv(self, path: Union[str, Path]) -> None:
        save_features(self, path)


def class_counts_from_weights(n: int, weights: Sequence[float]) -> np.ndarray:
    """Largest-remainder rounding of ``n * weights``; ties go to the lower index."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("class weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"class weights sum to {w.sum():.12g}, not 1")
    raw = n * w
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    remainder = raw - counts
    # stable sort on -remainder keeps lower indices first among ties
    order = np.argsort(-remainder, kind="stable")
    counts[order[:short]] += 1
    return counts


def imbalanced_weights(K: int, alpha: float) -> np.ndarray:
    """Class weights where the first floor(K/2) classes share mass ``alpha``.

    For K=2 this is (alpha, 1 - alpha).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    minority = K // 2
    w = np.empty(K)
    w[:minority] = alpha / minority
    w[minority:] = (1.0 - alpha) / (K - minority)
    return w


def random_sign_offset(p: int, beta: float, rng: np.random.Generator,
                       zero_coords: Sequence[int] = ()) -> np.ndarray:
    """beta times a uniformly random sign vector (maximal l2 norm in the box)."""
    v = beta * rng.choice(np.array([-1.0, 1.0]), size=p)
    v[list(zero_coords)] = 0.0
    return v


def _as_prototypes(frame) -> np.ndarray:
    return frame.M if hasattr(frame, "M") else np.asarray(frame, dtype=float)


def _offset_signs(K: int, mode: str) -> np.ndarray:
    if mode == "auto":
        mode = "label-signed" if K == 2 else "common"
    if mode == "label-signed":
        if K != 2:
            raise ValueError("label-signed offsets are defined for binary tasks only")
        return np.array([1.0, -1.0])
    return np.ones(K)


def resolve_offset(shift: ShiftModel, p: int, rng: np.random.Generator) -> np.ndarray:
    if shift.offset_vector is not None:
        v = np.asarray(shift.offset_vector, dtype=float)
        if v.shape != (p,):
            raise ValueError(f"offset vector has shape {v.shape}, expected ({p},)")
        return v
    return random_sign_offset(p, shift.beta, rng)


def deterministic_class_rows(frame, shift: ShiftModel, seed: int = 0) -> np.ndarray:
    """(K, p) rows shared by every member of a class for ``none``/``offset`` shifts."""
    M = _as_prototypes(frame)
    p, K = M.shape
    rows = M.T.copy()
    if shift.kind == "none":
        return rows
    if shift.kind != "offset":
        raise ValueError(f"{shift.kind!r} shifts are not deterministic")
    rng = np.random.default_rng(as_seed(seed))
    v = resolve_offset(shift, p, rng)
    if np.abs(v).max(initial=0.0) > shift.beta + 1e-12:
        raise ValueError("offset vector violates its l_inf bound")
    if shift.orthogonal_to_prototype:
        v = orthogonal_offset(v, M, shift.beta)
    return rows + _offset_signs(K, shift.offset_mode)[:, None] * v[None, :]


def orthogonal_offset(v: np.ndarray, M: np.ndarray, beta: float) -> np.ndarray:
    """Remove the component of v along the (binary) prototype axis, re-clipped."""
    if M.shape[1] != 2:
        raise ValueError("orthogonal offsets are defined for binary frames only")
    u = M[:, 0] / np.linalg.norm(M[:, 0])
    return np.clip(v - (v @ u) * u, -beta, beta)


def draw_shifts(shift: ShiftModel, size: tuple, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. stochastic shift draws of the given shape."""
    if shift.distribution == "gaussian":
        return rng.normal(0.0, math.sqrt(shift.variance), size=size)
    return rng.uniform(-shift.beta, shift.beta, size=size)


def _remove_prototype_component(V: np.ndarray, U: np.ndarray, beta: float) -> np.ndarray:
    """Project each row of V off the matching unit prototype row of U, then re-clip."""
    coef = np.einsum("ij,ij->i", V, U)
    V = V - coef[:, None] * U
    if np.isfinite(beta):
        np.clip(V, -beta, beta, out=V)
    return V


def sample_from_prototypes(
    M: np.ndarray,
    n: int,
    class_weights: Optional[Sequence[float]] = None,
    shift: ShiftModel = ShiftModel(),
    seed: int = 0,
) -> LabeledDataset:
    """Draw a labeled set from an arbitrary prototype matrix M (p x K)."""
    M = np.asarray(M, dtype=float)
    p, K = M.shape
    if shift.kind == "adversarial-test":
        raise ValueError("adversarial shifts act on test points; use perturb_test_point")
    if class_weights is None:
        if n < K:
            raise ValueError(f"need n >= K for balanced classes, got n={n}, K={K}")
        class_weights = np.full(K, 1.0 / K)
    counts = class_counts_from_weights(n, class_weights)
    labels = np.repeat(np.arange(K), counts)
    rng = np.random.default_rng(as_seed(seed))

    meta = {"shift": shift.describe(), "class_weights": list(map(float, class_weights))}
    if shift.kind in ("none", "offset"):
        rows = deterministic_class_rows(M, shift, seed=seed)
        X = rows[labels]
    else:
        V = draw_shifts(shift, (n, p), rng)
        if shift.orthogonal_to_prototype:
            U = (M / np.linalg.norm(M, axis=0, keepdims=True)).T[labels]
            V = _remove_prototype_component(V, U, shift.linf_bound)
        X = M.T[labels] + V
    data = LabeledDataset(features=X, labels=labels, num_classes=K, metadata=meta)
    return data


def sample_dataset(frame, n: int, class_weights: Optional[Sequence[float]] = None,
                   shift: ShiftModel = ShiftModel(), seed: int = 0) -> LabeledDataset:
    """Sample ``n`` rows ``M_y + v`` with class sizes rounded from ``class_weights``.

    Rows come grouped by label.  Output is a deterministic function of the
    arguments.
    """
    return sample_from_prototypes(_as_prototypes(frame), n, class_weights, shift, seed)


def adversarial_shift(theta: np.ndarray, y_sign: int, beta: float) -> np.ndarray:
    """Minimizer of y * theta^T (x + v) over ||v||_inf <= beta: -y beta sign(theta)."""
    return -float(y_sign) * beta * np.sign(np.asarray(theta, dtype=float))


def adversarial_shift_multiclass(W: np.ndarray, x: np.ndarray, y: int, beta: float) -> np.ndarray:
    """Worst l_inf perturbation against an argmax classifier W (K x p).

    The smallest achievable margin min_j (W_y - W_j)^T (x + v) is attained by
    attacking the runner-up j* with v = -beta sign(W_y - W_j*); each pairwise
    margin is linear so its minimum over the box sits at that vertex.
    """
    D = W[y][None, :] - W  # (K, p)
    margins = D @ x - beta * np.abs(D).sum(axis=1)
    margins[y] = np.inf
    j = int(np.argmin(margins))
    return -beta * np.sign(D[j])


def perturb_test_point(x: np.ndarray, y: int, shift: ShiftModel, model=None,
                       seed: int = 0) -> np.ndarray:
    """Apply a test-time shift to feature ``x`` with class index ``y``.

    For the binary reparameterization class 0 carries label +1 and class 1
    carries label -1.
    """
    x = np.asarray(x, dtype=float)
    if shift.kind == "none":
        return x.copy()
    if shift.kind == "stochastic":
        rng = np.random.default_rng(as_seed(seed))
        return x + draw_shifts(shift, x.shape, rng)
    if shift.kind == "offset":
        rng = np.random.default_rng(as_seed(seed))
        return x + resolve_offset(shift, x.shape[0], rng)
    if model is None:
        raise ValueError("adversarial perturbation needs a trained model")
    if model.reparameterized:
        y_sign = 1 if y == 0 else -1
        return x + adversarial_shift(model.theta, y_sign, shift.beta)
    return x + adversarial_shift_multiclass(model.W, x, y, shift.beta)


def imbalanced_gradient_offset(alpha: float, v: np.ndarray, n: int) -> np.ndarray:
    """Descent direction (n/2) e1 + ((1 - 2 alpha) n / 2) v at zero init.

    Binary canonical frame, common offset v, alpha n points labeled -1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    v = np.asarray(v, dtype=float)
    out = (1.0 - 2.0 * alpha) * n / 2.0 * v
    out[0] += n / 2.0
    return out


# --- feature files -----------------------------------------------------------

def load_features(path: Union[str, Path], normalize: bool = False,
                  clip: Optional[float] = None) -> LabeledDataset:
    """Read a ``label,f0,...,f{p-1}`` CSV into a dataset.

    The recorded sensitivity is the largest row norm, or ``clip`` when given
    (rows longer than ``clip`` are rescaled to it).
    """
    path = Path(path)
    labels, rows = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        p = len(header) - 1
        if p < 1 or header[0] != "label" or header[1:] != [f"f{j}" for j in range(p)]:
            raise ValueError(f"{path}: header must be label,f0,...,f{{p-1}}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != p + 1:
                raise ValueError(f"{path}:{lineno}: expected {p + 1} fields, got {len(rec)}")
            try:
                lab = int(rec[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer label {rec[0]!r}") from None
            try:
                vals = [float(c) for c in rec[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: NaN or Inf entry")
            labels.append(lab)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    present = np.unique(y)
    if present[0] != 0 or not np.array_equal(present, np.arange(len(present))):
        raise ValueError(f"{path}: labels must be contiguous from 0")
    X = np.asarray(rows, dtype=float)
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    if clip is not None:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X * np.minimum(1.0, clip / np.where(norms > 0, norms, 1.0))
        G = float(clip)
    else:
        G = float(np.linalg.norm(X, axis=1).max())
    return LabeledDataset(features=X, labels=y, num_classes=len(present), sensitivity=G,
                          metadata={"source": str(path), "normalized": normalize})


def save_features(data: LabeledDataset, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{j}" for j in range(data.p)])
        for lab, row in zip(data.labels, data.features):
            w.writerow([int(lab)] + [repr(float(v)) for v in row])
