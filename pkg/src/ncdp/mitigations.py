"""Dimension reduction (PCA, class means) and mean normalization.

PCA here runs on the non-private feature second moment; it is not a DP-PCA,
so any privacy claim covers only the training step that follows.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from ._rng import as_seed
from .synth import LabeledDataset

logger = logging.getLogger(__name__)

EIGH_MAX_P = 1024


@dataclass(frozen=True)
class Projection:
    basis: np.ndarray  # (p, r)
    method: str
    beta0_estimate: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("pca", "class-mean"):
            raise ValueError(f"unknown projection method {self.method!r}")
        if self.basis.ndim != 2 or self.basis.shape[1] > self.basis.shape[0]:
            raise ValueError("basis must be p x r with r <= p")
        if not np.all(np.isfinite(self.basis)):
            raise ValueError("basis has non-finite entries")

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]

    def to_dict(self) -> dict:
        return {"method": self.method, "p": self.p, "r": self.r,
                "basis": self.basis.ravel().tolist(), "beta0_estimate": self.beta0_estimate}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Projection":
        B = np.asarray(doc["basis"], dtype=float).reshape(int(doc["p"]), int(doc["r"]))
        return cls(B, doc["method"], doc.get("beta0_estimate"))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def top_eigenvectors(X: np.ndarray, r: int, solver: str = "auto", seed: int = 0,
                     iterations: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Leading eigenpairs of (1/m) X^T X, descending.

    ``solver="eigh"`` forms the p x p matrix and calls a symmetric
    eigensolver.  ``"subspace"`` runs randomized block power iteration on X
    directly (single precision), finishing with a double-precision
    Rayleigh-Ritz step; ``"auto"`` picks
    eigh for p <= 1024.
    """
    m, p = X.shape
    if solver == "auto":
        solver = "eigh" if p <= EIGH_MAX_P else "subspace"
    if solver == "eigh":
        C = X.T @ X / m
        vals, vecs = eigh(C, subset_by_index=[p - r, p - 1])
        order = np.argsort(vals)[::-1]
        return vals[order], vecs[:, order]
    if solver != "subspace":
        raise ValueError(f"unknown solver {solver!r}")
    rng = np.random.default_rng(as_seed(seed))
    k = min(p, r + 10)
    # power steps in single precision; the Ritz step below is double
    X32 = X.astype(np.float32)
    Q, _ = np.linalg.qr(rng.standard_normal((p, k)).astype(np.float32))
    for _ in range(iterations):
        Q, _ = np.linalg.qr(X32.T @ (X32 @ Q))
    Q, _ = np.linalg.qr(Q.astype(np.float64))
    B = X @ Q
    small = B.T @ B / m
    vals, W = np.linalg.eigh(small)
    order = np.argsort(vals)[::-1][:r]
    return vals[order], Q @ W[:, order]


def fit_projection(public: LabeledDataset, method: str = "pca", r: int = 1,
                   solver: str = "auto", seed: int = 0) -> Projection:
    if r < 1:
        raise ValueError("r must be positive")
    if r > public.p:
        raise ValueError(f"r={r} exceeds the feature dimension p={public.p}")
    if method == "pca":
        if r > public.n:
            raise ValueError(f"r={r} exceeds the number of public samples m={public.n}")
        _, V = top_eigenvectors(public.features, r, solver=solver, seed=seed)
        V = V / np.linalg.norm(V, axis=0, keepdims=True)
        return Projection(_fix_signs(V), "pca")
    if method == "class-mean":
        counts = public.class_counts
        if np.any(counts == 0):
            raise ValueError("class-mean projection needs every class present")
        means = public.class_sums() / counts[:, None]
        if r != public.num_classes:
            raise ValueError(f"class-mean projection has r = K = {public.num_classes}, got r={r}")
        return Projection(means.T.copy(), "class-mean")
    raise ValueError(f"unknown projection method {method!r}")


def project_dataset(data: LabeledDataset, proj: Projection) -> LabeledDataset:
    """Features become basis^T x; sensitivity is the largest projected row norm."""
    if data.p != proj.p:
        raise ValueError(f"dimension mismatch: data p={data.p}, projection p={proj.p}")
    Z = data.features @ proj.basis
    if not np.any(proj.basis):
        logger.warning("zero projection basis: training sees only noise")
    G = float(np.linalg.norm(Z, axis=1).max())
    meta = dict(data.metadata)
    meta["projection"] = {"method": proj.method, "r": proj.r}
    return LabeledDataset(Z, data.labels.copy(), data.num_classes, sensitivity=G, metadata=meta)


def _loo_sensitivity(X: np.ndarray, labels: np.ndarray, K: int) -> float:
    """Largest change of the zero-init gradient when one row is removed and
    the mean is recomputed.

    The gradient is the matrix of centered class sums (Frobenius norm), or
    for K=2 the signed sum sum_i y_i x~_i.  Removing row j of class c moves
    the centered class-k sum by (xbar - x_j)(n [k = c] - n_k)/(n - 1), so the
    sweep is O(np).
    """
    n = X.shape[0]
    counts = np.bincount(labels, minlength=K).astype(float)
    dist = np.linalg.norm(X - accurate_mean(X), axis=1)
    if K == 2:
        s = counts[0] - counts[1]
        y = np.where(labels == 0, 1.0, -1.0)
        coef = np.abs(n * y - s)
    else:
        sq = (counts**2).sum()
        # ||n e_c - counts||^2 = n^2 - 2 n n_c + sum_k n_k^2
        coef = np.sqrt(n * n - 2.0 * n * counts[labels] + sq)
    return float((coef * dist).max() / (n - 1))


def accurate_mean(X: np.ndarray) -> np.ndarray:
    """Column mean from a compensated (Neumaier) running sum, shape (1, p).

    Plain summation down a label-sorted column loses ~n ulps, which is
    enough to break exact offset cancellation.
    """
    s = np.zeros(X.shape[1])
    comp = np.zeros(X.shape[1])
    for row in X:
        t = s + row
        comp += np.where(np.abs(s) >= np.abs(row), (s - t) + row, (row - t) + s)
        s = t
    return ((s + comp) / X.shape[0])[None, :]


def normalize_dataset(data: LabeledDataset) -> tuple[LabeledDataset, float]:
    """Subtract the global mean from every row.

    Returns the dataset with its remove-one sensitivity over the rows present.
    For balanced binary data this is n/(n-1) times the largest centered row
    norm, i.e. exactly n/(n-1) when the centered rows are unit prototypes.
    """
    if data.n < 2:
        raise ValueError("normalization needs n >= 2")
    Xc = data.features - accurate_mean(data.features)
    G = _loo_sensitivity(data.features, data.labels, data.num_classes)
    logger.info("normalization sensitivity %.6g (leave-one-out)", G)
    meta = dict(data.metadata)
    meta["normalized"] = {"sensitivity": G, "method": "leave-one-out"}
    return LabeledDataset(Xc, data.labels.copy(), data.num_classes, sensitivity=G, metadata=meta), G


def projection_beta0(proj: Projection, frame) -> float:
    """max_k ||P_k - M_k||_inf after flipping each column's sign if that helps."""
    M = frame.M if hasattr(frame, "M") else np.asarray(frame, dtype=float)
    if proj.p != M.shape[0]:
        raise ValueError(f"dimension mismatch: projection p={proj.p}, frame p={M.shape[0]}")
    B = proj.basis
    if proj.r == 1 and M.shape[1] == 2:
        targets = M[:, :1]
    elif proj.r == M.shape[1]:
        targets = M
    else:
        raise ValueError(f"cannot compare r={proj.r} columns against K={M.shape[1]} prototypes")
    plus = np.abs(B - targets).max(axis=0)
    minus = np.abs(B + targets).max(axis=0)
    return float(np.minimum(plus, minus).max())
