"""Empirical collapse diagnostics: class means, their cosines, and per-sample
l_inf deviations from the class mean."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .synth import LabeledDataset

DEFAULT_COSINE_TOLERANCE = 0.2


def lower_median(values: np.ndarray) -> float:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("median of an empty set")
    return float(v[(v.size - 1) // 2])


@dataclass
class CollapseReport:
    class_means: np.ndarray  # (K, p)
    cosine_matrix: np.ndarray  # (K, K)
    cosine_offdiag_median: float
    per_sample_beta: np.ndarray  # (n,)
    per_class_beta_median: np.ndarray  # (K,)
    nc_flag: bool
    labels: np.ndarray
    distance_to_negative: float  # max |cos - (-1/(K-1))|
    distance_to_positive: float  # max |cos - (+1/(K-1))|
    cosine_tolerance: float = DEFAULT_COSINE_TOLERANCE

    @property
    def K(self) -> int:
        return self.class_means.shape[0]

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "p": int(self.class_means.shape[1]),
            "n": int(self.per_sample_beta.size),
            "cosine_matrix": self.cosine_matrix.tolist(),
            "cosine_offdiag_median": self.cosine_offdiag_median,
            "per_class_beta_median": self.per_class_beta_median.tolist(),
            "beta_median": lower_median(self.per_sample_beta),
            "beta_max": float(self.per_sample_beta.max()),
            "nc_flag": self.nc_flag,
            "cosine_tolerance": self.cosine_tolerance,
            "etf_target": -1.0 / (self.K - 1),
            "distance_to_negative_target": self.distance_to_negative,
            "distance_to_positive_target": self.distance_to_positive,
        }


def collapse_report(data: LabeledDataset,
                    cosine_tolerance: float = DEFAULT_COSINE_TOLERANCE) -> CollapseReport:
    """Compare class-mean geometry against a simplex ETF.

    ``nc_flag`` holds when every off-diagonal cosine is within
    ``cosine_tolerance`` of -1/(K-1).
    """
    K = data.num_classes
    if K < 2:
        raise ValueError("need at least two classes")
    counts = data.class_counts
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"empty class(es): {missing}")
    means = data.class_sums() / counts[:, None]
    norms = np.linalg.norm(means, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    U = means / safe[:, None]
    C = U @ U.T
    np.fill_diagonal(C, 1.0)
    off = C[~np.eye(K, dtype=bool)]
    target = 1.0 / (K - 1)
    beta = np.abs(data.features - means[data.labels]).max(axis=1)
    per_class = np.array([lower_median(beta[data.labels == k]) for k in range(K)])
    d_neg = float(np.abs(off + target).max())
    d_pos = float(np.abs(off - target).max())
    return CollapseReport(
        class_means=means,
        cosine_matrix=C,
        cosine_offdiag_median=lower_median(off),
        per_sample_beta=beta,
        per_class_beta_median=per_class,
        nc_flag=bool(d_neg <= cosine_tolerance),
        labels=data.labels.copy(),
        distance_to_negative=d_neg,
        distance_to_positive=d_pos,
        cosine_tolerance=cosine_tolerance,
    )


def beta_histogram(report: CollapseReport, bins: int = 20) -> list[dict]:
    """Equal-width bins over [0, max beta], one block per class plus "all"."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    beta = report.per_sample_beta
    if beta.size == 0:
        raise ValueError("empty report")
    top = float(beta.max())
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    rows = []
    groups = [(str(k), beta[report.labels == k]) for k in range(report.K)] + [("all", beta)]
    for name, vals in groups:
        counts, _ = np.histogram(vals, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append({"bin_low": float(lo), "bin_high": float(hi), "count": int(c), "class": name})
    return rows


def histogram_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["bin_low", "bin_high", "count", "class"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
