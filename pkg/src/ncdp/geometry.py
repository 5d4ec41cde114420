"""Simplex equiangular tight frames (ETFs) and their generating partial
orthogonal matrices.

A frame with ``K`` classes in ``p`` dimensions is

    M = sqrt(K / (K - 1)) * P @ (I_K - 1_K 1_K^T / K)

where ``P`` (p x K) has orthonormal columns.  Columns of ``M`` are the class
prototypes: unit norm, pairwise inner product ``-1/(K-1)``, summing to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import as_seed

GEOMETRY_TOL = 1e-10
_MAX_RETRIES = 64


@dataclass(frozen=True)
class PartialOrthogonal:
    columns: np.ndarray  # (p, K), columns^T columns = I_K

    @property
    def p(self) -> int:
        return self.columns.shape[0]

    @property
    def K(self) -> int:
        return self.columns.shape[1]

    def check(self, tol: float = GEOMETRY_TOL) -> None:
        err = np.abs(self.columns.T @ self.columns - np.eye(self.K)).max()
        if err > tol:
            raise ValueError(f"columns are not orthonormal (max deviation {err:.3e})")


@dataclass(frozen=True)
class EtfFrame:
    M: np.ndarray  # (p, K); column k is the class-k prototype
    source: Optional[PartialOrthogonal] = None

    @property
    def p(self) -> int:
        return self.M.shape[0]

    @property
    def K(self) -> int:
        return self.M.shape[1]

    def prototype(self, k: int) -> np.ndarray:
        return self.M[:, k]

    def check(self, tol: float = GEOMETRY_TOL) -> None:
        """Raise ``ValueError`` unless norms, angles and column sum match an ETF."""
        G = gram(self)
        target = ideal_gram(self.K)
        err = np.abs(G - target).max()
        if err > tol:
            raise ValueError(f"Gram matrix deviates from the simplex ETF by {err:.3e}")
        colsum = np.abs(self.M.sum(axis=1)).max()
        if colsum > tol:
            raise ValueError(f"prototypes do not sum to zero (max entry {colsum:.3e})")

    def to_dict(self) -> dict:
        out = {"p": self.p, "K": self.K, "M": self.M.ravel(order="C").tolist()}
        if self.source is not None:
            out["P"] = self.source.columns.ravel(order="C").tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "EtfFrame":
        p, K = int(doc["p"]), int(doc["K"])
        M = np.asarray(doc["M"], dtype=float).reshape(p, K)
        source = None
        if "P" in doc:
            source = PartialOrthogonal(np.asarray(doc["P"], dtype=float).reshape(p, K))
        return cls(M=M, source=source)

    @classmethod
    def from_json(cls, text: str) -> "EtfFrame":
        return cls.from_dict(json.loads(text))


def ideal_gram(K: int) -> np.ndarray:
    """(K/(K-1)) (I_K - 11^T/K): diagonal 1, off-diagonal -1/(K-1)."""
    return K / (K - 1) * (np.eye(K) - np.full((K, K), 1.0 / K))


def gram(frame: EtfFrame) -> np.ndarray:
    return frame.M.T @ frame.M


def _orthonormalize(A: np.ndarray) -> Optional[np.ndarray]:
    """Classical Gram-Schmidt, applied twice per column.

    Returns None when a column is numerically dependent on its predecessors.
    """
    p, K = A.shape
    Q = np.zeros((p, K))
    for j in range(K):
        v = A[:, j].copy()
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        norm = np.linalg.norm(v)
        if norm0 == 0.0 or norm < 1e-8 * norm0:
            return None
        Q[:, j] = v / norm
    return Q


def partial_orthogonal(p: int, K: int, seed: int = 0, canonical: bool = False) -> PartialOrthogonal:
    if K > p:
        raise ValueError(f"frame does not fit: K={K} > p={p}")
    if canonical:
        return PartialOrthogonal(np.eye(p, K))
    seed = as_seed(seed)
    for attempt in range(_MAX_RETRIES):
        rng = np.random.default_rng(as_seed(seed + attempt))
        Q = _orthonormalize(rng.standard_normal((p, K)))
        if Q is not None:
            return PartialOrthogonal(Q)
    raise RuntimeError("could not draw a full-rank Gaussian matrix")  # pragma: no cover


def make_etf(p: int, K: int, seed: int = 0, canonical: bool = False) -> EtfFrame:
    """Build a K-class simplex ETF in R^p.

    ``canonical=True`` uses the first K standard basis vectors as ``P``; for
    K=2 it returns exactly ``[e1, -e1]``.  Otherwise ``P`` orthonormalizes a
    seeded standard Gaussian draw.
    """
    if K < 2:
        raise ValueError(f"need at least two classes, got K={K}")
    if K > p:
        raise ValueError(f"frame does not fit: K={K} > p={p}")
    if canonical and K == 2:
        # P = [(e1+e2)/sqrt2, (e2-e1)/sqrt2] maps onto [e1, -e1]
        P = np.zeros((p, 2))
        s = 1.0 / np.sqrt(2.0)
        P[0, 0], P[1, 0] = s, s
        P[0, 1], P[1, 1] = -s, s
        M = np.zeros((p, 2))
        M[0, 0], M[0, 1] = 1.0, -1.0
        return EtfFrame(M=M, source=PartialOrthogonal(P))
    source = partial_orthogonal(p, K, seed=seed, canonical=canonical)
    P = source.columns
    M = np.sqrt(K / (K - 1)) * (P - P.mean(axis=1, keepdims=True))
    return EtfFrame(M=M, source=source)
