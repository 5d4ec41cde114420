"""Vectorized 0-1 test error for batches of linear heads."""

from __future__ import annotations

import numpy as np


def batch_errors(params: np.ndarray, X_test: np.ndarray, y_test: np.ndarray,
                 reparameterized: bool, adversarial_beta: float = 0.0) -> np.ndarray:
    """Mean test error per head.

    ``params`` is (B, p) for reparameterized heads or (B, K, p); ``X_test``
    is (m, p) shared by all heads or (B, m, p).  With ``adversarial_beta > 0``
    each test point is scored after the worst l_inf perturbation of that size
    against its own head.  Prediction ties resolve as in
    :func:`ncdp.trainer.predict_batch`.
    """
    y_test = np.asarray(y_test)
    X = X_test if X_test.ndim == 3 else np.broadcast_to(X_test, (params.shape[0],) + X_test.shape)
    if reparameterized:
        s = np.einsum("bmp,bp->bm", X, params)  # (B, m)
        if adversarial_beta > 0:
            slack = adversarial_beta * np.abs(params).sum(axis=1, keepdims=True)
            s = np.where(y_test[None, :] == 0, s - slack, s + slack)
        pred = np.where(s >= 0.0, 0, 1)
        return (pred != y_test[None, :]).mean(axis=1)
    B, K, _ = params.shape
    if adversarial_beta == 0:
        scores = np.einsum("bkp,bmp->bmk", params, X)
        pred = np.argmax(scores, axis=2)
        return (pred != y_test[None, :]).mean(axis=1)
    wrong = np.zeros((B, len(y_test)), dtype=bool)
    idx = np.arange(K)
    for m, y in enumerate(y_test):
        D = params[:, y:y + 1, :] - params  # (B, K, p)
        margins = np.einsum("bkp,bp->bk", D, X[:, m, :]) - adversarial_beta * np.abs(D).sum(axis=2)
        # a tie with a lower-indexed class also loses
        bad = (margins < 0) | ((margins == 0) & (idx[None, :] < y))
        bad[:, y] = False
        wrong[:, m] = bad.any(axis=1)
    return wrong.mean(axis=1)
