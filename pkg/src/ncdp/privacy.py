"""zCDP budget arithmetic and Gaussian noise calibration for NoisyGD."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .geometry import EtfFrame
    from .synth import ShiftModel


@dataclass(frozen=True)
class PrivacyBudget:
    """A rho-zCDP budget.  ``rho = inf`` stands for no privacy (plain GD)."""

    rho: float

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")


@dataclass(frozen=True)
class NoiseCalibration:
    sensitivity_G: float
    sigma_sq: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


def calibrate(G: float, budget: Union[PrivacyBudget, float]) -> NoiseCalibration:
    """Per-coordinate Gaussian variance G^2 / (2 rho) for one NoisyGD step."""
    rho = budget.rho if isinstance(budget, PrivacyBudget) else float(budget)
    if G < 0:
        raise ValueError(f"sensitivity must be nonnegative, got {G}")
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    if rho == 0:
        raise ValueError("infinite noise required: rho = 0")
    return NoiseCalibration(sensitivity_G=float(G), sigma_sq=G * G / (2.0 * rho))


def zcdp_to_dp(rho: float, delta: float) -> float:
    """epsilon = rho + 2 sqrt(rho ln(1/delta))."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def dp_to_zcdp(epsilon: float, delta: float) -> float:
    """Smallest rho whose zCDP guarantee converts to (epsilon, delta)-DP.

    Solves the quadratic in sqrt(rho): rho = (sqrt(L + eps) - sqrt(L))^2 with
    L = ln(1/delta).  Written as eps^2 / (sqrt(L+eps) + sqrt(L))^2 to avoid
    cancellation for small eps.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    L = math.log(1.0 / delta)
    return epsilon**2 / (math.sqrt(L + epsilon) + math.sqrt(L)) ** 2


def compose(rho_per_step: float, T: int) -> PrivacyBudget:
    if T < 1:
        raise ValueError(f"need at least one step, got T={T}")
    return PrivacyBudget(rho=T * rho_per_step)


def sensitivity_bound(
    shift: "ShiftModel",
    p: int,
    clip_to_unit: bool = False,
    frame: Optional["EtfFrame"] = None,
) -> float:
    """l2 sensitivity of the zero-init gradient: the largest feature norm.

    Without a frame this is sqrt(1 + beta^2 p), the sup of ||M_k + v|| for
    shifts orthogonal to the prototype.  When ``frame`` is given and the shift
    is not projected off the prototype, the exact supremum over the l_inf box,
    max_k ||(|M_k| + beta)||_2, is returned instead since the orthogonal
    formula undercounts there.  ``clip_to_unit`` models rows rescaled to
    (M_k + v)/||M_k + v||, which caps G at 1.
    """
    beta = shift.linf_bound
    if not np.isfinite(beta):
        raise ValueError("unbounded shift model has no finite sensitivity")
    if clip_to_unit or beta == 0.0:
        return 1.0
    if frame is None or shift.orthogonal_to_prototype:
        return math.sqrt(1.0 + beta * beta * p)
    sup_sq = ((np.abs(frame.M) + beta) ** 2).sum(axis=0)
    return float(np.sqrt(sup_sq.max()))
