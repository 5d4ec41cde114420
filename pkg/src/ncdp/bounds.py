"""Closed-form misclassification bounds and order-level sample complexities.

Every evaluator returns a :class:`BoundResult` whose ``error_bound`` is clamped
to [0, 1].  Sample complexities use unit constants and natural logs and are
ceil-rounded; they are order-level quantities, not exact thresholds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from ._rng import as_seed


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc (accurate in both tails)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_cdf_array(x: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(x)


@dataclass(frozen=True)
class BoundQuery:
    n: Optional[int] = None
    p: int = 1
    K: int = 2
    K0: Optional[int] = None
    beta: float = 0.0
    beta_tilde: float = 0.0
    beta0: float = 0.0
    rho: Optional[float] = None
    gamma: float = 0.05
    alpha: float = 0.5
    R: Optional[float] = None
    k: Optional[int] = None
    t: Optional[float] = None
    independent_coordinates: bool = False
    sigma: Optional[float] = None

    def __post_init__(self):
        for name in ("beta", "beta_tilde", "beta0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.p < 1:
            raise ValueError("p must be positive")

    @property
    def b2p(self) -> float:
        return self.beta * self.beta * self.p

    @property
    def log_inv_gamma(self) -> float:
        return math.log(1.0 / self.gamma)


@dataclass
class BoundResult:
    error_bound: float
    formula_id: str
    sample_complexity: Optional[int] = None
    clamped: bool = False
    vacuous: bool = False
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["order_level"] = self.sample_complexity is not None
        return out


def _result(raw: float, formula_id: str, sample_complexity=None, vacuous=False, **extras) -> BoundResult:
    clamped = not (0.0 <= raw <= 1.0)
    val = min(1.0, max(0.0, raw)) if not math.isnan(raw) else 1.0
    return BoundResult(val, formula_id, sample_complexity, clamped, vacuous, dict(extras))


def _ceil(x: float) -> Optional[int]:
    if not math.isfinite(x):
        return None
    # guard against 4.000000000001 style float noise
    return max(1, int(math.ceil(x - 1e-9)))


def _need_n(q: BoundQuery) -> int:
    if q.n is None:
        raise ValueError("this evaluator needs n")
    return q.n


def _need_rho(q: BoundQuery) -> float:
    if q.rho is None or q.rho == 0:
        raise ValueError("rho must be positive (rho = 0 needs infinite noise)")
    return q.rho


def _shift_scale(q: BoundQuery) -> float:
    """beta^4 p^2 + beta^2 p/3, or beta^4 p + beta^2/3 for independent coordinates."""
    b2 = q.beta * q.beta
    if q.independent_coordinates:
        return b2 * b2 * q.p + b2 / 3.0
    return b2 * b2 * q.p * q.p + b2 * q.p / 3.0


def gd_error_bound(q: BoundQuery) -> BoundResult:
    """Non-private one-step GD under stochastic shifts."""
    n = _need_n(q)
    fid = "gd-stochastic" + ("-independent" if q.independent_coordinates else "")
    if q.b2p <= 1.0 and n >= q.K:
        return _result(0.0, fid, sample_complexity=q.K, regime="perfect-margin")
    s = _shift_scale(q)
    raw = math.exp(-n / (2.0 * s)) if s > 0 else 0.0
    sc = _ceil(2.0 * s * q.log_inv_gamma) if s > 0 else q.K
    return _result(raw, fid, sample_complexity=sc)


def noisygd_error_bound(q: BoundQuery) -> BoundResult:
    """Privacy term plus shift term for one-step NoisyGD."""
    n = _need_n(q)
    rho = _need_rho(q)
    privacy = math.exp(-n * n * rho / (2.0 * (1.0 + q.b2p) ** 2))
    s = _shift_scale(q)
    shift = math.exp(-n / (8.0 * s)) if s > 0 else 0.0
    L = q.log_inv_gamma
    if q.independent_coordinates:
        extra = 4.0 * q.p * q.beta**4 * L
    else:
        extra = q.p * q.beta**2 * L
    sc = _ceil((1.0 + q.b2p) ** 2 * math.sqrt(L) / (2.0 * rho) + extra)
    fid = "noisygd-stochastic" + ("-independent" if q.independent_coordinates else "")
    return _result(privacy + shift, fid, sample_complexity=sc,
                   privacy_term=privacy, shift_term=shift)


def deterministic_shift_bound(q: BoundQuery) -> BoundResult:
    """NoisyGD under a fixed offset with beta^2 p < 1."""
    n = _need_n(q)
    rho = _need_rho(q)
    if q.b2p >= 1.0:
        return _result(1.0, "noisygd-offset", vacuous=True, reason="bound vacuous: beta^2 p >= 1")
    sigma_sq = (1.0 + q.b2p) / (2.0 * rho)
    gap = (1.0 - q.b2p) ** 2
    raw = math.exp(-n * n * gap / ((1.0 + q.b2p) * sigma_sq))
    sc = _ceil((1.0 + q.b2p) * q.log_inv_gamma / (2.0 * rho * gap))
    return _result(raw, "noisygd-offset", sample_complexity=sc, sigma_sq=sigma_sq)


def projected_constant_log(k: int, R: float, b2p: float, variant: str = "stated") -> float:
    """log of C_{p,k}.

    "stated": C_k (1 + e^{R(1+b2p)})^2 / (1 - b2p)^2.
    "proof":  the square root of that, sqrt(C_k) (1 + e^{R(1+b2p)}) / (1 - b2p).
    """
    if b2p >= 1.0:
        return math.inf
    ck = math.log1p(2.0**-k) - math.log1p(-(2.0**-k)) - math.log(3.0)
    # log((1 + e^{R(1+b2p)})^2) without overflow
    shape = 2.0 * np.logaddexp(0.0, R * (1.0 + b2p)) - 2.0 * math.log(1.0 - b2p)
    if variant == "stated":
        return ck + shape
    if variant == "proof":
        return 0.5 * (ck + shape)
    raise ValueError(f"unknown variant {variant!r}")


def projected_multi_iter_bound(q: BoundQuery, variant: str = "stated") -> BoundResult:
    """Two-term bound for k-step projected NoisyGD."""
    n = _need_n(q)
    rho = _need_rho(q)
    if q.R is None or q.k is None:
        raise ValueError("projected bound needs R and k")
    t = q.t if q.t is not None else n * n + math.log(1.0 / q.k)
    sigma_sq = (1.0 + q.b2p) / (2.0 * rho)
    simplified = math.exp(-rho * n * n / (1.0 + q.b2p) ** 2) if q.b2p < 1.0 else 1.0
    if q.b2p >= 1.0:
        return _result(1.0, "projected-noisygd", vacuous=True,
                       reason="bound vacuous: beta^2 p >= 1", simplified=simplified)
    logc = projected_constant_log(q.k, q.R, q.b2p, variant)
    log_exponent = 2.0 * math.log(n) - 2.0 * logc - math.log(sigma_sq * (1.0 + q.b2p))
    first = math.exp(-math.exp(log_exponent)) if log_exponent < 700 else 0.0
    tail = q.k * math.exp(-t) if math.isfinite(t) else 0.0
    leading = (1.0 + 2.0**-q.k) / (1.0 - 2.0**-q.k) / 3.0
    other = "proof" if variant == "stated" else "stated"
    other_logc = projected_constant_log(q.k, q.R, q.b2p, other)
    other_exp = 2.0 * math.log(n) - 2.0 * other_logc - math.log(sigma_sq * (1.0 + q.b2p))
    other_val = math.exp(-math.exp(other_exp)) if other_exp < 700 else 0.0
    return _result(first + tail, "projected-noisygd", sigma_sq=sigma_sq, t=t,
                   eta=q.R / (n * (1.0 + q.b2p) + q.p + math.sqrt(q.p * max(t, 0.0)) + t),
                   leading_factor=leading, log_C=logc, variant=variant,
                   alternate_variant_bound=min(1.0, other_val + tail),
                   simplified=simplified,
                   note="tightness unverified beyond Monte Carlo dominance")


def perfect_nc_constant(K: int, K0: Optional[int] = None, variant: str = "stated") -> float:
    if K0 is None:
        return (1.0 + (K - 2) / (K * (K - 1))) / K
    base = (K * K0 - 2) / (K * K * (K0 - 1))
    if variant == "stated":
        return base / K
    if variant == "proof":
        return base
    raise ValueError(f"unknown variant {variant!r}")


def perfect_nc_error(n: int, K: int, sigma: float, K0: Optional[int] = None,
                     spread: str = "stated") -> BoundResult:
    """Union bound for one-step NoisyGD on perfectly collapsed balanced data.

    ``spread="sqrt2"`` divides the Gaussian argument by sqrt(2), the spread of
    a difference of two independent noise coordinates.  Output does not
    depend on p.
    """
    if n < K:
        raise ValueError(f"need n >= K, got n={n}, K={K}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if K0 is not None and K0 < K:
        raise ValueError(f"K0={K0} must be at least K={K}")
    if spread not in ("stated", "sqrt2"):
        raise ValueError(f"unknown spread {spread!r}")
    scale = math.sqrt(2.0) if spread == "sqrt2" else 1.0
    fid = "perfect-nc" if K0 is None else "perfect-nc-domain-adaptation"
    if K == 2 and K0 is None:
        raw = norm_cdf(-n / (2.0 * sigma * scale))
        return _result(raw, fid, spread=spread)
    C = perfect_nc_constant(K, K0, "stated")
    raw = (K - 1) * norm_cdf(-n * C / (sigma * scale))
    extras = {"spread": spread, "C": C}
    if K0 is not None:
        Cp = perfect_nc_constant(K, K0, "proof")
        extras.update(C_proof=Cp,
                      proof_variant_bound=min(1.0, (K - 1) * norm_cdf(-n * Cp / (sigma * scale))),
                      sign_note="argument sign taken negative")
    return _result(raw, fid, **extras)


def pca_constants(beta: float, beta0: float, p: int) -> tuple[float, float]:
    G = 1.0 + beta * (1.0 + beta0 + p * beta0)
    s = beta + beta0 * p
    M = ((1.0 - beta0) ** 2 - p * beta * beta0 - (1.0 + beta0) * s
         - s * (1.0 + beta + beta0 + beta * beta0 * p))
    return G, M


def pca_sample_complexity(q: BoundQuery) -> BoundResult:
    rho = _need_rho(q)
    G, M = pca_constants(q.beta, q.beta0, q.p)
    if M <= 0:
        raise ValueError(f"mitigation insufficient at these parameters (M = {M:.4g} <= 0)")
    n = _ceil(math.sqrt(G * G * math.log(2.0 / q.gamma) / (M * rho)))
    return _result(0.0 if q.n is None else min(1.0, 2.0 * math.exp(-(q.n**2) * M * rho / G**2)),
                   "pca-projection", sample_complexity=n, G=G, M=M,
                   relaxed_condition=q.beta * q.beta0 * q.p <= 1.0)


TABLE1_SETTINGS = (
    "perfect-NC", "approx-NC", "approx-NC-separable", "stochastic-test",
    "adversarial-test", "offset-train", "offset-train-imbalanced",
)


def table1_sample_complexity(setting: str, q: BoundQuery, private: bool = True) -> BoundResult:
    if setting not in TABLE1_SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; choose from {', '.join(TABLE1_SETTINGS)}")
    L = q.log_inv_gamma
    fid = f"table1:{setting}:{'private' if private else 'nonprivate'}"
    # error_bound echoes the target gamma; the payload is sample_complexity
    if not private:
        if setting == "perfect-NC":
            return _result(q.gamma, fid, sample_complexity=q.K)
        if setting == "approx-NC":
            return _result(q.gamma, fid, sample_complexity=_ceil(q.p * q.beta**2 * L))
        if setting == "approx-NC-separable":
            return _result(q.gamma, fid, sample_complexity=_ceil(q.p * q.beta**4 * L))
        raise ValueError(f"no nonprivate entry for {setting!r}")
    rho = _need_rho(q)
    root = math.sqrt(L) / math.sqrt(2.0 * rho)
    bt = q.beta_tilde
    if setting == "perfect-NC":
        n = 2.0 * math.sqrt(L) / math.sqrt(rho)
    elif setting == "approx-NC":
        n = q.p * q.beta**2 * L + max(q.p * q.beta**2, 1.0) * root
    elif setting == "approx-NC-separable":
        n = q.p * q.beta**4 * L + max(q.p * q.beta**2, 1.0) * root
    elif setting in ("stochastic-test", "offset-train"):
        n = max(math.sqrt(q.p) * bt, 1.0) * root
    elif setting == "adversarial-test":
        n = max(q.p * bt, 1.0) * root
    else:
        denom = 1.0 - bt + 2.0 * bt * q.alpha
        if denom <= 0:
            raise ValueError("offset with imbalance: 1 - beta_tilde + 2 beta_tilde alpha must be positive")
        n = max(math.sqrt(q.p) * bt, 1.0) * root / denom
    return _result(q.gamma, fid, sample_complexity=_ceil(n), unrounded=n)


def random_init_error(n: int, rho: float, G: float, num_draws: int = 100_000,
                      seed: int = 0) -> BoundResult:
    """Monte Carlo E_xi[Phi(sqrt(2 rho) mu / G)], mu = -xi - n sigmoid(-xi)."""
    if num_draws < 10_000:
        raise ValueError("num_draws must be at least 1e4")
    if not rho > 0:
        raise ValueError("rho must be positive")
    rng = np.random.default_rng(as_seed(seed))
    xi = rng.standard_normal(num_draws)
    vals = random_init_integrand(xi, n, rho, G)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(num_draws))
    return _result(est, "random-init", stderr=se, num_draws=num_draws)


def random_init_integrand(xi: np.ndarray, n: int, rho: float, G: float) -> np.ndarray:
    mu = -xi - n * expit(-xi)
    return norm_cdf_array(math.sqrt(2.0 * rho) * mu / G)


EVALUATORS = {
    "gd": gd_error_bound,
    "noisygd": noisygd_error_bound,
    "offset": deterministic_shift_bound,
    "projected": projected_multi_iter_bound,
    "pca": pca_sample_complexity,
}
