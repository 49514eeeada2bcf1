"""Closed forms and samplers for the limiting laws of the scaled spectral norm.

The two envelope distributions are Fréchet-type laws driven by a single unit
exponential; the order-statistic limit is the point process built from all
Poisson arrival times, weighted by the row window and the squared time window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linear_filter import FilterSpec
from .rv_noise import index_uniforms

__all__ = [
    "BoundConstants",
    "GammaSeq",
    "bound_cdf_lower",
    "bound_cdf_upper",
    "bound_constants",
    "frechet_cdf",
    "frechet_quantile",
    "limit_order_statistics",
    "ma1_constants",
    "sample_gamma",
]

_GAMMA_TAG = 0x47


@dataclass(frozen=True)
class BoundConstants:
    """Scale constants of the lower and upper envelope laws."""

    lower_scale: float
    upper_scale: float
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.lower_scale <= self.upper_scale:
            raise ValueError(
                f"need 0 < lower_scale <= upper_scale, got {self.lower_scale}, {self.upper_scale}"
            )
        if not 0.0 < self.alpha < 4.0:
            raise ValueError(f"alpha must lie in (0, 4), got {self.alpha}")


def bound_constants(spec: FilterSpec, alpha: float) -> BoundConstants:
    """lower = max theta_k^2 * sum c_j^2; upper = max|theta| * sum|theta| * sum c_j^2."""
    sum_c2 = spec.c.sq_sum
    lower = spec.theta.max_abs ** 2 * sum_c2
    upper = spec.theta.max_abs * spec.theta.abs_sum * sum_c2
    return BoundConstants(lower_scale=lower, upper_scale=upper, alpha=alpha)


def frechet_cdf(x, scale: float, alpha: float):
    """P(Gamma^(-2/alpha) * scale <= x) = exp(-(x/scale)^(-alpha/2))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(-((x[pos] / scale) ** (-alpha / 2.0)))
    return out if out.ndim else float(out)


def frechet_quantile(u, scale: float, alpha: float):
    """Inverse of frechet_cdf at level u in (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    out = scale * (-np.log(u)) ** (-2.0 / alpha)
    return out if out.ndim else float(out)


def bound_cdf_lower(x, b: BoundConstants):
    """The smaller envelope CDF (built from the upper scale constant)."""
    return frechet_cdf(x, b.upper_scale, b.alpha)


def bound_cdf_upper(x, b: BoundConstants):
    """The larger envelope CDF (built from the lower scale constant)."""
    return frechet_cdf(x, b.lower_scale, b.alpha)


@dataclass(frozen=True, eq=False)
class GammaSeq:
    """Arrival times of a unit-rate Poisson process: strictly increasing, positive."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        v = self.values
        if v.ndim != 1 or v.size == 0:
            raise ValueError("gamma sequence must be a nonempty vector")
        if not (v[0] > 0.0 and np.all(np.diff(v) > 0.0)):
            raise ValueError("gamma sequence must be positive and strictly increasing")


def _exp_increments(seed: int, start: int, stop: int) -> np.ndarray:
    u = index_uniforms(seed, np.arange(start, stop), tag=_GAMMA_TAG)
    return -np.log(u)


def sample_gamma(k: int, seed: int) -> GammaSeq:
    """First k arrival times; increments are counter-based, keyed by (seed, index)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = np.cumsum(_exp_increments(seed, 0, k))
    return GammaSeq(values=values, seed=seed)


def limit_order_statistics(
    spec: FilterSpec,
    alpha: float,
    k: int,
    seed: int,
    block: int = 256,
    max_points: int = 10**7,
) -> np.ndarray:
    """One draw of the k largest points of the limit point process.

    The points are Gamma_i^(-2/alpha) * theta_l * sum_j c_j^2 over all arrival
    indices i and window lags l.  Arrivals are drawn in blocks until the
    largest possible future point falls below the current k-th largest, which
    is exact because Gamma_i^(-2/alpha) is decreasing in i.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    theta = np.asarray(spec.theta.values, dtype=float)
    theta_max = float(theta.max())
    if theta_max <= 0.0:
        raise ValueError("order-statistic limit needs at least one positive theta weight")
    sum_c2 = spec.c.sq_sum
    exponent = -2.0 / alpha

    top = np.array([], dtype=float)
    total = 0.0  # running Gamma
    count = 0
    while count < max_points:
        inc = _exp_increments(seed, count, count + block)
        gammas = total + np.cumsum(inc)
        total = float(gammas[-1])
        count += block
        points = (gammas**exponent)[:, None] * theta[None, :] * sum_c2
        top = np.sort(np.concatenate([top, points.ravel()]))[-k:]
        bound = total**exponent * theta_max * sum_c2
        if top.size == k and bound < top[0]:
            return top[::-1].copy()
    raise RuntimeError(f"order statistics did not stabilize within {max_points} arrivals")


def ma1_constants(theta: float) -> tuple[float, float]:
    """Lower and upper scale constants of the first-order row-average model."""
    lower = max(1.0, theta * theta)
    upper = max(1.0 + abs(theta), abs(theta) + theta * theta)
    return lower, upper
