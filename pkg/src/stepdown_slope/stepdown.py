"""Classical stepdown multiple testing with k-FWER and FDP critical values."""

import math

import numpy as np

from .exceptions import DimensionError, DomainError

__all__ = [
    "kfwer_thresholds",
    "fdp_thresholds",
    "stepdown_select",
    "two_sided_p",
]

_FLOOR_EPS = 1e-9


def _check_thresholds(alphas):
    if np.any(alphas < 0) or np.any(np.diff(alphas) < 0):
        raise DomainError("thresholds must be non-negative and non-decreasing")
    return alphas


def kfwer_thresholds(m, k, alpha):
    """``k*alpha/m`` for ``i <= k`` and ``k*alpha/(m + k - i)`` afterwards."""
    if not 1 <= k <= m:
        raise DomainError(f"k must satisfy 1 <= k <= m={m}, got {k}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    i = np.arange(1, m + 1)
    denom = np.where(i <= k, m, m + k - i)
    return _check_thresholds(k * alpha / denom)


def fdp_thresholds(m, gamma, alpha):
    """``(floor(gamma*i)+1)*alpha / (m + floor(gamma*i) + 1 - i)``."""
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    i = np.arange(1, m + 1)
    f = np.floor(gamma * i + _FLOOR_EPS)
    return _check_thresholds((f + 1) * alpha / (m + f + 1 - i))


def stepdown_select(pvalues, thresholds):
    """Indices rejected by the stepdown procedure.

    Sorts the p-values ascending and rejects the ``r`` smallest, where ``r``
    is the longest prefix with ``p_(j) <= alpha_j`` for every ``j <= r``.
    A group of tied p-values is never split: if the prefix ends inside a tie
    group, the whole group is retained.

    Returns
    -------
    ndarray of int
        Rejected indices in ascending order.
    """
    p = np.asarray(pvalues, dtype=float)
    alphas = np.asarray(thresholds, dtype=float)
    if p.shape != alphas.shape or p.ndim != 1:
        raise DimensionError(
            f"p-values {p.shape} and thresholds {alphas.shape} must be equal-length vectors")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("p-values must lie in [0, 1]")
    order = np.lexsort((np.arange(p.size), p))
    ps = p[order]
    fails = np.flatnonzero(ps > alphas)
    r = int(fails[0]) if fails.size else p.size
    if 0 < r < p.size and ps[r - 1] == ps[r]:
        r = int(np.searchsorted(ps, ps[r], side="left"))
    return np.sort(order[:r])


def two_sided_p(z, noise_sd=1.0):
    """Two-sided normal p-value ``2*(1 - Phi(|z|/noise_sd))``; vectorized over ``z``."""
    if not noise_sd > 0:
        raise DomainError(f"noise_sd must be positive, got {noise_sd}")
    z = np.abs(np.asarray(z, dtype=float)) / noise_sd
    # erfc(|z|/sqrt2) == 2*(1 - Phi(|z|)) without cancellation in the tail
    out = np.array([math.erfc(v / math.sqrt(2.0)) for v in z.ravel()]).reshape(z.shape)
    return float(out) if out.ndim == 0 else out
