"""The sorted L1 norm ``J_lambda(b) = sum_i lambda_i |b|_(i)`` and its prox."""

import csv
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import DimensionError, DomainError

__all__ = [
    "PROVENANCES",
    "LambdaSequence",
    "sorted_l1_norm",
    "prox_sorted_l1",
    "sorted_l1_dual_infeasibility",
    "sorted_l1_dual_ratio",
    "top_k_sum",
]

PROVENANCES = ("BH", "kFWER", "FDP", "corrected", "custom")


@dataclass(frozen=True)
class LambdaSequence:
    """Non-negative, non-increasing penalty weights.

    Parameters
    ----------
    weights : array_like
        ``lambda_1 >= lambda_2 >= ... >= lambda_m >= 0``.
    provenance : str
        One of ``PROVENANCES``; records which recipe produced the weights.
    diagnostics : dict
        Free-form construction notes (flattening counts, truncation index,
        Monte Carlo standard errors).
    """

    weights: np.ndarray
    provenance: str = "custom"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("lambda weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)):
            raise DomainError("lambda weights must be finite")
        if np.any(w < 0):
            raise DomainError("lambda weights must be non-negative")
        if np.any(np.diff(w) > 0):
            i = int(np.argmax(np.diff(w) > 0))
            raise DomainError(
                f"lambda weights must be non-increasing (index {i + 1} exceeds {i})")
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def scaled(self, factor):
        """Return the sequence multiplied by ``factor >= 0``."""
        return LambdaSequence(self.weights * float(factor), self.provenance,
                              dict(self.diagnostics))

    def to_csv(self, path):
        """Write ``index,weight`` rows (1-based index)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "weight"])
            for i, w in enumerate(self.weights, start=1):
                writer.writerow([i, repr(float(w))])

    @classmethod
    def from_csv(cls, path, provenance="custom"):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["index"]))
        return cls(np.array([float(r["weight"]) for r in rows]), provenance)


def _weights(lam):
    if isinstance(lam, LambdaSequence):
        return lam.weights
    return np.asarray(lam, dtype=float)


def _check_lengths(x, lam):
    if x.shape != lam.shape:
        raise DimensionError(
            f"length mismatch: vector has shape {x.shape}, lambda has {lam.shape}")


def sorted_l1_norm(beta, lam):
    """Evaluate ``sum_i lam_i * |beta|_(i)`` with ``|beta|`` sorted descending."""
    beta = np.asarray(beta, dtype=float)
    lam = _weights(lam)
    _check_lengths(beta, lam)
    return float(np.dot(lam, np.sort(np.abs(beta))[::-1]))


@numba.njit(cache=True)
def _prox_sorted_abs(z, lam, step):
    """PAVA on ``z - step*lam`` (``z`` sorted descending), projected on the
    non-increasing cone and clipped at zero."""
    m = z.shape[0]
    start = np.empty(m, np.int64)
    total = np.empty(m, np.float64)
    mean = np.empty(m, np.float64)
    k = 0
    for i in range(m):
        start[k] = i
        total[k] = z[i] - step * lam[i]
        mean[k] = total[k]
        while k > 0 and mean[k - 1] <= mean[k]:
            total[k - 1] += total[k]
            mean[k - 1] = total[k - 1] / (i - start[k - 1] + 1)
            k -= 1
        k += 1
    out = np.empty(m, np.float64)
    for j in range(k):
        end = start[j + 1] if j + 1 < k else m
        val = mean[j] if mean[j] > 0.0 else 0.0
        for i in range(start[j], end):
            out[i] = val
    return out


def prox_sorted_l1(v, lam, step=1.0):
    """Proximal operator of ``step * J_lam``.

    Solves ``argmin_b 0.5*||b - v||^2 + step * J_lam(b)`` exactly with a
    stack-based pool-adjacent-violators pass on the sorted magnitudes.
    Entries killed by the penalty come back as exact zeros.

    Parameters
    ----------
    v : array_like, shape (m,)
    lam : LambdaSequence or array_like, shape (m,)
        Non-negative, non-increasing weights.
    step : float
        Positive step length.
    """
    if not step > 0:
        raise DomainError(f"prox step must be positive, got {step!r}")
    v = np.asarray(v, dtype=float)
    lam = _weights(lam)
    _check_lengths(v, lam)
    absv = np.abs(v)
    order = np.argsort(-absv, kind="stable")
    shrunk = _prox_sorted_abs(absv[order], np.ascontiguousarray(lam), float(step))
    out = np.empty_like(v)
    out[order] = shrunk
    return np.where(out == 0.0, 0.0, np.copysign(out, v))


def _cumsum_gap(g, lam):
    return np.cumsum(np.sort(np.abs(g))[::-1]), np.cumsum(lam)


def sorted_l1_dual_infeasibility(g, lam):
    """``max_k (sum_{i<=k} |g|_(i) - sum_{i<=k} lam_i)``, clipped below at 0.

    Zero exactly when ``g`` lies in the dual unit ball of ``J_lam``.
    """
    g = np.asarray(g, dtype=float)
    lam = _weights(lam)
    _check_lengths(g, lam)
    cg, cl = _cumsum_gap(g, lam)
    return max(float(np.max(cg - cl)), 0.0)


def sorted_l1_dual_ratio(g, lam):
    """``max_k (sum_{i<=k} |g|_(i)) / (sum_{i<=k} lam_i)``, with 0/0 read as 0.

    ``g / ratio`` lies on the dual unit ball; a zero prefix sum of ``lam``
    against a positive prefix of ``|g|`` gives ``inf``.
    """
    g = np.asarray(g, dtype=float)
    lam = _weights(lam)
    _check_lengths(g, lam)
    cg, cl = _cumsum_gap(g, lam)
    pos = cl > 0
    ratio = float(np.max(cg[pos] / cl[pos])) if np.any(pos) else 0.0
    if np.any(cg[~pos] > 0):
        return float("inf")
    return ratio


def top_k_sum(s, k):
    """Sum of the ``k`` largest entries of ``s``."""
    s = np.asarray(s, dtype=float)
    if not 0 <= k <= s.size:
        raise DomainError(f"k must lie in [0, {s.size}], got {k}")
    return float(np.sum(np.sort(s)[::-1][:k]))
