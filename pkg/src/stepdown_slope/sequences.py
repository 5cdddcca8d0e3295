"""Regularization sequences for SLOPE, k-SLOPE and F-SLOPE.

``lambda_bh`` carries the noise scale ``sigma``; ``lambda_kfwer`` and
``lambda_fdp`` are unit-scale, since the k-SLOPE and F-SLOPE objectives put
``sigma`` in front of the whole penalty (the solver applies it once).

For non-orthogonal designs the base sequences are inflated to account for
the variance that already-selected variables leak into the remaining ones:
analytically for i.i.d. Gaussian designs (``gaussian_correction``) and by
Monte Carlo for anything else (``monte_carlo_correction``). Both truncate the
corrected sequence at its global minimum so the penalty stays convex.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConditioningError, DimensionError, DomainError
from .sorted_l1 import LambdaSequence
from .special import std_normal_isf

__all__ = [
    "SequenceSpec",
    "lambda_bh",
    "lambda_kfwer",
    "lambda_fdp",
    "wishart_weight",
    "gaussian_correction",
    "monte_carlo_correction",
]

log = logging.getLogger(__name__)

# products like 0.29 * 100 land just below the integer in binary
_FLOOR_EPS = 1e-9


def _check_unit(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


def _floor_gamma(gamma, i):
    return np.floor(gamma * i + _FLOOR_EPS)


@dataclass(frozen=True)
class SequenceSpec:
    """Parameters shared by the sequence constructors.

    Only the fields a given constructor reads need sensible values; the
    invariants below are checked for every field regardless.
    """

    m: int
    alpha: float = 0.1
    q: float = 0.1
    gamma: float = 0.1
    k: int = 1
    sigma: float = 1.0
    n: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"m must be positive, got {self.m}")
        for name in ("alpha", "q", "gamma"):
            _check_unit(name, getattr(self, name))
        if not 1 <= self.k <= self.m:
            raise DomainError(f"k must satisfy 1 <= k <= m={self.m}, got {self.k}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.n is not None and self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")

    def bh(self):
        return lambda_bh(self.m, self.q, self.sigma)

    def kfwer(self):
        return lambda_kfwer(self.m, self.k, self.alpha)

    def fdp(self):
        return lambda_fdp(self.m, self.gamma, self.alpha)


def lambda_bh(m, q, sigma=1.0):
    """``sigma * Phi^{-1}(1 - i*q/(2m))`` for ``i = 1..m``."""
    _check_unit("q", q)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    i = np.arange(1, m + 1)
    w = sigma * std_normal_isf(i * q / (2.0 * m))
    return LambdaSequence(w, "BH")


def lambda_kfwer(m, k, alpha):
    """k-FWER sequence, constant on the first ``k`` entries.

    ``Phi^{-1}(1 - k*alpha/(2m))`` for ``i <= k`` and
    ``Phi^{-1}(1 - k*alpha/(2(m + k - i)))`` afterwards.
    """
    _check_unit("alpha", alpha)
    if not 1 <= k <= m:
        raise DomainError(f"k must satisfy 1 <= k <= m={m}, got {k}")
    i = np.arange(1, m + 1)
    denom = np.where(i <= k, m, m + k - i)
    tails = k * alpha / (2.0 * denom)
    if np.any(tails >= 1.0):
        bad = int(np.argmax(tails >= 1.0)) + 1
        raise DomainError(f"k*alpha too large: quantile argument leaves (0,1) at index {bad}")
    return LambdaSequence(std_normal_isf(tails), "kFWER")


def lambda_fdp(m, gamma, alpha):
    """FDP sequence ``Phi^{-1}(1 - (floor(gamma*i)+1)*alpha / (2(m + floor(gamma*i) + 1 - i)))``.

    The raw values are checked for monotonicity; any increase is flattened
    with a running minimum and counted in ``diagnostics["flattened"]``.
    """
    _check_unit("gamma", gamma)
    _check_unit("alpha", alpha)
    i = np.arange(1, m + 1)
    f = _floor_gamma(gamma, i)
    tails = (f + 1.0) * alpha / (2.0 * (m + f + 1.0 - i))
    bad = np.flatnonzero((tails <= 0.0) | (tails >= 1.0))
    if bad.size:
        raise DomainError(
            f"FDP sequence quantile argument outside (0, 1) at index {int(bad[0]) + 1}")
    raw = std_normal_isf(tails)
    flat = np.minimum.accumulate(raw)
    n_flat = int(np.count_nonzero(flat < raw))
    if n_flat:
        log.warning("lambda_fdp: flattened %d increasing entries (m=%d, gamma=%g, alpha=%g)",
                    n_flat, m, gamma, alpha)
    return LambdaSequence(flat, "FDP", {"flattened": n_flat})


def wishart_weight(s, n):
    """``1 / (n - s - 1)``, the mean of an inverse ``s x s`` Wishart diagonal entry."""
    if n <= s + 1:
        raise DomainError(f"Wishart weight undefined for n={n} <= s+1={s + 1}")
    return 1.0 / (n - s - 1)


def _truncate(raw, m, base, extra):
    raw = np.asarray(raw, dtype=float)
    k_star = int(np.argmin(raw))
    if raw.size < m and k_star == raw.size - 1:
        raise DomainError(
            f"corrected sequence still decreasing at index {raw.size}, "
            "the last index where the correction is defined")
    out = np.empty(m)
    # bumps before the global minimum (plateaus of the base, Monte Carlo noise)
    # are flattened the same way as the FDP sequence
    prefix = np.minimum.accumulate(raw[: k_star + 1])
    n_flat = int(np.count_nonzero(prefix < raw[: k_star + 1]))
    out[: k_star + 1] = prefix
    out[k_star + 1:] = raw[k_star]
    diagnostics = {"k_star": k_star + 1, "raw": raw, "flattened": n_flat,
                   "base_provenance": base.provenance}
    diagnostics.update(extra)
    return LambdaSequence(out, "corrected", diagnostics)


def gaussian_correction(base, n, weight=wishart_weight):
    """Inflate ``base`` for an i.i.d. ``N(0, 1/n)`` design and truncate at the minimum.

    ``out(1) = base(1)`` and
    ``out(i) = base(i) * sqrt(1 + weight(i-1, n) * sum_{j<i} out(j)^2)``.
    The raw sequence is computed while ``weight`` is defined; ``k_star`` is the
    first index of its global minimum and every later entry is set to
    ``out(k_star)``.

    Parameters
    ----------
    base : LambdaSequence
    n : int
        Number of rows of the design.
    weight : callable, optional
        ``weight(s, n)``; override to probe the recursion (``lambda s, n: 0.0``
        makes the correction the identity).
    """
    b = base.weights
    m = b.size
    raw = [b[0]]
    sumsq = b[0] ** 2
    for i in range(1, m):
        try:
            w = weight(i, n)
        except DomainError:
            break
        val = b[i] * math.sqrt(1.0 + w * sumsq)
        raw.append(val)
        sumsq += val * val
    return _truncate(raw, m, base, {"computed": len(raw)})


def _singular(gram_ss, tol):
    # batched smallest eigenvalue; columns are unit norm so tol is absolute
    return np.linalg.eigvalsh(gram_ss)[:, 0] <= tol


def monte_carlo_correction(base, X, replicates, rng, *, patience=20, batch=1000,
                           singular_tol=1e-10, max_skip_fraction=0.10):
    """Monte Carlo version of ``gaussian_correction`` for an arbitrary design.

    The analytic term ``w(i-1) * sum_{j<i} out(j)^2`` is replaced by the
    average of ``(X_i' X_S (X_S' X_S)^{-1} out_S)^2`` over ``replicates``
    fresh draws per index of a uniform support ``S`` of size ``i-1`` and a
    uniform column ``i`` outside it.

    Parameters
    ----------
    base : LambdaSequence
    X : ndarray, shape (n, m)
        Design with unit-norm columns.
    replicates : int
        Draws per index, at least 100.
    rng : numpy.random.Generator
    patience : int or None
        Stop once the raw sequence has stayed above its running minimum for
        this many consecutive indices. ``None`` evaluates every index.
    batch : int
        Draws solved together; bounds memory at ``batch * i^2`` floats.

    Returns
    -------
    LambdaSequence
        Diagnostics hold the per-index estimate (``correction``), its
        standard error (``correction_se``), skipped-draw counts and ``k_star``.

    Raises
    ------
    ConditioningError
        If more than ``max_skip_fraction`` of the draws at some index have a
        numerically singular ``X_S' X_S``.
    """
    if replicates < 100:
        raise DomainError(f"need at least 100 replicates, got {replicates}")
    X = np.asarray(X, dtype=float)
    b = base.weights
    m = b.size
    if X.ndim != 2 or X.shape[1] != m:
        raise DimensionError(f"X must have {m} columns, got shape {X.shape}")
    norms = np.linalg.norm(X, axis=0)
    if np.max(np.abs(norms - 1.0)) > 1e-8:
        raise DomainError("X must have unit-norm columns")
    gram = X.T @ X

    raw = [b[0]]
    est = [0.0]
    se = [0.0]
    skipped = [0]
    run_above = 0
    for i in range(1, m):
        s = i
        lam_s = np.asarray(raw[:s])
        vals = []
        n_skip = 0
        for start in range(0, replicates, batch):
            size = min(batch, replicates - start)
            draw = np.argsort(rng.random((size, m)), axis=1)[:, : s + 1]
            supp, col = draw[:, :s], draw[:, s]
            g_ss = gram[supp[:, :, None], supp[:, None, :]]
            g_is = gram[supp, col[:, None]]
            bad = _singular(g_ss, singular_tol)
            n_skip += int(np.count_nonzero(bad))
            ok = ~bad
            if not np.any(ok):
                continue
            h = np.linalg.solve(g_ss[ok], np.broadcast_to(lam_s, (int(ok.sum()), s))[..., None])
            vals.append(np.einsum("rs,rs->r", g_is[ok], h[..., 0]) ** 2)
        if n_skip > max_skip_fraction * replicates:
            if len(raw) > 1 and raw[-1] > min(raw):
                break
            raise ConditioningError(
                f"{n_skip} of {replicates} draws singular at index {i + 1}")
        vals = np.concatenate(vals)
        mean = float(vals.mean())
        raw.append(b[i] * math.sqrt(1.0 + mean))
        est.append(mean)
        se.append(float(vals.std(ddof=1) / math.sqrt(vals.size)))
        skipped.append(n_skip)
        run_above = run_above + 1 if raw[-1] > min(raw[:-1]) else 0
        if patience is not None and run_above >= patience:
            break
    extra = {
        "computed": len(raw),
        "correction": np.array(est),
        "correction_se": np.array(se),
        "skipped": np.array(skipped),
        "replicates": replicates,
    }
    return _truncate(raw, m, base, extra)
