"""Selection scoring and Monte Carlo aggregation."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

__all__ = [
    "SelectionOutcome",
    "ExperimentReport",
    "score_selection",
    "fdp",
    "aggregate",
    "binomial_se",
]


@dataclass(frozen=True)
class SelectionOutcome:
    """Counts from one replication: false selections ``V``, total ``R``."""

    V: int
    R: int
    true_positives: int
    t: int

    def __post_init__(self):
        if self.V + self.true_positives != self.R or self.V < 0 or self.true_positives < 0:
            raise DomainError(f"inconsistent counts {self}")
        if self.true_positives > self.t:
            raise DomainError(f"more true positives than true features: {self}")


@dataclass
class ExperimentReport:
    fdr_hat: float
    kfwer_hat: float
    prob_fdp_exceed_hat: float
    power_hat: float
    replications: int
    config_echo: dict = field(default_factory=dict)
    seed: int | None = None
    se_kfwer: float = 0.0
    se_prob: float = 0.0
    nonconverged: int = 0


def score_selection(selected, true_support, m=None):
    """Count false and true selections.

    ``m``, when given, bounds the valid index range ``[0, m)``.
    """
    sel = {int(i) for i in np.asarray(selected, dtype=int).ravel()}
    true = {int(i) for i in np.asarray(true_support, dtype=int).ravel()}
    if m is not None:
        bad = [i for i in sel | true if not 0 <= i < m]
        if bad:
            raise DomainError(f"indices out of range [0, {m}): {sorted(bad)[:5]}")
    elif any(i < 0 for i in sel | true):
        raise DomainError("negative index")
    tp = len(sel & true)
    return SelectionOutcome(V=len(sel) - tp, R=len(sel), true_positives=tp, t=len(true))


def fdp(outcome):
    """False discovery proportion ``V / max(R, 1)``."""
    return outcome.V / max(outcome.R, 1)


def binomial_se(p_hat, n):
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def aggregate(outcomes, gamma, k, *, config_echo=None, seed=None, nonconverged=0):
    """Average a list of outcomes into an ``ExperimentReport``.

    FDR is the mean FDP, k-FWER the fraction with ``V >= k``, exceedance the
    fraction with ``FDP > gamma`` (strict) and power the mean of ``TP / t``.
    The sample versions of ``(FDR - gamma)/(1 - gamma) <= P(FDP > gamma) <=
    FDR/gamma`` are checked before returning.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise DomainError("cannot aggregate an empty list of outcomes")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if any(o.t == 0 for o in outcomes):
        raise DomainError("power is undefined for replications with no true features")
    N = len(outcomes)
    fdps = np.array([fdp(o) for o in outcomes])
    # math.fsum keeps the mean independent of input order
    fdr_hat = math.fsum(fdps) / N
    kfwer_hat = sum(o.V >= k for o in outcomes) / N
    prob = int(np.count_nonzero(fdps > gamma)) / N
    power = math.fsum(o.true_positives / o.t for o in outcomes) / N
    _check_markov_sandwich(fdr_hat, prob, gamma)
    return ExperimentReport(
        fdr_hat=fdr_hat,
        kfwer_hat=kfwer_hat,
        prob_fdp_exceed_hat=prob,
        power_hat=power,
        replications=N,
        config_echo=dict(config_echo or {}),
        seed=seed,
        se_kfwer=binomial_se(kfwer_hat, N),
        se_prob=binomial_se(prob, N),
        nonconverged=nonconverged,
    )


def _check_markov_sandwich(fdr_hat, prob, gamma, slack=1e-12):
    if prob > fdr_hat / gamma + slack or (fdr_hat - gamma) / (1 - gamma) > prob + slack:
        raise AssertionError(
            f"Markov sandwich violated: FDR={fdr_hat}, P(FDP>gamma)={prob}, gamma={gamma}")
