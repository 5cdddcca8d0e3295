"""Seeded generators for the three simulation designs.

Every generator is a pure function of its parameters and an ``RngStream``;
the same ``(seed, stream_id)`` reproduces the same instance bit for bit.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .solver import Problem

__all__ = [
    "RngStream",
    "CorrelatedMeansInstance",
    "default_amplitude",
    "gen_orthogonal",
    "gen_correlated_means",
    "compound_symmetry",
    "compound_symmetry_inv_sqrt",
    "gen_gaussian_design",
    "dump_problem_csv",
]


@dataclass(frozen=True)
class RngStream:
    """Independent random stream identified by ``(seed, stream_id)``.

    Backed by numpy's counter-based Philox generator keyed through
    ``SeedSequence(seed, spawn_key=(stream_id,))``.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_id < 0:
            raise DomainError(f"stream_id must be non-negative, got {self.stream_id}")

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))


def _gen(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


def default_amplitude(dim, multiplier):
    """``multiplier * sqrt(2 log dim)``, the signal scale used throughout."""
    return multiplier * math.sqrt(2.0 * math.log(dim))


def _support(gen, size, t):
    if not 0 <= t <= size:
        raise DomainError(f"need 0 <= t <= {size}, got t={t}")
    return np.sort(gen.choice(size, size=t, replace=False))


def gen_orthogonal(n, t, amplitude=None, sigma=1.0, rng=None):
    """Identity design: ``y = beta + eps`` with ``eps ~ N(0, sigma^2 I_n)``.

    ``beta`` has ``t`` entries equal to ``amplitude`` (default
    ``3*sqrt(2 log n)``) at uniformly drawn positions.
    """
    if amplitude is None:
        amplitude = default_amplitude(n, 3.0)
    if t > 0 and amplitude == 0:
        raise DomainError("t > 0 requires a nonzero amplitude")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    gen = _gen(rng)
    beta = np.zeros(n)
    beta[_support(gen, n, t)] = amplitude
    y = beta + sigma * gen.standard_normal(n)
    return Problem(np.eye(n), y, sigma, beta)


def compound_symmetry(m, diag, offdiag):
    return (diag - offdiag) * np.eye(m) + offdiag * np.ones((m, m))


def compound_symmetry_inv_sqrt(m, diag, offdiag):
    """Closed-form inverse square root of ``(diag - offdiag) I + offdiag J``.

    Returns ``a I + b J`` with ``a = 1/sqrt(diag - offdiag)`` and
    ``b = (1/sqrt(diag + (m-1) offdiag) - a) / m``.
    """
    if not (diag > offdiag >= 0 and diag + (m - 1) * offdiag > 0):
        raise DomainError(
            f"compound symmetry needs diag > offdiag >= 0, got diag={diag}, offdiag={offdiag}")
    a = 1.0 / math.sqrt(diag - offdiag)
    b = (1.0 / math.sqrt(diag + (m - 1) * offdiag) - a) / m
    # (aI + bJ)^2 Sigma = a^2 (d-o) I + coef J; check without forming matrices
    c2 = 2 * a * b + m * b * b
    coef = a * a * offdiag + c2 * (diag - offdiag) + c2 * m * offdiag
    if abs(a * a * (diag - offdiag) - 1.0) > 1e-8 or abs(coef) > 1e-8:
        raise DomainError("inverse square root failed its residual check")
    return a * np.eye(m) + b * np.ones((m, m))


@dataclass
class CorrelatedMeansInstance:
    """Lab-averaged test statistics and their whitened regression form.

    ``whitened_design`` is ``Sigma^{-1/2}`` with columns scaled to unit norm;
    ``column_norm_c`` is the common column norm before scaling, so
    ``whitened_response = whitened_design @ (c * mu) + N(0, I)``.
    """

    ybar: np.ndarray
    sigma_matrix: np.ndarray
    mu: np.ndarray
    whitened_design: np.ndarray
    whitened_response: np.ndarray
    column_norm_c: float

    @property
    def noise_sd(self):
        return math.sqrt(self.sigma_matrix[0, 0])

    def to_problem(self):
        return Problem(self.whitened_design, self.whitened_response, 1.0,
                       self.column_norm_c * self.mu)


def gen_correlated_means(n_tests, p_labs, t, sigma_tau2, sigma_z2, rng, amplitude=None):
    """Multiple mean testing with a shared lab effect.

    Draws ``tau_j ~ N(0, sigma_tau2)`` and ``z_ij ~ N(0, sigma_z2)`` for
    ``p_labs`` labs and averages ``y_ij = mu_i + tau_j + z_ij`` over labs. The
    resulting covariance has diagonal ``(sigma_tau2 + sigma_z2)/p_labs`` and
    off-diagonal ``sigma_tau2/p_labs``. ``mu`` has ``t`` nonzeros equal to
    ``amplitude / c`` (default amplitude ``2*sqrt(2 log n_tests)``), where ``c``
    is the column norm of ``Sigma^{-1/2}``.
    """
    if sigma_tau2 < 0 or not sigma_z2 > 0:
        raise DomainError("need sigma_tau2 >= 0 and sigma_z2 > 0")
    if p_labs < 1:
        raise DomainError("p_labs must be positive")
    if amplitude is None:
        amplitude = default_amplitude(n_tests, 2.0)
    if t > 0 and amplitude == 0:
        raise DomainError("t > 0 requires a nonzero amplitude")
    diag = (sigma_tau2 + sigma_z2) / p_labs
    offdiag = sigma_tau2 / p_labs
    inv_sqrt = compound_symmetry_inv_sqrt(n_tests, diag, offdiag)
    c = float(np.linalg.norm(inv_sqrt[:, 0]))

    gen = _gen(rng)
    mu = np.zeros(n_tests)
    mu[_support(gen, n_tests, t)] = amplitude / c
    tau = math.sqrt(sigma_tau2) * gen.standard_normal(p_labs)
    z = math.sqrt(sigma_z2) * gen.standard_normal((n_tests, p_labs))
    ybar = mu + tau.mean() + z.mean(axis=1)
    return CorrelatedMeansInstance(
        ybar=ybar,
        sigma_matrix=compound_symmetry(n_tests, diag, offdiag),
        mu=mu,
        whitened_design=inv_sqrt / c,
        whitened_response=inv_sqrt @ ybar,
        column_norm_c=c,
    )


def gen_gaussian_design(n, m, t, amplitude=None, rng=None, sigma=1.0):
    """I.i.d. ``N(0, 1/n)`` design with columns rescaled to unit norm.

    ``beta`` has ``t`` entries equal to ``amplitude`` (default moderate,
    ``2*sqrt(2 log m)``); ``y = X beta + N(0, sigma^2 I)``.
    """
    if amplitude is None:
        amplitude = default_amplitude(m, 2.0)
    if t > 0 and amplitude == 0:
        raise DomainError("t > 0 requires a nonzero amplitude")
    gen = _gen(rng)
    X = gen.standard_normal((n, m)) / math.sqrt(n)
    X /= np.linalg.norm(X, axis=0)
    beta = np.zeros(m)
    beta[_support(gen, m, t)] = amplitude
    y = X @ beta + sigma * gen.standard_normal(n)
    return Problem(X, y, sigma, beta)


def dump_problem_csv(problem, directory):
    """Write ``X.csv``, ``y.csv`` and ``beta.csv`` (if known) into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    np.savetxt(os.path.join(directory, "X.csv"), problem.X, delimiter=",", fmt="%.17g")
    np.savetxt(os.path.join(directory, "y.csv"), problem.y, delimiter=",", fmt="%.17g")
    if problem.beta_true is not None:
        np.savetxt(os.path.join(directory, "beta.csv"), problem.beta_true,
                   delimiter=",", fmt="%.17g")
