"""Config-driven Monte Carlo experiments over (method, t, k) grids.

One replication ``(t, rep)`` owns the random stream ``(seed, t << 32 | rep)``
and generates a single instance shared by every method and every ``k``, so
methods are compared on common random numbers and results do not depend on
the order (or process) in which replications run.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exceptions import ConfigError
from .metrics import aggregate, score_selection
from .sequences import (
    gaussian_correction,
    lambda_bh,
    lambda_fdp,
    lambda_kfwer,
    monte_carlo_correction,
)
from .simgen import (
    RngStream,
    default_amplitude,
    gen_correlated_means,
    gen_gaussian_design,
    gen_orthogonal,
)
from .solver import SolverOptions, solve_orthogonal, solve_slope
from .stepdown import fdp_thresholds, kfwer_thresholds, stepdown_select, two_sided_p

__all__ = [
    "DESIGNS",
    "METHODS",
    "REPORT_COLUMNS",
    "ExperimentConfig",
    "load_config",
    "build_lambdas",
    "run_experiment",
    "emit_report",
    "emit_heatmap",
]

log = logging.getLogger(__name__)

DESIGNS = ("orthogonal", "correlated_means", "gaussian")
METHODS = ("SLOPE", "kSLOPE", "FSLOPE", "Sd_kFWER", "Sd_FDP")
K_METHODS = ("kSLOPE", "Sd_kFWER")
AMPLITUDE_MULTIPLIERS = {"weak": 1.0, "moderate": 2.0, "strong": 3.0}
DEFAULT_AMPLITUDE = {"orthogonal": "strong", "correlated_means": "moderate",
                     "gaussian": "moderate"}
LAMBDA_STREAM = 2**62

REPORT_COLUMNS = (
    "method", "design", "n", "m", "t", "k", "alpha", "gamma", "q", "replications",
    "seed", "fdr_hat", "kfwer_hat", "prob_fdp_exceed_hat", "power_hat", "se_kfwer",
    "se_prob", "nonconverged",
)
_FLOAT_COLUMNS = {"alpha", "gamma", "q", "fdr_hat", "kfwer_hat", "prob_fdp_exceed_hat",
                  "power_hat", "se_kfwer", "se_prob"}


@dataclass
class ExperimentConfig:
    """Experiment grid.

    ``m`` defaults to ``n`` and must equal it for the orthogonal and
    correlated-means designs (there ``n`` is the number of tests).
    ``amplitude_mode`` is ``"weak"``, ``"moderate"``, ``"strong"`` (1, 2, 3
    times ``sqrt(2 log m)``) or ``{"custom": value}``; ``None`` picks the
    design's default. ``lambda_correction`` is ``"none"``, ``"gaussian"`` or
    ``{"monte_carlo": replicates}``; ``None`` picks the design's default.
    """

    design: str
    n: int
    t_grid: list
    k_grid: list
    m: int | None = None
    p_labs: int = 5
    sigma_tau2: float = 2.5
    sigma_z2: float = 2.5
    alpha: float = 0.1
    q: float = 0.1
    gamma: float = 0.1
    amplitude_mode: object = None
    methods: list = field(default_factory=lambda: list(METHODS))
    replications: int = 100
    seed: int = 0
    lambda_correction: object = None
    mc_patience: int | None = 20

    @classmethod
    def from_dict(cls, data):
        """Build and validate a config, reporting every violated field at once."""
        if not isinstance(data, dict):
            raise ConfigError({"<root>": "config must be a JSON object"})
        known = {f.name for f in fields(cls)}
        reasons = {k: "unknown field" for k in data if k not in known}
        for req in ("design", "n", "t_grid", "k_grid"):
            if req not in data:
                reasons[req] = "required field missing"
        if reasons:
            raise ConfigError(reasons)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        r = {}

        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        def is_num(v):
            return isinstance(v, (int, float, np.number)) and not isinstance(v, bool)

        if self.design not in DESIGNS:
            r["design"] = f"must be one of {list(DESIGNS)}"
        if not is_int(self.n) or self.n < 1:
            r["n"] = "must be a positive integer"
        if self.m is not None and (not is_int(self.m) or self.m < 1):
            r["m"] = "must be a positive integer"
        elif (self.m is not None and self.design in ("orthogonal", "correlated_means")
              and is_int(self.n) and self.m != self.n):
            r["m"] = f"must equal n for the {self.design} design"
        m = self.dim_m if "n" not in r and "m" not in r else None
        if not is_int(self.p_labs) or self.p_labs < 1:
            r["p_labs"] = "must be a positive integer"
        if not is_num(self.sigma_tau2) or self.sigma_tau2 < 0:
            r["sigma_tau2"] = "must be non-negative"
        if not is_num(self.sigma_z2) or not self.sigma_z2 > 0:
            r["sigma_z2"] = "must be positive"
        for name in ("alpha", "q", "gamma"):
            v = getattr(self, name)
            if not is_num(v) or not 0 < v < 1:
                r[name] = "must lie in (0, 1)"
        for name in ("t_grid", "k_grid"):
            grid = getattr(self, name)
            if not isinstance(grid, (list, tuple)) or not grid:
                r[name] = "must be a non-empty list"
            elif not all(is_int(v) for v in grid):
                r[name] = "entries must be integers"
            elif len(set(grid)) != len(grid):
                r[name] = "entries must be distinct"
        if "t_grid" not in r:
            if any(t < 1 for t in self.t_grid):
                r["t_grid"] = "t must be >= 1 (power is undefined without true features)"
            elif m is not None and any(t > m for t in self.t_grid):
                r["t_grid"] = f"t must not exceed m={m}"
        if "k_grid" not in r:
            if any(k < 1 for k in self.k_grid):
                r["k_grid"] = "k must be >= 1"
            elif m is not None and any(k > m for k in self.k_grid):
                r["k_grid"] = f"k must not exceed m={m}"
        if not isinstance(self.methods, (list, tuple)) or not self.methods:
            r["methods"] = "must be a non-empty list"
        elif any(x not in METHODS for x in self.methods):
            r["methods"] = f"entries must be among {list(METHODS)}"
        elif len(set(self.methods)) != len(self.methods):
            r["methods"] = "entries must be distinct"
        if not is_int(self.replications) or self.replications < 1:
            r["replications"] = "must be >= 1"
        if not is_int(self.seed) or not 0 <= self.seed < 2**64:
            r["seed"] = "must be a 64-bit unsigned integer"
        if self.mc_patience is not None and (not is_int(self.mc_patience) or self.mc_patience < 1):
            r["mc_patience"] = "must be a positive integer or null"
        try:
            amp = self.amplitude
            if not math.isfinite(amp) or amp == 0:
                r["amplitude_mode"] = "amplitude must be finite and nonzero"
        except (ValueError, TypeError, KeyError) as exc:
            r["amplitude_mode"] = str(exc) or "invalid amplitude mode"
        try:
            self.correction
        except (ValueError, TypeError, KeyError) as exc:
            r["lambda_correction"] = str(exc) or "invalid correction"
        if r:
            raise ConfigError(r)
        return self

    @property
    def dim_m(self):
        return self.n if self.m is None else self.m

    @property
    def amplitude(self):
        mode = self.amplitude_mode
        if mode is None:
            mode = DEFAULT_AMPLITUDE.get(self.design, "moderate")
        if isinstance(mode, str):
            if mode not in AMPLITUDE_MULTIPLIERS:
                raise ValueError(f"unknown amplitude mode {mode!r}")
            return default_amplitude(self.dim_m, AMPLITUDE_MULTIPLIERS[mode])
        if isinstance(mode, dict) and set(mode) == {"custom"}:
            return float(mode["custom"])
        raise ValueError("amplitude_mode must be weak|moderate|strong or {\"custom\": value}")

    @property
    def correction(self):
        """``("none", None)``, ``("gaussian", None)`` or ``("monte_carlo", R)``."""
        c = self.lambda_correction
        if c is None:
            c = {"orthogonal": "none", "gaussian": "gaussian",
                 "correlated_means": {"monte_carlo": 5000}}.get(self.design, "none")
        if c in ("none", "gaussian"):
            return c, None
        if isinstance(c, dict) and set(c) == {"monte_carlo"}:
            reps = c["monte_carlo"]
            if not isinstance(reps, int) or reps < 100:
                raise ValueError("monte_carlo replicates must be an integer >= 100")
            return "monte_carlo", reps
        raise ValueError("lambda_correction must be none|gaussian or {\"monte_carlo\": R}")

    def echo(self):
        return asdict(self)


def load_config(path, overrides=None):
    """Read a JSON config; ``overrides`` (non-``None`` values) replace file values."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# instances and selections


def _stream(seed, t, rep):
    return RngStream(seed, (int(t) << 32) | int(rep))


def _instance(cfg, t, rep):
    """Return ``(problem, pvalues)`` for one replication."""
    rng = _stream(cfg.seed, t, rep)
    if cfg.design == "orthogonal":
        prob = gen_orthogonal(cfg.n, t, cfg.amplitude, 1.0, rng)
        pvals = two_sided_p(prob.X.T @ prob.y, prob.sigma)
    elif cfg.design == "gaussian":
        prob = gen_gaussian_design(cfg.n, cfg.dim_m, t, cfg.amplitude, rng)
        pvals = two_sided_p(prob.X.T @ prob.y, prob.sigma)
    else:
        inst = gen_correlated_means(cfg.n, cfg.p_labs, t, cfg.sigma_tau2, cfg.sigma_z2, rng,
                                    cfg.amplitude)
        prob = inst.to_problem()
        pvals = two_sided_p(inst.ybar, inst.noise_sd)
    return prob, pvals


def _reference_design(cfg):
    """Design used for Monte Carlo corrections (fixed for correlated means)."""
    rng = RngStream(cfg.seed, LAMBDA_STREAM)
    if cfg.design == "correlated_means":
        return gen_correlated_means(cfg.n, cfg.p_labs, 0, cfg.sigma_tau2, cfg.sigma_z2,
                                    rng).whitened_design
    if cfg.design == "gaussian":
        return gen_gaussian_design(cfg.n, cfg.dim_m, 0, 1.0, rng).X
    return np.eye(cfg.n)


def build_lambdas(cfg):
    """Penalty sequences keyed by ``(method, k)`` (``k=None`` when unused)."""
    m = cfg.dim_m
    bases = {}
    for method in cfg.methods:
        if method == "SLOPE":
            bases[(method, None)] = lambda_bh(m, cfg.q, 1.0)
        elif method == "FSLOPE":
            bases[(method, None)] = lambda_fdp(m, cfg.gamma, cfg.alpha)
        elif method == "kSLOPE":
            for k in cfg.k_grid:
                bases[(method, k)] = lambda_kfwer(m, k, cfg.alpha)
    kind, reps = cfg.correction
    if kind == "none":
        return bases
    if kind == "gaussian":
        return {key: gaussian_correction(b, cfg.n) for key, b in bases.items()}
    X = _reference_design(cfg)
    out = {}
    for i, (key, base) in enumerate(sorted(bases.items(), key=lambda kv: str(kv[0]))):
        gen = RngStream(cfg.seed, LAMBDA_STREAM + 1 + i).generator()
        out[key] = monte_carlo_correction(base, X, reps, gen, patience=cfg.mc_patience)
        log.info("lambda %s: k_star=%s", key, out[key].diagnostics["k_star"])
    return out


def _replicate(cfg, lambdas, t, rep):
    """Selections for every (method, k) on replication ``(t, rep)``.

    Returns ``{(method, k): (outcome, converged)}`` with ``k=None`` for
    methods that do not depend on ``k``.
    """
    prob, pvals = _instance(cfg, t, rep)
    m = prob.X.shape[1]
    true = prob.true_support
    results = {}
    for method in cfg.methods:
        ks = cfg.k_grid if method in K_METHODS else [None]
        for k in ks:
            converged = True
            if method == "Sd_kFWER":
                sel = stepdown_select(pvals, kfwer_thresholds(m, k, cfg.alpha))
            elif method == "Sd_FDP":
                sel = stepdown_select(pvals, fdp_thresholds(m, cfg.gamma, cfg.alpha))
            else:
                lam = lambdas[(method, k)]
                if cfg.design == "orthogonal":
                    sol = solve_orthogonal(prob, lam)
                else:
                    sol = solve_slope(prob, lam, SolverOptions())
                sel, converged = sol.support, sol.converged
            results[(method, k)] = (score_selection(sel, true, m), converged)
    return results


def _replicate_task(args):
    cfg_dict, lambdas, t, rep = args
    return _replicate(ExperimentConfig(**cfg_dict), lambdas, t, rep)


def _resolve_jobs(jobs):
    if jobs is None:
        jobs = int(os.environ.get("STEPDOWN_SLOPE_JOBS", "1"))
    return max(1, int(jobs))


def run_experiment(cfg, jobs=None):
    """Run every grid cell and return one ``ExperimentReport`` per (method, t, k).

    ``jobs > 1`` spreads replications over worker processes; output is
    identical for any ``jobs``.
    """
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    cfg.validate()
    lambdas = build_lambdas(cfg)
    units = [(t, rep) for t in cfg.t_grid for rep in range(cfg.replications)]
    jobs = _resolve_jobs(jobs)
    if jobs == 1:
        results = [_replicate(cfg, lambdas, t, rep) for t, rep in units]
    else:
        cfg_dict = asdict(cfg)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_task,
                                    [(cfg_dict, lambdas, t, rep) for t, rep in units],
                                    chunksize=max(1, len(units) // (4 * jobs))))
    by_t = {}
    for (t, _), res in zip(units, results):
        by_t.setdefault(t, []).append(res)

    reports = []
    m = cfg.dim_m
    for t in cfg.t_grid:
        for method in cfg.methods:
            for k in cfg.k_grid:
                key = (method, k if method in K_METHODS else None)
                pairs = [res[key] for res in by_t[t]]
                echo = {"method": method, "design": cfg.design, "n": cfg.n, "m": m, "t": t,
                        "k": k, "alpha": cfg.alpha, "gamma": cfg.gamma, "q": cfg.q}
                reports.append(aggregate(
                    [p[0] for p in pairs], cfg.gamma, k,
                    config_echo=echo, seed=cfg.seed,
                    nonconverged=sum(not p[1] for p in pairs)))
    return reports


# ---------------------------------------------------------------------------
# output


def _row(report):
    e = report.config_echo
    values = dict(e)
    values.update(replications=report.replications, seed=report.seed,
                  fdr_hat=report.fdr_hat, kfwer_hat=report.kfwer_hat,
                  prob_fdp_exceed_hat=report.prob_fdp_exceed_hat, power_hat=report.power_hat,
                  se_kfwer=report.se_kfwer, se_prob=report.se_prob,
                  nonconverged=report.nonconverged)
    return [f"{values[c]:.6f}" if c in _FLOAT_COLUMNS else str(values[c])
            for c in REPORT_COLUMNS]


def _sort_key(report):
    e = report.config_echo
    return (e["design"], e["method"], e["t"], e["k"])


def emit_report(reports, path):
    """Write reports as CSV, one row per (method, config), sorted by design, method, t, k."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for rep in sorted(reports, key=_sort_key):
            writer.writerow(_row(rep))


def emit_heatmap(reports, path):
    """Long-format ``method,k,t,kfwer_hat`` data behind a k-FWER heatmap."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "k", "t", "kfwer_hat"])
        for rep in sorted(reports, key=lambda r: (r.config_echo["method"], r.config_echo["k"],
                                                  r.config_echo["t"])):
            e = rep.config_echo
            writer.writerow([e["method"], e["k"], e["t"], f"{rep.kfwer_hat:.6f}"])
