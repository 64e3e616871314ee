"""Method comparison sweeps, convergence-rate fits and marginal densities.

A benchmark runs every method for a list of target variances ``h2`` with
``R`` independently seeded replicates each, and records the variance of the
estimates across replicates against the mean total cost (tuning included).
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .abc import SampleSet, WeightedMarginalCDF, abc_rejection, target_from_spec
from .engine import TRIAL
from .exceptions import ConfigurationError, DegenerateWeightsError
from .mf import ETA_MIN, FidelityPair, mf_abc
from .mfmlmc import ADAPTIVE, mf_mlmc_pipeline
from .mlmc import DEFAULT_TRIAL_N, TelescopeResult, ThresholdSchedule, mlmc_pipeline
from .models import build_benchmark, desk_epsilon, load_problem_config
from .rng import RngStream

METHODS = ("rejection", "mf", "mlmc", "mfmlmc")
DENSITY_BINS = 50


# -- convergence fits ---------------------------------------------------------

@dataclass
class ConvergenceFit:
    """Least-squares fit of ``log V = intercept - gamma log C``."""

    gamma: float
    intercept: float
    points: list

    def variance_at(self, cost: float) -> float:
        return math.exp(self.intercept - self.gamma * math.log(cost))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "intercept": self.intercept,
                "points": [list(p) for p in self.points]}


def fit_convergence(points) -> ConvergenceFit:
    """Fit ``V ~ C^-gamma`` to ``(cost, variance)`` points on the log-log scale."""
    pts = [(float(c), float(v)) for c, v in points]
    if len(pts) < 2:
        raise ConfigurationError("need at least two points")
    if any(c <= 0 or v <= 0 for c, v in pts):
        raise ConfigurationError("costs and variances must be positive")
    x = np.log([c for c, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise ConfigurationError("costs must not all be equal")
    slope, intercept = np.polyfit(x, y, 1)
    return ConvergenceFit(-float(slope), float(intercept), pts)


# -- densities ----------------------------------------------------------------

@dataclass
class DensityTable:
    edges: np.ndarray
    density: np.ndarray
    cdf: np.ndarray          # envelope CDF at the inner edges (0 and 1 at the ends)

    def rows(self):
        for a, b, d in zip(self.edges[:-1], self.edges[1:], self.density):
            yield float(a), float(b), float(d)


def _marginal(samples, j):
    if isinstance(samples, WeightedMarginalCDF):
        return samples
    if isinstance(samples, TelescopeResult):
        return samples.final_marginals[j]
    return WeightedMarginalCDF.from_samples(samples, j)


def estimate_marginal_density(samples, dimension: int, bins: int = DENSITY_BINS,
                              support: Optional[tuple] = None) -> DensityTable:
    """Histogram density of one parameter from its weighted marginal CDF.

    Bin masses are increments of the monotone envelope CDF, so they are
    non-negative even with signed weights; the density integrates to one
    over ``support`` (default: the range of the sample points).
    """
    F = _marginal(samples, dimension)
    if support is None:
        lo, hi = float(F.support[0]), float(F.support[-1])
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = map(float, support)
    if not hi > lo or bins < 1:
        raise ConfigurationError("need a non-empty support and at least one bin")
    edges = np.linspace(lo, hi, bins + 1)
    cdf = np.r_[0.0, F.eval(edges[1:-1]), 1.0]
    if F.support[0] < lo or F.support[-1] > hi:
        raise DegenerateWeightsError("sample points outside the density support")
    mass = np.diff(cdf)
    return DensityTable(edges, mass / np.diff(edges), cdf)


# -- configuration ------------------------------------------------------------

@dataclass
class BenchConfig:
    """Benchmark sweep configuration (JSON keys match the field names).

    Either ``problem`` (path to a problem config) or ``benchmark`` (built-in
    id) selects the problem.  Thresholds are in the problem's own units
    unless given as ``paper_epsilon``/``paper_epsilon_1``, which are mapped
    to desk units when ``scale`` is ``desk``.  ``h2`` lists absolute target
    variances; ``h2_relative`` lists them relative to the pilot posterior
    variance of the target.
    """

    benchmark: Optional[str] = None
    problem: Optional[str] = None
    scale: str = "desk"
    data_seed: Optional[int] = None
    seed: int = 0
    epsilon: Optional[float] = None
    epsilon_1: Optional[float] = None
    paper_epsilon: Optional[float] = None
    paper_epsilon_1: Optional[float] = None
    L: Optional[int] = None
    tau: Optional[float] = None
    target: dict = field(default_factory=lambda: {"type": "mean", "index": 0})
    methods: list = field(default_factory=lambda: list(METHODS))
    h2: Optional[list] = None
    h2_relative: Optional[list] = None
    replicates: int = 20
    trial_n: int = DEFAULT_TRIAL_N
    pilot_n: int = 200
    cost_model: str = "time"
    burn_in: Optional[int] = None
    eta_min: float = ETA_MIN
    density_bins: int = DENSITY_BINS

    def __post_init__(self):
        if (self.benchmark is None) == (self.problem is None):
            raise ConfigurationError("give exactly one of 'benchmark' and 'problem'")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigurationError(f"unknown methods {sorted(bad)}")
        if self.replicates < 2:
            raise ConfigurationError("need at least two replicates")
        if (self.h2 is None) == (self.h2_relative is None):
            raise ConfigurationError("give exactly one of 'h2' and 'h2_relative'")

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        with open(path) as fh:
            d = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        if d.get("problem") and not os.path.isabs(d["problem"]):
            d["problem"] = os.path.join(base, d["problem"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def resolve(self):
        """``(problem, schedule, tau, prior support)`` for this configuration."""
        if self.problem is not None:
            problem, cfg = load_problem_config(self.problem, self.cost_model)
            eps = self.epsilon or cfg["epsilon"]
            eps1 = self.epsilon_1 or cfg.get("epsilon_1", eps)
            tau = self.tau or cfg.get("tau")
        else:
            spec = build_benchmark(self.benchmark, self.scale)
            conv = ((lambda e: desk_epsilon(e, self.benchmark)) if self.scale == "desk"
                    else (lambda e: e))
            eps = self.epsilon or (conv(self.paper_epsilon) if self.paper_epsilon
                                   else spec.epsilons["epsilon_L"])
            eps1 = self.epsilon_1 or (conv(self.paper_epsilon_1) if self.paper_epsilon_1
                                      else spec.epsilons["epsilon_1"])
            tau = self.tau or spec.tau
            problem = spec.problem(eps, cost_model=self.cost_model, seed=self.data_seed)
        problem = problem.with_epsilon(float(eps))
        schedule = ThresholdSchedule.geometric(float(eps1), float(eps), self.L)
        return problem, schedule, float(tau)


# -- runs ---------------------------------------------------------------------

@dataclass
class BenchRun:
    """All replicate results of a sweep plus per-method fits."""

    config: BenchConfig
    runs: list                    # dicts: method, h2, replicate, estimate, variance, cost, ...
    pilot: dict
    densities: dict = field(default_factory=dict)

    def points(self, method: str) -> list:
        """``(mean cost, variance across replicates)`` per target variance."""
        out = []
        for h2 in sorted({r["h2"] for r in self.runs if r["method"] == method}, reverse=True):
            rs = [r for r in self.runs if r["method"] == method and r["h2"] == h2]
            est = np.array([r["estimate"] for r in rs])
            out.append((float(np.mean([r["cost"] for r in rs])), float(np.var(est, ddof=1))))
        return out

    def fits(self) -> dict:
        return {m: fit_convergence(self.points(m)) for m in self.config.methods
                if len(self.points(m)) >= 2}

    def matched_cost_ratio(self, method: str, baseline: str = "rejection") -> float:
        """Variance of ``method`` at its most expensive point divided by the
        ``baseline`` fit's variance at the same cost."""
        pts = self.points(method)
        cost, var = max(pts)
        return var / fit_convergence(self.points(baseline)).variance_at(cost)

    def estimates(self, method: str, h2: Optional[float] = None) -> np.ndarray:
        return np.array([r["estimate"] for r in self.runs
                         if r["method"] == method and (h2 is None or r["h2"] == h2)])


def _pilots(problem, tau, target, cfg, root):
    """Shared pilot runs that size the single-level methods (not counted as cost)."""
    out = {}
    rep, S = abc_rejection(problem, target, cfg.pilot_n, root.child(0), phase=TRIAL)
    out["posterior_variance"] = float(np.var(target(S.theta), ddof=1))
    if "mf" in cfg.methods:
        n = max(cfg.pilot_n, int(math.ceil(cfg.pilot_n / max(rep.info["acceptance_rate"],
                                                              1e-12))))
        mrep, _ = mf_abc(problem, FidelityPair(tau, problem.epsilon), ADAPTIVE, target, n,
                         root.child(1), cfg.burn_in, cfg.eta_min, phase=TRIAL)
        out["mf_unit_variance"] = mrep.variance_estimate * n
        out["mf_pilot_n"] = n
    return out


def run_method(method: str, problem, schedule, tau, target, h2: float, pilot: dict, cfg,
               stream: RngStream):
    """One replicate of one method at target variance ``h2``; returns ``(row, result)``."""
    h = math.sqrt(h2)
    row = {"method": method, "h2": h2}
    if method == "rejection":
        N = max(2, int(math.ceil(pilot["posterior_variance"] / h2)))
        rep, res = abc_rejection(problem, target, N, stream)
        row.update(N=N, trial_cost=0.0)
    elif method == "mf":
        N = max(2, int(math.ceil(pilot["mf_unit_variance"] / h2)))
        rep, res = mf_abc(problem, FidelityPair(tau, problem.epsilon), ADAPTIVE, target, N,
                          stream, cfg.burn_in, cfg.eta_min)
        row.update(N=N, trial_cost=0.0)
    elif method == "mlmc":
        rep, res = mlmc_pipeline(problem, schedule, target, stream, cfg.trial_n, h=h)
        row.update(N=rep.info["N"], trial_cost=rep.info["trial_cost"])
    elif method == "mfmlmc":
        rep, res = mf_mlmc_pipeline(problem, schedule, tau, target, stream, cfg.trial_n, h=h,
                                    burn_in=cfg.burn_in, eta_min=cfg.eta_min)
        row.update(N=rep.info["N"], trial_cost=rep.info["trial_cost"])
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    row.update(estimate=rep.estimate, variance=rep.variance_estimate, cost=rep.total_cost)
    return row, res


def run_benchmark(config, progress=None) -> BenchRun:
    """Run the sweep described by ``config`` (a :class:`BenchConfig` or dict)."""
    cfg = config if isinstance(config, BenchConfig) else BenchConfig(**config)
    problem, schedule, tau = cfg.resolve()
    target = target_from_spec(cfg.target)
    root = RngStream(cfg.seed)
    pilot = _pilots(problem, tau, target, cfg, root.child(99))
    h2s = (list(cfg.h2) if cfg.h2 is not None
           else [r * pilot["posterior_variance"] for r in cfg.h2_relative])
    pilot["h2"] = h2s
    runs, densities = [], {}
    support = list(zip(problem.prior.lower, problem.prior.upper))
    for mi, method in enumerate(cfg.methods):
        mcode = METHODS.index(method)
        for hi, h2 in enumerate(h2s):
            for r in range(cfg.replicates):
                row, res = run_method(method, problem, schedule, tau, target, h2, pilot, cfg,
                                      root.child(mcode, hi, r))
                row["replicate"] = r
                runs.append(row)
                if progress:
                    progress(row)
                if r == 0 and hi == int(np.argmin(h2s)):
                    densities[method] = [estimate_marginal_density(res, j, cfg.density_bins,
                                                                   support[j])
                                         for j in range(problem.dim)]
    return BenchRun(cfg, runs, pilot, densities)


def write_outputs(run: BenchRun, out_dir) -> dict:
    """Write ``runs.csv``, ``fits.json`` and ``densities.csv`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in
             (("runs", "runs.csv"), ("fits", "fits.json"), ("densities", "densities.csv"))}
    cols = ["method", "h2", "replicate", "estimate", "variance", "cost", "trial_cost", "N"]
    with open(paths["runs"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in run.runs:
            n = r["N"]
            w.writerow([r["method"], repr(r["h2"]), r["replicate"], repr(r["estimate"]),
                        repr(r["variance"]), repr(r["cost"]), repr(r["trial_cost"]),
                        " ".join(map(str, n)) if isinstance(n, list) else n])
    fits = {m: f.to_dict() for m, f in run.fits().items()}
    if "rejection" in fits:
        for m in fits:
            if m != "rejection":
                fits[m]["matched_cost_variance_ratio"] = run.matched_cost_ratio(m)
    with open(paths["fits"], "w") as fh:
        json.dump({"config": asdict(run.config), "pilot": run.pilot, "fits": fits}, fh,
                  indent=2)
        fh.write("\n")
    with open(paths["densities"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "dimension", "bin_left", "bin_right", "density"])
        for m, tables in run.densities.items():
            for j, t in enumerate(tables):
                for a, b, d in t.rows():
                    w.writerow([m, j, repr(a), repr(b), repr(d)])
    return paths
