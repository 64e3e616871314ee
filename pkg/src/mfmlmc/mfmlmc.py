"""Multifidelity multilevel ABC: multifidelity weights inside every term of
the telescoping sum, trial-based tuning and allocation, and tau selection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .abc import ABCProblem, EstimatorReport, WeightedMarginalCDF, as_target
from .engine import PRODUCTION, TRIAL, Engine
from .exceptions import (AllocationError, ApproximationUselessError, ConfigurationError,
                         DegenerateWeightsError)
from .mf import (ETA_MIN, ContinuationProbs, FidelityPair, RocCostSummary, estimate_summary,
                 mf_abc, mf_samples, phi)
from .mlmc import DEFAULT_TRIAL_N, TelescopeResult, ThresholdSchedule, _round_counts, telescope
from .rng import as_stream

ADAPTIVE = "adaptive"


@dataclass
class LevelPlan:
    """Per-level thresholds, time steps, sample counts and continuation probabilities.

    ``taus`` may be a scalar shared by all levels; ``epsilon_tildes`` default
    to ``epsilons``; ``etas`` may be one :class:`ContinuationProbs` for all
    levels, a per-level list, or ``"adaptive"``.
    """

    epsilons: tuple
    taus: object
    N: object = None
    etas: object = field(default_factory=ContinuationProbs)
    epsilon_tildes: Optional[tuple] = None

    def __post_init__(self):
        self.epsilons = ThresholdSchedule(self.epsilons).epsilons
        L = len(self.epsilons)
        if self.epsilon_tildes is None:
            self.epsilon_tildes = self.epsilons
        self.epsilon_tildes = ThresholdSchedule(self.epsilon_tildes).epsilons
        if len(self.epsilon_tildes) != L:
            raise ConfigurationError("need one epsilon_tilde per level")
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        if len(taus) == 1:
            taus = np.full(L, taus[0])
        if len(taus) != L or np.any(taus <= 0):
            raise ConfigurationError("need one positive tau per level")
        self.taus = tuple(float(t) for t in taus)
        if self.N is not None:
            N = [int(n) for n in np.atleast_1d(self.N)]
            if len(N) == 1:
                N = N * L
            if len(N) != L or min(N) < 1:
                raise ConfigurationError("need one positive N per level")
            self.N = tuple(N)
        if isinstance(self.etas, str):
            if self.etas != ADAPTIVE:
                raise ConfigurationError("etas must be ContinuationProbs or 'adaptive'")
            self.etas = (ADAPTIVE,) * L
        elif isinstance(self.etas, ContinuationProbs):
            self.etas = (self.etas,) * L
        else:
            etas = list(self.etas)
            if len(etas) == 2 and all(np.isscalar(e) for e in etas):
                etas = [ContinuationProbs(*etas)] * L
            etas = [e if e == ADAPTIVE or isinstance(e, ContinuationProbs)
                    else ContinuationProbs(*e) for e in etas]
            if len(etas) != L:
                raise ConfigurationError("need one eta per level")
            self.etas = tuple(etas)

    @property
    def L(self) -> int:
        return len(self.epsilons)

    def pair(self, level: int) -> FidelityPair:
        i = level - 1
        return FidelityPair(self.taus[i], self.epsilons[i], self.epsilon_tildes[i])


@dataclass(frozen=True)
class MFLevelStats:
    """Trial quantities for one level: objective value, expected cost per draw,
    mean weight, the frozen continuation probabilities and the summary."""

    phi: float
    expected_cost: float
    mean_weight: float
    eta: ContinuationProbs = ContinuationProbs()
    summary: Optional[RocCostSummary] = None


# -- estimator ----------------------------------------------------------------

def _level_sampler(engine, plan, f, phase, burn_in, eta_min, batch_size, tuners):
    def sample(l):
        eta = plan.etas[l - 1]
        S, tuner = mf_samples(engine, plan.pair(l), eta, plan.N[l - 1], l, phase, f, burn_in,
                              eta_min, batch_size)
        tuners.append(tuner)
        return S
    return sample


def mf_mlmc_abc(problem: ABCProblem, plan: LevelPlan, f, rng=None, phase: int = PRODUCTION,
                burn_in: Optional[int] = None, eta_min: float = ETA_MIN, batch_size: int = 1):
    """Multifidelity multilevel ABC estimate of ``E[f(theta) | data]``.

    Returns
    -------
    report : EstimatorReport
    result : TelescopeResult
        Also carries ``tuners`` (per level, ``None`` for fixed ``eta``).
    """
    if plan.N is None:
        raise ConfigurationError("plan has no sample counts")
    f = as_target(f)
    engine = Engine(problem, as_stream(rng))
    tuners = []
    res = telescope(_level_sampler(engine, plan, f, phase, burn_in, eta_min, batch_size, tuners),
                    plan.L, f, plan.epsilons)
    res.tuners = tuners
    res.etas = plan.etas
    cost = math.fsum(c.cost for c in res.per_level)
    etas = [list((t.eta if t is not None else e).as_tuple())
            for t, e in zip(tuners, plan.etas)]
    report = EstimatorReport(res.estimate, res.per_level, res.variance_estimate, cost, "mfmlmc",
                             {"epsilons": list(plan.epsilons), "taus": list(plan.taus),
                              "N": list(plan.N), "eta": etas})
    return report, res


def correction_values(res: TelescopeResult, f, level: int) -> np.ndarray:
    """``g`` at every sample of ``level`` (including zero-weight ones)."""
    f = as_target(f)
    S = res.samples[level - 1]
    if level == 1:
        return f(S.theta)
    nz = S.w != 0
    th = S.theta
    tt = np.empty_like(th)
    prev = res.previous_marginals[level - 1]
    for j in range(th.shape[1]):
        Fbar = WeightedMarginalCDF(th[nz, j], S.w[nz])
        tt[:, j] = prev[j].inverse(Fbar.eval(th[:, j]))
    return f(th) - f(tt)


def level_stats_from_trial(res: TelescopeResult, f, etas=None) -> list:
    """Per-level :class:`MFLevelStats` from a trial run, at the frozen ``etas``
    (default: the tuners' final values, else those used)."""
    out = []
    for l, S in enumerate(res.samples, start=1):
        g = correction_values(res, f, l)
        mu = res.per_level[l - 1].contribution
        s = estimate_summary(S.approx_accept > 0, S.exact_run, S.exact_accept, S.approx_cost,
                             S.exact_cost, g, mu)
        if etas is not None:
            eta = etas[l - 1]
        elif res.tuners[l - 1] is not None:
            eta = res.tuners[l - 1].eta
        else:
            eta = res.etas[l - 1]
        out.append(MFLevelStats(phi(eta, s), s.expected_cost(eta), float(np.mean(S.w)), eta, s))
    return out


def mf_optimal_allocation(stats: Sequence[MFLevelStats], h: Optional[float] = None,
                          anchor: Optional[int] = None) -> list:
    """``N_l = h^-2 sqrt(phi_l) / (E[C_l] E[w_l]) sum_m sqrt(phi_m) / E[w_m]``.

    Rounded up with a minimum of 2; ``anchor`` rescales so that ``N_L = anchor``.
    """
    p = np.array([s.phi for s in stats], dtype=float)
    c = np.array([s.expected_cost for s in stats], dtype=float)
    ew = np.array([s.mean_weight for s in stats], dtype=float)
    if len(p) == 0 or np.any(ew <= 0):
        raise AllocationError("mean weights must be positive; draw more trial samples")
    if np.any(p <= 0) or np.any(c <= 0):
        raise AllocationError("level objectives and costs must be positive")
    if anchor is None and (h is None or h <= 0):
        raise ConfigurationError("need h > 0 or an anchor")
    raw = np.sqrt(p) / (c * ew) * math.fsum(np.sqrt(p) / ew)
    if anchor is None:
        raw = raw / h ** 2
    return _round_counts(raw, anchor)


def mf_mlmc_pipeline(problem: ABCProblem, schedule: ThresholdSchedule, taus, f, rng=None,
                     trial_n: int = DEFAULT_TRIAL_N, h: Optional[float] = None,
                     anchor: Optional[int] = None, eta=ADAPTIVE, epsilon_tildes=None,
                     burn_in: Optional[int] = None, eta_min: float = ETA_MIN,
                     batch_size: int = 1):
    """Trial run (adaptive or fixed ``eta``), frozen ``eta`` and allocation,
    production run.  The report's total cost includes the trial cost."""
    rng = as_stream(rng)
    if isinstance(schedule, ThresholdSchedule):
        schedule = schedule.epsilons
    trial_plan = LevelPlan(schedule, taus, trial_n, eta, epsilon_tildes)
    _, trial = mf_mlmc_abc(problem, trial_plan, f, rng, TRIAL, burn_in, eta_min, batch_size)
    stats = level_stats_from_trial(trial, f)
    N = mf_optimal_allocation(stats, h, anchor)
    plan = LevelPlan(schedule, taus, N, [s.eta for s in stats], epsilon_tildes)
    report, res = mf_mlmc_abc(problem, plan, f, rng, PRODUCTION)
    trial_cost = math.fsum(S.total_cost for S in trial.samples)
    report.info.update({"trial_cost": trial_cost, "production_cost": report.total_cost,
                        "level_stats": [{"eta": list(s.eta.as_tuple()), "phi": s.phi,
                                         "mean_weight": s.mean_weight,
                                         "expected_cost": s.expected_cost} for s in stats]})
    report.total_cost = trial_cost + report.total_cost
    res.level_stats = stats
    return report, res


# -- tau selection ------------------------------------------------------------

@dataclass
class TauTuning:
    """Result of :func:`tune_tau_sequence`."""

    taus: list
    epsilons: list
    cost: np.ndarray         # (n_eps, n_tau) total cost of the adaptive runs
    etas: np.ndarray         # (n_eps, n_tau, 2) tuned continuation probabilities
    per_epsilon: list        # recommended tau per epsilon
    shared: float            # tau minimising the cost summed over epsilons

    def rows(self) -> list:
        out = []
        for i, e in enumerate(self.epsilons):
            for k, t in enumerate(self.taus):
                out.append({"epsilon": e, "tau": t, "total_cost": float(self.cost[i, k]),
                            "eta1": float(self.etas[i, k, 0]),
                            "eta2": float(self.etas[i, k, 1])})
        return out


def tune_tau_sequence(problem: ABCProblem, taus: Sequence[float], epsilons: Sequence[float],
                      trial_n: int, f, rng=None, burn_in: Optional[int] = None,
                      eta_min: float = ETA_MIN) -> TauTuning:
    """Adaptive MF-ABC at every ``(epsilon, tau)`` pair with common random numbers.

    Recommends, per ``epsilon``, the ``tau`` with the lowest total cost, and
    the single ``tau`` with the lowest cost summed over all ``epsilon``.
    """
    taus = [float(t) for t in taus]
    epsilons = [float(e) for e in np.atleast_1d(epsilons)]
    if not taus:
        raise ConfigurationError("need at least one tau")
    rng = as_stream(rng)
    cost = np.zeros((len(epsilons), len(taus)))
    etas = np.ones((len(epsilons), len(taus), 2))
    if len(taus) > 1:
        for i, e in enumerate(epsilons):
            for k, t in enumerate(taus):
                rep, _ = mf_abc(problem, FidelityPair(t, e), ADAPTIVE, f, trial_n, rng,
                                burn_in, eta_min)
                cost[i, k] = rep.total_cost
                etas[i, k] = rep.info["eta"]
    per = [taus[int(np.argmin(row))] for row in cost]
    shared = taus[int(np.argmin(cost.sum(axis=0)))]
    return TauTuning(taus, epsilons, cost, etas, per, shared)
