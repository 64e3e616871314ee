"""Multilevel ABC: threshold schedules, the inverse-CDF coupling, the
telescoping estimator shared with the multifidelity variant, and optimal
sample allocation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .abc import (ABCProblem, EstimatorReport, LevelContribution, SampleSet, WeightedMarginalCDF,
                  as_target, rejection_samples)
from .engine import PRODUCTION, TRIAL, Engine
from .exceptions import AllocationError, ConfigurationError, DegenerateWeightsError
from .rng import as_stream

M_RANGE = (1.5, 2.0)
DEFAULT_TRIAL_N = 100


@dataclass(frozen=True)
class ThresholdSchedule:
    """Strictly decreasing ABC thresholds ``epsilon_1 > ... > epsilon_L > 0``."""

    epsilons: tuple
    allow_equal: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(self.epsilons))
        object.__setattr__(self, "epsilons", eps)
        if not eps or min(eps) <= 0:
            raise ConfigurationError("thresholds must be positive and non-empty")
        d = np.diff(eps)
        if np.any(d > 0) or (not self.allow_equal and np.any(d >= 0)):
            raise ConfigurationError("thresholds must be strictly decreasing")

    @property
    def L(self) -> int:
        return len(self.epsilons)

    @property
    def m(self) -> float:
        if self.L == 1:
            return 1.0
        return (self.epsilons[0] / self.epsilons[-1]) ** (1.0 / (self.L - 1))

    def __len__(self):
        return self.L

    def __getitem__(self, i):
        return self.epsilons[i]

    @classmethod
    def geometric(cls, eps1: float, epsL: float, L: Optional[int] = None) -> "ThresholdSchedule":
        """``epsilon_l = eps1 m^-(l-1)`` with ``m = (eps1/epsL)^(1/(L-1))``.

        ``L`` defaults to :func:`default_L`.
        """
        if eps1 < epsL or epsL <= 0:
            raise ConfigurationError("need eps1 >= epsL > 0")
        L = default_L(eps1, epsL) if L is None else int(L)
        if L < 1 or (L == 1 and eps1 != epsL) or (L > 1 and eps1 == epsL):
            raise ConfigurationError("L incompatible with the threshold range")
        if L == 1:
            return cls((eps1,))
        m = (eps1 / epsL) ** (1.0 / (L - 1))
        eps = [eps1 * m ** -(l) for l in range(L)]
        eps[-1] = float(epsL)
        return cls(tuple(eps))

    @classmethod
    def from_scale(cls, epsL: float, m: float, L: int) -> "ThresholdSchedule":
        """Schedule with exact scale ``m`` ending at ``epsL``: ``epsilon_1 = epsL m^(L-1)``."""
        if m <= 1 or L < 1:
            raise ConfigurationError("need m > 1 and L >= 1")
        return cls(tuple(float(epsL) * m ** (L - 1 - l) for l in range(L)))

    @classmethod
    def with_scale(cls, eps1: float, epsL: float, m: float) -> "ThresholdSchedule":
        """Schedule ending at ``epsL`` with scale ``m`` and the level count nearest to
        ``1 + log_m(eps1/epsL)`` (at least 2); ``epsilon_1`` is adjusted accordingly."""
        L = max(2, int(round(1 + math.log(eps1 / epsL) / math.log(m))))
        return cls.from_scale(epsL, m, L)


def default_L(eps1: float, epsL: float, m_range=M_RANGE, L_max: int = 200) -> int:
    """Smallest ``L`` whose scale ``(eps1/epsL)^(1/(L-1))`` lies in ``m_range``;
    if none does, the ``L`` whose scale is closest to the range."""
    if eps1 == epsL:
        return 1
    r = math.log(eps1 / epsL)
    best, dist = 2, math.inf
    for L in range(2, L_max + 1):
        m = math.exp(r / (L - 1))
        if m_range[0] <= m <= m_range[1]:
            return L
        d = max(m_range[0] - m, m - m_range[1])
        if d < dist:
            best, dist = L, d
    return best


@dataclass(frozen=True)
class LevelStats:
    """Trial statistics of one level: variance proxy, mean cost per sample, mean weight."""

    v_ell: float
    c_ell: float
    mean_weight: float = 1.0

    def __post_init__(self):
        if not (self.v_ell >= 0 and self.c_ell >= 0):
            raise ConfigurationError("level variance and cost must be non-negative")


# -- coupling and telescoping -------------------------------------------------

class AccumulatedCDF:
    """Per-dimension running ``F_hat`` built from signed masses."""

    def __init__(self, dim: int):
        self.points = [[] for _ in range(dim)]
        self.masses = [[] for _ in range(dim)]
        self._cache = [None] * dim

    def add(self, j: int, points, masses):
        self.points[j].append(np.asarray(points, dtype=float))
        self.masses[j].append(np.asarray(masses, dtype=float))
        self._cache[j] = None

    def marginal(self, j: int) -> WeightedMarginalCDF:
        if self._cache[j] is None:
            self._cache[j] = WeightedMarginalCDF(np.concatenate(self.points[j]),
                                                 np.concatenate(self.masses[j]))
        return self._cache[j]


def couple_down(theta, w, F_prev, level: Optional[int] = None) -> np.ndarray:
    """Coupled partners ``theta_tilde_j = F_prev_j^-1(F_bar_j(theta_j))`` per dimension.

    Parameters
    ----------
    theta : (n, d) array
        Level samples (non-zero weights only).
    w : (n,) array
        Their weights; ``F_bar`` is their weighted marginal CDF.
    F_prev : AccumulatedCDF or sequence of WeightedMarginalCDF
        Accumulated CDFs of the previous levels.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    w = np.asarray(w, dtype=float)
    out = np.empty_like(theta)
    for j in range(theta.shape[1]):
        try:
            Fbar = WeightedMarginalCDF(theta[:, j], w)
            Fp = F_prev.marginal(j) if isinstance(F_prev, AccumulatedCDF) else F_prev[j]
        except DegenerateWeightsError as e:
            raise DegenerateWeightsError(str(e), level) from None
        out[:, j] = Fp.inverse(Fbar.eval(theta[:, j]))
    return out


@dataclass
class TelescopeResult:
    estimate: float
    per_level: list
    g_values: list          # per level, over non-zero weight samples
    weights: list           # matching non-zero weights
    samples: list           # full per-level SampleSets
    events: list
    previous_marginals: list = field(default_factory=list)
    final_marginals: list = field(default_factory=list)

    @property
    def variance_estimate(self) -> float:
        return math.fsum(c.variance for c in self.per_level)


def telescope(sampler: Callable[[int], SampleSet], L: int, f, epsilons=None) -> TelescopeResult:
    """Telescoping weighted estimator over levels ``1..L``.

    ``sampler(l)`` returns the level-``l`` samples; it is only called after
    the accumulated CDF of levels ``< l`` is complete.  Level 1 contributes
    ``sum(w f)/sum(w)``; level ``l > 1`` contributes ``sum(w g)/sum(w)`` with
    ``g = f(theta) - f(theta_tilde)`` and ``theta_tilde`` coupled down through
    the accumulated CDF, which then receives masses ``+w/sum(w)`` at
    ``theta`` and ``-w/sum(w)`` at ``theta_tilde``.  Zero-weight samples
    play no part.
    """
    f = as_target(f)
    F = None
    per, gs, ws, sets, events, prev = [], [], [], [], [], []
    for l in range(1, L + 1):
        events.append(("sample", l))
        S = sampler(l)
        sets.append(S)
        nz = S.w != 0
        th, w = S.theta[nz], S.w[nz]
        den = math.fsum(w)
        if den == 0:
            raise DegenerateWeightsError(f"weights at level {l} sum to zero", l)
        if F is None:
            F = AccumulatedCDF(th.shape[1])
        prev.append(None if l == 1 else [F.marginal(j) for j in range(th.shape[1])])
        if l == 1:
            g = f(th)
            for j in range(th.shape[1]):
                F.add(j, th[:, j], w / den)
        else:
            events.append(("couple", l))
            tt = couple_down(th, w, F, l)
            g = f(th) - f(tt)
            for j in range(th.shape[1]):
                F.add(j, np.r_[th[:, j], tt[:, j]], np.r_[w / den, -w / den])
        events.append(("accumulate", l))
        contrib = math.fsum(w * g) / den
        var = math.fsum((w * (g - contrib)) ** 2) / den ** 2
        eps = None if epsilons is None else epsilons[l - 1]
        per.append(LevelContribution(l, contrib, len(S), float(np.mean(S.w)), S.total_cost,
                                     eps, var))
        gs.append(g)
        ws.append(w)
    est = math.fsum(c.contribution for c in per)
    final = [F.marginal(j) for j in range(len(F.points))]
    return TelescopeResult(est, per, gs, ws, sets, events, prev, final)


# -- MLMC-ABC -----------------------------------------------------------------

def _counts(N, L):
    N = [int(n) for n in (np.full(L, N) if np.isscalar(N) else N)]
    if len(N) != L:
        raise ConfigurationError("need one sample count per level")
    return N


def mlmc_abc(problem: ABCProblem, schedule: ThresholdSchedule, N, f, rng=None,
             phase: int = PRODUCTION, max_attempts: int = 10**7):
    """Multilevel ABC with exact simulation and rejection sampling per level.

    Returns
    -------
    report : EstimatorReport
    result : TelescopeResult
    """
    N = _counts(N, schedule.L)
    if min(N) < 2 and schedule.L > 1:
        raise ConfigurationError("every level needs N >= 2")
    engine = Engine(problem, as_stream(rng))
    res = telescope(lambda l: rejection_samples(engine, schedule[l - 1], N[l - 1], l, phase,
                                                max_attempts),
                    schedule.L, f, schedule.epsilons)
    cost = math.fsum(c.cost for c in res.per_level)
    report = EstimatorReport(res.estimate, res.per_level, res.variance_estimate, cost, "mlmc",
                             {"epsilons": list(schedule.epsilons), "N": N, "m": schedule.m})
    return report, res


def level_stats_from(res: TelescopeResult) -> list:
    """Per-level ``LevelStats`` (sample variance of ``g``, cost per sample) from a run."""
    out = []
    for g, S in zip(res.g_values, res.samples):
        v = float(np.var(g, ddof=1)) if len(g) > 1 else 0.0
        out.append(LevelStats(v, S.total_cost / len(S), float(np.mean(S.w))))
    return out


def estimate_level_stats(problem: ABCProblem, schedule: ThresholdSchedule,
                         trial_n: int = DEFAULT_TRIAL_N, f=None, rng=None):
    """Trial run of ``trial_n`` accepted samples per level; returns ``(stats, report)``."""
    if trial_n < 2:
        raise ConfigurationError("trial_n must be at least 2")
    f = as_target(f if f is not None else 0)
    report, res = mlmc_abc(problem, schedule, trial_n, f, rng, phase=TRIAL)
    return level_stats_from(res), report


def _round_counts(raw, anchor=None):
    raw = np.asarray(raw, dtype=float)
    if anchor is not None:
        raw = raw * (float(anchor) / raw[-1])
    return [max(2, int(math.ceil(x - 1e-9))) for x in raw]


def optimal_allocation(stats: Sequence[LevelStats], h: Optional[float] = None,
                       anchor: Optional[int] = None) -> list:
    """Sample counts ``N_l = h^-2 sqrt(v_l/c_l) sum_m sqrt(v_m c_m)``.

    Rounded up with a minimum of 2.  With ``anchor`` the proportions are
    rescaled so that ``N_L = anchor`` and ``h`` is ignored.
    """
    v = np.array([s.v_ell for s in stats], dtype=float)
    c = np.array([s.c_ell for s in stats], dtype=float)
    if len(v) == 0 or np.any(v <= 0) or np.any(c <= 0):
        raise AllocationError("level variances and costs must be positive; "
                              "draw more trial samples")
    if anchor is None and (h is None or h <= 0):
        raise ConfigurationError("need h > 0 or an anchor")
    raw = np.sqrt(v / c) * math.fsum(np.sqrt(v * c))
    if anchor is None:
        raw = raw / h ** 2
    return _round_counts(raw, anchor)


def mlmc_pipeline(problem: ABCProblem, schedule: ThresholdSchedule, f, rng=None,
                  trial_n: int = DEFAULT_TRIAL_N, h: Optional[float] = None,
                  anchor: Optional[int] = None, max_attempts: int = 10**7):
    """Trial run, optimal allocation, production run.  The report's total
    cost includes the trial cost."""
    rng = as_stream(rng)
    stats, trial = estimate_level_stats(problem, schedule, trial_n, f, rng)
    N = optimal_allocation(stats, h, anchor)
    report, res = mlmc_abc(problem, schedule, N, f, rng, PRODUCTION, max_attempts)
    report.info.update({"trial_cost": trial.total_cost, "production_cost": report.total_cost,
                        "level_stats": [vars(s) for s in stats]})
    report.total_cost = trial.total_cost + report.total_cost
    return report, res
