"""ABC problem definition, rejection sampling, weighted estimation and
weighted marginal CDFs.

Sample sets are stored column-wise in :class:`SampleSet`; the per-sample
record :class:`WeightedSample` is available through :meth:`SampleSet.records`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .engine import PRODUCTION, Engine
from .exceptions import AcceptanceRateError, ConfigurationError, DegenerateWeightsError
from .network import ReactionNetwork
from .rng import as_stream
from .simulation import COST_MODELS, ObservationModel

# Inverse-CDF lookups accept F(s) >= u - _CDF_TOL so that round-off in
# cumulative sums never pushes a quantile past an atom.
_CDF_TOL = 1e-12


@dataclass(frozen=True)
class Prior:
    """Independent uniform prior, ``theta_i ~ U(lower_i, upper_i)``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lower))
        hi = tuple(float(v) for v in np.ravel(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ConfigurationError("prior bounds must be non-empty and of equal length")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise ConfigurationError("prior requires lower < upper in every dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def mean(self) -> np.ndarray:
        return (np.array(self.lower) + np.array(self.upper)) / 2

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on (0,1)^dim to prior draws."""
        lo = np.array(self.lower)
        return lo + (np.array(self.upper) - lo) * u

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, d) -> "Prior":
        if isinstance(d, dict):
            return cls(d["lower"], d["upper"])
        bounds = np.asarray(d, dtype=float)
        return cls(bounds[:, 0], bounds[:, 1])


@dataclass(frozen=True, eq=False)
class ABCProblem:
    """Inference target: model, observation process, data, prior and threshold.

    Parameters
    ----------
    network : ReactionNetwork
    obs_model : ObservationModel
    data : ndarray, shape (n_times, n_observed)
    prior : Prior
    epsilon : float
        Acceptance threshold on the Euclidean discrepancy.
    t0, T : float
        Simulation horizon.  ``T`` defaults to the last observation time.
    cost_model : {"time", "draws"}
        Wall-clock seconds or the number of exponential/Poisson variates.
    """

    network: ReactionNetwork
    obs_model: ObservationModel
    data: np.ndarray
    prior: Prior
    epsilon: float
    t0: float = 0.0
    T: Optional[float] = None
    discrepancy: str = "euclidean"
    cost_model: str = "time"

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.T is None:
            object.__setattr__(self, "T", float(self.obs_model.obs_times[-1]))
        if data.shape != self.obs_model.shape:
            raise ConfigurationError(
                f"data shape {data.shape} does not match observation model {self.obs_model.shape}")
        if self.prior.dim != self.network.param_count:
            raise ConfigurationError(
                f"prior has {self.prior.dim} dimensions, network has "
                f"{self.network.param_count} free parameters")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.discrepancy != "euclidean":
            raise ConfigurationError("only the euclidean discrepancy is available")
        if self.cost_model not in COST_MODELS:
            raise ConfigurationError(f"cost_model must be one of {COST_MODELS}")
        if not self.T > self.t0:
            raise ConfigurationError("T must exceed t0")
        self.obs_model.check_horizon(self.t0, self.T)
        for i in self.obs_model.observed_indices:
            if not 0 <= i < self.network.n_species:
                raise ConfigurationError(f"observed species index {i} out of range")

    @property
    def dim(self) -> int:
        return self.prior.dim

    def with_epsilon(self, epsilon: float) -> "ABCProblem":
        return replace(self, epsilon=float(epsilon))

    def with_cost_model(self, cost_model: str) -> "ABCProblem":
        return replace(self, cost_model=cost_model)


def discrepancy(data, sim) -> float:
    """Euclidean distance between two observation sets."""
    a = np.asarray(data, dtype=float)
    b = np.asarray(sim, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"observation shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


# -- targets ------------------------------------------------------------------

class Target:
    """Vectorised test function ``f`` mapping parameter rows to reals."""

    def __init__(self, fn: Callable, name: str = "f", spec: Optional[dict] = None):
        self._fn = fn
        self.name = name
        self.spec = spec or {"type": "custom", "name": name}

    def __call__(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.asarray(self._fn(thetas), dtype=float).reshape(len(thetas))

    def __repr__(self):
        return f"Target({self.name})"


def component_mean(j: int) -> Target:
    """``f(theta) = theta_j``."""
    return Target(lambda th: th[:, j], f"theta[{j}]", {"type": "mean", "index": int(j)})


def indicator(j: int, s: float) -> Target:
    """``f(theta) = 1{theta_j <= s}``, the marginal CDF at ``s``."""
    return Target(lambda th: (th[:, j] <= s).astype(float), f"1{{theta[{j}]<={s}}}",
                  {"type": "indicator", "index": int(j), "threshold": float(s)})


def as_target(f) -> Target:
    """Wrap ``f``; plain callables are applied row by row."""
    if isinstance(f, Target):
        return f
    if isinstance(f, (int, np.integer)):
        return component_mean(int(f))
    if callable(f):
        return Target(lambda th: np.array([f(row) for row in th], dtype=float),
                      getattr(f, "__name__", "f"))
    raise ConfigurationError("target must be callable or a component index")


def target_from_spec(spec: dict) -> Target:
    kind = spec.get("type", "mean")
    if kind == "mean":
        return component_mean(int(spec["index"]))
    if kind == "indicator":
        return indicator(int(spec["index"]), float(spec["threshold"]))
    raise ConfigurationError(f"unknown target type {kind!r}")


# -- samples and reports ------------------------------------------------------

@dataclass(frozen=True)
class WeightedSample:
    theta: np.ndarray
    w: float
    cost: float
    approx_accept: Optional[bool]
    exact_run: bool
    exact_accept: Optional[bool]
    level: int = 1

    def __post_init__(self):
        if self.exact_run != (self.exact_accept is not None):
            raise ConfigurationError("exact_accept must be present exactly when exact_run")


@dataclass
class SampleSet:
    """Column-wise sample storage.

    ``exact_accept`` holds -1 where no exact simulation was run and
    ``approx_accept`` holds -1 where no approximate simulation was run.
    """

    theta: np.ndarray
    w: np.ndarray
    cost: np.ndarray
    approx_accept: np.ndarray
    exact_run: np.ndarray
    exact_accept: np.ndarray
    level: int = 1
    index: Optional[np.ndarray] = None
    approx_cost: Optional[np.ndarray] = None
    exact_cost: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.w)
        if self.index is None:
            self.index = np.arange(n)
        if self.approx_cost is None:
            self.approx_cost = np.zeros(n)
        if self.exact_cost is None:
            self.exact_cost = np.where(self.exact_run, self.cost, 0.0)

    def __len__(self):
        return len(self.w)

    @property
    def total_cost(self) -> float:
        return math.fsum(self.cost)

    def records(self) -> list:
        out = []
        for i in range(len(self)):
            ea = int(self.exact_accept[i])
            aa = int(self.approx_accept[i])
            out.append(WeightedSample(self.theta[i].copy(), float(self.w[i]), float(self.cost[i]),
                                      None if aa < 0 else bool(aa), bool(self.exact_run[i]),
                                      None if ea < 0 else bool(ea), self.level))
        return out

    def nonzero(self) -> "SampleSet":
        """Samples with ``w != 0`` (those contributing to any estimate)."""
        m = self.w != 0
        return self.subset(m)

    def subset(self, mask) -> "SampleSet":
        return SampleSet(self.theta[mask], self.w[mask], self.cost[mask],
                         self.approx_accept[mask], self.exact_run[mask], self.exact_accept[mask],
                         self.level, self.index[mask], self.approx_cost[mask],
                         self.exact_cost[mask])

    def to_csv(self, path, names=None):
        names = names or [f"theta{j}" for j in range(self.theta.shape[1])]
        cols = ["level", "index", *names, "w", "cost", "approx_accept", "exact_run",
                "exact_accept"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self)):
                row = [str(self.level), str(int(self.index[i]))]
                row += [repr(float(v)) for v in self.theta[i]]
                row += [repr(float(self.w[i])), repr(float(self.cost[i])),
                        str(int(self.approx_accept[i])), str(int(self.exact_run[i])),
                        str(int(self.exact_accept[i]))]
                fh.write(",".join(row) + "\n")

    @staticmethod
    def concat(sets) -> "SampleSet":
        sets = list(sets)
        return SampleSet(*(np.concatenate([getattr(s, f) for s in sets]) for f in
                           ("theta", "w", "cost", "approx_accept", "exact_run", "exact_accept")),
                         level=sets[0].level,
                         index=np.concatenate([s.index for s in sets]),
                         approx_cost=np.concatenate([s.approx_cost for s in sets]),
                         exact_cost=np.concatenate([s.exact_cost for s in sets]))


@dataclass
class LevelContribution:
    level: int
    contribution: float
    n_samples: int
    mean_weight: float
    cost: float
    epsilon: Optional[float] = None
    variance: Optional[float] = None


@dataclass
class EstimatorReport:
    """Estimate with per-level breakdown; ``estimate`` is the sum of contributions."""

    estimate: float
    per_level: list
    variance_estimate: float
    total_cost: float
    method: str = ""
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return _jsonable(d)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


# -- estimation ---------------------------------------------------------------

def _weights_values(samples, f):
    if isinstance(samples, SampleSet):
        w = np.asarray(samples.w, dtype=float)
        v = as_target(f)(samples.theta) if f is not None else None
    else:
        samples = list(samples)
        w = np.array([s.w for s in samples], dtype=float)
        v = as_target(f)(np.array([s.theta for s in samples])) if f is not None else None
    return w, v


def weighted_sum_ratio(w: np.ndarray, v: np.ndarray, level=None) -> float:
    den = math.fsum(w)
    if den == 0:
        raise DegenerateWeightsError("weights sum to zero; draw more samples", level)
    return math.fsum(w * v) / den


def weighted_estimate(samples, f) -> float:
    """Self-normalised weighted mean ``sum(w f) / sum(w)``.

    Sums are exactly rounded (``math.fsum``), so the result is independent of
    sample order and unaffected by zero-weight samples.
    """
    w, v = _weights_values(samples, f)
    return weighted_sum_ratio(w, v)


def weighted_variance(w: np.ndarray, v: np.ndarray) -> float:
    """Delta-method variance of the self-normalised mean."""
    den = math.fsum(w)
    if den == 0:
        raise DegenerateWeightsError("weights sum to zero")
    mu = math.fsum(w * v) / den
    return math.fsum((w * (v - mu)) ** 2) / den ** 2


class WeightedMarginalCDF:
    """Weighted empirical CDF of one parameter component.

    Built from support points and signed masses.  The cumulative masses are
    normalised by their total, clipped to [0, 1] and replaced by their running
    maximum, so the evaluated function is a proper distribution function even
    when individual masses are negative.

    Parameters
    ----------
    points : array_like
    masses : array_like
        Signed masses; they must not sum to zero.
    """

    def __init__(self, points, masses):
        points = np.asarray(points, dtype=float).ravel()
        masses = np.asarray(masses, dtype=float).ravel()
        if points.shape != masses.shape or points.size == 0:
            raise DegenerateWeightsError("empty or mismatched CDF support")
        total = math.fsum(masses)
        if total == 0 or not np.isfinite(total):
            raise DegenerateWeightsError("CDF masses sum to zero")
        order = np.argsort(points, kind="mergesort")
        p = points[order]
        cum = np.cumsum(masses[order]) / total
        last = np.r_[p[1:] != p[:-1], True]
        self.support = p[last]
        self.raw = cum[last]
        env = np.maximum.accumulate(np.clip(self.raw, 0.0, 1.0))
        env[-1] = 1.0
        self.values = env

    @classmethod
    def from_samples(cls, samples, j: int) -> "WeightedMarginalCDF":
        """``F(s) = sum_i w_i 1{theta_ij <= s} / sum_i w_i`` over ``w != 0``."""
        if isinstance(samples, SampleSet):
            theta, w = samples.theta, samples.w
        else:
            samples = list(samples)
            theta = np.array([s.theta for s in samples])
            w = np.array([s.w for s in samples], dtype=float)
        m = w != 0
        if not np.any(m):
            raise DegenerateWeightsError("all weights are zero")
        return cls(theta[m, j], w[m])

    def __call__(self, s):
        return self.eval(s)

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.support, s, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        return out if out.ndim else float(out)

    def inverse(self, u):
        """Generalised inverse ``inf{s in support : F(s) >= u}``."""
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.values, u - _CDF_TOL, side="left")
        out = self.support[np.minimum(idx, len(self.support) - 1)]
        return out if out.ndim else float(out)


def build_marginal_cdf(samples, j: int) -> WeightedMarginalCDF:
    return WeightedMarginalCDF.from_samples(samples, j)


def cdf_eval(F: WeightedMarginalCDF, s):
    return F.eval(s)


def cdf_inverse(F: WeightedMarginalCDF, u):
    return F.inverse(u)


# -- rejection sampling -------------------------------------------------------

def rejection_samples(engine: Engine, epsilon: float, N: int, level: int = 1,
                      phase: int = PRODUCTION, max_attempts: int = 10**7) -> SampleSet:
    """First ``N`` accepted prior draws, scanning attempt indices in order.

    Attempts are simulated in growing batches; only attempts up to the
    ``N``-th acceptance count towards the cost.
    """
    if N < 1:
        raise ConfigurationError("N must be at least 1")
    acc_theta, acc_idx, costs = [], [], []
    n_acc = 0
    start = 0
    last_accept = -1
    batch = max(16, N)
    while n_acc < N:
        idx = np.arange(start, start + batch)
        th = engine.prior_draws(phase, level, idx)
        rho, cost = engine.discrepancy(th, phase, level, idx)
        ok = np.flatnonzero(rho <= epsilon)
        need = N - n_acc
        if len(ok) >= need:
            stop = ok[need - 1] + 1
            ok = ok[:need]
        else:
            stop = batch
        if len(ok):
            if ok[0] + start - last_accept > max_attempts:
                raise AcceptanceRateError(
                    f"more than {max_attempts} attempts without acceptance at epsilon={epsilon}")
            last_accept = start + ok[-1]
        elif start + batch - last_accept > max_attempts:
            raise AcceptanceRateError(
                f"more than {max_attempts} attempts without acceptance at epsilon={epsilon}")
        acc_theta.append(th[ok])
        acc_idx.append(idx[ok])
        costs.append(cost[:stop])
        n_acc += len(ok)
        start += batch
        rate = n_acc / start
        batch = int(min(max(16, 1.2 * (N - n_acc) / max(rate, 1.0 / start)), 2**20))
    theta = np.concatenate(acc_theta)
    index = np.concatenate(acc_idx)
    cost = np.concatenate(costs)
    # attribute each attempt's cost to the acceptance that ends its run
    owner = np.searchsorted(index, np.arange(len(cost)), side="left")
    per = np.zeros(N)
    np.add.at(per, owner, cost)
    ones = np.ones(N, dtype=np.int64)
    return SampleSet(theta, np.ones(N), per, -ones, ones.astype(bool), ones, level, index,
                     np.zeros(N), per.copy())


def abc_rejection(problem: ABCProblem, f, N: int, rng=None, max_attempts: int = 10**7,
                  level: int = 1, phase: int = PRODUCTION):
    """ABC rejection sampling: ``N`` accepted draws from the ABC posterior.

    Returns
    -------
    report : EstimatorReport
    samples : SampleSet
        Accepted draws, all with ``w = 1``; each carries the cost of the
        attempts since the previous acceptance.
    """
    engine = Engine(problem, as_stream(rng))
    samples = rejection_samples(engine, problem.epsilon, int(N), level, phase, max_attempts)
    f = as_target(f)
    v = f(samples.theta)
    est = weighted_sum_ratio(samples.w, v)
    var = float(np.var(v, ddof=1) / len(v)) if len(v) > 1 else float("nan")
    cost = samples.total_cost
    attempts = int(samples.index[-1]) + 1
    report = EstimatorReport(est, [LevelContribution(level, est, len(v), 1.0, cost,
                                                     problem.epsilon, var)],
                             var, cost, "rejection",
                             {"attempts": attempts, "acceptance_rate": len(v) / attempts})
    return report, samples
