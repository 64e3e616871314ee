"""Multifidelity ABC: weights, continuation probabilities, the efficiency
objective and its optimiser, the adaptive exponentiated-gradient tuner, and
bias/MSE diagnostics.

Notation
--------
For one draw, ``w_tilde = 1{rho_tilde <= eps_tilde}`` is the low-fidelity
(tau-leap) accept flag and ``b = 1{rho <= eps}`` the high-fidelity (exact)
flag, observed only when the draw is *continued*, which happens with
probability ``eta1`` if ``w_tilde = 1`` and ``eta2`` otherwise.  The weight

    w = w_tilde + 1{continued} (b - w_tilde) / eta

gives an asymptotically unbiased self-normalised estimator.

With ``D = (g - E g)^2`` the classification masses are
``p_tp = E[D w_tilde b]``, ``p_fp = E[D w_tilde (1-b)]``,
``p_fn = E[D (1-w_tilde) b]``; ``c_tilde`` is the mean low-fidelity cost and
``c_p = E[c 1{w_tilde=1}]``, ``c_n = E[c 1{w_tilde=0}]`` are partial
expectations of the high-fidelity cost, so the expected cost per draw is
``c_tilde + eta1 c_p + eta2 c_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .abc import (ABCProblem, EstimatorReport, LevelContribution, SampleSet, as_target,
                  weighted_sum_ratio, weighted_variance)
from .engine import PRODUCTION, Engine
from .exceptions import ApproximationUselessError, ConfigurationError, DegenerateWeightsError
from .rng import RngStream, as_stream

ETA_MIN = 0.01


@dataclass(frozen=True)
class ContinuationProbs:
    """Continuation probabilities after low-fidelity accept (``eta1``) / reject (``eta2``)."""

    eta1: float = 1.0
    eta2: float = 1.0

    def __post_init__(self):
        for v in (self.eta1, self.eta2):
            if not 0.0 < v <= 1.0:
                raise ConfigurationError("continuation probabilities must lie in (0, 1]")

    def clamp(self, eta_min: float = ETA_MIN) -> "ContinuationProbs":
        return ContinuationProbs(min(1.0, max(eta_min, self.eta1)),
                                 min(1.0, max(eta_min, self.eta2)))

    def as_tuple(self) -> tuple:
        return (self.eta1, self.eta2)


@dataclass(frozen=True)
class FidelityPair:
    """Low/high fidelity configuration; ``epsilon_tilde`` defaults to ``epsilon``."""

    tau: float
    epsilon: float
    epsilon_tilde: Optional[float] = None
    approx_discrepancy: str = "euclidean"
    exact_discrepancy: str = "euclidean"

    def __post_init__(self):
        if self.epsilon_tilde is None:
            object.__setattr__(self, "epsilon_tilde", float(self.epsilon))
        if not (self.tau > 0 and self.epsilon > 0 and self.epsilon_tilde > 0):
            raise ConfigurationError("tau, epsilon and epsilon_tilde must be positive")


@dataclass(frozen=True)
class RocCostSummary:
    """Classification masses and costs entering the efficiency objective."""

    p_tp: float
    p_fp: float
    p_fn: float
    c_tilde: float
    c_p: float
    c_n: float

    @property
    def R_0(self) -> float:
        return self.p_tp - self.p_fp

    @property
    def R_p(self) -> float:
        return _ratio(self.p_fp * self.c_tilde, self.c_p)

    @property
    def R_n(self) -> float:
        return _ratio(self.p_fn * self.c_tilde, self.c_n)

    def phi(self, eta) -> float:
        return phi(eta, self)

    def expected_cost(self, eta) -> float:
        e1, e2 = _eta_pair(eta)
        return self.c_tilde + e1 * self.c_p + e2 * self.c_n

    def to_dict(self) -> dict:
        return {"p_tp": self.p_tp, "p_fp": self.p_fp, "p_fn": self.p_fn,
                "c_tilde": self.c_tilde, "c_p": self.c_p, "c_n": self.c_n,
                "R_0": self.R_0, "R_p": self.R_p, "R_n": self.R_n}


def _ratio(a, b):
    if a == 0:
        return 0.0
    return a / b if b > 0 else math.inf


def _eta_pair(eta):
    if isinstance(eta, ContinuationProbs):
        return eta.eta1, eta.eta2
    e1, e2 = eta
    return float(e1), float(e2)


# -- efficiency objective -----------------------------------------------------

def phi(eta, summary: RocCostSummary, mode: str = "asymptotic") -> float:
    """``(R_0 + p_fp/eta1 + p_fn/eta2) (c_tilde + eta1 c_p + eta2 c_n)``.

    This is ``E[w^2 (g - E g)^2] E[C]``, the limiting variance-cost product.
    """
    if mode != "asymptotic":
        raise ConfigurationError("only the asymptotic objective is available")
    e1, e2 = _eta_pair(eta)
    s = summary
    return (s.R_0 + s.p_fp / e1 + s.p_fn / e2) * (s.c_tilde + e1 * s.c_p + e2 * s.c_n)


def phi_gradient(eta, summary: RocCostSummary) -> tuple:
    """Partial derivatives of :func:`phi` in ``(eta1, eta2)``."""
    e1, e2 = _eta_pair(eta)
    s = summary
    d1 = (s.R_0 + s.p_fn / e2) * s.c_p - (s.c_tilde + e2 * s.c_n) * s.p_fp / e1 ** 2
    d2 = (s.R_0 + s.p_fp / e1) * s.c_n - (s.c_tilde + e1 * s.c_p) * s.p_fn / e2 ** 2
    return d1, d2


def _best_other(s: RocCostSummary, fixed: float, which: int) -> float:
    # minimiser of phi in one coordinate with the other held at ``fixed``
    if which == 2:
        a, b, c = s.R_0 + s.p_fp / fixed, s.p_fn, s.c_tilde + fixed * s.c_p
        d = s.c_n
    else:
        a, b, c = s.R_0 + s.p_fn / fixed, s.p_fp, s.c_tilde + fixed * s.c_n
        d = s.c_p
    if b == 0:
        return 0.0
    if a <= 0 or d <= 0:
        return 1.0
    return math.sqrt(b * c / (a * d))


def optimal_continuation(summary: RocCostSummary, eta_min: float = ETA_MIN) -> ContinuationProbs:
    """Continuation probabilities minimising :func:`phi` over ``[eta_min, 1]^2``.

    Uses the closed form: the interior stationary point
    ``(sqrt(R_p/R_0), sqrt(R_n/R_0))`` when ``max(R_p, R_n) <= R_0``, otherwise
    the better of the boundary candidates ``(1, eta2_bar)`` and
    ``(eta1_bar, 1)``.  When the floor or the upper bound binds, the free
    coordinate is re-optimised given the clamped one and the better point
    kept.

    Raises
    ------
    ApproximationUselessError
        If ``R_0 <= 0``; the caller should fall back to ``eta = (1, 1)``.
    """
    s = summary
    vals = (s.p_tp, s.p_fp, s.p_fn, s.c_tilde, s.c_p, s.c_n)
    if not all(np.isfinite(vals)) or min(vals) < 0:
        raise ConfigurationError("summary entries must be finite and non-negative")
    R0 = s.R_0
    if R0 <= 0:
        raise ApproximationUselessError(
            "low-fidelity classifier does not beat chance (R_0 <= 0)")
    Rp, Rn = s.R_p, s.R_n
    if max(Rp, Rn) <= R0:
        cand = (math.sqrt(Rp / R0), math.sqrt(Rn / R0))
    else:
        e1_bar = min(1.0, math.sqrt(_ratio(Rp * s.c_p + s.p_fp * s.c_n, s.c_p) / (R0 + s.p_fn))
                     if s.c_p > 0 else 1.0)
        e2_bar = min(1.0, math.sqrt(_ratio(Rn * s.c_n + s.p_fn * s.c_p, s.c_n) / (R0 + s.p_fp))
                     if s.c_n > 0 else 1.0)
        a, b = (1.0, e2_bar), (e1_bar, 1.0)
        cand = a if phi(_clip(a, eta_min), s) <= phi(_clip(b, eta_min), s) else b
    best = _clip(cand, eta_min)
    if best != cand:
        for which in (1, 2):
            fixed = best[2 - which]
            other = min(1.0, max(eta_min, _best_other(s, fixed, which)))
            alt = (other, fixed) if which == 1 else (fixed, other)
            if phi(alt, s) < phi(best, s):
                best = alt
    return ContinuationProbs(*best)


def _clip(eta, eta_min):
    return (min(1.0, max(eta_min, eta[0])), min(1.0, max(eta_min, eta[1])))


# -- weights ------------------------------------------------------------------

def mf_weight_values(w_tilde, exact_accept, continued, eta_used):
    """Vectorised weight ``w_tilde + continued (b - w_tilde) / eta``.

    ``exact_accept`` is ignored where ``continued`` is false.
    """
    wt = np.asarray(w_tilde, dtype=float)
    b = np.asarray(exact_accept, dtype=float)
    cont = np.asarray(continued, dtype=bool)
    eta = np.asarray(eta_used, dtype=float)
    return np.where(cont, wt + (b - wt) / eta, wt)


def mf_weight(problem: ABCProblem, pair: FidelityPair, eta: ContinuationProbs, theta,
              rng=None, level: int = 1, index: int = 0, phase: int = PRODUCTION):
    """Multifidelity weight of one parameter draw (see module notes)."""
    from .abc import WeightedSample
    engine = Engine(problem, as_stream(rng))
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    rho_t, c_t = engine.discrepancy(theta, phase, level, [index], tau=pair.tau)
    wt = bool(rho_t[0] <= pair.epsilon_tilde)
    e = eta.eta1 if wt else eta.eta2
    u = engine.continuation_uniforms(phase, level, [index])[0]
    cost = float(c_t[0])
    if u < e:
        rho, c = engine.discrepancy(theta, phase, level, [index])
        b = bool(rho[0] <= pair.epsilon)
        w = float(mf_weight_values(wt, b, True, e))
        return WeightedSample(theta[0], w, cost + float(c[0]), wt, True, b, level)
    return WeightedSample(theta[0], float(wt), cost, wt, False, None, level)


# -- summaries from samples ---------------------------------------------------

def estimate_summary(w_tilde, continued, exact_accept, approx_cost, exact_cost, values,
                     mu: float) -> RocCostSummary:
    """Plug-in :class:`RocCostSummary` from multifidelity samples.

    Quantities observed only on continued draws are averaged within the
    continued draws with each ``w_tilde`` class and rescaled by that class's
    overall frequency, which removes the selection effect of ``eta``.
    """
    wt = np.asarray(w_tilde, dtype=bool)
    cont = np.asarray(continued, dtype=bool)
    b = np.asarray(exact_accept) > 0
    D = (np.asarray(values, dtype=float) - mu) ** 2
    c = np.asarray(exact_cost, dtype=float)
    rho_m = float(np.mean(wt)) if len(wt) else 0.0
    pos, neg = cont & wt, cont & ~wt
    n1, n0 = int(pos.sum()), int(neg.sum())
    p_tp = rho_m * math.fsum(D[pos & b]) / n1 if n1 else 0.0
    p_fp = rho_m * math.fsum(D[pos & ~b]) / n1 if n1 else 0.0
    p_fn = (1 - rho_m) * math.fsum(D[neg & b]) / n0 if n0 else 0.0
    c_p = rho_m * math.fsum(c[pos]) / n1 if n1 else 0.0
    c_n = (1 - rho_m) * math.fsum(c[neg]) / n0 if n0 else 0.0
    c_t = float(np.mean(approx_cost)) if len(wt) else 0.0
    return RocCostSummary(p_tp, p_fp, p_fn, c_t, c_p, c_n)


def summary_from_samples(samples: SampleSet, values, mu: Optional[float] = None):
    if mu is None:
        mu = weighted_sum_ratio(samples.w, values)
    return estimate_summary(samples.approx_accept > 0, samples.exact_run, samples.exact_accept,
                            samples.approx_cost, samples.exact_cost, values, mu)


# -- adaptive tuner -----------------------------------------------------------

@dataclass
class TunerState:
    """Running estimates for the exponentiated-gradient continuation tuner.

    Sums over continued draws are kept per class so that the ``(f - mu)^2``
    weighted masses can be recomputed for the current ``mu`` in O(1).
    """

    eta: ContinuationProbs = field(default_factory=ContinuationProbs)
    burn_in: int = 0
    eta_min: float = ETA_MIN
    n: int = 0
    n_approx_accept: int = 0
    sum_approx_cost: float = 0.0
    sum_W: float = 0.0
    sum_Wf: float = 0.0
    # continued draws: [w_tilde=1 & b=1, w_tilde=1 & b=0, w_tilde=0 & b=1] x (S0, S1, S2)
    moments: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    k_pos: int = 0
    k_neg: int = 0
    sum_cost_pos: float = 0.0
    sum_cost_neg: float = 0.0
    updates: int = 0
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.k_pos + self.k_neg

    @property
    def rho_m(self) -> float:
        return self.n_approx_accept / self.n if self.n else 0.0

    @property
    def rho_k(self) -> float:
        return self.k_pos / self.k if self.k else 0.0

    @property
    def mu(self) -> Optional[float]:
        return self.sum_Wf / self.sum_W if self.sum_W != 0 else None

    def summary(self, mu: Optional[float] = None) -> RocCostSummary:
        mu = self.mu if mu is None else mu
        mu = 0.0 if mu is None else mu
        rho = self.rho_m
        m = self.moments
        D = np.maximum(m[:, 2] - 2 * mu * m[:, 1] + mu * mu * m[:, 0], 0.0)
        kp, kn = self.k_pos, self.k_neg
        return RocCostSummary(
            rho * D[0] / kp if kp else 0.0,
            rho * D[1] / kp if kp else 0.0,
            (1 - rho) * D[2] / kn if kn else 0.0,
            self.sum_approx_cost / self.n if self.n else 0.0,
            rho * self.sum_cost_pos / kp if kp else 0.0,
            (1 - rho) * self.sum_cost_neg / kn if kn else 0.0,
        )

    def absorb(self, f: float, W: float, w_tilde: bool, continued: bool,
               exact_accept: bool, approx_cost: float, exact_cost: float):
        self.n += 1
        self.n_approx_accept += int(w_tilde)
        self.sum_approx_cost += approx_cost
        self.sum_W += W
        self.sum_Wf += W * f
        if continued:
            row = (0 if exact_accept else 1) if w_tilde else (2 if exact_accept else -1)
            if row >= 0:
                self.moments[row] += (1.0, f, f * f)
            if w_tilde:
                self.k_pos += 1
                self.sum_cost_pos += exact_cost
            else:
                self.k_neg += 1
                self.sum_cost_neg += exact_cost


def tuner_update(state: TunerState, sample=None, f_value: Optional[float] = None,
                 approx_cost: Optional[float] = None, exact_cost: float = 0.0) -> TunerState:
    """One exponentiated-gradient step on ``eta``.

    If ``sample`` (a :class:`WeightedSample`) is given together with its
    ``f_value`` it is first absorbed into the running estimates; its cost is
    split into ``approx_cost`` (default: all of it) and ``exact_cost``.  The
    step is ``eta <- min(1, eta exp(-delta eta dphi/deta))`` with
    ``delta = 0.1 / ((c_tilde + c_p + c_n) mu^2)``, then floored at
    ``eta_min``.  No step is taken during burn-in, while ``mu`` is zero or
    undefined, or while all classification masses vanish.
    """
    if sample is not None:
        if approx_cost is None:
            approx_cost = sample.cost - exact_cost
        state.absorb(float(f_value), sample.w, bool(sample.approx_accept), sample.exact_run,
                     bool(sample.exact_accept), approx_cost, exact_cost)
    if state.n <= state.burn_in:
        return state
    mu = state.mu
    if mu is None or mu == 0:
        return state
    s = state.summary(mu)
    if s.p_tp == 0 and s.p_fp == 0 and s.p_fn == 0:
        return state
    total_c = s.c_tilde + s.c_p + s.c_n
    if not total_c > 0:
        return state
    delta = 0.1 / (total_c * mu * mu)
    e1, e2 = state.eta.eta1, state.eta.eta2
    g1, g2 = phi_gradient((e1, e2), s)
    e1 = min(1.0, e1 * math.exp(max(-700.0, min(700.0, -delta * e1 * g1))))
    e2 = min(1.0, e2 * math.exp(max(-700.0, min(700.0, -delta * e2 * g2))))
    state.eta = ContinuationProbs(max(state.eta_min, e1), max(state.eta_min, e2))
    state.updates += 1
    return state


def default_burn_in(N: int) -> int:
    return min(1000, math.ceil(N / 10))


# -- sampler ------------------------------------------------------------------

def mf_samples(engine: Engine, pair: FidelityPair, eta, N: int, level: int = 1,
               phase: int = PRODUCTION, f=None, burn_in: Optional[int] = None,
               eta_min: float = ETA_MIN, batch_size: int = 1, record_history: bool = False):
    """Draw ``N`` multifidelity samples.

    Parameters
    ----------
    eta : ContinuationProbs or "adaptive"
        Fixed continuation probabilities, or adaptive tuning starting from
        ``(1, 1)`` (requires ``f``).
    batch_size : int
        Adaptive mode only: ``eta`` is frozen within consecutive batches of
        this many draws, allowing their high-fidelity simulations to run
        together; the tuner then absorbs them one by one.

    Returns
    -------
    samples : SampleSet
    tuner : TunerState or None
    """
    if N < 1:
        raise ConfigurationError("N must be at least 1")
    idx = np.arange(N)
    theta = engine.prior_draws(phase, level, idx)
    rho_t, c_t = engine.discrepancy(theta, phase, level, idx, tau=pair.tau)
    wt = rho_t <= pair.epsilon_tilde
    U = engine.continuation_uniforms(phase, level, idx)
    b = np.full(N, -1, dtype=np.int64)
    c_x = np.zeros(N)
    eta_used = np.ones(N)
    tuner = None
    if eta == "adaptive":
        if f is None:
            raise ConfigurationError("adaptive tuning needs the target function f")
        fv = as_target(f)(theta)
        tuner = TunerState(burn_in=default_burn_in(N) if burn_in is None else int(burn_in),
                           eta_min=eta_min)
        W = np.zeros(N)
        for start in range(0, N, max(1, int(batch_size))):
            sl = slice(start, min(N, start + max(1, int(batch_size))))
            e = np.where(wt[sl], tuner.eta.eta1, tuner.eta.eta2)
            eta_used[sl] = e
            cont = np.flatnonzero(U[sl] < e) + start
            if len(cont):
                rho, c = engine.discrepancy(theta[cont], phase, level, cont)
                b[cont] = rho <= pair.epsilon
                c_x[cont] = c
            for i in range(sl.start, sl.stop):
                run = b[i] >= 0
                W[i] = wt[i] + (b[i] - wt[i]) / eta_used[i] if run else float(wt[i])
                tuner.absorb(fv[i], W[i], bool(wt[i]), run, b[i] == 1, c_t[i], c_x[i])
                tuner_update(tuner)
                if record_history:
                    tuner.history.append(tuner.eta.as_tuple())
        w = W
    else:
        eta = eta if isinstance(eta, ContinuationProbs) else ContinuationProbs(*eta)
        eta_used = np.where(wt, eta.eta1, eta.eta2)
        cont = np.flatnonzero(U < eta_used)
        rho, c = engine.discrepancy(theta[cont], phase, level, cont)
        b[cont] = rho <= pair.epsilon
        c_x[cont] = c
        w = mf_weight_values(wt, b, b >= 0, eta_used)
    run = b >= 0
    samples = SampleSet(theta, w, c_t + c_x, wt.astype(np.int64), run, b, level, idx, c_t, c_x)
    samples.eta_used = eta_used
    return samples, tuner


def mf_abc(problem: ABCProblem, pair: FidelityPair, eta, f, N: int, rng=None,
           burn_in: Optional[int] = None, eta_min: float = ETA_MIN, batch_size: int = 1,
           level: int = 1, phase: int = PRODUCTION):
    """Multifidelity ABC rejection sampling with fixed or adaptive ``eta``.

    Returns
    -------
    report : EstimatorReport
    samples : SampleSet
    """
    if pair.epsilon != problem.epsilon:
        problem = problem.with_epsilon(pair.epsilon)
    engine = Engine(problem, as_stream(rng))
    f = as_target(f)
    samples, tuner = mf_samples(engine, pair, eta, int(N), level, phase, f, burn_in, eta_min,
                                batch_size)
    v = f(samples.theta)
    est = weighted_sum_ratio(samples.w, v, level)
    var = weighted_variance(samples.w, v)
    cost = samples.total_cost
    info = {"n_exact": int(samples.exact_run.sum()),
            "approx_acceptance_rate": float(np.mean(samples.approx_accept)),
            "tau": pair.tau}
    if tuner is not None:
        info["eta"] = list(tuner.eta.as_tuple())
        info["burn_in"] = tuner.burn_in
    else:
        e = eta if isinstance(eta, ContinuationProbs) else ContinuationProbs(*eta)
        info["eta"] = list(e.as_tuple())
    report = EstimatorReport(est, [LevelContribution(level, est, len(v),
                                                     float(np.mean(samples.w)), cost,
                                                     pair.epsilon, var)],
                             var, cost, "mf", info)
    report.tuner = tuner
    return report, samples


# -- diagnostics --------------------------------------------------------------

def bias_mse_diagnostic(samples, f) -> tuple:
    """Leading-order bias and MSE coefficients of the self-normalised estimate.

    Returns ``(-E[w^2 D]/E[w]^2, E[w^2 D^2]/E[w]^2)`` with ``D = f - f_hat``;
    dividing by ``N`` gives the approximate bias and MSE.
    """
    if isinstance(samples, SampleSet):
        w, th = samples.w, samples.theta
    else:
        samples = list(samples)
        w = np.array([s.w for s in samples], dtype=float)
        th = np.array([s.theta for s in samples])
    v = as_target(f)(th)
    est = weighted_sum_ratio(w, v)
    D = v - est
    Ew = float(np.mean(w))
    if Ew == 0:
        raise DegenerateWeightsError("weights sum to zero")
    return (-float(np.mean(w * w * D)) / Ew ** 2, float(np.mean((w * D) ** 2)) / Ew ** 2)


# -- synthetic problem --------------------------------------------------------

@dataclass(frozen=True)
class SyntheticMFProblem:
    """Cheap stand-in for a multifidelity ABC problem with known answers.

    ``theta ~ U(0, 1)``, ``f(theta) = theta``.  The high-fidelity accept flag
    is Bernoulli with probability ``peak * exp(-(theta - centre)^2 / (2 width^2))``;
    the low-fidelity flag equals it with class-dependent error rates
    ``P(w_tilde=1 | b=1) = tpr`` and ``P(w_tilde=1 | b=0) = fpr``.  Costs are
    constant.  All population quantities are computed by quadrature.
    """

    centre: float = 0.3
    width: float = 0.3
    peak: float = 0.8
    tpr: float = 0.9
    fpr: float = 0.05
    cost_approx: float = 1.0
    cost_exact: float = 10.0

    def accept_prob(self, theta):
        return self.peak * np.exp(-0.5 * ((np.asarray(theta) - self.centre) / self.width) ** 2)

    def _grid(self, n=200001):
        t = (np.arange(n) + 0.5) / n
        return t, self.accept_prob(t)

    @property
    def acceptance_rate(self) -> float:
        _, p = self._grid()
        return float(np.mean(p))

    @property
    def posterior_mean(self) -> float:
        t, p = self._grid()
        return float(np.sum(t * p) / np.sum(p))

    def summary(self) -> RocCostSummary:
        t, p = self._grid()
        D = (t - self.posterior_mean) ** 2
        a1 = self.tpr * p + self.fpr * (1 - p)       # P(w_tilde = 1 | theta)
        return RocCostSummary(float(np.mean(D * p * self.tpr)),
                              float(np.mean(D * (1 - p) * self.fpr)),
                              float(np.mean(D * p * (1 - self.tpr))),
                              self.cost_approx,
                              self.cost_exact * float(np.mean(a1)),
                              self.cost_exact * float(np.mean(1 - a1)))

    def draw(self, shape, gen: np.random.Generator):
        """``(theta, b, w_tilde, u)`` arrays of the given shape."""
        theta = gen.random(shape)
        b = gen.random(shape) < self.accept_prob(theta)
        r = gen.random(shape)
        wt = np.where(b, r < self.tpr, r < self.fpr)
        u = gen.random(shape)
        return theta, b, wt, u

    def weights(self, b, wt, u, eta):
        e1, e2 = _eta_pair(eta)
        e = np.where(wt, e1, e2)
        return mf_weight_values(wt, b, u < e, e), u < e

    def estimates(self, N: int, replicates: int, eta, gen: np.random.Generator,
                  chunk: int = 2_000_000):
        """Replicate MF estimates of ``E[theta | accept]`` and first-order terms.

        Returns ``(estimates, linear)`` where ``linear = sum w (f - mu) / (N Z)``
        is the zero-mean first-order term of ``estimate - mu`` (``Z`` the
        acceptance rate); subtracting it leaves the ``O(1/N)`` part.
        """
        mu, Z = self.posterior_mean, self.acceptance_rate
        est = np.empty(replicates)
        lin = np.empty(replicates)
        per = max(1, chunk // N)
        for s in range(0, replicates, per):
            r = min(per, replicates - s)
            theta, b, wt, u = self.draw((r, N), gen)
            w, _ = self.weights(b, wt, u, eta)
            sw = w.sum(axis=1)
            swd = (w * (theta - mu)).sum(axis=1)
            est[s:s + r] = mu + swd / sw
            lin[s:s + r] = swd / (N * Z)
        return est, lin

    def expected_cost(self, eta) -> float:
        return self.summary().expected_cost(eta)

    def run_tuner(self, N: int, gen: np.random.Generator, burn_in: Optional[int] = None,
                  eta_min: float = ETA_MIN, record_history: bool = False) -> TunerState:
        """Adaptive multifidelity sampling of ``N`` draws; returns the tuner."""
        theta, b, wt, u = self.draw(N, gen)
        tuner = TunerState(burn_in=default_burn_in(N) if burn_in is None else int(burn_in),
                           eta_min=eta_min)
        for i in range(N):
            e = tuner.eta.eta1 if wt[i] else tuner.eta.eta2
            run = bool(u[i] < e)
            W = float(wt[i]) + (float(b[i]) - float(wt[i])) / e if run else float(wt[i])
            tuner.absorb(theta[i], W, bool(wt[i]), run, bool(b[i]), self.cost_approx,
                         self.cost_exact if run else 0.0)
            tuner_update(tuner)
            if record_history:
                tuner.history.append(tuner.eta.as_tuple())
        return tuner
