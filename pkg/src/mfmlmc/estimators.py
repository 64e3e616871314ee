"""Estimator objects with a scikit-learn style interface.

Each estimator is configured through its constructor, fitted to an
:class:`~mfmlmc.abc.ABCProblem` with :meth:`fit`, and afterwards exposes
``estimate_``, ``variance_``, ``cost_`` and ``report_``.  Fitted samples are
kept, so :meth:`expectation` evaluates further test functions without new
simulations.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .abc import abc_rejection, as_target, weighted_estimate
from .mf import ETA_MIN, FidelityPair, mf_abc
from .mfmlmc import ADAPTIVE, LevelPlan, mf_mlmc_abc, mf_mlmc_pipeline
from .mlmc import DEFAULT_TRIAL_N, mlmc_abc, mlmc_pipeline, telescope
from .validation import (check_counts, check_eta, check_positive, check_positive_int,
                         check_problem, check_random_state, check_schedule)


class _ABCEstimator(BaseEstimator):

    def _store(self, report, result):
        self.report_ = report
        self.estimate_ = report.estimate
        self.variance_ = report.variance_estimate
        self.cost_ = report.total_cost
        self.result_ = result
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def expectation(self, f) -> float:
        """Estimate of ``E[f(theta) | data]`` from the fitted samples."""
        self._check_fitted()
        if hasattr(self.result_, "samples") and isinstance(self.result_.samples, list):
            sets = self.result_.samples
            return telescope(lambda l: sets[l - 1], len(sets), as_target(f)).estimate
        return weighted_estimate(self.result_, f)


class RejectionABC(_ABCEstimator):
    """ABC rejection sampling.

    Parameters
    ----------
    n_samples : int
        Number of accepted draws.
    epsilon : float, optional
        Threshold; defaults to the problem's.
    target : int, callable or Target
        Test function (an int selects a parameter component).
    """

    def __init__(self, n_samples=1000, epsilon=None, target=0, max_attempts=10**7,
                 random_state=None):
        self.n_samples = n_samples
        self.epsilon = epsilon
        self.target = target
        self.max_attempts = max_attempts
        self.random_state = random_state

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        if self.epsilon is not None:
            problem = problem.with_epsilon(check_positive(self.epsilon, "epsilon"))
        rep, S = abc_rejection(problem, self.target, check_positive_int(self.n_samples,
                                                                       "n_samples"),
                               check_random_state(self.random_state), self.max_attempts)
        return self._store(rep, S)


class MFABC(_ABCEstimator):
    """Multifidelity ABC with fixed (``eta1``, ``eta2``) or adaptive continuation."""

    def __init__(self, tau=0.1, n_samples=1000, epsilon=None, epsilon_tilde=None, eta1=1.0,
                 eta2=1.0, adaptive=False, burn_in=None, eta_min=ETA_MIN, target=0,
                 random_state=None):
        self.tau = tau
        self.n_samples = n_samples
        self.epsilon = epsilon
        self.epsilon_tilde = epsilon_tilde
        self.eta1 = eta1
        self.eta2 = eta2
        self.adaptive = adaptive
        self.burn_in = burn_in
        self.eta_min = eta_min
        self.target = target
        self.random_state = random_state

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        eps = problem.epsilon if self.epsilon is None else check_positive(self.epsilon,
                                                                          "epsilon")
        pair = FidelityPair(check_positive(self.tau, "tau"), eps, self.epsilon_tilde)
        eta = ADAPTIVE if self.adaptive else check_eta(self.eta1, self.eta2)
        rep, S = mf_abc(problem, pair, eta, self.target,
                        check_positive_int(self.n_samples, "n_samples"),
                        check_random_state(self.random_state), self.burn_in, self.eta_min)
        self.eta_ = tuple(rep.info["eta"])
        return self._store(rep, S)


class MLMCABC(_ABCEstimator):
    """Multilevel ABC.

    Give ``n_samples`` (per level) for a direct run, or ``target_h`` /
    ``anchor`` to size the levels from ``trial_n`` trial samples.  Thresholds
    are ``epsilons`` or a geometric schedule from ``epsilon_1`` to
    ``epsilon_L`` (default: the problem's threshold) with ``L`` levels.
    """

    def __init__(self, epsilons=None, epsilon_1=None, epsilon_L=None, L=None, n_samples=None,
                 target_h=None, anchor=None, trial_n=DEFAULT_TRIAL_N, target=0,
                 random_state=None):
        self.epsilons = epsilons
        self.epsilon_1 = epsilon_1
        self.epsilon_L = epsilon_L
        self.L = L
        self.n_samples = n_samples
        self.target_h = target_h
        self.anchor = anchor
        self.trial_n = trial_n
        self.target = target
        self.random_state = random_state

    def _schedule(self, problem):
        eL = self.epsilon_L if self.epsilon_L is not None else problem.epsilon
        return check_schedule(self.epsilons, self.epsilon_1, eL, self.L)

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        sch = self._schedule(problem)
        rng = check_random_state(self.random_state)
        if self.n_samples is not None:
            rep, res = mlmc_abc(problem, sch, check_counts(self.n_samples, sch.L),
                                self.target, rng)
        else:
            rep, res = mlmc_pipeline(problem, sch, self.target, rng,
                                     check_positive_int(self.trial_n, "trial_n", 2),
                                     self.target_h, self.anchor)
        self.schedule_ = sch
        self.n_samples_ = rep.info["N"]
        return self._store(rep, res)


class MFMLMCABC(MLMCABC):
    """Multifidelity multilevel ABC.

    ``tau`` is one time step or one per level.  With ``adaptive=True`` the
    continuation probabilities are tuned on the trial samples (or, for a
    direct run with ``n_samples``, while sampling); otherwise ``eta1`` and
    ``eta2`` apply at every level.
    """

    def __init__(self, tau=0.1, epsilons=None, epsilon_1=None, epsilon_L=None, L=None,
                 n_samples=None, target_h=None, anchor=None, trial_n=DEFAULT_TRIAL_N,
                 eta1=1.0, eta2=1.0, adaptive=True, burn_in=None, eta_min=ETA_MIN, target=0,
                 random_state=None):
        super().__init__(epsilons, epsilon_1, epsilon_L, L, n_samples, target_h, anchor,
                         trial_n, target, random_state)
        self.tau = tau
        self.eta1 = eta1
        self.eta2 = eta2
        self.adaptive = adaptive
        self.burn_in = burn_in
        self.eta_min = eta_min

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        sch = self._schedule(problem)
        rng = check_random_state(self.random_state)
        eta = ADAPTIVE if self.adaptive else check_eta(self.eta1, self.eta2)
        if self.n_samples is not None:
            plan = LevelPlan(sch.epsilons, self.tau, check_counts(self.n_samples, sch.L,
                                                                  minimum=1), eta)
            rep, res = mf_mlmc_abc(problem, plan, self.target, rng, burn_in=self.burn_in,
                                   eta_min=self.eta_min)
        else:
            rep, res = mf_mlmc_pipeline(problem, sch, self.tau, self.target, rng,
                                        check_positive_int(self.trial_n, "trial_n", 2),
                                        self.target_h, self.anchor, eta,
                                        burn_in=self.burn_in, eta_min=self.eta_min)
        self.schedule_ = sch
        self.n_samples_ = rep.info["N"]
        self.eta_ = [tuple(e) for e in rep.info["eta"]]
        return self._store(rep, res)
