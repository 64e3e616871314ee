"""Argument validation helpers shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np

from .abc import ABCProblem
from .exceptions import ConfigurationError
from .mf import ContinuationProbs
from .mlmc import ThresholdSchedule
from .rng import RngStream, as_stream


def check_random_state(random_state) -> RngStream:
    """:class:`RngStream` from ``None``, an int seed or an existing stream."""
    try:
        return as_stream(random_state)
    except TypeError as e:
        raise ConfigurationError(str(e)) from None


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not value > 0:
        raise ConfigurationError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_problem(problem) -> ABCProblem:
    if not isinstance(problem, ABCProblem):
        raise ConfigurationError(f"expected an ABCProblem, got {type(problem).__name__}")
    return problem


def check_eta(eta1, eta2) -> ContinuationProbs:
    return ContinuationProbs(float(eta1), float(eta2))


def check_counts(N, L: int, name: str = "n_samples", minimum: int = 2) -> list:
    """One integer count per level (a scalar is broadcast)."""
    arr = np.atleast_1d(N)
    if arr.size == 1:
        arr = np.repeat(arr, L)
    if arr.size != L:
        raise ConfigurationError(f"{name} needs one entry per level ({L})")
    return [check_positive_int(int(n) if float(n).is_integer() else n, name, minimum)
            for n in arr.tolist()]


def check_schedule(epsilons=None, epsilon_1=None, epsilon_L=None, L=None) -> ThresholdSchedule:
    """Explicit thresholds, or a geometric schedule from ``epsilon_1``/``epsilon_L``."""
    if epsilons is not None:
        return epsilons if isinstance(epsilons, ThresholdSchedule) else ThresholdSchedule(
            tuple(epsilons))
    if epsilon_1 is None or epsilon_L is None:
        raise ConfigurationError("give epsilons, or epsilon_1 and epsilon_L")
    return ThresholdSchedule.geometric(check_positive(epsilon_1, "epsilon_1"),
                                       check_positive(epsilon_L, "epsilon_L"), L)
