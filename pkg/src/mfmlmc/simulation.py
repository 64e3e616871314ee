"""Exact (Gillespie direct method) and tau-leaping simulation, and the noisy
observation process.

Each simulator comes in two forms: a full-path version returning a
:class:`Trajectory`, and a checkpoint version that only records the state at
a sorted list of times.  Both consume the random stream identically, so the
checkpoint states equal ``state_at(trajectory, t)`` of the full path.

Cost is either wall-clock seconds (``cost_model="time"``) or the number of
exponential and Poisson variates drawn (``cost_model="draws"``), a
deterministic proxy used in tests.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import ConfigurationError
from .network import HILL, Kinetics, ReactionNetwork, State
from .rng import RngStream, as_stream, exponential, normal, poisson, uniform

COST_MODELS = ("time", "draws")


@njit(cache=True)
def _propensities(x, reac, kind, rate, hill, rep, out):
    M, S = reac.shape
    a0 = 0.0
    for j in range(M):
        if kind[j] == HILL:
            p = x[rep[j]]
            if p < 0:
                p = 0
            a = hill[j, 0] + hill[j, 1] / (1.0 + (p / hill[j, 2]) ** hill[j, 3])
        else:
            a = rate[j]
        for i in range(S):
            nu = reac[j, i]
            if nu > 0:
                xi = x[i]
                if xi < nu:
                    a = 0.0
                    break
                for q in range(nu):
                    a *= xi - q
        out[j] = a
        a0 += a
    return a0


@njit(cache=True, inline="always")
def _select(a, a0, key, ctr):
    u, ctr = uniform(key, ctr)
    r = u * a0
    acc = 0.0
    last = -1
    for j in range(a.shape[0]):
        if a[j] > 0.0:
            last = j
            acc += a[j]
            if r < acc:
                return j, ctr
    return last, ctr


@njit(cache=True)
def _ssa_checkpoints(x0, reac, net, kind, rate, hill, rep, t0, T, times, key):
    M, S = reac.shape
    n = times.shape[0]
    out = np.empty((n, S), dtype=np.int64)
    x = x0.copy()
    a = np.empty(M)
    t = t0
    ctr = np.uint64(0)
    draws = 0
    k = 0
    while True:
        a0 = _propensities(x, reac, kind, rate, hill, rep, a)
        if a0 <= 0.0:
            break
        e, ctr = exponential(key, ctr)
        draws += 1
        tn = t + e / a0
        if tn > T:
            break
        while k < n and times[k] < tn:
            out[k] = x
            k += 1
        j, ctr = _select(a, a0, key, ctr)
        for i in range(S):
            x[i] += net[j, i]
        t = tn
    while k < n:
        out[k] = x
        k += 1
    return out, draws


@njit(cache=True)
def _ssa_path(x0, reac, net, kind, rate, hill, rep, t0, T, key):
    M, S = reac.shape
    cap = 1024
    ts = np.empty(cap)
    xs = np.empty((cap, S), dtype=np.int64)
    x = x0.copy()
    a = np.empty(M)
    t = t0
    ts[0] = t0
    xs[0] = x
    m = 1
    ctr = np.uint64(0)
    draws = 0
    while True:
        a0 = _propensities(x, reac, kind, rate, hill, rep, a)
        if a0 <= 0.0:
            break
        e, ctr = exponential(key, ctr)
        draws += 1
        tn = t + e / a0
        if tn > T:
            break
        j, ctr = _select(a, a0, key, ctr)
        for i in range(S):
            x[i] += net[j, i]
        t = tn
        if m == cap:
            cap *= 2
            ts2 = np.empty(cap)
            xs2 = np.empty((cap, S), dtype=np.int64)
            ts2[:m] = ts[:m]
            xs2[:m] = xs[:m]
            ts = ts2
            xs = xs2
        ts[m] = t
        xs[m] = x
        m += 1
    return ts[:m].copy(), xs[:m].copy(), draws


@njit(cache=True, inline="always")
def _leap(x, a, h, net, key, ctr):
    M, S = net.shape
    for j in range(M):
        y, ctr = poisson(a[j] * h, key, ctr)
        if y > 0:
            for i in range(S):
                x[i] += y * net[j, i]
    for i in range(S):
        if x[i] < 0:
            x[i] = 0
    return ctr


@njit(cache=True)
def _tau_checkpoints(x0, reac, net, kind, rate, hill, rep, t0, T, tau, times, key):
    M, S = reac.shape
    n = times.shape[0]
    out = np.empty((n, S), dtype=np.int64)
    x = x0.copy()
    a = np.empty(M)
    t = t0
    ctr = np.uint64(0)
    draws = 0
    k = 0
    while True:
        while k < n and times[k] <= t:
            out[k] = x
            k += 1
        if t >= T:
            break
        tn = t + tau
        if k < n and times[k] < tn:
            tn = times[k]
        if tn > T:
            tn = T
        _propensities(x, reac, kind, rate, hill, rep, a)
        ctr = _leap(x, a, tn - t, net, key, ctr)
        draws += M
        t = tn
    while k < n:
        out[k] = x
        k += 1
    return out, draws


@njit(cache=True)
def _tau_path(x0, reac, net, kind, rate, hill, rep, t0, T, tau, times, key):
    M, S = reac.shape
    n = times.shape[0]
    nsteps = int(math.ceil((T - t0) / tau)) + n + 1
    ts = np.empty(nsteps + 1)
    xs = np.empty((nsteps + 1, S), dtype=np.int64)
    x = x0.copy()
    a = np.empty(M)
    t = t0
    ts[0] = t0
    xs[0] = x
    m = 1
    ctr = np.uint64(0)
    draws = 0
    k = 0
    while t < T:
        while k < n and times[k] <= t:
            k += 1
        tn = t + tau
        if k < n and times[k] < tn:
            tn = times[k]
        if tn > T:
            tn = T
        _propensities(x, reac, kind, rate, hill, rep, a)
        ctr = _leap(x, a, tn - t, net, key, ctr)
        draws += M
        t = tn
        ts[m] = t
        xs[m] = x
        m += 1
    return ts[:m].copy(), xs[:m].copy(), draws


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant path: ``states[i]`` holds on ``[times[i], times[i+1])``."""

    times: np.ndarray
    states: np.ndarray
    cost: float
    t_end: float
    draws: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ConfigurationError("times and states differ in length")

    @property
    def t0(self) -> float:
        return float(self.times[0])


@dataclass(frozen=True)
class ObservationModel:
    """Additive Gaussian noise on selected species at fixed times."""

    observed_indices: tuple
    sigma: float
    obs_times: tuple

    def __post_init__(self):
        object.__setattr__(self, "observed_indices", tuple(int(i) for i in self.observed_indices))
        object.__setattr__(self, "obs_times", tuple(float(t) for t in self.obs_times))
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if not self.observed_indices:
            raise ConfigurationError("at least one species must be observed")
        if any(b <= a for a, b in zip(self.obs_times, self.obs_times[1:])):
            raise ConfigurationError("observation times must be strictly increasing")

    @property
    def shape(self) -> tuple:
        return (len(self.obs_times), len(self.observed_indices))

    @property
    def times_array(self) -> np.ndarray:
        return np.asarray(self.obs_times, dtype=float)

    def check_horizon(self, t0: float, T: float):
        if self.obs_times and (self.obs_times[0] < t0 or self.obs_times[-1] > T):
            raise ConfigurationError(
                f"observation times must lie within [{t0}, {T}]")

    def to_dict(self, species=None) -> dict:
        d = {"observed": list(self.observed_indices), "sigma": self.sigma,
             "times": list(self.obs_times)}
        if species is not None:
            d["observed"] = [species[i] for i in self.observed_indices]
        return d

    @classmethod
    def from_dict(cls, d, species=None) -> "ObservationModel":
        idx = [species.index(s) if isinstance(s, str) else int(s) for s in d["observed"]]
        return cls(tuple(idx), float(d["sigma"]), tuple(d["times"]))


def _check_cost_model(cost_model):
    if cost_model not in COST_MODELS:
        raise ConfigurationError(f"cost_model must be one of {COST_MODELS}")


def _x0(network: ReactionNetwork, x0):
    if x0 is None:
        return np.array(network.initial_state, dtype=np.int64)
    x0 = np.asarray(x0.counts if isinstance(x0, State) else x0, dtype=np.int64)
    if x0.shape != (network.n_species,) or np.any(x0 < 0):
        raise ConfigurationError("initial state must be a non-negative vector over all species")
    return x0


def _kin_args(kin: Kinetics):
    return kin.reactants, kin.net, kin.kind, kin.rate, kin.hill, kin.repressor


def simulate_exact(network: ReactionNetwork, theta, t0: float, T: float, rng=None,
                   cost_model: str = "time", x0=None) -> Trajectory:
    """Gillespie direct method from ``t0`` to ``T``; records every event."""
    _check_cost_model(cost_model)
    if not T > t0:
        raise ConfigurationError("T must exceed t0")
    kin = network.bind(theta)
    key = as_stream(rng).key
    start = time.perf_counter()
    ts, xs, draws = _ssa_path(_x0(network, x0), *_kin_args(kin), float(t0), float(T), key)
    elapsed = time.perf_counter() - start
    return Trajectory(ts, xs, elapsed if cost_model == "time" else float(draws), float(T), draws)


def simulate_tau_leap(network: ReactionNetwork, theta, t0: float, T: float, tau: float,
                      rng=None, cost_model: str = "time", x0=None,
                      checkpoints=()) -> Trajectory:
    """Tau-leaping with fixed step ``tau`` and a final partial step ending at ``T``.

    Leaps are shortened to land exactly on any time in ``checkpoints`` (used
    to align the grid with observation times).  States are clamped to be
    non-negative after every leap.
    """
    _check_cost_model(cost_model)
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    if not T > t0:
        raise ConfigurationError("T must exceed t0")
    kin = network.bind(theta)
    key = as_stream(rng).key
    cps = np.asarray(sorted(checkpoints), dtype=float)
    start = time.perf_counter()
    ts, xs, draws = _tau_path(_x0(network, x0), *_kin_args(kin), float(t0), float(T),
                              float(tau), cps, key)
    elapsed = time.perf_counter() - start
    return Trajectory(ts, xs, elapsed if cost_model == "time" else float(draws), float(T), draws)


def sample_states(network: ReactionNetwork, theta, t0: float, T: float, times, rng=None,
                  tau: float | None = None, x0=None):
    """States at sorted ``times`` along one exact (``tau=None``) or tau-leap path.

    Returns ``(states, draws, seconds)`` where ``states`` has shape
    ``(len(times), n_species)``.
    """
    kin = network.bind(theta)
    return _sample_states_bound(kin, _x0(network, x0), t0, T, np.asarray(times, dtype=float),
                                as_stream(rng).key, tau)


def _sample_states_bound(kin, x0, t0, T, times, key, tau):
    start = time.perf_counter()
    if tau is None:
        out, draws = _ssa_checkpoints(x0, *_kin_args(kin), float(t0), float(T), times, key)
    else:
        out, draws = _tau_checkpoints(x0, *_kin_args(kin), float(t0), float(T), float(tau),
                                      times, key)
    return out, draws, time.perf_counter() - start


def state_at(trajectory: Trajectory, t: float) -> State:
    """State of the piecewise-constant path at time ``t``."""
    if t < trajectory.times[0] or t > trajectory.t_end:
        raise ConfigurationError(
            f"t={t} outside the simulated horizon [{trajectory.times[0]}, {trajectory.t_end}]")
    i = int(np.searchsorted(trajectory.times, t, side="right")) - 1
    return State(trajectory.states[i].copy(), float(t))


@njit(cache=True)
def _add_noise(values, sigma, key):
    out = np.empty(values.shape)
    ctr = np.uint64(0)
    for r in range(values.shape[0]):
        for c in range(values.shape[1]):
            z, ctr = normal(key, ctr)
            out[r, c] = values[r, c] + sigma * z
    return out


def add_observation_noise(true_values: np.ndarray, sigma: float, rng) -> np.ndarray:
    return _add_noise(np.ascontiguousarray(true_values, dtype=float), float(sigma),
                      as_stream(rng).key)


def observe(trajectory: Trajectory, obs_model: ObservationModel, rng=None) -> np.ndarray:
    """Noisy observations, shape ``(n_times, n_observed)``."""
    obs_model.check_horizon(trajectory.t0, trajectory.t_end)
    true = np.array([state_at(trajectory, t).counts[list(obs_model.observed_indices)]
                     for t in obs_model.obs_times], dtype=float)
    return add_observation_noise(true.reshape(obs_model.shape), obs_model.sigma, rng)


def simulate_observations(network: ReactionNetwork, theta, obs_model: ObservationModel,
                          t0: float, T: float, dynamics: RngStream, noise: RngStream,
                          tau: float | None = None):
    """Observed data of one simulated path; returns ``(Y, draws, seconds)``."""
    obs_model.check_horizon(t0, T)
    states, draws, secs = sample_states(network, theta, t0, T, obs_model.times_array,
                                        dynamics, tau=tau)
    true = states[:, list(obs_model.observed_indices)].astype(float)
    return add_observation_noise(true, obs_model.sigma, noise), draws, secs
