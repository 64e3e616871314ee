"""Batched simulate-observe-compare kernel shared by every sampler.

Each sample is identified by ``(phase, level, index)``; its random inputs come
from sub-streams keyed by that triple plus a *purpose* code, so a given draw
is reproduced exactly whichever sampler requests it and in whatever order.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from .rng import RngStream, child_keys, normal, uniforms_from_keys
from .simulation import _ssa_checkpoints, _tau_checkpoints

PRIOR, APPROX, APPROX_OBS, EXACT, EXACT_OBS, CONTINUE = range(6)
PRODUCTION, TRIAL = 0, 1


_WARM = False


def thread_count() -> int:
    """Worker threads, capped by the ``MFMLMC_THREADS`` environment variable."""
    try:
        cap = int(os.environ.get("MFMLMC_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(n, cap) if cap > 0 else n)


@njit(cache=True, nogil=True)
def _bind(full, const, src, out_rate, out_hill):
    M = const.shape[0]
    for j in range(M):
        for c in range(5):
            v = const[j, c] if src[j, c] < 0 else full[src[j, c]]
            if c == 0:
                out_rate[j] = v
            else:
                out_hill[j, c - 1] = v


@njit(cache=True, nogil=True)
def _batch_rho(full, const, src, reac, net, kind, rep, x0, t0, T, times, obs_idx, sigma,
               data, keys_dyn, keys_obs, tau):
    N = full.shape[0]
    M = reac.shape[0]
    rho = np.empty(N)
    draws = np.empty(N, dtype=np.int64)
    rate = np.empty(M)
    hill = np.empty((M, 4))
    for s in range(N):
        _bind(full[s], const, src, rate, hill)
        if tau > 0.0:
            states, d = _tau_checkpoints(x0, reac, net, kind, rate, hill, rep, t0, T, tau,
                                         times, keys_dyn[s])
        else:
            states, d = _ssa_checkpoints(x0, reac, net, kind, rate, hill, rep, t0, T,
                                         times, keys_dyn[s])
        ctr = np.uint64(0)
        acc = 0.0
        for r in range(times.shape[0]):
            for c in range(obs_idx.shape[0]):
                z, ctr = normal(keys_obs[s], ctr)
                diff = data[r, c] - (states[r, obs_idx[c]] + sigma * z)
                acc += diff * diff
        rho[s] = np.sqrt(acc)
        draws[s] = d
    return rho, draws


class Engine:
    """Problem-bound simulator: prior draws and discrepancies for sample indices.

    Parameters
    ----------
    problem : ABCProblem
    stream : RngStream
        Root stream; per-sample keys derive from it.
    """

    def __init__(self, problem, stream: RngStream):
        net = problem.network
        self.problem = problem
        self.stream = stream
        self._const = np.ascontiguousarray(net._const)
        self._src = np.ascontiguousarray(net._src)
        self._reac = np.ascontiguousarray(net._reac)
        self._net = np.ascontiguousarray(net._net)
        self._kind = np.ascontiguousarray(net._kind)
        self._rep = np.ascontiguousarray(net._rep)
        self._x0 = np.array(net.initial_state, dtype=np.int64)
        self._times = problem.obs_model.times_array
        self._obs = np.array(problem.obs_model.observed_indices, dtype=np.int64)
        self._data = np.ascontiguousarray(problem.data, dtype=float)
        self._full = np.zeros(net.n_params)
        for i, v in net.fixed.items():
            self._full[i] = v
        self._free = net.free_indices
        self.cost_model = problem.cost_model

    # -- random inputs --------------------------------------------------------

    def keys(self, phase: int, level: int, index, purpose: int) -> np.ndarray:
        return child_keys(self.stream, phase, level, np.asarray(index), purpose)

    def prior_draws(self, phase: int, level: int, index) -> np.ndarray:
        u = uniforms_from_keys(self.keys(phase, level, index, PRIOR), self.problem.prior.dim)
        return self.problem.prior.transform(u)

    def continuation_uniforms(self, phase: int, level: int, index) -> np.ndarray:
        return uniforms_from_keys(self.keys(phase, level, index, CONTINUE), 1)[..., 0]

    # -- simulation -----------------------------------------------------------

    def discrepancy(self, thetas, phase: int, level: int, index, tau=None):
        """Discrepancies and costs for samples ``index`` with parameters ``thetas``.

        ``tau=None`` runs the exact simulator; otherwise tau-leaping with that
        step.  Returns ``(rho, cost)`` arrays.
        """
        index = np.atleast_1d(np.asarray(index, dtype=np.int64))
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if index.size == 0:
            return np.empty(0), np.empty(0)
        dyn, obs = (APPROX, APPROX_OBS) if tau is not None else (EXACT, EXACT_OBS)
        full = np.tile(self._full, (len(index), 1))
        full[:, self._free] = thetas
        kd = self.keys(phase, level, index, dyn)
        ko = self.keys(phase, level, index, obs)
        t = -1.0 if tau is None else float(tau)
        if self.cost_model == "draws":
            rho, draws = self._run(full, kd, ko, t)
            return rho, draws.astype(float)
        self._warm_up(full, kd, ko)
        rho = np.empty(len(index))
        secs = np.empty(len(index))
        for s in range(len(index)):
            start = time.perf_counter()
            r, _ = self._kernel(full[s:s + 1], kd[s:s + 1], ko[s:s + 1], t)
            secs[s] = time.perf_counter() - start
            rho[s] = r[0]
        return rho, secs

    def _warm_up(self, full, kd, ko):
        # compile (or load) the kernel outside the timed region
        global _WARM
        if not _WARM:
            self._kernel(full[:0], kd[:0], ko[:0], -1.0)
            _WARM = True

    def _kernel(self, full, kd, ko, tau):
        p = self.problem
        return _batch_rho(full, self._const, self._src, self._reac, self._net, self._kind,
                          self._rep, self._x0, float(p.t0), float(p.T), self._times, self._obs,
                          float(p.obs_model.sigma), self._data, kd, ko, tau)

    def _run(self, full, kd, ko, tau):
        n = len(kd)
        workers = thread_count()
        if workers == 1 or n < 64:
            return self._kernel(full, kd, ko, tau)
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(
                lambda ab: self._kernel(full[ab[0]:ab[1]], kd[ab[0]:ab[1]], ko[ab[0]:ab[1]], tau),
                zip(bounds[:-1], bounds[1:])))
        return (np.concatenate([p[0] for p in parts]),
                np.concatenate([p[1] for p in parts]))
