import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfmlmc.abc import SampleSet, abc_rejection
from mfmlmc.exceptions import ApproximationUselessError, ConfigurationError
from mfmlmc.mf import (ETA_MIN, ContinuationProbs, FidelityPair, RocCostSummary,
                       SyntheticMFProblem, TunerState, bias_mse_diagnostic, default_burn_in,
                       estimate_summary, mf_abc, mf_weight, mf_weight_values,
                       optimal_continuation, phi, phi_gradient, tuner_update)
from mfmlmc.rng import RngStream

from conftest import birth_problem

summaries = st.builds(RocCostSummary, st.floats(1e-4, 1.0), st.floats(0.0, 1.0),
                      st.floats(0.0, 1.0), st.floats(1e-3, 10.0), st.floats(1e-3, 10.0),
                      st.floats(1e-3, 10.0))


def random_summary(gen):
    p = gen.uniform(0, 1, 3)
    c = gen.uniform(0.01, 10, 3)
    return RocCostSummary(p[0] + max(p[1], 0.0) * gen.uniform(0.5, 2), p[1], p[2], *c)


# -- weights ------------------------------------------------------------------

@pytest.mark.parametrize("wt, b, cont, eta, expected", [
    (1, 0, True, 0.5, -1.0),
    (1, 1, True, 0.5, 1.0),
    (0, 1, True, 0.25, 4.0),
    (0, 0, False, 0.25, 0.0),
    (1, 0, False, 0.3, 1.0),
    (0, 1, True, 1.0, 1.0),
    (1, 0, True, 1.0, 0.0),
])
def test_weight_examples(wt, b, cont, eta, expected):
    assert mf_weight_values(wt, b, cont, eta) == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**62), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_weight_support_and_cost(seed, e1, e2):
    p = birth_problem(3.0)
    _, S = mf_abc(p, FidelityPair(0.5, 3.0), ContinuationProbs(e1, e2), 0, 60, RngStream(seed))
    allowed = np.array([0.0, 1.0, 1 - 1 / e1, 1 / e2])
    assert np.all(np.min(np.abs(S.w[:, None] - allowed[None, :]), axis=1) == 0)
    np.testing.assert_array_equal(S.cost, S.approx_cost + np.where(S.exact_run, S.exact_cost, 0))
    assert np.all(S.exact_cost[~S.exact_run] == 0)
    assert np.all((S.exact_accept >= 0) == S.exact_run)


def test_unit_eta_weight_is_exact_indicator():
    p = birth_problem(3.0)
    _, S = mf_abc(p, FidelityPair(0.5, 3.0), ContinuationProbs(1, 1), 0, 200, RngStream(1))
    assert S.exact_run.all()
    np.testing.assert_array_equal(S.w, S.exact_accept.astype(float))


def test_single_draw_matches_batch():
    p = birth_problem(3.0)
    pair, eta = FidelityPair(0.5, 3.0), ContinuationProbs(0.4, 0.6)
    _, S = mf_abc(p, pair, eta, 0, 30, RngStream(2))
    for i in range(30):
        ws = mf_weight(p, pair, eta, S.theta[i], RngStream(2), index=i)
        assert ws.w == S.w[i]
        assert ws.exact_run == S.exact_run[i]
        assert ws.cost == S.cost[i]


def test_fidelity_pair_defaults():
    pair = FidelityPair(0.1, 5.0)
    assert pair.epsilon_tilde == 5.0
    assert pair.approx_discrepancy == pair.exact_discrepancy
    with pytest.raises(ConfigurationError):
        FidelityPair(0.0, 1.0)


@pytest.mark.parametrize("e1, e2", [(0.0, 1.0), (1.0, 1.5), (-0.2, 0.5)])
def test_continuation_probs_validation(e1, e2):
    with pytest.raises(ConfigurationError):
        ContinuationProbs(e1, e2)


# -- phi ----------------------------------------------------------------------

def test_phi_at_unit_eta():
    s = RocCostSummary(0.3, 0.1, 0.05, 1.0, 2.0, 3.0)
    assert phi((1, 1), s) == pytest.approx((s.R_0 + 0.1 + 0.05) * (1.0 + 2.0 + 3.0))


def test_phi_diverges_at_zero_eta1():
    s = RocCostSummary(0.3, 0.1, 0.05, 1.0, 2.0, 3.0)
    vals = [phi((e, 0.5), s) for e in (1e-2, 1e-3, 1e-4)]
    assert vals[0] < vals[1] < vals[2]
    assert phi_gradient((1e-3, 0.5), s)[0] < 0


def test_phi_monte_carlo_oracle():
    P = SyntheticMFProblem()
    gen = np.random.default_rng(3)
    for eta in [(1.0, 1.0), (0.4, 0.3), (0.2, 0.7)]:
        theta, b, wt, u = P.draw(10**6, gen)
        w, cont = P.weights(b, wt, u, eta)
        cost = P.cost_approx + P.cost_exact * cont
        mc = np.mean(w ** 2 * (theta - P.posterior_mean) ** 2) * np.mean(cost)
        assert mc == pytest.approx(P.summary().phi(eta), rel=0.05)


# -- gradient -----------------------------------------------------------------

def test_gradient_finite_differences():
    gen = np.random.default_rng(4)
    for _ in range(20):
        s = random_summary(gen)
        eta = gen.uniform(0.05, 1.0, 2)
        g = np.array(phi_gradient(eta, s))
        h = 1e-6
        fd = np.array([(phi(eta + h * e, s) - phi(eta - h * e, s)) / (2 * h)
                       for e in np.eye(2)])
        assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(np.abs(fd), 1e-12) + 1e-9)


def test_gradient_vanishes_at_interior_optimum():
    s = RocCostSummary(0.17, 0.01, 0.04, 1.0, 1.0, 1.0)
    opt = optimal_continuation(s)
    np.testing.assert_allclose(phi_gradient(opt, s), 0.0, atol=1e-12)


@given(summaries, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_gradient_positive_without_false_positives(s, e1, e2):
    s = RocCostSummary(s.p_tp, 0.0, s.p_fn, s.c_tilde, s.c_p, s.c_n)
    assert phi_gradient((e1, e2), s)[0] > 0


# -- optimal continuation -----------------------------------------------------

def test_optimal_interior_example():
    s = RocCostSummary(0.17, 0.01, 0.04, 1.0, 1.0, 1.0)
    assert (s.R_p, s.R_n, s.R_0) == pytest.approx((0.01, 0.04, 0.16))
    opt = optimal_continuation(s)
    assert opt.as_tuple() == pytest.approx((0.25, 0.5))


def test_optimal_perfect_classifier():
    s = RocCostSummary(0.2, 0.0, 0.0, 1.0, 5.0, 5.0)
    assert optimal_continuation(s).as_tuple() == (ETA_MIN, ETA_MIN)


def test_optimal_useless_approximation():
    with pytest.raises(ApproximationUselessError):
        optimal_continuation(RocCostSummary(0.1, 0.2, 0.0, 1.0, 1.0, 1.0))


@given(summaries, st.floats(0.001, 0.2))
def test_optimal_within_bounds(s, eta_min):
    if s.R_0 <= 0:
        return
    opt = optimal_continuation(s, eta_min)
    assert eta_min <= opt.eta1 <= 1 and eta_min <= opt.eta2 <= 1


@settings(max_examples=30)
@given(summaries)
def test_optimal_beats_grid(s):
    if s.R_0 <= 0:
        return
    grid = np.linspace(ETA_MIN, 1.0, 60)
    best = min(phi((a, b), s) for a in grid for b in grid)
    assert phi(optimal_continuation(s), s) <= best * (1 + 1e-9)


# -- tuner --------------------------------------------------------------------

def _tuner_with(summary_like=True):
    t = TunerState(burn_in=0)
    for f, W, wt, cont, b in [(1.0, 1, True, True, True), (2.0, -1, True, True, False),
                              (3.0, 1, False, True, True), (0.5, 1, True, True, True),
                              (1.5, 0, False, True, False)]:
        t.absorb(f, W, wt, cont, b, 1.0, 5.0)
    return t


def test_tuner_positive_gradient_decreases_eta1():
    t = _tuner_with()
    s = t.summary()
    assert phi_gradient(t.eta, s)[0] > 0
    e1 = t.eta.eta1
    tuner_update(t)
    assert t.eta.eta1 < e1


def test_tuner_zero_gradient_holds(monkeypatch):
    import mfmlmc.mf as mf
    t = _tuner_with()
    t.eta = ContinuationProbs(0.5, 0.5)
    monkeypatch.setattr(mf, "phi_gradient", lambda eta, s: (0.0, 0.0))
    tuner_update(t)
    assert t.eta.as_tuple() == (0.5, 0.5)


def test_tuner_holds_during_burn_in_and_zero_mean():
    t = TunerState(burn_in=10)
    t.absorb(1.0, 1, True, True, False, 1.0, 5.0)
    tuner_update(t)
    assert t.eta.as_tuple() == (1.0, 1.0) and t.updates == 0
    z = TunerState(burn_in=0)
    z.absorb(0.0, 1, True, True, False, 1.0, 5.0)
    tuner_update(z)
    assert z.updates == 0


def test_tuner_holds_when_masses_vanish():
    t = TunerState(burn_in=0)
    for _ in range(3):
        t.absorb(2.0, 1, True, True, True, 1.0, 5.0)
    tuner_update(t)
    assert t.summary().p_tp == pytest.approx(0.0)
    assert t.eta.as_tuple() == (1.0, 1.0)


def test_tuner_update_absorbs_sample():
    from mfmlmc.abc import WeightedSample
    t = TunerState(burn_in=5)
    ws = WeightedSample(np.zeros(1), -1.0, 6.0, True, True, False)
    tuner_update(t, ws, f_value=2.0, exact_cost=5.0)
    assert t.n == 1 and t.sum_approx_cost == 1.0 and t.sum_cost_pos == 5.0


def test_tuner_estimates_match_batch_summary():
    P = SyntheticMFProblem()
    gen = np.random.default_rng(5)
    theta, b, wt, u = P.draw(5000, gen)
    w, cont = P.weights(b, wt, u, (0.5, 0.3))
    t = TunerState()
    for i in range(5000):
        t.absorb(theta[i], w[i], bool(wt[i]), bool(cont[i]), bool(b[i]), 1.0,
                 10.0 if cont[i] else 0.0)
    mu = float(np.sum(w * theta) / np.sum(w))
    batch = estimate_summary(wt, cont, np.where(cont, b, -1), np.ones(5000),
                             np.where(cont, 10.0, 0.0), theta, mu)
    for k, v in batch.to_dict().items():
        assert t.summary().to_dict()[k] == pytest.approx(v, rel=1e-9, abs=1e-15)


def test_tuner_tracks_optimum():
    P = SyntheticMFProblem()
    s = P.summary()
    opt = np.array(optimal_continuation(s).as_tuple())
    finals = []
    for seed in range(10):
        t = P.run_tuner(10**4, np.random.default_rng(seed))
        eta = np.array(t.eta.as_tuple())
        own = np.array(optimal_continuation(t.summary()).as_tuple())
        assert np.all(np.abs(eta / own - 1) < 0.1)
        assert s.phi(eta) <= 1.02 * s.phi(opt)
        finals.append(eta)
    assert np.all(np.abs(np.mean(finals, axis=0) / opt - 1) < 0.1)


def test_default_burn_in():
    assert default_burn_in(100) == 10
    assert default_burn_in(10**6) == 1000


# -- estimation ---------------------------------------------------------------

@pytest.mark.parametrize("eta", [(1.0, 1.0), (0.5, 0.5), (0.2, 0.8)])
def test_mf_agrees_with_rejection(eta, cheap_problem):
    pair = FidelityPair(1.0, cheap_problem.epsilon)
    rep, S = mf_abc(cheap_problem, pair, ContinuationProbs(*eta), 0, 10**4, RngStream(6))
    ref, R = abc_rejection(cheap_problem, 0, 10**4, RngStream(7))
    se = math.sqrt(rep.variance_estimate + ref.variance_estimate)
    assert abs(rep.estimate - ref.estimate) < 3 * se


def test_mf_adaptive_report(cheap_problem):
    pair = FidelityPair(1.0, cheap_problem.epsilon)
    rep, S = mf_abc(cheap_problem, pair, "adaptive", 0, 3000, RngStream(8))
    assert rep.info["burn_in"] == 300
    assert rep.tuner.n == 3000
    assert np.all(S.eta_used[:300] == 1.0)
    assert rep.info["n_exact"] == int(S.exact_run.sum())
    a, _ = mf_abc(cheap_problem, pair, "adaptive", 0, 3000, RngStream(8))
    assert a.estimate == rep.estimate


def test_mf_adaptive_batches_are_deterministic(cheap_problem):
    pair = FidelityPair(1.0, cheap_problem.epsilon)
    a, _ = mf_abc(cheap_problem, pair, "adaptive", 0, 2000, RngStream(9), batch_size=8)
    b, _ = mf_abc(cheap_problem, pair, "adaptive", 0, 2000, RngStream(9), batch_size=8)
    assert a.estimate == b.estimate and a.info["eta"] == b.info["eta"]


def test_mf_adaptive_requires_target(cheap_problem):
    from mfmlmc.engine import Engine
    from mfmlmc.mf import mf_samples
    with pytest.raises(ConfigurationError):
        mf_samples(Engine(cheap_problem, RngStream(0)), FidelityPair(1.0, 4.0), "adaptive", 10)


# -- diagnostics --------------------------------------------------------------

def _set(theta, w):
    n = len(w)
    return SampleSet(np.asarray(theta, float).reshape(n, 1), np.asarray(w, float), np.zeros(n),
                     -np.ones(n, int), np.ones(n, bool), np.ones(n, int))


def test_diagnostic_constant():
    assert bias_mse_diagnostic(_set(np.full(10, 2.0), np.ones(10)), 0) == (0.0, 0.0)


def test_diagnostic_rejection_mse_matches_replicates():
    P = SyntheticMFProblem()
    gen = np.random.default_rng(10)
    theta, b, _, _ = P.draw(10**6, gen)
    _, mse = bias_mse_diagnostic(_set(theta, b.astype(float)), 0)
    t, p = P._grid()
    post_var = np.sum(p * (t - P.posterior_mean) ** 2) / np.sum(p)
    assert mse == pytest.approx(post_var / P.acceptance_rate, rel=0.02)
    N = 1000
    theta, b, _, _ = P.draw((2000, N), gen)
    est = (b * theta).sum(axis=1) / b.sum(axis=1)
    assert N * np.mean((est - P.posterior_mean) ** 2) == pytest.approx(mse, rel=0.1)
