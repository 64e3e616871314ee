import json

import numpy as np
import pytest

from mfmlmc.exceptions import ConfigurationError
from mfmlmc.models import (BENCHMARKS, build_benchmark, desk_epsilon, export_benchmark,
                           generate_data, load_problem_config, read_data_csv)
from mfmlmc.network import ReactionNetwork, propensity
from mfmlmc.rng import RngStream
from mfmlmc.simulation import simulate_exact, simulate_observations, state_at


def full(spec):
    return spec.network.full_params(spec.theta_true)


def named(spec):
    net = spec.network
    return dict(zip(net.species, net.initial_state))


# -- paper-scale parameterisations --------------------------------------------

def test_michaelis_menten_paper():
    spec = build_benchmark("michaelis_menten", "paper")
    assert named(spec) == {"E": 1000, "S": 1000, "ES": 0, "P": 0}
    np.testing.assert_array_equal(spec.theta_true, [0.001, 0.005, 0.01])
    assert spec.obs_model.obs_times == (20.0, 40.0, 60.0, 80.0)
    assert spec.obs_model.sigma == 2.0
    assert build_benchmark("michaelis_menten", "paper", sigma=10.0).obs_model.sigma == 10.0
    np.testing.assert_array_equal(spec.prior.lower, [0, 0, 0])
    np.testing.assert_array_equal(spec.prior.upper, [0.003, 0.0015, 0.05])
    assert spec.network.n_reactions == 3


def test_repressilator_paper():
    spec = build_benchmark("repressilator", "paper")
    assert named(spec) == {"M1": 0, "M2": 0, "M3": 0, "P1": 40, "P2": 20, "P3": 60}
    np.testing.assert_array_equal(full(spec), [1.0, 1000.0, 20.0, 2.0, 5.0, 1.0])
    assert spec.network.free_param_names == ["K", "n"]
    assert spec.obs_model.obs_times == tuple(float(i) for i in range(1, 11))
    assert spec.obs_model.sigma == 10.0
    np.testing.assert_array_equal(spec.prior.lower, [10, 1])
    np.testing.assert_array_equal(spec.prior.upper, [30, 4])


def test_mapk2_paper():
    spec = build_benchmark("mapk2", "paper")
    x0 = named(spec)
    assert (x0["E"], x0["X"], x0["Y"], x0["P1"], x0["P2"]) == (94, 757, 567, 32, 32)
    assert all(x0[s] == 0 for s in ("XE", "Xs", "XsP1", "XsY", "Ys", "YsP2"))
    k = full(spec)
    expected = [0.001, 0.001 / 120, 0.18, 0.001, 0.001 / 22, 0.3,
                0.0001, 0.0001 / 110, 0.2, 0.001, 0.001 / 22, 0.3]
    np.testing.assert_allclose(k, expected, rtol=1e-15)
    assert spec.network.n_reactions == 12
    assert spec.network.free_param_names == ["k2", "k3", "k5", "k6", "k8", "k9", "k11", "k12"]
    assert spec.obs_model.obs_times == tuple(4.0 * i for i in range(1, 51))
    assert spec.obs_model.sigma == 10.0


@pytest.mark.parametrize("id", BENCHMARKS)
def test_desk_scale_divides_populations(id):
    paper, desk = build_benchmark(id, "paper"), build_benchmark(id, "desk")
    np.testing.assert_array_equal(np.round(np.array(paper.network.initial_state) / 10),
                                  desk.network.initial_state)
    assert desk.T == paper.T and desk.prior == paper.prior
    assert desk.obs_model.obs_times == paper.obs_model.obs_times


def test_desk_epsilons():
    assert desk_epsilon(300.0) == 30.0
    assert desk_epsilon(500.0, "repressilator") == pytest.approx(71.0)
    eps = build_benchmark("repressilator", "desk").epsilons
    assert eps["epsilon_L"] == pytest.approx(71.0)
    xs = [100.0, 200.0, 420.0, 1600.0, 3000.0]
    ys = [desk_epsilon(x, "repressilator") for x in xs]
    assert np.all(np.diff(ys) > 0)


@pytest.mark.parametrize("bad", [("nope", "desk"), ("repressilator", "huge")])
def test_unknown_benchmark(bad):
    with pytest.raises(ConfigurationError):
        build_benchmark(*bad)


# -- invariants ---------------------------------------------------------------

@pytest.mark.parametrize("id", BENCHMARKS)
@pytest.mark.parametrize("scale", ["paper", "desk"])
def test_json_round_trip(id, scale, tmp_path):
    net = build_benchmark(id, scale).network
    net.to_json(tmp_path / "m.json")
    back = ReactionNetwork.from_json(tmp_path / "m.json")
    assert back.to_dict() == net.to_dict()
    x = np.array(net.initial_state)
    theta = build_benchmark(id, scale).theta_true
    for j in range(net.n_reactions):
        assert propensity(back, x, theta, j) == propensity(net, x, theta, j)


@pytest.mark.parametrize("id", BENCHMARKS)
def test_desk_reactions_reachable(id):
    spec = build_benchmark(id, "desk")
    net = spec.network
    fired = np.zeros(net.n_reactions, bool)
    for seed in range(3):
        tr = simulate_exact(net, spec.theta_true, spec.t0, spec.T, RngStream(seed))
        for x in tr.states[:: max(1, len(tr.states) // 400)]:
            fired |= [propensity(net, x, spec.theta_true, j) > 0 for j in range(net.n_reactions)]
    assert fired.all()


@pytest.mark.parametrize("id", BENCHMARKS)
def test_generate_data_deterministic(id):
    spec = build_benchmark(id, "desk")
    a, b = generate_data(spec), generate_data(spec)
    np.testing.assert_array_equal(a, b)
    assert a.shape == spec.obs_model.shape
    assert not np.array_equal(a, generate_data(spec, seed=1))


def test_generate_data_noise_free_limit():
    spec = build_benchmark("michaelis_menten", "desk", sigma=1e-12)
    Y = generate_data(spec, seed=3)
    root = RngStream(3)
    tr = simulate_exact(spec.network, spec.theta_true, 0.0, spec.T, root.child(0))
    true = [state_at(tr, t).counts[3] for t in spec.obs_model.obs_times]
    np.testing.assert_allclose(Y[:, 0], true, atol=1e-6)


def test_michaelis_menten_generating_path_conserves_enzyme():
    spec = build_benchmark("michaelis_menten", "paper")
    tr = simulate_exact(spec.network, spec.theta_true, 0.0, spec.T,
                        RngStream(20211).child(0))
    E, S, ES, P = tr.states.T
    assert np.all(E + ES == 1000)
    assert np.all(S + ES + P == 1000)


def test_repressilator_data_shape():
    spec = build_benchmark("repressilator", "desk")
    Y, _, _ = simulate_observations(spec.network, spec.theta_true, spec.obs_model, 0.0,
                                    spec.T, RngStream(0), RngStream(1))
    assert Y.shape == (10, 3)


# -- export -------------------------------------------------------------------

@pytest.mark.parametrize("id", BENCHMARKS)
def test_export_and_load(id, tmp_path):
    paths = export_benchmark(id, "desk", tmp_path)
    spec = build_benchmark(id, "desk")
    problem, cfg = load_problem_config(paths["problem"], cost_model="draws")
    np.testing.assert_allclose(problem.data, generate_data(spec))
    assert problem.epsilon == pytest.approx(spec.epsilons["epsilon_L"])
    assert problem.network.to_dict() == spec.network.to_dict()
    assert problem.prior == spec.prior
    assert cfg["theta_true"] == spec.theta_true.tolist()
    times, names, Y = read_data_csv(paths["data"])
    assert list(times) == list(spec.obs_model.obs_times)
    assert names == [spec.network.species[i] for i in spec.obs_model.observed_indices]
    assert json.loads((tmp_path / "problem.json").read_text())["benchmark"] == id
