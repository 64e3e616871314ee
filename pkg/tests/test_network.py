import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfmlmc.exceptions import ConfigurationError
from mfmlmc.network import (Hill, MassAction, Param, ReactionNetwork, Stoichiometry,
                            make_network, propensity, total_propensity)

from conftest import hill_gene, michaelis_menten


def test_mass_action_bimolecular():
    net = make_network(["E", "S"], [({"E": 1, "S": 1}, {}, MassAction(0.001))], [1000, 1000])
    assert propensity(net, [1000, 1000], [], 0) == pytest.approx(1000.0)


def _ordered_tuples(x, nu):
    return sum(1 for _ in itertools.permutations(range(x), nu))


def test_mass_action_dimer_matches_ordered_tuples():
    net = make_network(["X"], [({"X": 2}, {}, MassAction(2.0))], [5])
    assert propensity(net, [5], [], 0) == 40.0
    assert propensity(net, [5], [], 0) == 2.0 * _ordered_tuples(5, 2)


@pytest.mark.parametrize("state", [[0, 10], [10, 0], [0, 0]])
def test_missing_reactant_gives_zero(state):
    net = make_network(["A", "B"], [({"A": 1, "B": 1}, {}, MassAction(3.0))], [0, 0])
    assert propensity(net, state, [], 0) == 0.0


@pytest.mark.parametrize("P, expected", [(0, 1001.0), (20, 501.0)])
def test_hill_limits(P, expected):
    assert propensity(hill_gene(), [0, P], [], 0) == pytest.approx(expected)


def test_total_propensity_zero_state():
    assert total_propensity(michaelis_menten(0, 0), [0, 0, 0, 0], [1.0, 1.0, 1.0]) == 0.0


def test_total_propensity_michaelis_menten():
    net = michaelis_menten(1000, 1000)
    assert total_propensity(net, [1000, 1000, 0, 0], [0.001, 0.005, 0.01]) == pytest.approx(1000.0)


def test_single_reaction_total_equals_propensity():
    net = make_network(["X"], [({"X": 3}, {}, MassAction(0.2))], [9])
    assert total_propensity(net, [9], []) == propensity(net, [9], [], 0)


def test_negative_counts_give_zero():
    net = make_network(["X"], [({}, {"X": 1}, MassAction(4.0))], [0])
    assert propensity(net, [-1], [], 0) == 0.0


@pytest.mark.parametrize("bad", [
    lambda: propensity(michaelis_menten(), [1, 2, 3], [1, 1, 1], 0),
    lambda: propensity(michaelis_menten(), [1, 2, 3, 4], [1, 1], 0),
    lambda: propensity(michaelis_menten(), [1, 2, 3, 4], [1, 1, 1], 7),
    lambda: make_network(["X"], [({"X": 1}, {}, MassAction(Param(2)))], [0], n_params=1),
    lambda: Stoichiometry([1, 0], [1]),
    lambda: ReactionNetwork(("X", "X"), (), (0, 0)),
])
def test_configuration_errors(bad):
    with pytest.raises(ConfigurationError):
        bad()


def test_json_round_trip(tmp_path):
    net = make_network(
        ["M", "P", "Q"],
        [({}, {"M": 1}, Hill(Param(0), 1000.0, Param(1), Param(2), 1)),
         ({"M": 1}, {"M": 1, "P": 1}, MassAction(5.0)),
         ({"P": 2}, {"Q": 1}, MassAction(Param(3)))],
        [0, 40, 3], n_params=4, fixed={0: 1.0}, param_names=["a0", "K", "n", "k"])
    path = tmp_path / "model.json"
    net.to_json(path)
    back = ReactionNetwork.from_json(path)
    assert back.to_dict() == net.to_dict()
    assert json.loads(back.to_json()) == json.loads(net.to_json())
    theta = [20.0, 2.0, 0.3]
    for j in range(3):
        assert propensity(back, [7, 20, 1], theta, j) == propensity(net, [7, 20, 1], theta, j)


counts = st.lists(st.integers(0, 40), min_size=4, max_size=4)
rates = st.floats(0.0, 10.0, allow_nan=False)


@given(counts, rates, rates, rates)
def test_propensity_non_negative(x, k1, k2, k3):
    net = michaelis_menten()
    assert all(propensity(net, x, [k1, k2, k3], j) >= 0 for j in range(3))


@given(counts, st.floats(1e-3, 10.0), st.integers(0, 2))
def test_propensity_homogeneous_in_rate(x, k, j):
    net = michaelis_menten()
    theta = np.full(3, k)
    a1 = propensity(net, x, theta, j)
    a2 = propensity(net, x, 2 * theta, j)
    assert a2 == pytest.approx(2 * a1, rel=1e-12, abs=0.0)


@given(st.integers(0, 200), st.integers(0, 200), st.floats(0.1, 5.0))
def test_hill_non_increasing(p, q, n):
    net = hill_gene(n=n)
    lo, hi = sorted((p, q))
    assert propensity(net, [0, hi], [], 0) <= propensity(net, [0, lo], [], 0)


@settings(max_examples=50)
@given(st.lists(st.integers(0, 1), min_size=3, max_size=3), st.lists(st.integers(0, 6),
                                                                     min_size=3, max_size=3))
def test_unit_stoichiometry_brute_force(nu, x):
    k = 0.7
    reactants = {s: n for s, n in zip("ABC", nu) if n}
    net = make_network(list("ABC"), [(reactants, {}, MassAction(k))], [0, 0, 0])
    # ordered choice of one distinct molecule per required species
    brute = k * np.prod([len(list(itertools.permutations(range(xi), ni)))
                         for xi, ni in zip(x, nu)])
    assert propensity(net, x, [], 0) == pytest.approx(brute)
    assert propensity(net, x, [], 0) == pytest.approx(k * np.prod([xi for xi, ni in zip(x, nu)
                                                                    if ni]))
