import numpy as np
import pytest

from mfmlmc.models import build_benchmark
from mfmlmc.network import Hill, MassAction, Param, make_network


def birth(k=5.0):
    return make_network(["X"], [({}, {"X": 1}, MassAction(k))], [0])


def death(k=1.0, x0=100):
    return make_network(["X"], [({"X": 1}, {}, MassAction(k))], [x0])


def dimerisation(x0=50):
    return make_network(["X", "D"], [({"X": 2}, {"D": 1}, MassAction(0.5)),
                                     ({"D": 1}, {"X": 2}, MassAction(0.1))], [x0, 0])


def michaelis_menten(e0=100, s0=100):
    return make_network(
        ["E", "S", "ES", "P"],
        [({"E": 1, "S": 1}, {"ES": 1}, MassAction(Param(0))),
         ({"ES": 1}, {"E": 1, "S": 1}, MassAction(Param(1))),
         ({"ES": 1}, {"E": 1, "P": 1}, MassAction(Param(2)))],
        [e0, s0, 0, 0], n_params=3)


def hill_gene(alpha0=1.0, alpha=1000.0, K=20.0, n=2.0):
    return make_network(["M", "P"], [({}, {"M": 1}, Hill(alpha0, alpha, K, n, 1))], [0, 0])


@pytest.fixture(scope="session")
def mm_desk():
    return build_benchmark("michaelis_menten", "desk")


@pytest.fixture(scope="session")
def mm_problem(mm_desk):
    return mm_desk.problem(mm_desk.epsilons["epsilon_L"], cost_model="draws")


@pytest.fixture(scope="session")
def repressilator_desk():
    return build_benchmark("repressilator", "desk")


def standard_error(x):
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(len(x))


def birth_problem(epsilon=4.0, cost_model="draws"):
    """One-parameter birth process observed at t = 1, 2, 3 with sigma = 1."""
    from mfmlmc.abc import ABCProblem, Prior
    from mfmlmc.simulation import ObservationModel
    net = make_network(["X"], [({}, {"X": 1}, MassAction(Param(0)))], [0], n_params=1)
    obs = ObservationModel((0,), 1.0, (1.0, 2.0, 3.0))
    data = [[5.0], [10.0], [15.0]]
    return ABCProblem(net, obs, data, Prior([1.0], [10.0]), epsilon, cost_model=cost_model)


@pytest.fixture(scope="session")
def cheap_problem():
    return birth_problem()


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, title, ok, detail=""):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.setdefault(number, []).append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        for line in ACCEPTANCE[number]:
            terminalreporter.write_line(line)
