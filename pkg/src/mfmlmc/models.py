"""Built-in benchmark networks and synthetic data generation.

Three benchmarks are available, each at two scales:

``paper``
    Full copy numbers as in the original studies.
``desk``
    Copy numbers, production rates and observation noise divided by 10 with
    priors and time horizons unchanged; cheap enough for routine testing.
    A paper-scale threshold maps to the desk threshold with the same
    prior-predictive acceptance rate (see :func:`desk_epsilon`).

Datasets are generated from one exact trajectory with a fixed canonical
seed per benchmark, so every run sees identical data.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .abc import ABCProblem, Prior
from .exceptions import ConfigurationError
from .network import Hill, MassAction, Param, ReactionNetwork, make_network
from .rng import RngStream
from .simulation import ObservationModel, simulate_observations

BENCHMARKS = ("michaelis_menten", "repressilator", "mapk2")
SCALES = ("paper", "desk")
DESK_FACTOR = 10.0

CANONICAL_SEEDS = {"michaelis_menten": 20211, "repressilator": 20212, "mapk2": 20213}


@dataclass(frozen=True, eq=False)
class BenchmarkSpec:
    """Fully parameterised benchmark problem (without data)."""

    id: str
    scale: str
    network: ReactionNetwork
    obs_model: ObservationModel
    theta_true: np.ndarray
    prior: Prior
    t0: float = 0.0
    T: float = 0.0
    epsilons: dict = field(default_factory=dict)
    tau: float = 0.0

    def problem(self, epsilon: float, data=None, cost_model: str = "time",
                seed: int | None = None) -> ABCProblem:
        """ABC problem at threshold ``epsilon`` with the canonical (or given) data."""
        if data is None:
            data = generate_data(self, seed)
        return ABCProblem(self.network, self.obs_model, data, self.prior, float(epsilon),
                          self.t0, self.T, cost_model=cost_model)


# Paper-scale threshold -> desk threshold with equal prior-predictive
# acceptance probability (canonical data, 4000 paper / 20000 desk prior draws).
# Intrinsic noise shrinks only by sqrt(10) at desk scale, so for the
# repressilator a plain division by 10 would be far too strict.
_DESK_EPSILON_TABLE = {
    "repressilator": ((200.0, 51.49), (350.0, 62.46), (500.0, 71.00), (1600.0, 112.25)),
}


def desk_epsilon(epsilon: float, id: str = "michaelis_menten") -> float:
    """Desk-scale threshold equivalent to a paper-scale ``epsilon``.

    Michaelis-Menten and MAPK use ``epsilon / 10`` (for Michaelis-Menten the
    acceptance rates then agree to within a few percent).  The repressilator
    interpolates a calibration table log-linearly.
    """
    table = _DESK_EPSILON_TABLE.get(id)
    if table is None:
        return epsilon / DESK_FACTOR
    xs, ys = np.log([t[0] for t in table]), np.log([t[1] for t in table])
    x = np.log(epsilon)
    if x <= xs[0] or x >= xs[-1]:
        j = 0 if x <= xs[0] else -2
        slope = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j])
        return float(np.exp(ys[j] + slope * (x - xs[j])))
    return float(np.exp(np.interp(x, xs, ys)))


def _michaelis_menten(scale: str, sigma: float | None):
    pop = 1000 if scale == "paper" else 100
    net = make_network(
        ["E", "S", "ES", "P"],
        [({"E": 1, "S": 1}, {"ES": 1}, MassAction(Param(0))),
         ({"ES": 1}, {"E": 1, "S": 1}, MassAction(Param(1))),
         ({"ES": 1}, {"E": 1, "P": 1}, MassAction(Param(2)))],
        [pop, pop, 0, 0], n_params=3, param_names=("k1", "k2", "k3"))
    if sigma is None:
        sigma = 2.0 if scale == "paper" else 0.2
    obs = ObservationModel((3,), sigma, (20.0, 40.0, 60.0, 80.0))
    prior = Prior((0.0, 0.0, 0.0), (0.003, 0.0015, 0.05))
    eps = {"epsilon_1": 1600.0, "epsilon_L": 300.0, "epsilon_grid": [200, 300, 400, 500, 600]}
    return net, obs, np.array([0.001, 0.005, 0.01]), prior, 0.0, 80.0, eps, 1.0


def _repressilator(scale: str, sigma: float | None):
    f = 1.0 if scale == "paper" else DESK_FACTOR
    species = ["M1", "M2", "M3", "P1", "P2", "P3"]
    # full parameter vector: alpha0, alpha, K, n, beta, gamma
    a0, a, K, n, beta, gamma = (Param(i) for i in range(6))
    reactions = []
    for i in range(3):
        m, p = f"M{i + 1}", f"P{i + 1}"
        repressor = 3 + (i - 1) % 3       # gene i is repressed by protein i-1
        reactions += [
            ({}, {m: 1}, Hill(a0, a, K, n, repressor)),
            ({m: 1}, {m: 1, p: 1}, MassAction(beta)),
            ({p: 1}, {}, MassAction(beta)),
            ({m: 1}, {}, MassAction(gamma)),
        ]
    p0 = [int(round(v / f)) for v in (40, 20, 60)]
    fixed = {0: 1.0 / f, 1: 1000.0 / f, 4: 5.0, 5: 1.0}
    net = make_network(species, reactions, [0, 0, 0, *p0], n_params=6, fixed=fixed,
                       param_names=("alpha0", "alpha", "K", "n", "beta", "gamma"))
    if sigma is None:
        sigma = 10.0 / f
    obs = ObservationModel((3, 4, 5), sigma, tuple(float(t) for t in range(1, 11)))
    prior = Prior((10.0, 1.0), (30.0, 4.0))
    eps = {"epsilon_1": 1600.0, "epsilon_L": 500.0, "epsilon_grid": [200, 350, 500]}
    return net, obs, np.array([20.0, 2.0]), prior, 0.0, 10.0, eps, 0.02


def _mapk2(scale: str, sigma: float | None):
    f = 1.0 if scale == "paper" else DESK_FACTOR
    species = ["E", "X", "XE", "Xs", "P1", "XsP1", "Y", "XsY", "Ys", "P2", "YsP2"]
    k = [Param(i) for i in range(12)]
    reactions = [
        ({"X": 1, "E": 1}, {"XE": 1}, MassAction(k[0])),
        ({"XE": 1}, {"X": 1, "E": 1}, MassAction(k[1])),
        ({"XE": 1}, {"Xs": 1, "E": 1}, MassAction(k[2])),
        ({"Xs": 1, "P1": 1}, {"XsP1": 1}, MassAction(k[3])),
        ({"XsP1": 1}, {"Xs": 1, "P1": 1}, MassAction(k[4])),
        ({"XsP1": 1}, {"X": 1, "P1": 1}, MassAction(k[5])),
        ({"Xs": 1, "Y": 1}, {"XsY": 1}, MassAction(k[6])),
        ({"XsY": 1}, {"Xs": 1, "Y": 1}, MassAction(k[7])),
        ({"XsY": 1}, {"Xs": 1, "Ys": 1}, MassAction(k[8])),
        ({"Ys": 1, "P2": 1}, {"YsP2": 1}, MassAction(k[9])),
        ({"YsP2": 1}, {"Ys": 1, "P2": 1}, MassAction(k[10])),
        ({"YsP2": 1}, {"Y": 1, "P2": 1}, MassAction(k[11])),
    ]
    E0, X0, Y0, P0 = (int(round(v / f)) for v in (94, 757, 567, 32))
    x0 = [E0, X0, 0, 0, P0, 0, Y0, 0, 0, P0, 0]
    k1, k4, k7, k10 = 0.001, 0.001, 0.0001, 0.001
    true_full = [k1, k1 / 120, 0.18, k4, k4 / 22, 0.3, k7, k7 / 110, 0.2, k10, k10 / 22, 0.3]
    fixed = {0: k1, 3: k4, 6: k7, 9: k10}
    net = make_network(species, reactions, x0, n_params=12, fixed=fixed,
                       param_names=tuple(f"k{i + 1}" for i in range(12)))
    if sigma is None:
        sigma = 10.0 / f
    obs = ObservationModel((3, 8), sigma, tuple(4.0 * i for i in range(1, 51)))
    theta = np.array([true_full[i] for i in net.free_indices])
    prior = Prior((0.0,) * 8, (k1, 1.0, k4, 1.0, k7, 1.0, k10, 1.0))
    eps = {"epsilon_1": 1600.0, "epsilon_L": 300.0, "epsilon_grid": [300]}
    return net, obs, theta, prior, 0.0, 200.0, eps, 0.5


_BUILDERS = {"michaelis_menten": _michaelis_menten, "repressilator": _repressilator,
             "mapk2": _mapk2}


def build_benchmark(id: str, scale: str = "desk", sigma: float | None = None) -> BenchmarkSpec:
    """Benchmark components.

    Parameters
    ----------
    id : {"michaelis_menten", "repressilator", "mapk2"}
    scale : {"paper", "desk"}
    sigma : float, optional
        Observation noise override (e.g. 10 for the display variant of
        Michaelis-Menten); the default is the inference setting.

    Notes
    -----
    Threshold defaults in ``epsilons`` are already converted to the chosen
    scale with :func:`desk_epsilon`.
    """
    if id not in _BUILDERS:
        raise ConfigurationError(f"unknown benchmark {id!r}; choose from {BENCHMARKS}")
    if scale not in SCALES:
        raise ConfigurationError(f"unknown scale {scale!r}; choose from {SCALES}")
    net, obs, theta, prior, t0, T, eps, tau = _BUILDERS[id](scale, sigma)
    if scale == "desk":
        eps = {k: ([desk_epsilon(e, id) for e in v] if isinstance(v, list)
                   else desk_epsilon(v, id)) for k, v in eps.items()}
    return BenchmarkSpec(id, scale, net, obs, theta, prior, t0, T, eps, tau)


def generate_data(spec: BenchmarkSpec, seed: int | None = None) -> np.ndarray:
    """One exact trajectory observed with noise; deterministic in ``seed``."""
    seed = CANONICAL_SEEDS.get(spec.id, 0) if seed is None else seed
    root = RngStream(seed)
    Y, _, _ = simulate_observations(spec.network, spec.theta_true, spec.obs_model, spec.t0,
                                    spec.T, root.child(0), root.child(1))
    return Y


def write_data_csv(path, obs_model: ObservationModel, species, Y):
    names = [species[i] for i in obs_model.observed_indices]
    with open(path, "w") as fh:
        fh.write(",".join(["time", *names]) + "\n")
        for t, row in zip(obs_model.obs_times, np.asarray(Y)):
            fh.write(",".join([repr(float(t)), *(repr(float(v)) for v in row)]) + "\n")


def read_data_csv(path):
    """Returns ``(times, species_names, Y)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return arr[:, 0], header[1:], arr[:, 1:]


def export_benchmark(id: str, scale: str, out_dir, seed: int | None = None,
                     sigma: float | None = None) -> dict:
    """Write ``model.json``, ``data.csv`` and ``problem.json`` into ``out_dir``."""
    spec = build_benchmark(id, scale, sigma)
    os.makedirs(out_dir, exist_ok=True)
    Y = generate_data(spec, seed)
    model_path = os.path.join(out_dir, "model.json")
    data_path = os.path.join(out_dir, "data.csv")
    problem_path = os.path.join(out_dir, "problem.json")
    spec.network.to_json(model_path)
    write_data_csv(data_path, spec.obs_model, spec.network.species, Y)
    config = {
        "benchmark": id,
        "scale": scale,
        "model": "model.json",
        "data": "data.csv",
        "observation": spec.obs_model.to_dict(spec.network.species),
        "prior": spec.prior.to_dict(),
        "param_names": spec.network.free_param_names,
        "theta_true": spec.theta_true.tolist(),
        "t0": spec.t0,
        "T": spec.T,
        "epsilon": spec.epsilons["epsilon_L"],
        "epsilon_1": spec.epsilons["epsilon_1"],
        "tau": spec.tau,
        "target": {"type": "mean", "index": 0},
        "seed": 1,
        "N": 100,
        "data_seed": CANONICAL_SEEDS[id] if seed is None else seed,
    }
    with open(problem_path, "w") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    return {"model": model_path, "data": data_path, "problem": problem_path}


def load_problem_config(path, cost_model: str | None = None):
    """Read a ``problem.json`` written by :func:`export_benchmark`.

    Model and data paths are resolved relative to the config file.  Returns
    ``(problem, config)``.
    """
    with open(path) as fh:
        config = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    network = ReactionNetwork.from_json(os.path.join(base, config["model"]))
    obs = ObservationModel.from_dict(config["observation"], network.species)
    _, _, Y = read_data_csv(os.path.join(base, config["data"]))
    problem = ABCProblem(network, obs, Y, Prior.from_dict(config["prior"]),
                         float(config["epsilon"]), float(config.get("t0", 0.0)),
                         config.get("T"), cost_model=cost_model or config.get("cost_model",
                                                                              "time"))
    return problem, config
