"""Chemical reaction network models and propensity evaluation.

A network is a list of reactions, each a pair of reactant/product
stoichiometries plus a rate law.  Rate-law coefficients are either numeric
constants or references into the model's full parameter vector; the entries of
that vector listed as ``fixed`` carry constant values and the remaining
entries, in ascending index order, form the free parameter vector ``theta``
that inference operates on.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .exceptions import ConfigurationError

# math.perm is exact; above this bound fall back to a float falling factorial.
_EXACT_COUNT_BOUND = 1 << 20

MASS_ACTION = 0
HILL = 1


@dataclass(frozen=True)
class Param:
    """Reference to entry ``index`` of the full parameter vector."""

    index: int


Coef = Union[float, Param]


def _coef_to_json(c: Coef):
    return {"param": c.index} if isinstance(c, Param) else float(c)


def _coef_from_json(obj) -> Coef:
    if isinstance(obj, Mapping):
        return Param(int(obj["param"]))
    return float(obj)


@dataclass(frozen=True)
class MassAction:
    k: Coef

    def coefficients(self):
        return (self.k,)


@dataclass(frozen=True)
class Hill:
    """Repressive Hill rate ``alpha0 + alpha / (1 + (P / K)**n)``.

    ``P`` is the copy number of species ``repressor``.  The rate multiplies the
    mass-action combinatorial factor of the reaction's reactants (1 if none).
    """

    alpha0: Coef
    alpha: Coef
    K: Coef
    n: Coef
    repressor: int

    def coefficients(self):
        return (self.alpha0, self.alpha, self.K, self.n)


RateLaw = Union[MassAction, Hill]


@dataclass(frozen=True)
class Stoichiometry:
    reactant_counts: tuple
    product_counts: tuple

    def __post_init__(self):
        r = tuple(int(v) for v in self.reactant_counts)
        p = tuple(int(v) for v in self.product_counts)
        if len(r) != len(p):
            raise ConfigurationError("reactant and product vectors differ in length")
        if min(r + p, default=0) < 0:
            raise ConfigurationError("stoichiometric coefficients must be non-negative")
        object.__setattr__(self, "reactant_counts", r)
        object.__setattr__(self, "product_counts", p)

    @property
    def net_change(self) -> np.ndarray:
        return np.subtract(self.product_counts, self.reactant_counts)


@dataclass(frozen=True)
class Reaction:
    stoichiometry: Stoichiometry
    rate: RateLaw


@dataclass(frozen=True)
class State:
    counts: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class Kinetics:
    """Flat array form of a network bound to one parameter vector."""

    reactants: np.ndarray   # (M, S) int64
    net: np.ndarray         # (M, S) int64
    kind: np.ndarray        # (M,) int64
    rate: np.ndarray        # (M,) float64, mass-action constants
    hill: np.ndarray        # (M, 4) float64, alpha0, alpha, K, n
    repressor: np.ndarray   # (M,) int64


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """Immutable reaction network.

    Parameters
    ----------
    species : sequence of str
    reactions : sequence of Reaction
    initial_state : sequence of int
    n_params : int
        Length of the full parameter vector.
    fixed : mapping of int to float
        Entries of the full parameter vector held constant.
    param_names : sequence of str, optional
    """

    species: tuple
    reactions: tuple
    initial_state: tuple
    n_params: int = 0
    fixed: Mapping[int, float] = field(default_factory=dict)
    param_names: tuple = ()

    def __post_init__(self):
        S = len(self.species)
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "initial_state", tuple(int(v) for v in self.initial_state))
        object.__setattr__(self, "fixed", {int(k): float(v) for k, v in dict(self.fixed).items()})
        object.__setattr__(self, "param_names", tuple(self.param_names))
        if len(set(self.species)) != S:
            raise ConfigurationError("duplicate species names")
        if len(self.initial_state) != S:
            raise ConfigurationError(
                f"initial state has {len(self.initial_state)} entries for {S} species")
        if min(self.initial_state, default=0) < 0:
            raise ConfigurationError("initial state must be non-negative")
        if self.param_names and len(self.param_names) != self.n_params:
            raise ConfigurationError("param_names length must equal n_params")
        for i in self.fixed:
            if not 0 <= i < self.n_params:
                raise ConfigurationError(f"fixed parameter index {i} out of range")
        for j, rx in enumerate(self.reactions):
            st = rx.stoichiometry
            if len(st.reactant_counts) != S:
                raise ConfigurationError(f"reaction {j}: stoichiometry length != species count")
            for c in rx.rate.coefficients():
                if isinstance(c, Param) and not 0 <= c.index < self.n_params:
                    raise ConfigurationError(
                        f"reaction {j}: parameter index {c.index} >= {self.n_params}")
            if isinstance(rx.rate, Hill) and not 0 <= rx.rate.repressor < S:
                raise ConfigurationError(f"reaction {j}: repressor index out of range")

        M = len(self.reactions)
        reac = np.zeros((M, S), dtype=np.int64)
        net = np.zeros((M, S), dtype=np.int64)
        kind = np.zeros(M, dtype=np.int64)
        rep = np.zeros(M, dtype=np.int64)
        # (M, 5) coefficient sources: constant value and parameter index (-1 = const)
        const = np.zeros((M, 5))
        src = np.full((M, 5), -1, dtype=np.int64)
        for j, rx in enumerate(self.reactions):
            reac[j] = rx.stoichiometry.reactant_counts
            net[j] = rx.stoichiometry.net_change
            if isinstance(rx.rate, Hill):
                kind[j] = HILL
                rep[j] = rx.rate.repressor
                cols = range(1, 5)
            else:
                cols = range(0, 1)
            for col, c in zip(cols, rx.rate.coefficients()):
                if isinstance(c, Param):
                    src[j, col] = c.index
                else:
                    const[j, col] = c
        for arr in (reac, net, kind, rep, const, src):
            arr.setflags(write=False)
        free = np.array([i for i in range(self.n_params) if i not in self.fixed], dtype=np.int64)
        object.__setattr__(self, "_reac", reac)
        object.__setattr__(self, "_net", net)
        object.__setattr__(self, "_kind", kind)
        object.__setattr__(self, "_rep", rep)
        object.__setattr__(self, "_const", const)
        object.__setattr__(self, "_src", src)
        object.__setattr__(self, "_free", free)

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @property
    def param_count(self) -> int:
        """Dimension of the free parameter vector ``theta``."""
        return len(self._free)

    @property
    def free_indices(self) -> np.ndarray:
        return self._free

    @property
    def free_param_names(self) -> list:
        if not self.param_names:
            return [f"p{i}" for i in self._free]
        return [self.param_names[i] for i in self._free]

    def species_index(self, name: str) -> int:
        return self.species.index(name)

    def full_params(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.param_count:
            raise ConfigurationError(
                f"theta has length {theta.shape[0]}, network expects {self.param_count}")
        full = np.zeros(self.n_params)
        for i, v in self.fixed.items():
            full[i] = v
        full[self._free] = theta
        return full

    def bind(self, theta) -> Kinetics:
        """Resolve every rate-law coefficient for ``theta``."""
        full = self.full_params(theta)
        coef = self._const.copy()
        ref = self._src >= 0
        coef[ref] = full[self._src[ref]]
        if np.any(coef[self._kind == MASS_ACTION, 0] < 0):
            raise ConfigurationError("mass-action rate constants must be non-negative")
        return Kinetics(self._reac, self._net, self._kind, coef[:, 0].copy(),
                        np.ascontiguousarray(coef[:, 1:]), self._rep)

    def initial(self, t0: float = 0.0) -> State:
        return State(np.array(self.initial_state, dtype=np.int64), float(t0))

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        reactions = []
        for rx in self.reactions:
            st = rx.stoichiometry
            entry = {
                "reactants": {s: n for s, n in zip(self.species, st.reactant_counts) if n},
                "products": {s: n for s, n in zip(self.species, st.product_counts) if n},
            }
            if isinstance(rx.rate, Hill):
                entry["rate"] = {
                    "type": "hill",
                    "alpha0": _coef_to_json(rx.rate.alpha0),
                    "alpha": _coef_to_json(rx.rate.alpha),
                    "K": _coef_to_json(rx.rate.K),
                    "n": _coef_to_json(rx.rate.n),
                    "repressor": self.species[rx.rate.repressor],
                }
            else:
                entry["rate"] = {"type": "mass_action", "k": _coef_to_json(rx.rate.k)}
            reactions.append(entry)
        params = {"count": self.n_params,
                  "fixed": {str(k): v for k, v in sorted(self.fixed.items())}}
        if self.param_names:
            params["names"] = list(self.param_names)
        return {
            "species": list(self.species),
            "initial_state": list(self.initial_state),
            "params": params,
            "reactions": reactions,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReactionNetwork":
        try:
            species = list(d["species"])
            index = {s: i for i, s in enumerate(species)}

            def vec(m):
                v = [0] * len(species)
                for s, n in m.items():
                    if s not in index:
                        raise ConfigurationError(f"unknown species {s!r}")
                    v[index[s]] = int(n)
                return v

            reactions = []
            for r in d["reactions"]:
                st = Stoichiometry(vec(r.get("reactants", {})), vec(r.get("products", {})))
                rate = r["rate"]
                if rate["type"] == "mass_action":
                    law = MassAction(_coef_from_json(rate["k"]))
                elif rate["type"] == "hill":
                    rep = rate["repressor"]
                    law = Hill(_coef_from_json(rate["alpha0"]), _coef_from_json(rate["alpha"]),
                               _coef_from_json(rate["K"]), _coef_from_json(rate["n"]),
                               index[rep] if isinstance(rep, str) else int(rep))
                else:
                    raise ConfigurationError(f"unknown rate law type {rate['type']!r}")
                reactions.append(Reaction(st, law))
            params = d.get("params", {})
            return cls(species, reactions, d["initial_state"],
                       n_params=int(params.get("count", 0)),
                       fixed={int(k): float(v) for k, v in params.get("fixed", {}).items()},
                       param_names=tuple(params.get("names", ())))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed model description: {exc}") from exc

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=2, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "ReactionNetwork":
        """Parse a model from a JSON string or a path to a JSON file."""
        if isinstance(source, str) and source.lstrip().startswith("{"):
            return cls.from_dict(json.loads(source))
        with open(source) as fh:
            return cls.from_dict(json.load(fh))


def _falling_factorial(x: int, nu: int) -> float:
    if x < _EXACT_COUNT_BOUND:
        return float(math.perm(x, nu))
    out = 1.0
    for q in range(nu):
        out *= x - q
    return out


def hill_rate(alpha0, alpha, K, n, p) -> float:
    p = max(float(p), 0.0)
    return alpha0 + alpha / (1.0 + (p / K) ** n)


def propensity(network: ReactionNetwork, state, theta, j: int) -> float:
    """Propensity of reaction ``j`` at ``state`` for free parameters ``theta``.

    Mass action: ``k * prod_i nu_i! * C(X_i, nu_i)``.  States holding any
    negative count give 0.
    """
    if not 0 <= j < network.n_reactions:
        raise ConfigurationError(f"reaction index {j} out of range")
    x = _counts(network, state)
    kin = network.bind(theta)
    return _propensity_bound(kin, x, j)


def total_propensity(network: ReactionNetwork, state, theta) -> float:
    x = _counts(network, state)
    kin = network.bind(theta)
    return float(sum(_propensity_bound(kin, x, j) for j in range(network.n_reactions)))


def _counts(network, state) -> np.ndarray:
    x = np.asarray(state.counts if isinstance(state, State) else state, dtype=np.int64)
    if x.shape != (network.n_species,):
        raise ConfigurationError(
            f"state has shape {x.shape}, network has {network.n_species} species")
    return x


def _propensity_bound(kin: Kinetics, x: np.ndarray, j: int) -> float:
    if np.any(x < 0):
        return 0.0
    if kin.kind[j] == HILL:
        a0, a, K, n = kin.hill[j]
        rate = hill_rate(a0, a, K, n, x[kin.repressor[j]])
    else:
        rate = float(kin.rate[j])
    for i, nu in enumerate(kin.reactants[j]):
        if nu:
            if x[i] < nu:
                return 0.0
            rate *= _falling_factorial(int(x[i]), int(nu))
    return rate


def make_network(species: Sequence[str], reactions: Sequence[tuple], initial_state,
                 n_params: int = 0, fixed=None, param_names=()) -> ReactionNetwork:
    """Convenience constructor.

    ``reactions`` holds ``(reactants, products, rate)`` triples where the
    stoichiometries are ``{species: count}`` mappings.
    """
    index = {s: i for i, s in enumerate(species)}
    rxs = []
    for reactants, products, rate in reactions:
        r = [0] * len(species)
        p = [0] * len(species)
        for s, n in reactants.items():
            r[index[s]] = n
        for s, n in products.items():
            p[index[s]] = n
        rxs.append(Reaction(Stoichiometry(r, p), rate))
    return ReactionNetwork(tuple(species), tuple(rxs), tuple(initial_state),
                           n_params=n_params, fixed=fixed or {}, param_names=tuple(param_names))
