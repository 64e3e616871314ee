"""Command-line interface: ``mfmlmc simulate | infer | tune | models export | bench``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from .abc import abc_rejection, target_from_spec
from .bench import BenchConfig, run_benchmark, write_outputs
from .exceptions import (AcceptanceRateError, AllocationError, ConfigurationError,
                         DegenerateWeightsError)
from .mf import ContinuationProbs, FidelityPair, mf_abc
from .mfmlmc import ADAPTIVE, LevelPlan, mf_mlmc_abc, mf_mlmc_pipeline, tune_tau_sequence
from .mlmc import ThresholdSchedule, mlmc_abc, mlmc_pipeline
from .models import BENCHMARKS, SCALES, export_benchmark, load_problem_config
from .network import ReactionNetwork
from .rng import RngStream
from .simulation import (ObservationModel, simulate_exact, simulate_observations,
                         simulate_tau_leap)


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args):
    net = ReactionNetwork.from_json(args.model)
    theta = _floats(args.theta) if args.theta else []
    root = RngStream(args.seed)
    if args.obs_config:
        with open(args.obs_config) as fh:
            obs = ObservationModel.from_dict(json.load(fh), net.species)
        T = args.T if args.T is not None else obs.times_array[-1]
        Y, _, _ = simulate_observations(net, theta, obs, args.t0, T, root.child(0),
                                        root.child(1), args.tau)
        names = [net.species[i] for i in obs.observed_indices]
        rows = [[repr(float(t)), *(repr(float(v)) for v in y)] for t, y in zip(obs.obs_times, Y)]
    else:
        if args.T is None:
            raise ConfigurationError("--T is required without --obs-config")
        if args.tau is None:
            traj = simulate_exact(net, theta, args.t0, args.T, root.child(0))
        else:
            traj = simulate_tau_leap(net, theta, args.t0, args.T, args.tau, root.child(0))
        names = list(net.species)
        rows = [[repr(float(t)), *(str(int(v)) for v in x)]
                for t, x in zip(traj.times, traj.states)]
    _write_rows(args.out, ["time", *names], rows)
    return 0


# -- infer --------------------------------------------------------------------

def _schedule(args, config, epsL):
    eps1 = args.eps1 if args.eps1 is not None else config.get("epsilon_1", epsL)
    if args.m is not None:
        L = max(2, int(round(1 + math.log(eps1 / epsL) / math.log(args.m))))
        return ThresholdSchedule.geometric(eps1, epsL, L)
    return ThresholdSchedule.geometric(eps1, epsL, args.L)


def _level_rows(report, extra=None):
    rows = []
    for i, c in enumerate(report.per_level):
        row = [c.level, repr(c.epsilon), c.n_samples, repr(c.contribution), repr(c.cost)]
        if extra is not None:
            e = extra[i]
            row += [repr(e["eta"][0]), repr(e["eta"][1]), repr(e.get("phi", float("nan"))),
                    repr(e.get("mean_weight", c.mean_weight)),
                    repr(e.get("expected_cost", float("nan")))]
        rows.append(row)
    return rows


def cmd_infer(args):
    problem, config = load_problem_config(args.config, args.cost_model)
    epsL = args.epsilon if args.epsilon is not None else (args.epsL or config["epsilon"])
    problem = problem.with_epsilon(epsL)
    target = target_from_spec(config.get("target", {"type": "mean", "index": 0}))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    N = args.N if args.N is not None else int(config.get("N", 100))
    rng = RngStream(seed)
    tau = args.tau if args.tau is not None else str(config.get("tau", ""))
    os.makedirs(args.out, exist_ok=True)
    level_extra = None
    if args.method == "rejection":
        report, samples = abc_rejection(problem, target, N, rng)
    elif args.method == "mf":
        eta = ADAPTIVE if args.adaptive else ContinuationProbs(args.eta1, args.eta2)
        pair = FidelityPair(_floats(tau)[0], epsL, args.epsilon_tilde)
        report, samples = mf_abc(problem, pair, eta, target, N, rng, args.burn_in, args.eta_min)
    elif args.method == "mlmc":
        sch = _schedule(args, config, epsL)
        if args.target_h is None and args.anchor_NL is None:
            report, res = mlmc_abc(problem, sch, N, target, rng)
        else:
            report, res = mlmc_pipeline(problem, sch, target, rng, args.trial_n, args.target_h,
                                        args.anchor_NL)
        samples = res.samples
    else:
        sch = _schedule(args, config, epsL)
        taus = _floats(tau)
        eta = ADAPTIVE if args.adaptive else ContinuationProbs(args.eta1, args.eta2)
        if args.target_h is None and args.anchor_NL is None:
            plan = LevelPlan(sch.epsilons, taus, N, eta)
            report, res = mf_mlmc_abc(problem, plan, target, rng, burn_in=args.burn_in,
                                      eta_min=args.eta_min)
            level_extra = [{"eta": e} for e in report.info["eta"]]
        else:
            report, res = mf_mlmc_pipeline(problem, sch, taus, target, rng, args.trial_n,
                                           args.target_h, args.anchor_NL, eta,
                                           burn_in=args.burn_in, eta_min=args.eta_min)
            level_extra = report.info["level_stats"]
        samples = res.samples
    report.to_json(os.path.join(args.out, "report.json"))
    names = problem.network.free_param_names
    if isinstance(samples, list):
        header = ["level", "epsilon", "N", "contribution", "cost"]
        if level_extra is not None:
            header += ["eta1", "eta2", "phi", "mean_weight", "expected_cost"]
        _write_rows(os.path.join(args.out, "levels.csv"), header,
                    _level_rows(report, level_extra))
        for S in samples:
            S.to_csv(os.path.join(args.out, f"samples_level{S.level}.csv"), names)
    else:
        samples.to_csv(os.path.join(args.out, "samples.csv"), names)
    print(json.dumps({"estimate": report.estimate, "variance": report.variance_estimate,
                      "total_cost": report.total_cost}))
    return 0


# -- tune ---------------------------------------------------------------------

def cmd_tune(args):
    problem, config = load_problem_config(args.config, args.cost_model)
    target = target_from_spec(config.get("target", {"type": "mean", "index": 0}))
    eps = _floats(args.epsilons) if args.epsilons else [config["epsilon"]]
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    res = tune_tau_sequence(problem, _floats(args.taus), eps, args.N, target, RngStream(seed),
                            args.burn_in, args.eta_min)
    rows = [[repr(r["epsilon"]), repr(r["tau"]), repr(r["total_cost"]), repr(r["eta1"]),
             repr(r["eta2"])] for r in res.rows()]
    _write_rows(args.out, ["epsilon", "tau", "total_cost", "eta1", "eta2"], rows)
    print(json.dumps({"per_epsilon": dict(zip(map(str, res.epsilons), res.per_epsilon)),
                      "shared": res.shared}))
    return 0


# -- models / bench -----------------------------------------------------------

def cmd_models_export(args):
    paths = export_benchmark(args.id, args.scale, args.out, args.seed, args.sigma)
    print(json.dumps(paths))
    return 0


def cmd_bench(args):
    cfg = BenchConfig.from_json(args.config)

    def progress(row):
        if args.verbose:
            print(f"{row['method']} h2={row['h2']:.3g} r={row['replicate']} "
                  f"est={row['estimate']:.6g} cost={row['cost']:.6g}", file=sys.stderr)

    run = run_benchmark(cfg, progress)
    write_outputs(run, args.out)
    print(json.dumps({m: f.gamma for m, f in run.fits().items()}))
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfmlmc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one path of a model")
    s.add_argument("--model", required=True)
    s.add_argument("--theta", default="")
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--T", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tau", type=float, help="tau-leaping step; exact simulation if absent")
    s.add_argument("--obs-config", help="observation JSON: observed, sigma, times")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("infer", help="estimate a posterior expectation")
    i.add_argument("--config", required=True, help="problem JSON")
    i.add_argument("--method", choices=["rejection", "mf", "mlmc", "mfmlmc"], required=True)
    i.add_argument("--out", required=True, help="output directory")
    i.add_argument("--seed", type=int)
    i.add_argument("--N", type=int)
    i.add_argument("--epsilon", type=float)
    i.add_argument("--cost-model", choices=["time", "draws"])
    i.add_argument("--tau", help="time step, or comma list per level")
    i.add_argument("--epsilon-tilde", type=float)
    i.add_argument("--eta1", type=float, default=1.0)
    i.add_argument("--eta2", type=float, default=1.0)
    i.add_argument("--adaptive", action="store_true")
    i.add_argument("--burn-in", type=int)
    i.add_argument("--eta-min", type=float, default=0.01)
    i.add_argument("--eps1", type=float)
    i.add_argument("--epsL", type=float)
    g = i.add_mutually_exclusive_group()
    g.add_argument("--m", type=float)
    g.add_argument("--L", type=int)
    i.add_argument("--trial-n", type=int, default=100)
    h = i.add_mutually_exclusive_group()
    h.add_argument("--target-h", type=float)
    h.add_argument("--anchor-NL", type=int)
    i.set_defaults(func=cmd_infer)

    t = sub.add_parser("tune", help="sweep tau with adaptive multifidelity sampling")
    t.add_argument("--config", required=True)
    t.add_argument("--taus", required=True, help="comma list")
    t.add_argument("--epsilons", help="comma list (default: config epsilon)")
    t.add_argument("--N", type=int, default=10000)
    t.add_argument("--seed", type=int)
    t.add_argument("--burn-in", type=int)
    t.add_argument("--eta-min", type=float, default=0.01)
    t.add_argument("--cost-model", choices=["time", "draws"])
    t.add_argument("--out", required=True, help="CSV path")
    t.set_defaults(func=cmd_tune)

    m = sub.add_parser("models", help="built-in benchmark models")
    msub = m.add_subparsers(dest="models_command", required=True)
    e = msub.add_parser("export", help="write model JSON, data CSV and problem config")
    e.add_argument("--id", choices=BENCHMARKS, required=True)
    e.add_argument("--scale", choices=SCALES, default="desk")
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--sigma", type=float)
    e.set_defaults(func=cmd_models_export)

    b = sub.add_parser("bench", help="run a method comparison sweep")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--verbose", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DegenerateWeightsError, AcceptanceRateError,
            AllocationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
