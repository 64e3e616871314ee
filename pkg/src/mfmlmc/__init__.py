"""Multilevel and multifidelity ABC rejection samplers for stochastic reaction networks."""
from .abc import (ABCProblem, EstimatorReport, LevelContribution, Prior, SampleSet, Target,
                  WeightedMarginalCDF, abc_rejection, as_target, component_mean, indicator,
                  rejection_samples, target_from_spec, weighted_estimate, weighted_variance)
from .bench import (BenchConfig, BenchRun, ConvergenceFit, estimate_marginal_density,
                    fit_convergence, run_benchmark, write_outputs)
from .engine import Engine
from .estimators import MFABC, MFMLMCABC, MLMCABC, RejectionABC
from .exceptions import (AcceptanceRateError, AllocationError, ApproximationUselessError,
                         ConfigurationError, DegenerateWeightsError)
from .mf import (ContinuationProbs, FidelityPair, RocCostSummary, SyntheticMFProblem,
                 TunerState, bias_mse_diagnostic, estimate_summary, mf_abc, mf_samples,
                 mf_weight, optimal_continuation, phi, phi_gradient, tuner_update)
from .mfmlmc import (ADAPTIVE, LevelPlan, MFLevelStats, mf_mlmc_abc, mf_mlmc_pipeline,
                     mf_optimal_allocation, tune_tau_sequence)
from .mlmc import (LevelStats, TelescopeResult, ThresholdSchedule, couple_down,
                   estimate_level_stats, mlmc_abc, mlmc_pipeline, optimal_allocation, telescope)
from .models import BENCHMARKS, build_benchmark, export_benchmark, load_problem_config
from .network import Hill, MassAction, ReactionNetwork, make_network
from .rng import RngStream
from .simulation import (ObservationModel, Trajectory, simulate_exact, simulate_observations,
                         simulate_tau_leap)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
