"""Coupled exact simulation of reaction-network CTMCs and Monte Carlo
estimation of differences between parameterizations.

The package simulates pairs of continuous-time Markov chains driven by the
same underlying randomness under several couplings (independent, common
random numbers, common reaction paths, locally-restarted reaction paths, and
the split pair chain), evaluates paths on readout grids, and turns path
ensembles into variance trajectories and finite-difference sensitivities
with standard errors. Exact transient oracles (uniformization on a truncated
state space, affine moment ODEs) back the statistical tests.
"""

from .couplings import (
    CoupledPath,
    Partition,
    SimulationExplosion,
    SinglePath,
    SplitRates,
    categorical_select,
    eval_at_grid,
    simulate_crn,
    simulate_crp,
    simulate_general_split,
    simulate_independent,
    simulate_local_crp,
    simulate_single,
    simulate_split,
    split_rates,
    total_intensity,
    uniform_partition,
    validate_coupled_path,
    validate_single_path,
)
from .estimators import (
    Accumulator,
    CouplingSpec,
    EstimateSeries,
    Observable,
    alpha_delta,
    merge,
    sensitivity_fd,
    shared_first_jump_frequency,
    uniform_grid,
    variance_trajectory,
)
from .model import (
    Network,
    ParseError,
    Perturbation,
    ReactionChannel,
    apply_perturbation,
    intensity,
    network_warnings,
    parse_network,
    sample_initial,
    serialize_network,
)
from .oracle import (
    TruncatedSpace,
    build_generator,
    initial_distribution,
    moment_ode_mean,
    transient_distribution,
    transient_expectation,
)
from .streams import PoissonStream, StreamKey, UniformStream, derive_stream

__version__ = "0.1.0"

__all__ = [
    "Accumulator",
    "CoupledPath",
    "CouplingSpec",
    "EstimateSeries",
    "Network",
    "Observable",
    "ParseError",
    "Partition",
    "Perturbation",
    "PoissonStream",
    "ReactionChannel",
    "SimulationExplosion",
    "SinglePath",
    "SplitRates",
    "StreamKey",
    "TruncatedSpace",
    "UniformStream",
    "alpha_delta",
    "apply_perturbation",
    "build_generator",
    "categorical_select",
    "derive_stream",
    "eval_at_grid",
    "initial_distribution",
    "intensity",
    "merge",
    "moment_ode_mean",
    "network_warnings",
    "parse_network",
    "sample_initial",
    "sensitivity_fd",
    "serialize_network",
    "shared_first_jump_frequency",
    "simulate_crn",
    "simulate_crp",
    "simulate_general_split",
    "simulate_independent",
    "simulate_local_crp",
    "simulate_single",
    "simulate_split",
    "split_rates",
    "total_intensity",
    "transient_distribution",
    "transient_expectation",
    "uniform_grid",
    "uniform_partition",
    "validate_coupled_path",
    "validate_single_path",
    "variance_trajectory",
    "__version__",
]
