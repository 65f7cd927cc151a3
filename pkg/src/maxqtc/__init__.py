"""Low-rank tensor completion from expander-hypergraph samples with a
max-quasinorm penalty."""

from .expander_graphs import (BipartiteGraph, RegularGraph, random_biregular, random_regular,
                              second_eigenvalue, second_singular)
from .experiments import ExperimentSpec, gen_synthetic, run_experiment, sample_observations
from .hypergraph import (HyperedgeSet, QuasiRegularHypergraph, WalkHypergraph,
                         build_quasi_hypergraph, build_walk_hypergraph, count_crossing,
                         mixing_bound_quasi, mixing_bound_regular, mixing_discrepancy)
from .maxqnorm import maxqnorm_upper, sign_decompose
from .solver import SolverConfig, SolverTrace, coordinate_descent, prox_two_inf
from .tensor_core import (DenseTensor, FactorSet, Observations, evaluate, khatri_rao, matricize,
                          mttkrp)

__version__ = "0.1.0"

__all__ = [
    "BipartiteGraph", "RegularGraph", "random_biregular", "random_regular",
    "second_eigenvalue", "second_singular",
    "ExperimentSpec", "gen_synthetic", "run_experiment", "sample_observations",
    "HyperedgeSet", "QuasiRegularHypergraph", "WalkHypergraph", "build_quasi_hypergraph",
    "build_walk_hypergraph", "count_crossing", "mixing_bound_quasi", "mixing_bound_regular",
    "mixing_discrepancy",
    "maxqnorm_upper", "sign_decompose",
    "SolverConfig", "SolverTrace", "coordinate_descent", "prox_two_inf",
    "DenseTensor", "FactorSet", "Observations", "evaluate", "khatri_rao", "matricize", "mttkrp",
]
