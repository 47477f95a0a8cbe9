"""Gaussian structural models over chain graphs.

Chain graphs mix directed and undirected edges: arrows carry the causal
ordering between blocks of nodes, undirected edges carry dependence
between the error terms inside a block. This package provides the
graphical layer (validity, separation, Markov equivalence, equivalence
class traversal), the Gaussian model layer (simulation, equal-variance
rescaling, conditioning), maximum-likelihood fitting by alternating
regression with iterative proportional fitting, and structure
identification: under equal error variances the generating graph itself,
not just its Markov equivalence class, is recoverable from the
observational distribution.
"""

from .estimation import (
    ComponentFit,
    FitConfig,
    FitResult,
    IpfResult,
    dispersion,
    fit,
    fit_component,
    gaussian_average_loglik,
    ipf,
    moment_matrix,
    penalized_score,
)
from .experiments import ExperimentConfig, ExperimentReport, run_experiment, write_report
from .graphs import (
    CapacityError,
    ChainGraph,
    GraphStructureError,
    MagnifiedGraph,
    Triplex,
    adjacencies,
    canonical_key,
    chain_components,
    determined_closure,
    enumerate_chain_graphs,
    equivalence_class,
    feasible_merge,
    feasible_split,
    find_semidirected_cycle,
    is_chain_graph,
    magnify,
    markov_equivalent,
    random_chain_graph,
    relatives,
    structural_hamming_distance,
    triplexes,
)
from .io import (
    graph_from_dict,
    graph_hash,
    graph_to_dict,
    read_covariance,
    read_dataset,
    read_graph,
    read_parameters,
    write_covariance,
    write_dataset,
    write_graph,
    write_parameters,
)
from .search import (
    ALL_OPERATORS,
    IdentifyResult,
    MemberFit,
    SearchConfig,
    SkeletonResult,
    greedy_search,
    identify_in_class,
    skeleton_recovery,
    two_phase,
)
from .sem import (
    Dataset,
    GaussianDistribution,
    SemParameters,
    compose_seed,
    condition,
    faithful_parameters,
    gaussian_ci,
    implied_distribution,
    random_parameters,
    rescale_equal_variances,
    sample,
)
from .separation import (
    SeparationQuery,
    all_separations,
    brute_force_separated,
    separated,
    separated_magnified,
)

__version__ = "0.1.0"
