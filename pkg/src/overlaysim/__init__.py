"""overlaysim: superpositions of Bernoulli random-graph layers.

Simulation of multilayer overlay graphs with correlated layer sizes and
strengths, exact finite-support numerics for their limiting degree laws,
clustering coefficients and spectra, giant components, and site/bond
percolation including the double phase transition of bounded-average-
degree power-law layers.
"""

from .pmf import (
    Pmf,
    UndefinedDistributionError,
    NonConvergenceError,
    binomial_pmf,
    poisson_pmf,
    convolve,
    tv_distance,
    compound_poisson,
    cpoi_mixture_merge,
    cpoi_perturbation_bound,
    connectivity_prob,
    bin_plus,
    expected_transitive_degree,
)
from .layers import (
    LayerType,
    LayerTypeDistribution,
    PowerLawFamily,
    CrossMoment,
    cross_moment,
    mixed_binomial,
    mixed_bin_plus,
    power_law_distribution,
    truncate_sizes,
    site_thinned,
    bond_scaled,
)
from .limits import (
    ModelLimit,
    GrowthReport,
    PowerLawPrediction,
    limiting_degree_distribution,
    clustering_coefficient,
    clustering_spectrum,
    gw_survival,
    giant_fraction,
    percolated_limits,
    r_naught,
    theta_one,
    theta_two_diagnostic,
    power_law_predictions,
)
from .config import ExperimentConfig, PercolationSpec, ConfigError
from .sampling import (
    OverlayGraph,
    generate,
    site_percolate,
    bond_percolate_overlay,
    bond_percolate_layerwise,
    coupled_bond_pair,
)
from .stats import (
    ComponentSummary,
    empirical_degree_distribution,
    triangle_count,
    per_node_triangles,
    global_clustering,
    empirical_clustering_spectrum,
    components,
)
from .explore import (
    ExplorationTrace,
    LayerIndex,
    GuaranteeViolation,
    restricted_explore,
    extract_disjoint,
    balanced_explore,
    gw_queue_tail,
)

__version__ = "0.1.0"
