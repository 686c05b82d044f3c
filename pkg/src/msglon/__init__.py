"""msglon: max-of-Gaussians landscapes with analytically built optima networks.

The package generates tunable continuous test landscapes, enumerates their
local optima and basins in closed form, derives local optima networks and
their summary features, evolves instance sets with diverse network shapes
via novelty search, and benchmarks DE / CMA-ES against those features.
"""

from .analysis import (
    CorrelationRow,
    CorpusEntry,
    CoverageGrid,
    correlation_table,
    coverage,
    coverage_of_features,
    export_dataset,
    read_dataset,
    spearman,
)
from .bench import BenchProtocol, InstancePerformance, TrialRecord, measure
from .cmaes import run_cmaes
from .de import run_de
from .errors import CapabilityError, IoError, MsglonError, ValidationError
from .gd import BoaComparison, GdConfig, compare_basins, difference_rate, gd_converge
from .landscape import (
    GaussianComponent,
    LocalOptimumSet,
    MsgInstance,
    cell_side,
    enumerate_local_optima,
    evaluate,
    evaluate_batch,
    instance_from_genotype,
    make_archetype,
    random_instance,
    sample_centers,
    sigma_bounds,
    sobol_points,
)
from .lon import (
    FEATURE_COLUMNS,
    BasinAssignment,
    Lon,
    LonFeatures,
    analyze_instance,
    assign_point,
    build_basins,
    build_lon,
    compute_features,
    funnel_lon,
    monotonic_lon,
)
from .novelty import NsConfig, NsResult, Solution, novelty, ns_run, random_baseline

__version__ = "0.1.0"

__all__ = [
    "BasinAssignment",
    "BenchProtocol",
    "BoaComparison",
    "CapabilityError",
    "CorrelationRow",
    "CorpusEntry",
    "CoverageGrid",
    "FEATURE_COLUMNS",
    "GaussianComponent",
    "GdConfig",
    "InstancePerformance",
    "LocalOptimumSet",
    "Lon",
    "LonFeatures",
    "MsgInstance",
    "MsglonError",
    "IoError",
    "NsConfig",
    "NsResult",
    "Solution",
    "TrialRecord",
    "ValidationError",
    "analyze_instance",
    "assign_point",
    "build_basins",
    "build_lon",
    "cell_side",
    "compare_basins",
    "compute_features",
    "correlation_table",
    "coverage",
    "coverage_of_features",
    "difference_rate",
    "enumerate_local_optima",
    "evaluate",
    "evaluate_batch",
    "export_dataset",
    "funnel_lon",
    "gd_converge",
    "instance_from_genotype",
    "make_archetype",
    "measure",
    "monotonic_lon",
    "novelty",
    "ns_run",
    "random_baseline",
    "random_instance",
    "read_dataset",
    "run_cmaes",
    "run_de",
    "sample_centers",
    "sigma_bounds",
    "sobol_points",
    "spearman",
]
