"""Equal-weight sum-of-norms (convex) clustering."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    InputError,
    Partition,
    extract_clusters,
    is_refinement,
    objective,
)
from .solver import SolverConfig, SonSolution, SplittingState, prox_group_norm, solve, splitting_step
from .certificate import (
    CertificateResult,
    Multipliers,
    Status,
    certify_partition,
    check_sufficient,
    least_squares_multipliers,
    refine_multipliers,
    rescale_certificate,
)
from .clusterpath import ClusterPath, check_agglomeration, compute_path, merge_tree
from .special import chi2_cdf
from .mixture import (
    MixtureModel,
    RecoveryReport,
    lambda_lower_bound,
    lambda_upper_bound,
    run_recovery_experiment,
    sample_mixture,
    separation_bound,
)
