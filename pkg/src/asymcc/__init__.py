"""l_p correlation clustering with asymmetric classification errors.

Convex relaxation over the multicut metric polytope, a probabilistic
low-diameter decomposition of its metric, and verifiers for the
decomposition's guarantees.
"""

__version__ = "0.1.0"

from .analysis import DisagreementReport, disagreements
from .errors import EmptyRadiusSet, GuaranteeViolation, InstanceFormatError, InvalidParameter
from .instance import Clustering, Instance, gen_gap, gen_random, load, save
from .params import PartitionParams, beta_star, derive_params
from .partition import MetricView, cluster_instance, partition_metric
from .relaxation import FractionalSolution, SolverOptions, solve_cp

__all__ = [
    "Clustering", "DisagreementReport", "EmptyRadiusSet", "FractionalSolution",
    "GuaranteeViolation", "Instance", "InstanceFormatError", "InvalidParameter",
    "MetricView", "PartitionParams", "SolverOptions", "beta_star", "cluster_instance",
    "derive_params", "disagreements", "gen_gap", "gen_random", "load", "partition_metric",
    "save", "solve_cp",
]
