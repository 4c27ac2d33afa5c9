"""mixclust: clustering methods, generators and benchmarks for mixed-type data.

Methods: k-prototypes, PDQ, convex k-means (distance based), KAMILA, latent
class models and mixtures of conditional linear Gaussian Bayesian networks
(probabilistic). Ships with the M1-M4 synthetic generators, ARI/AMI scoring
and a reproducible benchmark harness.
"""

from .core import (
    ClusterPrototype,
    ColumnSchema,
    ConfigError,
    DegenerateDataError,
    FitResult,
    InsufficientDataError,
    MixclustError,
    MixedDataset,
    Partition,
    SchemaError,
    ValidationError,
    Violation,
    column_stats,
    one_hot,
    validate,
)
from .distance_methods import (
    ConvexKmConfig,
    KProtoConfig,
    PdqConfig,
    convex_kmeans_fit,
    estimate_gamma,
    kprototypes_fit,
    pdq_fit,
)
from .kamila import KamilaConfig, RadialDensity, kamila_fit, radial_kde
from .lcm import LcmParams, lcm_fit, lcm_loglik
from .mbn import (
    ClgNetwork,
    ClgNode,
    DiscreteParams,
    GaussianParams,
    MbnModel,
    bic_score,
    learn_structure,
    mbn_cem_fit,
    network_loglik,
)
from .metrics import ContingencyTable, ami, ari, contingency
from .simgen import (
    M1Config,
    M2Config,
    MbnSimConfig,
    gen_m1,
    gen_m2,
    gen_m3,
    gen_m4,
    sample_expdiff,
)
from .bench import (
    ScenarioResult,
    ScenarioSpec,
    SummaryRow,
    emit_report,
    expand_grid,
    run_grid,
    summarize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
