"""Multi-perspective simultaneous embedding.

Given K dissimilarity relations over the same objects, find one embedding
in R^p and K orthogonal projections to R^q whose projected distances match
each relation.
"""

from .core import (
    DissimilarityData,
    DivergenceDetected,
    Embedding,
    MPSEError,
    OptimizerConfig,
    ProjectionStack,
    RunResult,
    StressReport,
    TraceRecord,
    complete_from_matrix,
    validate_dissimilarity,
)
from .estimator import MPSE
from .optimizer import InitConfig, adaptive_rate, run, run_fixed, run_varying, smart_initialize
from .projections import random_orthogonal, retract, small_svd, standard_viewpoints
from .stress import mds_stress, mpse_stress, normalized_mds_stress

__version__ = "0.1.0"
