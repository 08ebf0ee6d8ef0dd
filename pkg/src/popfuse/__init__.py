"""popfuse: multimodal population-graph learning for cohort classification.

Subjects are nodes of a phenotype-driven population graph; two Chebyshev
spectral GCN encoders learn modality-specific embeddings that are fused by
asymmetric cross-attention and classified end to end, with the graph's
edge weights trained jointly via a pairwise association encoder.
"""

from .config import ExperimentConfig
from .dataio import (CohortManifest, SubjectRecord, SyntheticSpec,
                     generate_synthetic_cohort, load_cohort, save_cohort)
from .numcore import Tensor

__all__ = [
    "CohortManifest",
    "ExperimentConfig",
    "SubjectRecord",
    "SyntheticSpec",
    "Tensor",
    "generate_synthetic_cohort",
    "load_cohort",
    "save_cohort",
]

__version__ = "0.1.0"
