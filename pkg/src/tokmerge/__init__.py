"""Entropy-guided token merging for autoregressive sequence compression."""

from .errors import (
    DegenerateCluster,
    DegenerateWarning,
    DivergedTraining,
    InvalidBudget,
    InvalidDirection,
    InvalidPrefix,
    InvalidProbability,
    InvalidShape,
    InvalidTemperature,
    NonFiniteInput,
    NotNpy,
    PayloadTruncated,
    PipelineError,
    TokMergeError,
    UnsupportedDtype,
    UnsupportedLayout,
)
from .kernels import active_backend
from .merging import (
    FidelityReport,
    MergePlan,
    MergedSequence,
    cluster,
    fidelity_report,
    flop_model,
    merge,
    pad_to_original,
    retained_norm_gamma,
)
from .numerics import (
    attention_from_embeddings,
    cosine_similarity,
    gumbel_draw,
    gumbel_from_uniform,
    row_entropy,
    softmax_rows,
)
from .npyio import read_npy, write_npy
from .pipeline import (
    BatchItem,
    DecodedResult,
    PipelineConfig,
    RunResult,
    batch_compress,
    compress,
    compress_and_decode,
)
from .prior import (
    PriorConfig,
    PriorModel,
    gradient_check,
    lipschitz_divergence_probe,
    load_checkpoint,
    loss_ar,
    loss_backward,
    loss_forward,
    predict_next,
    save_checkpoint,
    train,
)
from .rng import Rng
from .saliency import (
    EmbeddingStack,
    SaliencyProfile,
    column_statistics,
    layer_entropies,
    merge_risk,
    ned_scores,
    normalize_layer,
    saliency_scores,
    stability_probe,
)
from .selection import BudgetRule, SelectionSample, estimate_budget, gumbel_softmax, harden, token_mass

__version__ = "0.1.0"
