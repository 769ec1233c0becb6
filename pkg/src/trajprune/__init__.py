"""Dataset pruning and label cleanup driven by per-sample logit trajectories.

Record the logits a model assigns to every training sample after each
epoch, average them, and soften into a per-sample probability vector. The
entropy of that vector ranks samples from canonical (low) to ambiguous
(high); thresholds on it drive outlier removal, label correction, and
pruning of redundant easy samples.
"""

from .errors import (
    DivergenceDetected,
    DuplicateSampleId,
    EmptyTable,
    EpochGap,
    EpochOutOfRange,
    FormatError,
    LabelOutOfRange,
    MagicMismatch,
    MaxOverEmptySet,
    MetricMismatch,
    MissingSoftLabels,
    NonFinite,
    RateOutOfRange,
    RatioOutOfRange,
    SampleSetMismatch,
    SelectorOutOfRange,
    TrajPruneError,
    TruncatedFile,
    UnknownSampleId,
)
from .metrics import (
    METRICS,
    EpochSelector,
    ScoreTable,
    SoftLabel,
    aum_score,
    el2n_score,
    ensemble_average,
    entropy_score,
    forgetting_score,
    mean_logits,
    moving_avg_loss,
    read_scores,
    score_dataset,
    soft_label,
    write_scores,
)
from .prune import (
    PrunePlan,
    Ranking,
    apply_plan,
    make_prune_plan,
    rank_samples,
    read_manifest,
    subset_manifest,
    write_manifest,
)
from .purify import (
    PurificationPlan,
    PurifyConfig,
    correct_labels,
    detect_outliers,
    purify,
    read_plan,
    write_plan,
)
from .rng import SplitMix64, derive_seed
from .store import (
    Issue,
    TrajectoryLog,
    ValidationReport,
    make_log,
    open_log,
    validate,
    write_log,
)
from .trainer import (
    FlipRecord,
    SyntheticDataset,
    SyntheticSpec,
    TrainConfig,
    TrainResult,
    accuracy,
    class_means,
    inject_label_noise,
    loss_and_grad,
    predict,
    read_features,
    synth_dataset,
    train_softmax,
    write_features,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # store
    "TrajectoryLog", "Issue", "ValidationReport", "make_log", "open_log",
    "validate", "write_log",
    # metrics
    "METRICS", "EpochSelector", "ScoreTable", "SoftLabel", "mean_logits",
    "soft_label", "entropy_score", "aum_score", "forgetting_score",
    "el2n_score", "moving_avg_loss", "score_dataset", "ensemble_average",
    "read_scores", "write_scores",
    # purify
    "PurifyConfig", "PurificationPlan", "purify", "detect_outliers",
    "correct_labels", "read_plan", "write_plan",
    # prune
    "Ranking", "PrunePlan", "rank_samples", "make_prune_plan", "apply_plan",
    "read_manifest", "write_manifest", "subset_manifest",
    # trainer
    "SyntheticSpec", "SyntheticDataset", "FlipRecord", "TrainConfig",
    "TrainResult", "synth_dataset", "inject_label_noise", "class_means",
    "train_softmax", "loss_and_grad", "predict", "accuracy",
    "read_features", "write_features",
    # rng
    "SplitMix64", "derive_seed",
    # errors
    "TrajPruneError", "FormatError", "MagicMismatch", "TruncatedFile",
    "NonFinite", "DuplicateSampleId", "EpochGap", "LabelOutOfRange",
    "SelectorOutOfRange", "EpochOutOfRange", "MaxOverEmptySet",
    "MetricMismatch", "SampleSetMismatch", "MissingSoftLabels", "EmptyTable",
    "RateOutOfRange", "RatioOutOfRange", "UnknownSampleId",
    "DivergenceDetected",
]
