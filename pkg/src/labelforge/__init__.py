"""labelforge: search for class-label tokens and evaluate them in-context.

The library enumerates label sets by hill climbing a log-softmax objective
over a restricted candidate vocabulary, runs N-shot classification sweeps
under those label sets, and computes the learning-curve and
rank-consistency statistics used to analyze them.
"""

from .cache import (
    CacheError,
    CacheMismatchError,
    LogitMatrix,
    build_logit_matrix,
    cache_path,
    load_cache,
    save_cache,
)
from .data import (
    Dataset,
    DatasetError,
    LabeledSentence,
    SplitSpec,
    apply_split_manifest,
    load_dataset,
    sample_labeling,
    split_dataset,
    subset_classes,
    write_split_manifest,
)
from .icl import (
    AccuracyRecord,
    ShotSpec,
    SweepError,
    build_prompt,
    evaluate_nshot,
    predict,
    read_records,
    run_sweep,
)
from .optimize import (
    FitResult,
    LabelAssignment,
    brute_force_optimum,
    export_fit_result,
    hill_climb,
    load_fit_export,
    objective,
    optimize_labels,
)
from .prompts import DEFAULT_TEMPLATE, PromptTemplate
from .providers import (
    CandidateVocabulary,
    HttpProvider,
    ProviderCapabilities,
    ProviderError,
    SyntheticConfig,
    TokenEntry,
    fetch_vocabulary,
    make_synthetic_provider,
    score_label_position,
)
from .report import ReportError, dedupe_label_sets, export_report
from .stats import (
    CorrelationStat,
    LearningCurve,
    StatsError,
    build_curves,
    rank_consistency,
    slope_correlation,
    smooth,
    spearman,
)

__version__ = "0.1.0"
