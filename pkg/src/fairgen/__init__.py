"""fairgen: remove bias-inducing rows, synthesize, and score fairness.

Pipeline shape: split real data, debias only the training side (K% removal
or flip-augmentation), fit a tabular synthesizer on the debiased rows, train
a downstream classifier on synthetic rows, and evaluate balanced accuracy
plus demographic-parity / equalized-odds ratios (per protected attribute and
over the intersectional subgroup lattice) on the untouched real test split.
"""

from .augment import (
    AugmentationDebiaser,
    ClusterModel,
    ScoredSyntheticPoint,
    augment,
    fit_kmeans,
    flip_protected,
    score_realism,
)
from .classifier import (
    CLASSIFIER_REGISTRY,
    LogisticModel,
    LogisticRegressionClassifier,
    make_classifier,
    predict,
    register_classifier,
    train,
)
from .encoding import EncodedMatrix, TableEncoder, encode
from .errors import FairgenError
from .fairness import (
    FairnessReport,
    SubgroupStats,
    balanced_accuracy,
    build_subgroups,
    demographic_parity_ratio,
    equalized_odds_ratio,
    evaluate,
)
from .kremoval import (
    BiasScoreRecord,
    KRemovalDebiaser,
    RemovalOutcome,
    cosine_similarity,
    form_groups,
    remove_top_k,
    score_groups,
)
from .pipeline import (
    RunConfig,
    RunRecord,
    TechniqueConfig,
    expand_grid,
    render_grid_summary,
    run_grid,
    run_pipeline,
)
from .synthesis import (
    CopulaModel,
    ExternalSynthesizer,
    GaussianCopulaSynthesizer,
    SynthesisResult,
    SynthesizerSpec,
    fit_copula,
    make_synthesizer,
    nearest_psd,
    run_external,
    sample_copula,
)
from .tabular import (
    ColumnSpec,
    DataTable,
    Schema,
    load_csv,
    train_test_split,
    write_csv,
)

__version__ = "0.1.0"
