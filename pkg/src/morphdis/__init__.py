"""Morphosyntactic disambiguation toolkit for morphologically rich languages.

The pieces compose left to right: feature schemas define the tag space,
corpora carry annotated tokens, taggers emit per-feature distributions,
the analyzer constrains them to known readings, the disambiguator ranks
those readings, the harmonizer moves corpora between variants, and the
evaluation module scores the result.
"""

from .analyzer import (
    AnalyzerDB,
    BackoffMode,
    analyze,
    compile_analyzer,
    load_db,
    save_db,
)
from .corpus import (
    Analysis,
    AnnotatedToken,
    Corpus,
    Sentence,
    oov_vocabulary,
    read_corpus,
    sample_learning_curve,
    strip_diacritics,
    write_corpus,
)
from .disambiguator import (
    RankedCandidate,
    UnigramModel,
    build_unigrams,
    disambiguate_corpus,
    disambiguate_sentence,
    match_count,
    rank_analyses,
    tie_break_score,
)
from .errors import MorphdisError
from .evaluation import (
    ErrorStats,
    EvalReport,
    LearningCurveTable,
    accuracy,
    feature_error_stats,
    learning_curve_report,
    mcnemar,
    resolve_subset,
    unseen_tag_rate,
)
from .harmonizer import (
    HarmonizationConfig,
    Harmonizer,
    load_harmonization_config,
    reduced_schema,
    strip_proclitic_vowels,
)
from .pipeline import (
    ExperimentPaths,
    ExperimentSpec,
    ExperimentResult,
    run_experiment,
    spec_from_document,
)
from .schema import (
    FeatureDef,
    FeatureSchema,
    load_builtin,
    load_schema,
    parse_unfactored,
    resolve_schema,
    save_schema,
    serialize_unfactored,
)
from .synth import SyntheticSpec, generate_synthetic, generate_synthetic_family
from .tagger import (
    FACTORED,
    UNFACTORED,
    FeatureDistribution,
    SentenceDistributions,
    TaggerModel,
    TrainConfig,
    distributions_for_corpus,
    load_external_distributions,
    load_model,
    predict,
    save_distributions,
    save_model,
    train,
)

__version__ = "0.1.0"

import types as _types

__all__ = [
    name
    for name, value in list(globals().items())
    if not name.startswith("_") and not isinstance(value, _types.ModuleType)
]
