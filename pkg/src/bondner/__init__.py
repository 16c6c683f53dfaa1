"""Distantly supervised NER: gazetteer labeling plus two-stage self-training."""

from .corpus import (
    DISTANT,
    GOLD,
    OUTSIDE,
    PRED,
    Corpus,
    EntitySpan,
    LabelSchema,
    LabelSequence,
    Sentence,
    Token,
    labels_from_spans,
    parse_conll,
    read_conll,
    spans_from_labels,
    validate_bio,
    write_conll,
    write_conll_file,
)
from .distant import (
    Gazetteer,
    MatchReport,
    StampRule,
    generate_distant_labels,
    generate_distant_labels_with_stats,
    load_gazetteer,
    load_stamp_rules,
    match_gazetteer,
    match_report,
    merge_gazetteers,
)
from .errors import (
    BondError,
    CheckpointError,
    ConfigError,
    ConllParseError,
    MissingLayerError,
    NumericalError,
    NumericalWarning,
    SchemaError,
)
from .estimators import BondTagger, DistantLabeler
from .evaluation import (
    ConfusionTable,
    Metrics,
    entity_prf,
    evaluate_corpus,
    metrics_to_json,
    repair_bio,
    token_confusion,
)
from .optim import (
    BatchSampler,
    LrSchedule,
    OptimizerState,
    adam_step,
    cross_entropy_loss,
    init_optimizer,
    kl_soft_loss,
    sample_minibatch,
)
from .stage1 import Stage1Config, Stage1LogRow, dev_entity_f1, predict_corpus, stage1_log_csv, train_stage1
from .stage2 import (
    HARD,
    SOFT,
    SOFT_HIGH_CONF,
    ConfidenceMask,
    SoftLabelBatch,
    Stage2Config,
    Stage2LogRow,
    TeacherStudent,
    hard_pseudo_labels,
    reinitialize_student,
    select_high_confidence,
    soft_pseudo_labels,
    stage2_log_csv,
    train_stage2,
)
from .synth import SynthConfig, SynthData, make_dataset
from .tagger import (
    FeatureConfig,
    FeatureMatrix,
    ModelParams,
    PredictionBatch,
    featurize,
    featurize_corpus,
    forward,
    grad_loss,
    init_params,
    load_params,
    predict_labels,
    save_params,
)

__version__ = "0.1.0"

__all__ = [
    "BatchSampler",
    "BondError",
    "BondTagger",
    "CheckpointError",
    "ConfidenceMask",
    "ConfigError",
    "ConllParseError",
    "ConfusionTable",
    "Corpus",
    "DISTANT",
    "DistantLabeler",
    "EntitySpan",
    "FeatureConfig",
    "FeatureMatrix",
    "GOLD",
    "Gazetteer",
    "HARD",
    "LabelSchema",
    "LabelSequence",
    "LrSchedule",
    "MatchReport",
    "Metrics",
    "MissingLayerError",
    "ModelParams",
    "NumericalError",
    "NumericalWarning",
    "OUTSIDE",
    "OptimizerState",
    "PRED",
    "PredictionBatch",
    "SOFT",
    "SOFT_HIGH_CONF",
    "SchemaError",
    "Sentence",
    "SoftLabelBatch",
    "Stage1Config",
    "Stage1LogRow",
    "Stage2Config",
    "Stage2LogRow",
    "StampRule",
    "SynthConfig",
    "SynthData",
    "TeacherStudent",
    "Token",
    "adam_step",
    "cross_entropy_loss",
    "dev_entity_f1",
    "entity_prf",
    "evaluate_corpus",
    "featurize",
    "featurize_corpus",
    "forward",
    "generate_distant_labels",
    "generate_distant_labels_with_stats",
    "grad_loss",
    "hard_pseudo_labels",
    "init_optimizer",
    "init_params",
    "kl_soft_loss",
    "labels_from_spans",
    "load_gazetteer",
    "load_params",
    "load_stamp_rules",
    "match_gazetteer",
    "match_report",
    "merge_gazetteers",
    "metrics_to_json",
    "make_dataset",
    "parse_conll",
    "predict_corpus",
    "predict_labels",
    "read_conll",
    "reinitialize_student",
    "repair_bio",
    "sample_minibatch",
    "save_params",
    "select_high_confidence",
    "soft_pseudo_labels",
    "spans_from_labels",
    "stage1_log_csv",
    "stage2_log_csv",
    "token_confusion",
    "train_stage1",
    "train_stage2",
    "validate_bio",
    "write_conll",
    "write_conll_file",
    "__version__",
]
