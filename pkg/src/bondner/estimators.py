"""Scikit-learn style facades over the labeling and training pipeline.

DistantLabeler is a stateless transformer: a corpus goes in, the same
corpus comes back with a distant layer attached.  BondTagger bundles
hashing featurization, the fixed-budget first training stage, and the
optional teacher-student loop behind fit/predict.  Both inherit
get_params/set_params, so they clone and grid-search like any other
estimator; X is a Corpus rather than a design matrix, and "samples" in
predict_proba are tokens in corpus order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import DISTANT, GOLD, PRED, Corpus
from .distant import (
    MatchReport,
    generate_distant_labels,
    generate_distant_labels_with_stats,
    match_report,
)
from .evaluation import evaluate_corpus
from .optim import LrSchedule
from .stage1 import Stage1Config, predict_corpus, train_stage1
from .stage2 import SOFT_HIGH_CONF, REINIT_OFF, Stage2Config, train_stage2
from .tagger import FeatureConfig, featurize_corpus, forward, init_params
from .validation import check_corpus, check_seed


class DistantLabeler(TransformerMixin, BaseEstimator):
    """Attach gazetteer and stamp-rule labels as a ``distant`` layer.

    Holds no learned state; fit only validates so the class composes
    with sklearn pipelines.  ``transform`` therefore also works on an
    unfitted instance.
    """

    def __init__(self, gazetteers=(), rules=()):
        self.gazetteers = gazetteers
        self.rules = rules

    def fit(self, X, y=None):
        check_corpus(X)
        self.n_phrases_ = sum(g.phrase_count() for g in self.gazetteers)
        return self

    def transform(self, X: Corpus) -> Corpus:
        check_corpus(X)
        return generate_distant_labels(X, self.gazetteers, self.rules)

    def report(self, X: Corpus) -> MatchReport:
        """Label ``X`` and score the distant layer against its gold layer."""
        check_corpus(X, layer=GOLD)
        labeled, stats = generate_distant_labels_with_stats(X, self.gazetteers, self.rules)
        return match_report(labeled, stats)


class BondTagger(BaseEstimator):
    """Linear NER tagger trained on distant labels, then self-trained.

    Constructor arguments mirror the pipeline: the hashing featurizer
    (window, hash_dim, hash_seed), the first stage's fixed budget and
    learning rate (t1, lr1, lr1_decay), and the teacher-student loop
    (t2, t3, lr2, lr2_decay, epsilon, mode, reinit).  ``t2=0`` skips
    self-training.  The label schema is taken from the corpus at fit.
    """

    def __init__(
        self,
        *,
        window: int = 1,
        hash_dim: int = 2**15,
        hash_seed: int = 0,
        t1: int = 400,
        lr1: float = 0.05,
        lr1_decay: float = 0.0,
        t2: int = 8,
        t3=40,
        lr2: float = 0.015,
        lr2_decay: float = 0.0,
        epsilon: float = 0.9,
        mode: str = SOFT_HIGH_CONF,
        reinit: str = REINIT_OFF,
        stall_patience: int = 2,
        batch_size: int = 16,
        weight_decay: float = 0.0,
        eval_every: int = 50,
        seed: int = 0,
    ):
        self.window = window
        self.hash_dim = hash_dim
        self.hash_seed = hash_seed
        self.t1 = t1
        self.lr1 = lr1
        self.lr1_decay = lr1_decay
        self.t2 = t2
        self.t3 = t3
        self.lr2 = lr2
        self.lr2_decay = lr2_decay
        self.epsilon = epsilon
        self.mode = mode
        self.reinit = reinit
        self.stall_patience = stall_patience
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.eval_every = eval_every
        self.seed = seed

    def fit(self, X: Corpus, y=None, *, dev: Corpus | None = None, layer: str = DISTANT):
        """Train on the ``layer`` labels of ``X``; ``dev`` only feeds the log."""
        check_corpus(X, layer=layer)
        if dev is not None:
            check_corpus(dev, layer=GOLD, schema=X.schema)
        seed = check_seed(self.seed)
        config = FeatureConfig(window=self.window, dim=self.hash_dim, hash_seed=self.hash_seed)
        fm = featurize_corpus(X, config)
        dev_fm = featurize_corpus(dev, config) if dev is not None else None

        model = init_params(config.dim, X.schema.num_labels, seed)
        stage1_config = Stage1Config(
            t1=self.t1,
            batch_size=self.batch_size,
            seed=seed,
            lr=LrSchedule(self.lr1, self.lr1_decay),
            weight_decay=self.weight_decay,
            eval_every=self.eval_every,
        )
        theta, stage1_log = train_stage1(
            X, model, stage1_config, config,
            dev_corpus=dev, features=fm, dev_features=dev_fm, layer=layer,
        )

        if self.t2 > 0:
            stage2_config = Stage2Config(
                t2=self.t2,
                t3=self.t3,
                epsilon=self.epsilon,
                mode=self.mode,
                reinit=self.reinit,
                stall_patience=self.stall_patience,
                batch_size=self.batch_size,
                seed=seed,
                lr=LrSchedule(self.lr2, self.lr2_decay),
                weight_decay=self.weight_decay,
            )
            params, stage2_log = train_stage2(
                X, theta, stage2_config, config,
                dev_corpus=dev, features=fm, dev_features=dev_fm,
            )
        else:
            params, stage2_log = theta, []

        self.feature_config_ = config
        self.schema_ = X.schema
        self.stage1_params_ = theta
        self.params_ = params
        self.stage1_log_ = stage1_log
        self.stage2_log_ = stage2_log
        return self

    @property
    def classes_(self) -> tuple[str, ...]:
        check_is_fitted(self, "schema_")
        return self.schema_.labels

    def annotate(self, X: Corpus, layer: str = PRED) -> Corpus:
        """Return ``X`` with BIO-repaired argmax predictions as a new layer."""
        check_is_fitted(self, "params_")
        check_corpus(X, schema=self.schema_)
        fm = featurize_corpus(X, self.feature_config_)
        return predict_corpus(self.params_, X, fm, layer=layer)

    def predict(self, X: Corpus) -> list[list[str]]:
        """Per-sentence BIO tag lists, aligned with ``X``'s sentences."""
        annotated = self.annotate(X)
        return [list(seq.to_tags(self.schema_)) for seq in annotated.layer(PRED)]

    def predict_proba(self, X: Corpus) -> np.ndarray:
        """Per-token class distributions, stacked in corpus order.

        Columns follow ``classes_``.
        """
        check_is_fitted(self, "params_")
        check_corpus(X, schema=self.schema_)
        fm = featurize_corpus(X, self.feature_config_)
        return forward(self.params_, fm).probs

    def score(self, X: Corpus, y=None) -> float:
        """Entity-level F1 against the gold layer of ``X``."""
        check_corpus(X, layer=GOLD)
        annotated = self.annotate(X)
        return evaluate_corpus(annotated, PRED).f1
