"""Stage I: fixed-step adaptation to the distant labels.

Early stopping here means a hard budget of T1 optimizer updates, not
dev-set control: the step count itself is the regularizer that keeps the
model from memorizing labeling noise.  Dev F1 is logged for curves but
never steers training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, DISTANT, GOLD
from .errors import NumericalError
from .evaluation import entity_prf, repair_bio
from .optim import BatchSampler, LrSchedule, adam_step, init_optimizer, sample_minibatch
from .tagger import FeatureConfig, FeatureMatrix, ModelParams, featurize_corpus, forward, grad_loss


@dataclass(frozen=True)
class Stage1Config:
    """Stage I knobs. ``t1`` is the exact number of minibatch updates."""

    t1: int
    batch_size: int = 16
    seed: int = 0
    lr: LrSchedule = LrSchedule(base=1e-1, decay=0.0)
    weight_decay: float = 0.0
    eval_every: int = 50
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.t1 < 0:
            raise ValueError(f"t1 must be non-negative: {self.t1}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive: {self.batch_size}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be positive: {self.eval_every}")
        if self.weight_decay < 0:
            raise ValueError(f"weight decay must be non-negative: {self.weight_decay}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("Adam epsilon must be positive")


@dataclass(frozen=True)
class Stage1LogRow:
    step: int
    lr: float
    loss: float
    dev_f1: float | None = None


def flat_labels(corpus: Corpus, layer: str) -> np.ndarray:
    """All label indices of a layer, concatenated in sentence order."""
    seqs = corpus.layer(layer)
    if not seqs:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.asarray(seq.labels, dtype=np.int64) for seq in seqs])


def predict_corpus(params: ModelParams, corpus: Corpus, fm: FeatureMatrix, layer: str = "pred") -> Corpus:
    """Attach argmax predictions (BIO-repaired) as a new layer."""
    probs = forward(params, fm).probs
    labels = np.argmax(probs, axis=1)
    seqs = []
    for s in range(fm.n_sentences):
        chunk = labels[fm.offsets[s] : fm.offsets[s + 1]]
        seqs.append(repair_bio(chunk, corpus.schema))
    return corpus.with_layer(layer, tuple(seqs))


def dev_entity_f1(params: ModelParams, dev: Corpus, dev_fm: FeatureMatrix, gold_layer: str = GOLD) -> float:
    predicted = predict_corpus(params, dev, dev_fm)
    return entity_prf(dev.layer(gold_layer), predicted.layer("pred"), dev.schema).f1


def train_stage1(
    corpus: Corpus,
    model: ModelParams,
    config: Stage1Config,
    feature_config: FeatureConfig,
    dev_corpus: Corpus | None = None,
    *,
    features: FeatureMatrix | None = None,
    dev_features: FeatureMatrix | None = None,
    layer: str = DISTANT,
) -> tuple[ModelParams, list[Stage1LogRow]]:
    """Run exactly ``t1`` Adam updates of the cross-entropy loss.

    Returns the parameters after step t1 (no best-checkpoint selection)
    and the per-step log.  The input model is copied, not mutated.
    """
    labels = flat_labels(corpus, layer)
    fm = features if features is not None else featurize_corpus(corpus, feature_config)
    if fm.n_tokens != labels.size:
        raise ValueError("feature matrix does not align with the label layer")
    if dev_corpus is not None and dev_features is None:
        dev_features = featurize_corpus(dev_corpus, feature_config)

    params = model.copy()
    state = init_optimizer(
        params,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
    sampler = BatchSampler(corpus.num_sentences, config.batch_size, config.seed)
    log: list[Stage1LogRow] = []

    for step in range(1, config.t1 + 1):
        batch = sample_minibatch(sampler)
        fmb = fm.select_sentences(batch)
        rows = fm.token_rows(batch)
        grad, loss = grad_loss(params, fmb, labels[rows])
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at step {step}")
        lr = config.lr.lr(step - 1)
        adam_step(params, grad, state, lr)

        dev_f1 = None
        if dev_corpus is not None and (step % config.eval_every == 0 or step == config.t1):
            dev_f1 = dev_entity_f1(params, dev_corpus, dev_features)
        log.append(Stage1LogRow(step, lr, loss, dev_f1))

    return params, log


def stage1_log_csv(rows: Sequence[Stage1LogRow]) -> str:
    """CSV with columns step, lr, loss, dev_f1 (blank when not evaluated)."""
    lines = ["step,lr,loss,dev_f1"]
    for row in rows:
        dev = f"{row.dev_f1:.6f}" if row.dev_f1 is not None else ""
        lines.append(f"{row.step},{row.lr:.8g},{row.loss:.8f},{dev}")
    return "\n".join(lines) + "\n"
