"""Stage II: teacher-student self-training on the model's own predictions.

Each outer iteration freezes the teacher, labels the training corpus with
it (hard argmax labels, squared-confidence soft labels, or soft labels
gated by a confidence threshold), trains the student for a fixed number
of inner steps, then promotes the student to teacher.  Distant labels
play no part here; the corpus is treated as unlabeled text.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .corpus import Corpus, LabelSequence
from .errors import NumericalError
from .optim import BatchSampler, LrSchedule, adam_step, init_optimizer, sample_minibatch
from .stage1 import dev_entity_f1
from .tagger import (
    FeatureConfig,
    FeatureMatrix,
    ModelParams,
    PredictionBatch,
    featurize_corpus,
    forward,
    grad_loss,
)

HARD = "hard"
SOFT = "soft"
SOFT_HIGH_CONF = "soft_high_conf"

REINIT_OFF = "off"
REINIT_ONCE = "once"
REINIT_ON_STALL = "on_stall"


@dataclass(frozen=True)
class SoftLabelBatch:
    """Re-weighted target distributions plus the class mass that shaped them.

    ``class_mass[c]`` is the total predicted probability of class c over
    every token the batch was computed from; classes with zero mass got
    zero target weight everywhere by convention.
    """

    soft: np.ndarray
    class_mass: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        sums = self.soft.sum(axis=1)
        if self.soft.size and np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError("soft label rows must sum to 1 within 1e-9")

    @property
    def n_tokens(self) -> int:
        return self.soft.shape[0]


@dataclass(frozen=True)
class ConfidenceMask:
    """Tokens whose best soft score strictly exceeds the threshold."""

    selected: np.ndarray
    threshold: float
    offsets: np.ndarray

    def per_sentence(self) -> list[set[int]]:
        out = []
        for s in range(len(self.offsets) - 1):
            lo, hi = self.offsets[s], self.offsets[s + 1]
            out.append({int(i - lo) for i in np.flatnonzero(self.selected[lo:hi]) + lo})
        return out

    @property
    def fraction(self) -> float:
        return float(self.selected.mean()) if self.selected.size else 0.0


@dataclass(frozen=True)
class Stage2Config:
    """Self-training knobs.

    ``t3`` may be a single inner-step count or one count per iteration.
    ``per_minibatch_labels`` recomputes pseudo-labels per minibatch with
    class mass taken from that minibatch alone, instead of labeling the
    whole corpus once per iteration.
    """

    t2: int
    t3: Union[int, tuple[int, ...]]
    epsilon: float = 0.9
    mode: str = SOFT_HIGH_CONF
    reinit: str = REINIT_OFF
    stall_patience: int = 2
    batch_size: int = 16
    seed: int = 0
    lr: LrSchedule = LrSchedule(base=1e-1, decay=0.0)
    weight_decay: float = 0.0
    per_minibatch_labels: bool = False
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.t2 < 0:
            raise ValueError(f"t2 must be non-negative: {self.t2}")
        if isinstance(self.t3, int):
            if self.t3 < 0:
                raise ValueError(f"t3 must be non-negative: {self.t3}")
        else:
            object.__setattr__(self, "t3", tuple(int(x) for x in self.t3))
            if len(self.t3) != self.t2:
                raise ValueError(f"per-iteration t3 list must have length t2={self.t2}")
            if any(x < 0 for x in self.t3):
                raise ValueError("t3 entries must be non-negative")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1): {self.epsilon}")
        if self.mode not in (HARD, SOFT, SOFT_HIGH_CONF):
            raise ValueError(f"unknown label mode {self.mode!r}")
        if self.reinit not in (REINIT_OFF, REINIT_ONCE, REINIT_ON_STALL):
            raise ValueError(f"unknown re-initialization mode {self.reinit!r}")
        if self.stall_patience < 1:
            raise ValueError(f"stall patience must be positive: {self.stall_patience}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive: {self.batch_size}")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("Adam epsilon must be positive")

    def t3_for(self, iteration: int) -> int:
        if isinstance(self.t3, int):
            return self.t3
        return self.t3[iteration]


@dataclass(frozen=True)
class TeacherStudent:
    """The two parameter sets plus the immutable re-initialization target."""

    teacher: ModelParams
    student: ModelParams
    checkpoint: ModelParams

    def __post_init__(self):
        if not (self.teacher.W.shape == self.student.W.shape == self.checkpoint.W.shape):
            raise ValueError("teacher, student and checkpoint shapes must agree")


def reinitialize_student(ts: TeacherStudent) -> TeacherStudent:
    """Student back to the stored checkpoint; teacher untouched.

    The caller must also reset its optimizer state for the student.
    """
    return TeacherStudent(ts.teacher, ts.checkpoint.copy(), ts.checkpoint)


def hard_pseudo_labels(preds: PredictionBatch) -> tuple[LabelSequence, ...]:
    """Argmax class per token, ties to the lowest index; not BIO-repaired."""
    labels = np.argmax(preds.probs, axis=1)
    out = []
    for s in range(len(preds.offsets) - 1):
        out.append(LabelSequence(tuple(int(x) for x in labels[preds.offsets[s] : preds.offsets[s + 1]])))
    return tuple(out)


def soft_pseudo_labels(
    preds: PredictionBatch,
    class_mass: np.ndarray | None = None,
) -> SoftLabelBatch:
    """Squared-confidence re-weighting over the whole prediction batch.

    s_c = (f_c^2 / p_c) / sum_c' (f_c'^2 / p_c') with p the per-class
    probability mass summed over every token (or the supplied
    ``class_mass``, to label a slice under corpus-level mass).
    """
    probs = preds.probs
    if probs.shape[0] == 0:
        raise ValueError("soft labels need at least one token")
    if np.any(probs < 0) or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise ValueError("predictions must be valid simplexes")
    p = probs.sum(axis=0) if class_mass is None else np.asarray(class_mass, dtype=np.float64)
    if p.shape != (probs.shape[1],):
        raise ValueError("class mass length must equal the class count")
    raw = np.zeros_like(probs)
    np.divide(np.square(probs), p[None, :], out=raw, where=p[None, :] > 0)
    soft = raw / raw.sum(axis=1, keepdims=True)
    return SoftLabelBatch(soft, p, preds.offsets)


def select_high_confidence(soft: SoftLabelBatch, epsilon: float) -> ConfidenceMask:
    """Keep tokens with max_c s_c strictly above epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1): {epsilon}")
    return ConfidenceMask(soft.soft.max(axis=1) > epsilon, epsilon, soft.offsets)


@dataclass(frozen=True)
class Stage2LogRow:
    iteration: int
    inner_step: int
    loss: float
    selected_fraction: float
    dev_f1: float | None = None


def stage2_log_csv(rows: Sequence[Stage2LogRow]) -> str:
    """CSV with columns iter, inner_step, loss, selected_token_fraction, dev_f1."""
    lines = ["iter,inner_step,loss,selected_token_fraction,dev_f1"]
    for row in rows:
        dev = f"{row.dev_f1:.6f}" if row.dev_f1 is not None else ""
        lines.append(
            f"{row.iteration},{row.inner_step},{row.loss:.8f},{row.selected_fraction:.6f},{dev}"
        )
    return "\n".join(lines) + "\n"


def _iteration_targets(
    teacher: ModelParams,
    fm: FeatureMatrix,
    config: Stage2Config,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Full-corpus targets from the frozen teacher.

    Returns (targets, selected, fraction): targets is a 1-D label array
    in hard mode, else an (N, C) soft matrix; selected marks the tokens
    that count toward the loss.
    """
    preds = forward(teacher, fm)
    if config.mode == HARD:
        targets = np.argmax(preds.probs, axis=1)
        selected = np.ones(fm.n_tokens, dtype=bool)
    else:
        batch = soft_pseudo_labels(preds)
        targets = batch.soft
        if config.mode == SOFT_HIGH_CONF:
            selected = select_high_confidence(batch, config.epsilon).selected
        else:
            selected = np.ones(fm.n_tokens, dtype=bool)
    fraction = float(selected.mean()) if selected.size else 0.0
    return targets, selected, fraction


def train_stage2(
    corpus: Corpus,
    theta_hat: ModelParams,
    config: Stage2Config,
    feature_config: FeatureConfig,
    dev_corpus: Corpus | None = None,
    *,
    features: FeatureMatrix | None = None,
    dev_features: FeatureMatrix | None = None,
) -> tuple[ModelParams, list[Stage2LogRow]]:
    """Run T2 teacher-student iterations from the Stage I parameters.

    Per iteration: label with the frozen teacher, train the student for
    exactly t3 inner Adam steps (minus any steps skipped because no
    selected token landed in the minibatch), then teacher <- student.
    The optimizer and lr schedule restart each iteration; the minibatch
    stream continues across iterations.  Returns the final student.
    """
    if config.reinit == REINIT_ON_STALL and dev_corpus is None:
        raise ValueError("on_stall re-initialization needs a dev corpus")
    fm = features if features is not None else featurize_corpus(corpus, feature_config)
    if dev_corpus is not None and dev_features is None:
        dev_features = featurize_corpus(dev_corpus, feature_config)

    checkpoint = theta_hat.initial_snapshot()
    student = checkpoint.copy() if config.reinit == REINIT_ONCE else theta_hat.copy()
    ts = TeacherStudent(theta_hat.copy(), student, checkpoint)

    sampler = BatchSampler(corpus.num_sentences, config.batch_size, config.seed)
    log: list[Stage2LogRow] = []
    best_dev = -1.0
    stalled = 0

    for it in range(config.t2):
        state = init_optimizer(
            ts.student,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.adam_eps,
            weight_decay=config.weight_decay,
        )
        targets, selected, fraction = _iteration_targets(ts.teacher, fm, config)

        if config.mode == SOFT_HIGH_CONF and not selected.any() and not config.per_minibatch_labels:
            warnings.warn(f"iteration {it}: no token passed the confidence threshold; skipped")
            log.append(Stage2LogRow(it, 0, 0.0, 0.0, None))
        else:
            for step in range(1, config.t3_for(it) + 1):
                batch = sample_minibatch(sampler)
                fmb = fm.select_sentences(batch)
                rows = fm.token_rows(batch)
                if config.per_minibatch_labels:
                    b_targets, b_selected, fraction = _iteration_targets(ts.teacher, fmb, config)
                else:
                    b_targets = targets[rows]
                    b_selected = selected[rows]
                if not b_selected.any():
                    log.append(Stage2LogRow(it, step, 0.0, fraction, None))
                    continue
                grad, loss = grad_loss(ts.student, fmb, b_targets, b_selected)
                if not np.isfinite(loss):
                    raise NumericalError(f"non-finite loss at iteration {it}, step {step}")
                adam_step(ts.student, grad, state, config.lr.lr(step - 1))
                log.append(Stage2LogRow(it, step, loss, fraction, None))

        dev_f1 = None
        if dev_corpus is not None:
            dev_f1 = dev_entity_f1(ts.student, dev_corpus, dev_features)
        if log and log[-1].iteration == it:
            last = log[-1]
            log[-1] = Stage2LogRow(last.iteration, last.inner_step, last.loss, last.selected_fraction, dev_f1)
        else:
            log.append(Stage2LogRow(it, 0, 0.0, fraction, dev_f1))

        ts = TeacherStudent(ts.student.copy(), ts.student, ts.checkpoint)

        if config.reinit == REINIT_ON_STALL and dev_f1 is not None:
            if dev_f1 > best_dev + 1e-12:
                best_dev = dev_f1
                stalled = 0
            else:
                stalled += 1
                if stalled >= config.stall_patience:
                    ts = reinitialize_student(ts)
                    stalled = 0

    return ts.student, log
