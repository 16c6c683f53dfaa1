"""Training-loop machinery: the two losses, Adam, lr decay, batch sampling.

The cross-entropy and soft-target losses share one reduction path (mask
the per-token vector, sum, divide by the count) so that a one-hot soft
target reproduces cross-entropy bit for bit, not merely approximately.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import NumericalError, NumericalWarning
from .tagger import ModelParams, PredictionBatch

PROB_FLOOR = 1e-12


def _probs(preds: Union[PredictionBatch, np.ndarray]) -> np.ndarray:
    if isinstance(preds, PredictionBatch):
        return preds.probs
    return np.asarray(preds, dtype=np.float64)


def _mask_array(mask, n: int) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask shape {mask.shape} does not match {n} tokens")
    return mask


@dataclass(frozen=True)
class CrossEntropyResult:
    """Masked mean loss plus each token's contribution (0 where masked)."""

    loss: float
    per_token: np.ndarray


def cross_entropy_loss(
    preds: Union[PredictionBatch, np.ndarray],
    labels: Sequence[int],
    mask=None,
) -> CrossEntropyResult:
    """Mean over unmasked tokens of -log(probability of the labeled class).

    Probabilities below 1e-12 are clamped there, with a NumericalWarning;
    an all-masked batch has loss 0.
    """
    probs = _probs(preds)
    labels = np.asarray(labels, dtype=np.int64)
    n_tokens, n_classes = probs.shape
    if labels.shape != (n_tokens,):
        raise ValueError(f"labels shape {labels.shape} does not match {n_tokens} tokens")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError("label index out of range")
    mask = _mask_array(mask, n_tokens)

    target_prob = probs[np.arange(n_tokens), labels]
    if np.any(target_prob[mask] < PROB_FLOOR):
        warnings.warn("target probability clamped at 1e-12", NumericalWarning)
    per_token = np.zeros(n_tokens, dtype=np.float64)
    per_token[mask] = -np.log(np.maximum(target_prob[mask], PROB_FLOOR))
    n = int(mask.sum())
    loss = float(per_token[mask].sum() / n) if n > 0 else 0.0
    return CrossEntropyResult(loss, per_token)


def kl_soft_loss(
    preds: Union[PredictionBatch, np.ndarray],
    soft: np.ndarray,
    selected=None,
) -> tuple[float, bool]:
    """Mean over selected tokens of sum_c -s_c log f_c, plus a skip flag.

    The flag is True when nothing is selected: the loss is then 0 and the
    caller must not take an optimizer step.  One-hot rows reduce exactly
    to cross_entropy_loss.
    """
    probs = _probs(preds)
    soft = np.asarray(soft, dtype=np.float64)
    if soft.shape != probs.shape:
        raise ValueError(f"soft target shape {soft.shape} does not match {probs.shape}")
    if np.any(soft < 0) or np.any(np.abs(soft.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("soft targets must be valid distributions")
    selected = _mask_array(selected, probs.shape[0])
    n = int(selected.sum())
    if n == 0:
        return 0.0, True

    rows = probs[selected]
    srows = soft[selected]
    if np.any((srows > 0) & (rows < PROB_FLOOR)):
        warnings.warn("predicted probability clamped at 1e-12", NumericalWarning)
    per_token = (-srows * np.log(np.maximum(rows, PROB_FLOOR))).sum(axis=1)
    return float(per_token.sum() / n), False


@dataclass
class OptimizerState:
    """Adam moment accumulators and hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    weight_decay: float = 0.0


def init_optimizer(
    params: ModelParams,
    beta1: float = 0.9,
    beta2: float = 0.98,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> OptimizerState:
    return OptimizerState(
        m=np.zeros_like(params.W),
        v=np.zeros_like(params.W),
        t=0,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        weight_decay=weight_decay,
    )


def adam_step(
    params: ModelParams,
    grad: np.ndarray,
    state: OptimizerState,
    lr: float,
) -> tuple[ModelParams, OptimizerState]:
    """One bias-corrected Adam update, decoupled weight decay when > 0.

    A non-finite gradient raises NumericalError before any state is
    touched.  Params and state are updated in place and returned.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.W.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match {params.W.shape}")
    if not np.isfinite(grad).all():
        raise NumericalError("non-finite gradient passed to adam_step")

    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(grad)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    step = lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if state.weight_decay > 0:
        step += lr * state.weight_decay * params.W
    params.W -= step
    params.version += 1
    return params, state


@dataclass(frozen=True)
class LrSchedule:
    """Linear decay clipped at zero: lr(t) = max(0, base - decay * t)."""

    base: float
    decay: float = 0.0

    def __post_init__(self):
        if self.base < 0 or self.decay < 0:
            raise ValueError("base learning rate and decay must be non-negative")

    def lr(self, t: int) -> float:
        return max(0.0, self.base - self.decay * t)


class BatchSampler:
    """Seeded epoch permutations served in order; last batch may be short.

    Epoch e is the permutation drawn from seed (seed, e), so the full
    batch sequence is a pure function of (corpus size, batch size, seed).
    """

    def __init__(self, corpus_size: int, batch_size: int, seed: int):
        if corpus_size < 1:
            raise ValueError("corpus size must be at least 1")
        if batch_size < 1:
            raise ValueError("batch size must be at least 1")
        self.corpus_size = corpus_size
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self._pos = 0
        self._perm = self._draw()

    def _draw(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, self.epoch)))
        return rng.permutation(self.corpus_size)

    def next_batch(self) -> np.ndarray:
        batch = self._perm[self._pos : self._pos + self.batch_size]
        self._pos += len(batch)
        if self._pos >= self.corpus_size:
            self.epoch += 1
            self._pos = 0
            self._perm = self._draw()
        return batch


def sample_minibatch(sampler: BatchSampler) -> np.ndarray:
    return sampler.next_batch()
