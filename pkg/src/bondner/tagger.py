"""Token classifier: hashed context-window features into a linear softmax.

The training algorithms only ever see this module through three calls,
featurize, forward, and grad_loss, and require nothing of the model beyond
a per-token probability simplex over the C classes and exact gradients
of the masked mean loss.  A heavier backbone can replace the linear
model behind the same calls.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import sparse

from .corpus import Corpus, Sentence
from .errors import CheckpointError, NumericalError

_MAGIC = b"BONDMDL1"
_INIT_SCALE = 0.01


@dataclass(frozen=True)
class FeatureConfig:
    """Feature families and hashing layout.

    Per window offset in −w..+w: case-folded token identity and word
    shape.  For the center token only: case-folded prefixes and suffixes
    of length 1..3.  Offsets past either sentence edge emit a boundary
    marker instead.  Every feature hashes into one of ``dim`` buckets;
    collisions are simply accepted.
    """

    window: int = 1
    dim: int = 2**18
    hash_seed: int = 0

    def __post_init__(self):
        if self.window < 0:
            raise ValueError(f"window radius must be non-negative: {self.window}")
        if self.dim < 1 or self.dim & (self.dim - 1) != 0:
            raise ValueError(f"hash dimension must be a power of two: {self.dim}")
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash seed must fit in an unsigned 64-bit integer")

    def digest(self) -> bytes:
        """16-byte fingerprint used to pair checkpoints with feature spaces."""
        h = hashlib.blake2b(digest_size=16)
        h.update(f"w={self.window};D={self.dim};s={self.hash_seed};fam=id,sh,pre3,suf3".encode())
        return h.digest()


@dataclass(frozen=True)
class FeatureVector:
    """Sparse indicator features for one token: unique indices, values 1.0."""

    indices: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx = np.unique(idx)
        object.__setattr__(self, "indices", idx)
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("feature index out of range")

    @property
    def values(self) -> np.ndarray:
        return np.ones(self.indices.size, dtype=np.float64)


def _shape_of(tok: str) -> str:
    out = []
    for ch in tok:
        if ch.isupper():
            out.append("X")
        elif ch.islower():
            out.append("x")
        elif ch.isdigit():
            out.append("d")
        else:
            out.append(ch)
    return "".join(out)


def _hash_feature(name: str, config: FeatureConfig) -> int:
    h = hashlib.blake2b(
        name.encode("utf-8"),
        digest_size=8,
        key=config.hash_seed.to_bytes(8, "little"),
    )
    return int.from_bytes(h.digest(), "little") % config.dim


def _token_feature_names(texts: Sequence[str], pos: int, config: FeatureConfig) -> list[str]:
    names = []
    for off in range(-config.window, config.window + 1):
        j = pos + off
        if j < 0:
            names.append(f"bnd:{off}:bos")
        elif j >= len(texts):
            names.append(f"bnd:{off}:eos")
        else:
            tok = texts[j]
            names.append(f"id:{off}:{tok.casefold()}")
            names.append(f"sh:{off}:{_shape_of(tok)}")
    center = texts[pos].casefold()
    for k in range(1, min(3, len(center)) + 1):
        names.append(f"pre:{k}:{center[:k]}")
        names.append(f"suf:{k}:{center[-k:]}")
    return names


def featurize(sentence: Sentence, config: FeatureConfig) -> list[FeatureVector]:
    """Hash each token's window features to sparse indicator vectors."""
    texts = sentence.texts
    out = []
    for pos in range(len(texts)):
        names = _token_feature_names(texts, pos, config)
        idx = np.fromiter(
            (_hash_feature(n, config) for n in names), dtype=np.int64, count=len(names)
        )
        out.append(FeatureVector(idx, config.dim))
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    """All tokens of a sentence batch as one CSR matrix.

    ``offsets[s] : offsets[s+1]`` is the row range of sentence s.
    """

    X: sparse.csr_matrix
    offsets: np.ndarray

    @property
    def n_tokens(self) -> int:
        return self.X.shape[0]

    @property
    def n_sentences(self) -> int:
        return len(self.offsets) - 1

    def token_rows(self, sentences: Sequence[int]) -> np.ndarray:
        """Flat row indices of the given sentences, in the given order."""
        if len(sentences) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(
            [np.arange(self.offsets[s], self.offsets[s + 1]) for s in sentences]
        )

    def select_sentences(self, sentences: Sequence[int]) -> "FeatureMatrix":
        """Submatrix over the given sentences with recomputed offsets."""
        rows = self.token_rows(sentences)
        lengths = [self.offsets[s + 1] - self.offsets[s] for s in sentences]
        offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(lengths)
        return FeatureMatrix(self.X[rows], offsets)

    @classmethod
    def from_vectors(cls, per_sentence: Sequence[Sequence[FeatureVector]], dim: int) -> "FeatureMatrix":
        offsets = np.zeros(len(per_sentence) + 1, dtype=np.int64)
        rows_idx = []
        for s, vecs in enumerate(per_sentence):
            offsets[s + 1] = offsets[s] + len(vecs)
            rows_idx.extend(v.indices for v in vecs)
        indptr = np.zeros(int(offsets[-1]) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(ix) for ix in rows_idx])
        indices = np.concatenate(rows_idx) if rows_idx else np.zeros(0, dtype=np.int64)
        data = np.ones(indices.size, dtype=np.float64)
        X = sparse.csr_matrix((data, indices, indptr), shape=(int(offsets[-1]), dim))
        return cls(X, offsets)


def featurize_corpus(corpus: Corpus, config: FeatureConfig) -> FeatureMatrix:
    return FeatureMatrix.from_vectors(
        [featurize(s, config) for s in corpus.sentences], config.dim
    )


@dataclass
class ModelParams:
    """Dense weight matrix (D features × C classes) plus its origin seed.

    The seed pins down the initialization snapshot: re-running the seeded
    uniform draw reproduces the starting point exactly, which is what
    student re-initialization returns to.  ``version`` counts applied
    optimizer updates.
    """

    W: np.ndarray
    seed: int
    version: int = 0

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {self.W.shape}")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]

    def initial_snapshot(self) -> "ModelParams":
        """The parameters as they were at initialization, regenerated."""
        return init_params(self.dim, self.num_classes, self.seed)

    def copy(self) -> "ModelParams":
        return ModelParams(self.W.copy(), self.seed, self.version)


def init_params(dim: int, num_classes: int, seed: int) -> ModelParams:
    """Seeded i.i.d. uniform weights in [-0.01, 0.01]."""
    if dim < 1 or num_classes < 1:
        raise ValueError("dim and num_classes must be at least 1")
    rng = np.random.default_rng(seed)
    W = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(dim, num_classes))
    return ModelParams(W, seed, version=0)


@dataclass(frozen=True)
class PredictionBatch:
    """Per-token probability simplexes with sentence boundaries."""

    probs: np.ndarray
    offsets: np.ndarray

    @property
    def n_tokens(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def per_sentence(self) -> Iterable[np.ndarray]:
        for s in range(len(self.offsets) - 1):
            yield self.probs[self.offsets[s] : self.offsets[s + 1]]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


Features = Union[FeatureMatrix, Sequence[FeatureVector]]


def _as_matrix(features: Features, dim: int) -> FeatureMatrix:
    if isinstance(features, FeatureMatrix):
        return features
    return FeatureMatrix.from_vectors([features], dim)


def forward(params: ModelParams, features: Features) -> PredictionBatch:
    """Sparse logits X @ W, then a numerically shifted softmax per token."""
    if not np.isfinite(params.W).all():
        raise NumericalError("model parameters contain non-finite values")
    fm = _as_matrix(features, params.dim)
    logits = fm.X @ params.W
    return PredictionBatch(_softmax(logits), fm.offsets)


def grad_loss(
    params: ModelParams,
    features: Features,
    target: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Exact gradient of the masked mean loss, and the loss itself.

    1-D integer ``target`` means hard labels under cross-entropy; 2-D
    rows mean per-token target distributions under the soft loss.  The
    per-token logit gradient is (prediction − target) / (#unmasked),
    scattered back through the sparse features; masked tokens contribute
    nothing.  An empty mask gives loss 0 and a zero gradient.
    """
    from . import optim

    fm = _as_matrix(features, params.dim)
    target = np.asarray(target)
    if mask is None:
        mask = np.ones(fm.n_tokens, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (fm.n_tokens,):
        raise ValueError(f"mask shape {mask.shape} does not match {fm.n_tokens} tokens")

    preds = forward(params, fm)
    if target.ndim == 1:
        if target.shape != (fm.n_tokens,):
            raise ValueError("hard target length does not match token count")
        loss = optim.cross_entropy_loss(preds, target, mask).loss
        T = np.zeros_like(preds.probs)
        T[np.arange(fm.n_tokens), target.astype(np.int64)] = 1.0
    elif target.ndim == 2:
        if target.shape != preds.probs.shape:
            raise ValueError("soft target shape does not match predictions")
        loss, _ = optim.kl_soft_loss(preds, target, mask)
        T = target
    else:
        raise ValueError("target must be 1-D labels or 2-D distributions")

    n = int(mask.sum())
    if n == 0:
        return np.zeros_like(params.W), 0.0
    delta = (preds.probs - T) * mask[:, None] / n
    grad = (fm.X.T @ delta)
    grad = np.asarray(grad)
    return grad, float(loss)


def predict_labels(params: ModelParams, features: Features) -> np.ndarray:
    """Argmax class per token; ties resolve to the lowest class index."""
    return np.argmax(forward(params, features).probs, axis=1)


def save_params(params: ModelParams, config: FeatureConfig, path: Union[str, Path]) -> None:
    """Binary checkpoint: magic, D, C, seed, feature digest, then '<f8' rows."""
    if params.dim != config.dim:
        raise CheckpointError(
            f"feature dim {config.dim} does not match weight rows {params.dim}"
        )
    header = _MAGIC + struct.pack(
        "<QQQ", params.dim, params.num_classes, params.seed
    ) + config.digest()
    body = np.ascontiguousarray(params.W, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(header + body)


def load_params(
    path: Union[str, Path], expected_config: FeatureConfig | None = None
) -> ModelParams:
    """Read a checkpoint; verify its feature digest when a config is given."""
    blob = Path(path).read_bytes()
    head_len = len(_MAGIC) + 24 + 16
    if len(blob) < head_len:
        raise CheckpointError(f"checkpoint {path} is truncated")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"checkpoint {path} has wrong magic bytes")
    dim, num_classes, seed = struct.unpack("<QQQ", blob[len(_MAGIC) : len(_MAGIC) + 24])
    digest = blob[len(_MAGIC) + 24 : head_len]
    body = blob[head_len:]
    expected_bytes = dim * num_classes * 8
    if len(body) != expected_bytes:
        raise CheckpointError(
            f"checkpoint {path} body has {len(body)} bytes, expected {expected_bytes}"
        )
    if expected_config is not None and digest != expected_config.digest():
        raise CheckpointError(
            f"checkpoint {path} was written for a different feature configuration"
        )
    W = np.frombuffer(body, dtype="<f8").reshape(dim, num_classes).copy()
    return ModelParams(W, int(seed))
