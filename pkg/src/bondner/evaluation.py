"""Entity-level scoring and token-level confusion counts.

Scoring is exact-match over (start, end, type) span triples, the CoNLL
convention.  Predicted label streams are BIO-repaired before decoding,
because token-wise classifiers occasionally emit ``I-X`` without an
opener; gold layers are required to be valid as parsed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, LabelSchema, LabelSequence, spans_from_labels
from .errors import SchemaError


def repair_bio(labels: Iterable[int], schema: LabelSchema) -> LabelSequence:
    """Promote ``I-X`` without a same-type opener to ``B-X``.

    Identity on already-valid sequences; output always passes validate_bio.
    """
    out: list[int] = []
    prev = 0
    for lab in labels:
        lab = int(lab)
        if not 0 <= lab < schema.num_labels:
            raise SchemaError(f"label index {lab} out of range for schema")
        if schema.is_inside(lab):
            etype = schema.type_of(lab)
            if prev == 0 or schema.type_of(prev) != etype:
                lab = schema.begin_index(etype)
        out.append(lab)
        prev = lab
    return LabelSequence(tuple(out))


def _prf(tp: int, pred_count: int, gold_count: int) -> tuple[float, float, float]:
    p = tp / pred_count if pred_count > 0 else 0.0
    r = tp / gold_count if gold_count > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass(frozen=True)
class TypeMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    pred_count: int
    gold_count: int


@dataclass(frozen=True)
class Metrics:
    """Aggregate and per-type exact-match span scores."""

    precision: float
    recall: float
    f1: float
    tp: int
    pred_count: int
    gold_count: int
    per_type: Mapping[str, TypeMetrics]

    def summary(self) -> str:
        """Render as "F1 (Precision/Recall)" percentages, 2 decimals."""
        return f"{self.f1 * 100:.2f} ({self.precision * 100:.2f}/{self.recall * 100:.2f})"


def entity_prf(
    gold: Sequence[LabelSequence],
    pred: Sequence[LabelSequence],
    schema: LabelSchema,
) -> Metrics:
    """Exact-match span precision/recall/F1 of pred against gold.

    A predicted span is a true positive iff gold contains the identical
    (start, end, type) triple in the same sentence.  Empty-prediction
    precision is 0 by convention.
    """
    if len(gold) != len(pred):
        raise ValueError(f"layer lengths differ: {len(gold)} gold vs {len(pred)} pred")
    tp: dict[str, int] = {t: 0 for t in schema.entity_types}
    pred_count = dict(tp)
    gold_count = dict(tp)
    for i, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            raise ValueError(f"sentence {i}: gold length {len(g_seq)} vs pred length {len(p_seq)}")
        g_spans = spans_from_labels(g_seq, schema)
        p_spans = spans_from_labels(repair_bio(p_seq, schema), schema)
        for span in g_spans:
            gold_count[span.etype] += 1
        for span in p_spans:
            pred_count[span.etype] += 1
        for span in g_spans & p_spans:
            tp[span.etype] += 1
    per_type = {}
    for etype in schema.entity_types:
        p, r, f1 = _prf(tp[etype], pred_count[etype], gold_count[etype])
        per_type[etype] = TypeMetrics(p, r, f1, tp[etype], pred_count[etype], gold_count[etype])
    tp_all = sum(tp.values())
    pred_all = sum(pred_count.values())
    gold_all = sum(gold_count.values())
    p, r, f1 = _prf(tp_all, pred_all, gold_all)
    return Metrics(p, r, f1, tp_all, pred_all, gold_all, per_type)


def evaluate_corpus(corpus: Corpus, pred_layer: str, gold_layer: str = "gold") -> Metrics:
    return entity_prf(corpus.layer(gold_layer), corpus.layer(pred_layer), corpus.schema)


@dataclass(frozen=True)
class ConfusionTable:
    """Token-level gold-by-predicted class counts."""

    counts: np.ndarray
    labels: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_normalized(self) -> np.ndarray:
        """Rows rescaled to portions; all-zero rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sums > 0, self.counts / np.maximum(sums, 1), 0.0)
        return out


def token_confusion(
    gold: Sequence[LabelSequence],
    pred: Sequence[LabelSequence],
    schema: LabelSchema,
) -> ConfusionTable:
    """Count (gold class, predicted class) pairs over all aligned tokens."""
    if len(gold) != len(pred):
        raise ValueError(f"layer lengths differ: {len(gold)} gold vs {len(pred)} pred")
    counts = np.zeros((schema.num_labels, schema.num_labels), dtype=np.int64)
    for i, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            raise ValueError(f"sentence {i}: gold length {len(g_seq)} vs pred length {len(p_seq)}")
        for g, p in zip(g_seq, p_seq):
            if not (0 <= g < schema.num_labels and 0 <= p < schema.num_labels):
                raise SchemaError(f"sentence {i}: label index out of range")
            counts[g, p] += 1
    return ConfusionTable(counts, schema.labels)


def _metrics_fields(m) -> list[str]:
    return [
        f'"precision": {m.precision:.6f}',
        f'"recall": {m.recall:.6f}',
        f'"f1": {m.f1:.6f}',
        f'"tp": {m.tp}',
        f'"pred_count": {m.pred_count}',
        f'"gold_count": {m.gold_count}',
    ]


def metrics_to_json(metrics: Metrics) -> str:
    """Serialize with fixed 6-decimal fractions so equal runs diff clean."""
    lines = ["{"]
    for field in _metrics_fields(metrics):
        lines.append(f"  {field},")
    lines.append('  "per_type": {')
    type_blocks = []
    for etype, tm in metrics.per_type.items():
        inner = ", ".join(_metrics_fields(tm))
        type_blocks.append(f'    "{etype}": {{{inner}}}')
    lines.append(",\n".join(type_blocks))
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
