"""Tokenized, BIO-labeled corpora with CoNLL-format I/O and label algebra.

A :class:`Corpus` holds sentences plus any number of named label layers
("gold", "distant", "pred", ...), all aligned 1:1 with the sentences.
Every layer stored on a corpus is strict BIO: ``I-X`` may only continue a
``B-X``/``I-X`` of the same type.  IOB1-style input (``I-X`` opening an
entity, as in the original CoNLL03 release) is repaired on ingest.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Union

from .errors import ConllParseError, MissingLayerError, SchemaError

OUTSIDE = "O"

#: Conventional layer names used by the pipeline.
GOLD = "gold"
DISTANT = "distant"
PRED = "pred"


@dataclass(frozen=True)
class Token:
    """A single surface token at a 0-based position within its sentence."""

    text: str
    index: int

    def __post_init__(self):
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ValueError(f"token text must be non-empty and contain no whitespace: {self.text!r}")
        if self.index < 0:
            raise ValueError(f"token index must be non-negative: {self.index}")


@dataclass(frozen=True)
class Sentence:
    """An ordered, non-empty sequence of tokens."""

    tokens: tuple[Token, ...]
    doc_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) == 0:
            raise ValueError("a sentence must contain at least one token")
        for pos, tok in enumerate(self.tokens):
            if tok.index != pos:
                raise ValueError(f"token index {tok.index} does not match position {pos}")

    @classmethod
    def from_texts(cls, texts: Iterable[str], doc_id: str = "") -> "Sentence":
        return cls(tuple(Token(t, i) for i, t in enumerate(texts)), doc_id=doc_id)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(tok.text for tok in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)


@dataclass(frozen=True)
class LabelSchema:
    """Fixed label inventory: ``O`` first, then ``B-X``/``I-X`` per type.

    The ordering is deterministic so class indices (and argmax
    tie-breaking) are reproducible across runs.
    """

    entity_types: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        seen = set()
        for name in self.entity_types:
            if not name or any(ch.isspace() for ch in name):
                raise SchemaError(f"invalid entity type name: {name!r}")
            if name == OUTSIDE:
                raise SchemaError(f"entity type may not be named {OUTSIDE!r}")
            if name in seen:
                raise SchemaError(f"duplicate entity type: {name!r}")
            seen.add(name)

    @cached_property
    def labels(self) -> tuple[str, ...]:
        out = [OUTSIDE]
        for name in self.entity_types:
            out.append(f"B-{name}")
            out.append(f"I-{name}")
        return tuple(out)

    @cached_property
    def _label_to_index(self) -> dict[str, int]:
        return {tag: i for i, tag in enumerate(self.labels)}

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def index_of(self, tag: str) -> int:
        try:
            return self._label_to_index[tag]
        except KeyError:
            raise SchemaError(f"unknown tag {tag!r}; expected one of {list(self.labels)}") from None

    def tag_of(self, index: int) -> str:
        if not 0 <= index < self.num_labels:
            raise SchemaError(f"label index {index} out of range [0, {self.num_labels})")
        return self.labels[index]

    def type_of(self, index: int) -> str | None:
        """Entity type of a label index, or None for O."""
        if index == 0:
            return None
        return self.entity_types[(index - 1) // 2]

    def is_begin(self, index: int) -> bool:
        return index > 0 and (index - 1) % 2 == 0

    def is_inside(self, index: int) -> bool:
        return index > 0 and (index - 1) % 2 == 1

    def begin_index(self, etype: str) -> int:
        return self.index_of(f"B-{etype}")

    def inside_index(self, etype: str) -> int:
        return self.index_of(f"I-{etype}")


@dataclass(frozen=True)
class LabelSequence:
    """Per-token label indices into a :class:`LabelSchema`."""

    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        for i, lab in enumerate(self.labels):
            if lab < 0:
                raise ValueError(f"negative label index {lab} at position {i}")

    @classmethod
    def from_tags(cls, tags: Iterable[str], schema: LabelSchema) -> "LabelSequence":
        return cls(tuple(schema.index_of(t) for t in tags))

    def to_tags(self, schema: LabelSchema) -> list[str]:
        return [schema.tag_of(i) for i in self.labels]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[int]:
        return iter(self.labels)

    def __getitem__(self, i: int) -> int:
        return self.labels[i]


@dataclass(frozen=True, order=True)
class EntitySpan:
    """An entity occupying tokens ``start..end`` (both inclusive)."""

    start: int
    end: int
    etype: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span boundaries ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class Corpus:
    """Sentences plus aligned label layers sharing one schema.

    Immutable: layer attachment returns a new corpus.
    """

    sentences: tuple[Sentence, ...]
    schema: LabelSchema
    layers: Mapping[str, tuple[LabelSequence, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "layers", dict(self.layers))
        for name, seqs in self.layers.items():
            seqs = tuple(seqs)
            self.layers[name] = seqs
            if len(seqs) != len(self.sentences):
                raise ValueError(
                    f"layer {name!r} has {len(seqs)} sequences for {len(self.sentences)} sentences"
                )
            for sent, seq in zip(self.sentences, seqs):
                if len(seq) != len(sent):
                    raise ValueError(
                        f"layer {name!r} length {len(seq)} does not match sentence "
                        f"{sent.doc_id!r} of length {len(sent)}"
                    )

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    @property
    def layer_names(self) -> tuple[str, ...]:
        return tuple(self.layers.keys())

    def has_layer(self, name: str) -> bool:
        return name in self.layers

    def layer(self, name: str) -> tuple[LabelSequence, ...]:
        try:
            return self.layers[name]
        except KeyError:
            raise MissingLayerError(
                f"corpus has no layer {name!r}; available: {list(self.layers)}"
            ) from None

    def with_layer(self, name: str, seqs: Iterable[LabelSequence]) -> "Corpus":
        new_layers = dict(self.layers)
        new_layers[name] = tuple(seqs)
        return Corpus(self.sentences, self.schema, new_layers)


def validate_bio(labels: LabelSequence, schema: LabelSchema) -> tuple[bool, int | None]:
    """Check strict BIO validity; returns (verdict, first violation position)."""
    prev: int | None = None
    for i, lab in enumerate(labels):
        if lab < 0 or lab >= schema.num_labels:
            return False, i
        if schema.is_inside(lab):
            opener_ok = (
                prev is not None
                and prev != 0
                and schema.type_of(prev) == schema.type_of(lab)
            )
            if not opener_ok:
                return False, i
        prev = lab
    return True, None


def spans_from_labels(labels: LabelSequence, schema: LabelSchema) -> set[EntitySpan]:
    """Decode maximal B/I runs into entity spans. Input must be strict BIO."""
    ok, pos = validate_bio(labels, schema)
    if not ok:
        raise ValueError(f"label sequence violates BIO at position {pos}")
    spans: set[EntitySpan] = set()
    start: int | None = None
    etype: str | None = None
    for i, lab in enumerate(labels):
        if schema.is_begin(lab):
            if start is not None:
                spans.add(EntitySpan(start, i - 1, etype))
            start, etype = i, schema.type_of(lab)
        elif lab == 0:
            if start is not None:
                spans.add(EntitySpan(start, i - 1, etype))
            start, etype = None, None
        # I-X continues the open span
    if start is not None:
        spans.add(EntitySpan(start, len(labels) - 1, etype))
    return spans


def labels_from_spans(spans: Iterable[EntitySpan], length: int, schema: LabelSchema) -> LabelSequence:
    """Encode non-overlapping spans as a strict BIO sequence of the given length."""
    ordered = sorted(spans, key=lambda s: s.start)
    out = [0] * length
    prev_end = -1
    for span in ordered:
        if span.end >= length:
            raise ValueError(f"span {span} exceeds sentence length {length}")
        if span.start <= prev_end:
            raise ValueError(f"span {span} overlaps a previous span")
        if span.etype not in schema.entity_types:
            raise SchemaError(f"span type {span.etype!r} not in schema")
        out[span.start] = schema.begin_index(span.etype)
        for i in range(span.start + 1, span.end + 1):
            out[i] = schema.inside_index(span.etype)
        prev_end = span.end
    return LabelSequence(tuple(out))


def _as_text(source: Union[str, bytes, IO[str], IO[bytes], Path]) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _repair_iob1(tags: list[tuple[str, str | None, int]], schema: LabelSchema) -> list[int]:
    """Convert (prefix, type) tags to strict-BIO indices, promoting opening I to B."""
    out: list[int] = []
    prev_prefix, prev_type = OUTSIDE, None
    for prefix, etype, lineno in tags:
        if prefix == OUTSIDE:
            out.append(0)
            prev_prefix, prev_type = OUTSIDE, None
            continue
        if etype not in schema.entity_types:
            raise SchemaError(f"line {lineno}: unknown entity type {etype!r} in tag")
        if prefix == "I" and not (prev_prefix in ("B", "I") and prev_type == etype):
            prefix = "B"
        out.append(schema.begin_index(etype) if prefix == "B" else schema.inside_index(etype))
        prev_prefix, prev_type = prefix, etype
    return out


def _split_tag(tag: str, lineno: int) -> tuple[str, str | None]:
    if tag == OUTSIDE:
        return OUTSIDE, None
    if len(tag) > 2 and tag[0] in ("B", "I") and tag[1] == "-":
        return tag[0], tag[2:]
    raise SchemaError(f"line {lineno}: malformed tag {tag!r}")


def parse_conll(
    source: Union[str, bytes, IO[str], IO[bytes], Path],
    schema: LabelSchema,
    layer: str = GOLD,
) -> Corpus:
    """Parse column-oriented CoNLL text into a corpus.

    One token per line, blank line between sentences, last column is the
    tag.  A single-column file yields an unlabeled corpus.  LF and CRLF
    line endings are both accepted.
    """
    text = _as_text(source)
    sentences: list[Sentence] = []
    label_seqs: list[LabelSequence] = []
    tokens: list[str] = []
    tags: list[tuple[str, str | None, int]] = []
    expected_cols: int | None = None

    def flush():
        if not tokens:
            return
        doc_id = str(len(sentences))
        sentences.append(Sentence.from_texts(tokens, doc_id=doc_id))
        if expected_cols is not None and expected_cols >= 2:
            label_seqs.append(LabelSequence(tuple(_repair_iob1(tags, schema))))
        tokens.clear()
        tags.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            flush()
            continue
        cols = line.split()
        if expected_cols is None:
            expected_cols = len(cols)
        elif len(cols) != expected_cols:
            raise ConllParseError(
                lineno, f"expected {expected_cols} columns, found {len(cols)}: {line!r}"
            )
        tokens.append(cols[0])
        if expected_cols >= 2:
            prefix, etype = _split_tag(cols[-1], lineno)
            tags.append((prefix, etype, lineno))
    flush()

    layers = {layer: tuple(label_seqs)} if label_seqs else {}
    return Corpus(tuple(sentences), schema, layers)


def read_conll(path: Union[str, Path], schema: LabelSchema, layer: str = GOLD) -> Corpus:
    return parse_conll(Path(path), schema, layer=layer)


def write_conll(corpus: Corpus, layer: str = GOLD) -> str:
    """Render one label layer as CoNLL text. Inverse of :func:`parse_conll`."""
    seqs = corpus.layer(layer)
    blocks = []
    for sent, seq in zip(corpus.sentences, seqs):
        tags = seq.to_tags(corpus.schema)
        blocks.append("\n".join(f"{tok.text} {tag}" for tok, tag in zip(sent.tokens, tags)))
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"


def write_conll_file(corpus: Corpus, path: Union[str, Path], layer: str = GOLD) -> None:
    Path(path).write_text(write_conll(corpus, layer=layer), encoding="utf-8", newline="\n")
