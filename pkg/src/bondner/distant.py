"""Distant label generation from gazetteers and stamp-word rules.

Labels come from knowledge sources instead of annotators: case-folded
exact phrase matching against per-type gazetteers, with overlapping
matches resolved longest-first, plus single-token "stamp" rules (an
unmatched capitalized run ending in "Inc." is an organization).  Spans
whose evidence is consistent with two or more types are discarded to O
rather than guessed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .corpus import (
    Corpus,
    DISTANT,
    EntitySpan,
    GOLD,
    Sentence,
    labels_from_spans,
    spans_from_labels,
)
from .errors import MissingLayerError
from .evaluation import Metrics, entity_prf

Phrase = tuple[str, ...]

HEAD = "head"
TAIL = "tail"


@dataclass(frozen=True)
class Gazetteer:
    """Case-folded phrase sets keyed by entity type."""

    entries: Mapping[str, frozenset[Phrase]]
    source_name: str = ""

    def __post_init__(self):
        normalized = {}
        for etype, phrases in self.entries.items():
            phrases = frozenset(tuple(p) for p in phrases)
            for phrase in phrases:
                if not phrase or any(not tok for tok in phrase):
                    raise ValueError(f"gazetteer {self.source_name!r}: invalid phrase {phrase!r}")
            normalized[etype] = phrases
        object.__setattr__(self, "entries", normalized)

    @classmethod
    def single(cls, etype: str, phrases: Iterable[Phrase], source_name: str = "") -> "Gazetteer":
        return cls({etype: frozenset(phrases)}, source_name=source_name)

    def phrase_count(self) -> int:
        return sum(len(p) for p in self.entries.values())


def merge_gazetteers(gazetteers: Iterable[Gazetteer]) -> Gazetteer:
    """Union phrase sets type-wise; later sources add, never override."""
    merged: dict[str, set[Phrase]] = {}
    names = []
    for gaz in gazetteers:
        names.append(gaz.source_name)
        for etype, phrases in gaz.entries.items():
            merged.setdefault(etype, set()).update(phrases)
    return Gazetteer(
        {t: frozenset(p) for t, p in merged.items()},
        source_name="+".join(n for n in names if n),
    )


def load_gazetteer(path: Union[str, Path], etype: str) -> Gazetteer:
    """Load one phrase per line; '#' lines are comments; case-folds and dedups."""
    path = Path(path)
    phrases = set()
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        phrases.add(tuple(tok.casefold() for tok in line.split()))
    if not phrases:
        warnings.warn(f"gazetteer file {path} contains no phrases")
    return Gazetteer.single(etype, phrases, source_name=path.name)


@dataclass(frozen=True)
class StampRule:
    """A token that stamps a candidate's type when it heads or tails it."""

    stamp: str
    etype: str
    position: str

    def __post_init__(self):
        if not self.stamp:
            raise ValueError("stamp token must be non-empty")
        if self.position not in (HEAD, TAIL):
            raise ValueError(f"position must be {HEAD!r} or {TAIL!r}: {self.position!r}")


def load_stamp_rules(path: Union[str, Path]) -> tuple[StampRule, ...]:
    """One rule per line: stamp<TAB>type<TAB>head|tail. '#' lines ignored."""
    rules = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected stamp<TAB>type<TAB>head|tail, got {raw!r}")
        rules.append(StampRule(parts[0], parts[1], parts[2]))
    return tuple(rules)


@dataclass(frozen=True)
class CandidateSpan:
    """A typeless potential-entity range with its generating mechanism."""

    start: int
    end: int
    origin: str = "rule"

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid candidate boundaries ({self.start}, {self.end})")
        if self.origin not in ("gazetteer", "rule"):
            raise ValueError(f"unknown candidate origin {self.origin!r}")


@dataclass(frozen=True)
class GazetteerMatch:
    """A resolved phrase match; two or more types means ambiguous."""

    start: int
    end: int
    etypes: tuple[str, ...]

    @property
    def ambiguous(self) -> bool:
        return len(self.etypes) >= 2

    def to_span(self) -> EntitySpan:
        if self.ambiguous:
            raise ValueError(f"ambiguous match over types {self.etypes} has no single span")
        return EntitySpan(self.start, self.end, self.etypes[0])


class _Trie:
    """Token-level phrase trie; terminal nodes carry the matching types."""

    __slots__ = ("children", "types")

    def __init__(self):
        self.children: dict[str, _Trie] = {}
        self.types: set[str] = set()

    def add(self, phrase: Phrase, etype: str) -> None:
        node = self
        for tok in phrase:
            node = node.children.setdefault(tok, _Trie())
        node.types.add(etype)


def _build_trie(gazetteers: Iterable[Gazetteer]) -> tuple[_Trie, list[str]]:
    root = _Trie()
    type_seen: list[str] = []
    for gaz in gazetteers:
        for etype, phrases in gaz.entries.items():
            if etype not in type_seen:
                type_seen.append(etype)
            for phrase in phrases:
                root.add(phrase, etype)
    return root, type_seen


def match_gazetteer(
    sentence: Sentence,
    gazetteers: Iterable[Gazetteer],
    type_order: Sequence[str] | None = None,
) -> list[GazetteerMatch]:
    """Resolve case-folded phrase matches to disjoint spans.

    Every maximal set of overlapping raw matches is reduced by: drop any
    match strictly contained in another, then keep greedily by longest,
    then leftmost, then earliest type in ``type_order``.  A kept span
    carrying two or more types is returned as ambiguous.
    """
    gazetteers = list(gazetteers)
    trie, seen_order = _build_trie(gazetteers)
    order = list(type_order) if type_order is not None else seen_order
    rank = {t: i for i, t in enumerate(order)}

    folded = [tok.text.casefold() for tok in sentence.tokens]
    raw: dict[tuple[int, int], set[str]] = {}
    for i in range(len(folded)):
        node = trie
        for j in range(i, len(folded)):
            node = node.children.get(folded[j])
            if node is None:
                break
            if node.types:
                raw.setdefault((i, j), set()).update(node.types)

    spans = list(raw)
    kept_keys = []
    for s in spans:
        contained = any(
            t != s and t[0] <= s[0] and s[1] <= t[1] for t in spans
        )
        if not contained:
            kept_keys.append(s)
    kept_keys.sort(key=lambda s: (-(s[1] - s[0]), s[0], min(rank.get(t, len(rank)) for t in raw[s])))

    resolved: list[tuple[int, int]] = []
    for s in kept_keys:
        if all(s[1] < r[0] or r[1] < s[0] for r in resolved):
            resolved.append(s)
    resolved.sort()
    return [
        GazetteerMatch(
            s[0], s[1], tuple(sorted(raw[s], key=lambda t: rank.get(t, len(rank))))
        )
        for s in resolved
    ]


def _capitalized(tok: str) -> bool:
    return tok[0].isupper()


def _all_caps(tok: str) -> bool:
    return len(tok) >= 2 and tok.isupper()


def generate_candidates(
    sentence: Sentence, protected: Iterable[int] = ()
) -> list[CandidateSpan]:
    """Maximal capitalized runs, as stand-ins for tagger-found noun chunks.

    A lone capitalized sentence opener is noise more often than entity, so
    a run that is only the first token survives only when that token is
    all-caps (at least two letters) or sits in ``protected`` (positions
    independently matched by a gazetteer).
    """
    protected = set(protected)
    texts = sentence.texts
    out: list[CandidateSpan] = []
    i = 0
    while i < len(texts):
        if not _capitalized(texts[i]):
            i += 1
            continue
        j = i
        while j + 1 < len(texts) and _capitalized(texts[j + 1]):
            j += 1
        keep = True
        if i == 0 and j == 0:
            keep = _all_caps(texts[0]) or 0 in protected
        if keep:
            out.append(CandidateSpan(i, j, origin="rule"))
        i = j + 1
    return out


def apply_stamp_rules(
    candidates: Iterable[CandidateSpan],
    rules: Iterable[StampRule],
    sentence: Sentence,
) -> list[EntitySpan]:
    """Type candidates whose head/tail token equals a stamp, case-sensitively.

    A candidate stamped with two or more distinct types is dropped.
    """
    rules = list(rules)
    out = []
    for cand in candidates:
        types = set()
        for rule in rules:
            pos = cand.start if rule.position == HEAD else cand.end
            if sentence.tokens[pos].text == rule.stamp:
                types.add(rule.etype)
        if len(types) == 1:
            out.append(EntitySpan(cand.start, cand.end, types.pop()))
    return out


@dataclass(frozen=True)
class LabelingStats:
    """Where the distant layer came from, including what was thrown away."""

    ambiguous_spans: tuple[tuple[tuple[int, int], ...], ...]
    gazetteer_span_count: int
    stamp_span_count: int
    ambiguous_span_count: int


def generate_distant_labels_with_stats(
    corpus: Corpus,
    gazetteers: Iterable[Gazetteer],
    rules: Iterable[StampRule] = (),
) -> tuple[Corpus, LabelingStats]:
    """Gazetteer matches first, stamp rules on leftover candidates, O elsewhere."""
    gazetteers = list(gazetteers)
    rules = list(rules)
    schema = corpus.schema
    seqs = []
    ambiguous_per_sent = []
    n_gaz = n_stamp = n_ambig = 0
    for sentence in corpus.sentences:
        matches = match_gazetteer(sentence, gazetteers, type_order=schema.entity_types)
        claimed = set()
        spans = []
        ambiguous_here = []
        for match in matches:
            claimed.update(range(match.start, match.end + 1))
            if match.ambiguous:
                ambiguous_here.append((match.start, match.end))
                n_ambig += 1
            else:
                spans.append(match.to_span())
                n_gaz += 1
        protected = {m.start for m in matches if m.start == 0}
        candidates = [
            c
            for c in generate_candidates(sentence, protected=protected)
            if claimed.isdisjoint(range(c.start, c.end + 1))
        ]
        stamped = apply_stamp_rules(candidates, rules, sentence)
        n_stamp += len(stamped)
        spans.extend(stamped)
        seqs.append(labels_from_spans(spans, len(sentence), schema))
        ambiguous_per_sent.append(tuple(ambiguous_here))
    labeled = corpus.with_layer(DISTANT, tuple(seqs))
    stats = LabelingStats(tuple(ambiguous_per_sent), n_gaz, n_stamp, n_ambig)
    return labeled, stats


def generate_distant_labels(
    corpus: Corpus,
    gazetteers: Iterable[Gazetteer],
    rules: Iterable[StampRule] = (),
) -> Corpus:
    labeled, _ = generate_distant_labels_with_stats(corpus, gazetteers, rules)
    return labeled


@dataclass(frozen=True)
class SpanCounts:
    matched: int
    ambiguous: int
    unmatched: int


@dataclass(frozen=True)
class MatchReport:
    """Distant-layer quality against gold: token level plus span level."""

    token_precision: float
    token_recall: float
    token_f1: float
    entity: Metrics
    per_type: Mapping[str, SpanCounts]


def match_report(
    corpus: Corpus,
    stats: LabelingStats | None = None,
    distant_layer: str = DISTANT,
    gold_layer: str = GOLD,
) -> MatchReport:
    """Score the distant layer against gold.

    Token-level scores treat any non-O distant label as a prediction and
    count it correct only on exact label agreement.  Per-type span counts
    classify each gold entity as matched (identical span in the distant
    layer), ambiguous (overlapping a discarded multi-type match, known
    only when ``stats`` is given), or unmatched.
    """
    if not corpus.has_layer(gold_layer) or not corpus.has_layer(distant_layer):
        raise MissingLayerError(
            f"match_report needs layers {gold_layer!r} and {distant_layer!r}; "
            f"available: {list(corpus.layer_names)}"
        )
    gold = corpus.layer(gold_layer)
    distant = corpus.layer(distant_layer)
    schema = corpus.schema

    tp = pred = gold_n = 0
    for g_seq, d_seq in zip(gold, distant):
        for g, d in zip(g_seq, d_seq):
            if d != 0:
                pred += 1
                if d == g:
                    tp += 1
            if g != 0:
                gold_n += 1
    token_p = tp / pred if pred > 0 else 0.0
    token_r = tp / gold_n if gold_n > 0 else 0.0
    token_f1 = 2 * token_p * token_r / (token_p + token_r) if token_p + token_r > 0 else 0.0

    entity = entity_prf(gold, distant, schema)

    counts = {t: [0, 0, 0] for t in schema.entity_types}
    for i, (g_seq, d_seq) in enumerate(zip(gold, distant)):
        g_spans = spans_from_labels(g_seq, schema)
        d_spans = spans_from_labels(d_seq, schema)
        ambiguous_here = stats.ambiguous_spans[i] if stats is not None else ()
        for span in g_spans:
            if span in d_spans:
                counts[span.etype][0] += 1
            elif any(span.start <= b and a <= span.end for a, b in ambiguous_here):
                counts[span.etype][1] += 1
            else:
                counts[span.etype][2] += 1
    per_type = {t: SpanCounts(*c) for t, c in counts.items()}
    return MatchReport(token_p, token_r, token_f1, entity, per_type)
