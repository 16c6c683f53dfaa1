"""Seeded synthetic NER corpora with controllable distant-label noise.

The generator plants four entity types whose surface forms recur across
train/dev/test, wraps them in partially reliable lowercase context cues,
and builds gazetteers that are deliberately imperfect in three ways:
incomplete coverage (false O labels), wrong-type and trap entries (false
positives), and cross-type duplicates (discarded as ambiguous).  The
noise rates are tuned so distant labels land near token precision 0.72
and recall 0.51.

The label-quality profile (precision/recall of the distant layer) is
measured on the training split, which is built entirely from the train
lexicons.  Dev and test mix in mentions of novel surfaces that never
occur in train and sit in no gazetteer: first names, type suffix words,
cues, and shapes recur, but the identifying words are new.  Those
mentions are invisible to gazetteer matching and to per-surface
memorization alike, so they reward a model exactly insofar as it learned
the shared, transferable evidence - and punish one that traded that
evidence away to fit per-surface label noise, which is what prolonged
training on distant labels does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, EntitySpan, LabelSchema, Sentence, labels_from_spans
from .distant import Gazetteer, StampRule

ENTITY_TYPES = ("PER", "ORG", "LOC", "MISC")

_SYLLABLES = (
    "ba", "bel", "cor", "dan", "el", "fen", "gor", "hal", "im", "jor",
    "kal", "lim", "mor", "nev", "ol", "pra", "quin", "rov", "sel", "tor",
    "ul", "ven", "wex", "yor", "zan", "dra", "mi", "su", "tek", "vol",
)

_ORG_SUFFIXES = ("Group", "Systems", "Holdings", "Labs", "Partners", "Bank")
_LOC_SUFFIXES = ("Bay", "Valley", "Hills", "Port", "Ridge")
_MISC_SUFFIXES = ("Accord", "Cup", "Act", "Pact", "Prize")

_CUES = {
    "PER": (("president", "analyst", "spokesman", "coach", "minister"),
            ("said", "told", "argued", "resigned", "added")),
    "ORG": (("rival", "lender", "firm", "broker"),
            ("shares", "profits", "stocks", "employees")),
    "LOC": (("in", "near", "from", "at"),
            ("region", "border", "airport", "suburb")),
    "MISC": (("annual", "signed", "upcoming"),
             ("treaty", "deal", "tournament", "final")),
}

_FILLER = (
    "the a an and or but while after before because however market prices "
    "report quarter results early late new old strong weak rose fell flat "
    "trading closed opened higher lower about around nearly over under on "
    "with without against between during since until growth demand supply "
    "talks meeting agreement statement officials sources monday tuesday "
    "friday week month year today yesterday season match game points goal "
    "win loss draw team players fans crowd police court case ruling law "
    "tax budget deficit exports imports oil wheat gold shares toward still "
    "percent billion million three four five several many most some few"
).split()


@dataclass(frozen=True)
class SynthConfig:
    """Corpus sizes, lexicon sizes, and the distant-noise knobs.

    ``coverage`` is the per-type fraction of each train lexicon present
    in its gazetteer (drives false O labels); skewing it by type keeps
    the shared evidence of well-covered types mostly consistent with the
    distant labels while poorly covered types carry the recall deficit.
    ``n_trap_words`` rare lowercase words are planted in the gazetteers
    and injected into sentences at ``trap_rate`` per sentence (drives
    false positives).  Wrong-type and cross-type duplicate entries add
    type confusion and ambiguity drops.  ``novel_share`` is the fraction
    of dev/test entity mentions drawn from the held-out novel lexicons.
    """

    n_train: int = 2200
    n_dev: int = 600
    n_test: int = 600
    n_per: int = 150
    n_org: int = 120
    n_loc: int = 130
    n_misc: int = 90
    n_novel_per: int = 60
    n_novel_org: int = 50
    n_novel_loc: int = 55
    n_novel_misc: int = 35
    first_name_pool: int = 18
    coverage: tuple[float, float, float, float] = (0.73, 0.58, 0.40, 0.15)
    ambiguous_per_type: int = 3
    wrong_type_per_type: int = 3
    n_trap_words: int = 80
    trap_rate: float = 0.40
    novel_share: float = 0.30
    cue_pre_prob: float = 0.45
    cue_post_prob: float = 0.30

    def __post_init__(self):
        counts = (
            self.n_train, self.n_dev, self.n_test,
            self.n_per, self.n_org, self.n_loc, self.n_misc,
            self.n_novel_per, self.n_novel_org, self.n_novel_loc, self.n_novel_misc,
            self.first_name_pool,
        )
        if any(n < 1 for n in counts):
            raise ValueError("corpus, lexicon, and name-pool sizes must be positive")
        if self.ambiguous_per_type < 0 or self.wrong_type_per_type < 0 or self.n_trap_words < 0:
            raise ValueError("planted-noise counts must be non-negative")
        rates = (
            ("coverage", *self.coverage),
            ("trap_rate", self.trap_rate),
            ("novel_share", self.novel_share),
            ("cue_pre_prob", self.cue_pre_prob),
            ("cue_post_prob", self.cue_post_prob),
        )
        for name, *values in rates:
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise ValueError(f"{name} must lie in [0, 1]")
        if len(self.coverage) != len(ENTITY_TYPES):
            raise ValueError(f"coverage needs one entry per type: {self.coverage}")


@dataclass(frozen=True)
class SynthData:
    train: Corpus
    dev: Corpus
    test: Corpus
    gazetteers: tuple[Gazetteer, ...]
    rules: tuple[StampRule, ...]
    schema: LabelSchema


def _word(rng, min_syl=2, max_syl=3) -> str:
    n = int(rng.integers(min_syl, max_syl + 1))
    w = "".join(_SYLLABLES[int(rng.integers(len(_SYLLABLES)))] for _ in range(n))
    return w.capitalize()


def _unique_words(rng, count, taken, min_syl=2, max_syl=3) -> list[str]:
    out = []
    while len(out) < count:
        w = _word(rng, min_syl, max_syl)
        if w.casefold() not in taken:
            taken.add(w.casefold())
            out.append(w)
    return out


def _per_surfaces(rng, count, first_names, taken):
    out = []
    seen = set()
    while len(out) < count:
        surface = (first_names[int(rng.integers(len(first_names)))], _unique_words(rng, 1, taken)[0])
        if surface not in seen:
            seen.add(surface)
            out.append(surface)
    return out


def _org_surfaces(rng, count, taken, p_suffix, p_inc):
    out = []
    for _ in range(count):
        base = _unique_words(rng, 1, taken)[0]
        r = rng.random()
        if r < p_suffix:
            out.append((base, _ORG_SUFFIXES[int(rng.integers(len(_ORG_SUFFIXES)))]))
        elif r < p_suffix + p_inc:
            out.append((base, "Inc."))
        else:
            out.append((base,))
    return out


def _loc_surfaces(rng, count, taken, p_suffix):
    out = []
    for _ in range(count):
        base = _unique_words(rng, 1, taken)[0]
        if rng.random() < p_suffix:
            out.append((base, _LOC_SUFFIXES[int(rng.integers(len(_LOC_SUFFIXES)))]))
        else:
            out.append((base,))
    return out


def _misc_surfaces(rng, count, taken):
    return [
        (_unique_words(rng, 1, taken)[0], _MISC_SUFFIXES[int(rng.integers(len(_MISC_SUFFIXES)))])
        for _ in range(count)
    ]


def _build_lexicons(rng, config: SynthConfig):
    """Train lexicons, held-out novel lexicons, and the trap word pool.

    Unique last names / base words are the only way to tell one surface
    from another; first names and type suffixes are shared on purpose,
    and the novel lexicons reuse them so shared evidence transfers.
    """
    taken = {w.casefold() for w in _FILLER}
    taken.update(w.casefold() for words in _CUES.values() for side in words for w in side)
    taken.update(w.casefold() for w in _ORG_SUFFIXES + _LOC_SUFFIXES + _MISC_SUFFIXES)
    taken.add("inc.")

    first_names = _unique_words(rng, config.first_name_pool, taken)
    lexicons = {
        "PER": _per_surfaces(rng, config.n_per, first_names, taken),
        "ORG": _org_surfaces(rng, config.n_org, taken, p_suffix=0.55, p_inc=0.10),
        "LOC": _loc_surfaces(rng, config.n_loc, taken, p_suffix=0.35),
        "MISC": _misc_surfaces(rng, config.n_misc, taken),
    }
    novel = {
        "PER": _per_surfaces(rng, config.n_novel_per, first_names, taken),
        "ORG": _org_surfaces(rng, config.n_novel_org, taken, p_suffix=0.80, p_inc=0.0),
        "LOC": _loc_surfaces(rng, config.n_novel_loc, taken, p_suffix=0.70),
        "MISC": _misc_surfaces(rng, config.n_novel_misc, taken),
    }
    traps = [w.lower() for w in _unique_words(rng, config.n_trap_words, taken)]
    return lexicons, novel, traps


def _sample_type(rng) -> str:
    return ENTITY_TYPES[int(rng.choice(4, p=[0.30, 0.30, 0.25, 0.15]))]


def _make_sentence(rng, lexicons, novel, novel_share, traps, config: SynthConfig) -> tuple[list[str], list[EntitySpan]]:
    n_entities = int(rng.choice([0, 1, 2, 3], p=[0.18, 0.44, 0.28, 0.10]))
    tokens: list[str] = []
    spans: list[EntitySpan] = []

    def emit_filler(k):
        for _ in range(k):
            tokens.append(_FILLER[int(rng.integers(len(_FILLER)))])

    emit_filler(int(rng.integers(1, 4)))
    for _ in range(n_entities):
        etype = _sample_type(rng)
        source = novel if rng.random() < novel_share else lexicons
        surface = source[etype][int(rng.integers(len(source[etype])))]
        pre, post = _CUES[etype]
        if rng.random() < config.cue_pre_prob:
            tokens.append(pre[int(rng.integers(len(pre)))])
        start = len(tokens)
        tokens.extend(surface)
        spans.append(EntitySpan(start, start + len(surface) - 1, etype))
        if rng.random() < config.cue_post_prob:
            tokens.append(post[int(rng.integers(len(post)))])
        emit_filler(int(rng.integers(1, 5)))
    emit_filler(int(rng.integers(0, 3)))

    if traps and rng.random() < config.trap_rate:
        trap = traps[int(rng.integers(len(traps)))]
        safe = [i for i in range(len(tokens) + 1)
                if not any(s.start < i <= s.end for s in spans)]
        pos = safe[int(rng.integers(len(safe)))]
        tokens.insert(pos, trap)
        spans = [
            EntitySpan(s.start + 1, s.end + 1, s.etype) if s.start >= pos else s
            for s in spans
        ]
    tokens.append(".")

    if not spans or spans[0].start != 0:
        tokens[0] = tokens[0].capitalize()
    return tokens, spans


def _make_corpus(rng, lexicons, novel, novel_share, traps, config: SynthConfig,
                 n_sentences: int, schema: LabelSchema) -> Corpus:
    sentences = []
    gold = []
    for i in range(n_sentences):
        tokens, spans = _make_sentence(rng, lexicons, novel, novel_share, traps, config)
        sentences.append(Sentence.from_texts(tokens, doc_id=str(i)))
        gold.append(labels_from_spans(spans, len(tokens), schema))
    return Corpus(tuple(sentences), schema, {"gold": tuple(gold)})


def _build_gazetteers(rng, lexicons, traps, config: SynthConfig) -> tuple[Gazetteer, ...]:
    folded = {
        t: [tuple(w.casefold() for w in surface) for surface in lexicons[t]]
        for t in ENTITY_TYPES
    }
    entries: dict[str, set] = {t: set() for t in ENTITY_TYPES}
    covered: dict[str, list] = {}
    uncovered: dict[str, list] = {}
    for ti, t in enumerate(ENTITY_TYPES):
        eligible = [p for p in folded[t] if p[-1] != "inc."]
        perm = rng.permutation(len(eligible))
        k = int(round(config.coverage[ti] * len(eligible)))
        covered[t] = [eligible[i] for i in perm[:k]]
        uncovered[t] = [eligible[i] for i in perm[k:]]
        entries[t].update(covered[t])

    # Cross-type duplicates: matched spans become ambiguous and are dropped.
    for i, t in enumerate(ENTITY_TYPES):
        other = ENTITY_TYPES[(i + 1) % 4]
        for p in covered[t][: config.ambiguous_per_type]:
            entries[other].add(p)

    # Wrong-type entries: uncovered surfaces listed under a different type.
    for i, t in enumerate(ENTITY_TYPES):
        other = ENTITY_TYPES[(i + 2) % 4]
        for p in uncovered[t][: config.wrong_type_per_type]:
            entries[other].add(p)

    # Trap entries: rare filler-like lowercase words that match as entities.
    for j, trap in enumerate(traps):
        entries[ENTITY_TYPES[j % 4]].add((trap,))

    return tuple(
        Gazetteer.single(t, frozenset(entries[t]), source_name=f"synth-{t.lower()}")
        for t in ENTITY_TYPES
    )


def make_dataset(seed: int, config: SynthConfig | None = None) -> SynthData:
    """Deterministic corpus + knowledge sources for one seed."""
    config = config or SynthConfig()
    schema = LabelSchema(ENTITY_TYPES)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB04D)))
    lexicons, novel, traps = _build_lexicons(rng, config)
    train = _make_corpus(rng, lexicons, novel, 0.0, traps, config, config.n_train, schema)
    dev = _make_corpus(rng, lexicons, novel, config.novel_share, traps, config, config.n_dev, schema)
    test = _make_corpus(rng, lexicons, novel, config.novel_share, traps, config, config.n_test, schema)
    gazetteers = _build_gazetteers(rng, lexicons, traps, config)
    rules = (StampRule("Inc.", "ORG", "tail"),)
    return SynthData(train, dev, test, gazetteers, rules, schema)
