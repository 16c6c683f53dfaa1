"""Shared random generators for tests. Seeded rng in, deterministic out."""

from bondner.corpus import Corpus, LabelSchema, LabelSequence, Sentence


def corpus_from_tagged(tagged, schema: LabelSchema, layers=("gold",)) -> Corpus:
    """Build a corpus from [(word, tag), ...] sentences, one label layer per name."""
    sentences = tuple(Sentence.from_texts([w for w, _ in sent]) for sent in tagged)
    seqs = tuple(LabelSequence.from_tags([t for _, t in sent], schema) for sent in tagged)
    corpus = Corpus(sentences, schema)
    for layer in layers:
        corpus = corpus.with_layer(layer, seqs)
    return corpus


def separable_corpus(rng, schema: LabelSchema, n_sentences: int = 40) -> Corpus:
    """Sentences where each surface form has one fixed label: linearly separable."""
    lexicon = [
        ("alpha", "O"), ("beta", "O"), ("gamma", "O"), ("delta", "O"),
        ("Kappa", "B-PER"), ("Sigma", "B-PER"), ("Omega", "B-ORG"), ("Theta", "B-ORG"),
    ]
    tagged = []
    for _ in range(n_sentences):
        length = int(rng.integers(3, 8))
        picks = [lexicon[int(rng.integers(len(lexicon)))] for _ in range(length)]
        tagged.append(picks)
    return corpus_from_tagged(tagged, schema, layers=("gold", "distant"))


def random_bio(rng, schema: LabelSchema, length: int, p_entity: float = 0.3) -> LabelSequence:
    """A random strict-BIO sequence over the schema."""
    labels = []
    prev_type = None
    for _ in range(length):
        r = rng.random()
        if r < 1.0 - p_entity:
            labels.append(0)
            prev_type = None
        elif prev_type is not None and r < 1.0 - p_entity / 2:
            labels.append(schema.inside_index(prev_type))
        else:
            etype = schema.entity_types[int(rng.integers(len(schema.entity_types)))]
            labels.append(schema.begin_index(etype))
            prev_type = etype
    return LabelSequence(tuple(labels))


def random_raw_labels(rng, schema: LabelSchema, length: int) -> list[int]:
    """Unconstrained label indices, as an argmax decoder might emit."""
    return [int(x) for x in rng.integers(0, schema.num_labels, size=length)]
