"""Gazetteer matching, candidate generation, stamp rules, and composition."""

import numpy as np
import pytest

from bondner.corpus import Corpus, EntitySpan, LabelSchema, Sentence, validate_bio
from bondner.distant import (
    CandidateSpan,
    Gazetteer,
    StampRule,
    apply_stamp_rules,
    generate_candidates,
    generate_distant_labels,
    generate_distant_labels_with_stats,
    load_gazetteer,
    load_stamp_rules,
    match_gazetteer,
    match_report,
    merge_gazetteers,
)
from bondner.errors import MissingLayerError

SCHEMA = LabelSchema(("PER", "ORG", "LOC", "MISC"))


def sent(text):
    return Sentence.from_texts(text.split())


def corpus_of(*texts):
    return Corpus(tuple(sent(t) for t in texts), SCHEMA)


class TestLoadGazetteer:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "loc.txt"
        path.write_text("New York\nParis\n", encoding="utf-8")
        gaz = load_gazetteer(path, "LOC")
        assert gaz.entries["LOC"] == frozenset({("new", "york"), ("paris",)})

    def test_case_fold_dedup(self, tmp_path):
        path = tmp_path / "loc.txt"
        path.write_text("Paris\nparis\n", encoding="utf-8")
        gaz = load_gazetteer(path, "LOC")
        assert gaz.entries["LOC"] == frozenset({("paris",)})

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "loc.txt"
        path.write_text("# header\n\nParis\n", encoding="utf-8")
        gaz = load_gazetteer(path, "LOC")
        assert gaz.phrase_count() == 1

    def test_empty_file_warns(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        with pytest.warns(UserWarning):
            gaz = load_gazetteer(path, "LOC")
        assert gaz.phrase_count() == 0

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            load_gazetteer(tmp_path / "absent.txt", "LOC")

    def test_merge_unions_per_type(self, tmp_path):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("Paris\n", encoding="utf-8")
        b.write_text("London\nParis\n", encoding="utf-8")
        merged = merge_gazetteers([load_gazetteer(a, "LOC"), load_gazetteer(b, "LOC")])
        assert merged.entries["LOC"] == frozenset({("paris",), ("london",)})


class TestGenerateCandidates:
    def test_sentence_initial_singleton_dropped(self):
        cands = generate_candidates(sent("I love New York ."))
        assert [(c.start, c.end) for c in cands] == [(2, 3)]

    def test_no_capitalized_tokens(self):
        assert generate_candidates(sent("hello world")) == []

    def test_all_caps_and_interior_singletons_kept(self):
        cands = generate_candidates(sent("EU rejects German call"))
        assert [(c.start, c.end) for c in cands] == [(0, 0), (2, 2)]

    def test_protected_initial_token_kept(self):
        cands = generate_candidates(sent("Liverpool won today"), protected={0})
        assert [(c.start, c.end) for c in cands] == [(0, 0)]

    def test_initial_run_of_two_kept_whole(self):
        cands = generate_candidates(sent("New York is big"))
        assert [(c.start, c.end) for c in cands] == [(0, 1)]

    def test_runs_are_maximal_and_disjoint(self):
        cands = generate_candidates(sent("visit Den Haag and Acme Inc. today"))
        assert [(c.start, c.end) for c in cands] == [(1, 2), (4, 5)]
        assert all(c.origin == "rule" for c in cands)


class TestMatchGazetteer:
    def test_case_folded_exact_match(self):
        gaz = Gazetteer.single("LOC", {("new", "york")})
        matches = match_gazetteer(sent("I love New York ."), [gaz])
        assert len(matches) == 1
        assert matches[0].to_span() == EntitySpan(2, 3, "LOC")

    def test_longest_match_wins(self):
        gazs = [
            Gazetteer.single("LOC", {("new", "york")}),
            Gazetteer.single("ORG", {("new", "york", "times")}),
        ]
        matches = match_gazetteer(sent("the New York Times said"), gazs)
        assert [m.to_span() for m in matches] == [EntitySpan(1, 3, "ORG")]

    def test_equal_span_two_types_is_ambiguous(self):
        gazs = [
            Gazetteer.single("LOC", {("liverpool",)}),
            Gazetteer.single("ORG", {("liverpool",)}),
        ]
        matches = match_gazetteer(sent("Liverpool won"), gazs)
        assert len(matches) == 1
        assert matches[0].ambiguous
        assert (matches[0].start, matches[0].end) == (0, 0)
        with pytest.raises(ValueError):
            matches[0].to_span()

    def test_leftmost_wins_among_equal_lengths(self):
        gazs = [
            Gazetteer.single("PER", {("a", "b")}),
            Gazetteer.single("LOC", {("b", "c")}),
        ]
        matches = match_gazetteer(sent("a b c"), gazs)
        assert [m.to_span() for m in matches] == [EntitySpan(0, 1, "PER")]

    def test_disjoint_matches_all_kept(self):
        gaz = Gazetteer.single("LOC", {("paris",), ("london",)})
        matches = match_gazetteer(sent("from Paris to London"), [gaz])
        assert [m.to_span() for m in matches] == [
            EntitySpan(1, 1, "LOC"),
            EntitySpan(3, 3, "LOC"),
        ]

    def test_repeated_mention_matched_each_time(self):
        gaz = Gazetteer.single("LOC", {("paris",)})
        matches = match_gazetteer(sent("Paris is Paris"), [gaz])
        assert len(matches) == 2

    def test_no_kept_span_contained_in_any_raw_match(self):
        rng = np.random.default_rng(41)
        vocab = list("abcdefg")
        for _ in range(300):
            words = [vocab[int(rng.integers(len(vocab)))] for _ in range(int(rng.integers(2, 10)))]
            phrases = set()
            for _ in range(int(rng.integers(1, 6))):
                k = int(rng.integers(0, len(words)))
                ln = int(rng.integers(1, 4))
                phrases.add(tuple(words[k : k + ln]))
            gaz = Gazetteer.single("LOC", {p for p in phrases if p})
            matches = match_gazetteer(sent(" ".join(words)), [gaz])
            raw = []
            for i in range(len(words)):
                for j in range(i, len(words)):
                    if tuple(words[i : j + 1]) in gaz.entries["LOC"]:
                        raw.append((i, j))
            for m in matches:
                assert not any(
                    (r != (m.start, m.end)) and r[0] <= m.start and m.end <= r[1] for r in raw
                )
            for a in matches:
                for b in matches:
                    if a is not b:
                        assert a.end < b.start or b.end < a.start


class TestApplyStampRules:
    RULES = [StampRule("Inc.", "ORG", "tail"), StampRule("Mr.", "PER", "head")]

    def test_tail_stamp(self):
        spans = apply_stamp_rules(
            [CandidateSpan(0, 1)], self.RULES, sent("Acme Inc. surged")
        )
        assert spans == [EntitySpan(0, 1, "ORG")]

    def test_head_stamp(self):
        spans = apply_stamp_rules(
            [CandidateSpan(1, 2)], self.RULES, sent("dear Mr. Smith")
        )
        assert spans == [EntitySpan(1, 2, "PER")]

    def test_no_matching_stamp(self):
        assert apply_stamp_rules([CandidateSpan(0, 1)], self.RULES, sent("Acme Corp rose")) == []

    def test_stamps_are_case_sensitive(self):
        assert apply_stamp_rules([CandidateSpan(0, 1)], self.RULES, sent("Acme inc. rose")) == []

    def test_conflicting_stamps_discard(self):
        rules = [StampRule("Holdings", "ORG", "tail"), StampRule("Holdings", "LOC", "tail")]
        assert apply_stamp_rules([CandidateSpan(0, 1)], rules, sent("Acme Holdings fell")) == []

    def test_rules_file_round_trip(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text("# stamps\nInc.\tORG\ttail\nMr.\tPER\thead\n", encoding="utf-8")
        assert load_stamp_rules(path) == tuple(self.RULES)

    def test_bad_rule_line_raises(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text("Inc. ORG tail\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_stamp_rules(path)


class TestGenerateDistantLabels:
    GAZS = [
        Gazetteer.single("LOC", {("new", "york")}),
        Gazetteer.single("ORG", {("acme",)}),
    ]
    RULES = [StampRule("Inc.", "ORG", "tail")]

    def test_single_match_composition(self):
        corpus = corpus_of("I love New York .")
        labeled = generate_distant_labels(corpus, self.GAZS)
        tags = labeled.layer("distant")[0].to_tags(SCHEMA)
        assert tags == ["O", "O", "B-LOC", "I-LOC", "O"]

    def test_ambiguous_only_sentence_is_all_o(self):
        gazs = [
            Gazetteer.single("LOC", {("liverpool",)}),
            Gazetteer.single("ORG", {("liverpool",)}),
        ]
        labeled, stats = generate_distant_labels_with_stats(corpus_of("Liverpool won"), gazs)
        assert labeled.layer("distant")[0].to_tags(SCHEMA) == ["O", "O"]
        assert stats.ambiguous_span_count == 1
        assert stats.ambiguous_spans[0] == ((0, 0),)

    def test_empty_sources_give_all_o(self):
        corpus = corpus_of("EU rejects German call", "hello world")
        labeled = generate_distant_labels(corpus, [], [])
        for seq in labeled.layer("distant"):
            assert set(seq.labels) == {0}

    def test_stamp_rules_fire_on_unmatched_candidates(self):
        corpus = corpus_of("shares of Acme Inc. rose")
        labeled = generate_distant_labels(corpus, [], self.RULES)
        tags = labeled.layer("distant")[0].to_tags(SCHEMA)
        assert tags == ["O", "O", "B-ORG", "I-ORG", "O"]

    def test_gazetteer_claims_block_stamp_retyping(self):
        # "Acme" is gazetteer-matched ORG; the overlapping candidate
        # "Acme Inc." must not re-stamp the claimed token.
        corpus = corpus_of("shares of Acme Inc. rose")
        labeled = generate_distant_labels(corpus, self.GAZS, self.RULES)
        tags = labeled.layer("distant")[0].to_tags(SCHEMA)
        assert tags == ["O", "O", "B-ORG", "O", "O"]

    def test_output_layers_always_bio_valid(self):
        rng = np.random.default_rng(43)
        words = ["Acme", "Inc.", "New", "York", "alpha", "beta", "EU", "I", "the"]
        for _ in range(200):
            n = int(rng.integers(1, 7))
            texts = " ".join(words[int(rng.integers(len(words)))] for _ in range(n))
            labeled = generate_distant_labels(corpus_of(texts), self.GAZS, self.RULES)
            ok, _ = validate_bio(labeled.layer("distant")[0], SCHEMA)
            assert ok

    def test_determinism(self):
        corpus = corpus_of("I love New York .", "shares of Acme Inc. rose")
        a = generate_distant_labels(corpus, self.GAZS, self.RULES).layer("distant")
        b = generate_distant_labels(corpus, self.GAZS, self.RULES).layer("distant")
        assert a == b

    def test_added_disjoint_phrase_never_reduces_coverage(self):
        rng = np.random.default_rng(47)
        vocab = ["Alpha", "Beta", "Gamma", "delta", "epsilon", "Zeta"]
        for _ in range(100):
            n = int(rng.integers(2, 8))
            texts = " ".join(vocab[int(rng.integers(len(vocab)))] for _ in range(n))
            corpus = corpus_of(texts)
            base_phr = {("alpha",), ("beta", "gamma")}
            base = generate_distant_labels(corpus, [Gazetteer.single("LOC", base_phr)])
            grown = generate_distant_labels(
                corpus, [Gazetteer.single("LOC", base_phr | {("zeta",)})]
            )
            count = lambda c: sum(sum(1 for x in s if x != 0) for s in c.layer("distant"))
            assert count(grown) >= count(base)


class TestMatchReport:
    def test_perfect_distant_layer(self):
        corpus = corpus_of("I love New York .")
        gold = corpus.with_layer(
            "gold",
            (generate_distant_labels(corpus, TestGenerateDistantLabels.GAZS).layer("distant")),
        )
        labeled = generate_distant_labels(gold, TestGenerateDistantLabels.GAZS)
        report = match_report(labeled)
        assert report.token_precision == 1.0
        assert report.token_recall == 1.0
        assert report.entity.f1 == 1.0

    def test_all_o_distant(self):
        corpus = corpus_of("New York wins")
        from bondner.corpus import LabelSequence

        gold = (LabelSequence.from_tags(["B-LOC", "I-LOC", "O"], SCHEMA),)
        labeled = corpus.with_layer("gold", gold).with_layer(
            "distant", (LabelSequence((0, 0, 0)),)
        )
        report = match_report(labeled)
        assert report.token_precision == 0.0
        assert report.token_recall == 0.0
        assert report.token_f1 == 0.0
        assert report.entity.f1 == 0.0
        assert report.per_type["LOC"].unmatched == 1

    def test_half_recall_entity_report(self):
        from bondner.corpus import LabelSequence

        corpus = corpus_of("Ann Lee visited Leeds")
        gold = (LabelSequence.from_tags(["B-PER", "I-PER", "O", "B-LOC"], SCHEMA),)
        distant = (LabelSequence.from_tags(["B-PER", "I-PER", "O", "O"], SCHEMA),)
        labeled = corpus.with_layer("gold", gold).with_layer("distant", distant)
        report = match_report(labeled)
        assert report.entity.precision == pytest.approx(1.0)
        assert report.entity.recall == pytest.approx(0.5)
        assert report.entity.f1 == pytest.approx(2 / 3, abs=1e-3)
        assert report.per_type["PER"].matched == 1
        assert report.per_type["LOC"].unmatched == 1

    def test_ambiguous_gold_spans_classified_with_stats(self):
        gazs = [
            Gazetteer.single("LOC", {("liverpool",)}),
            Gazetteer.single("ORG", {("liverpool",)}),
        ]
        from bondner.corpus import LabelSequence

        corpus = corpus_of("Liverpool won")
        labeled, stats = generate_distant_labels_with_stats(corpus, gazs)
        labeled = labeled.with_layer(
            "gold", (LabelSequence.from_tags(["B-ORG", "O"], SCHEMA),)
        )
        report = match_report(labeled, stats=stats)
        assert report.per_type["ORG"].ambiguous == 1
        assert report.per_type["ORG"].unmatched == 0

    def test_missing_layer_rejected(self):
        corpus = corpus_of("hello world")
        with pytest.raises(MissingLayerError):
            match_report(corpus)


class TestTokenReportValues:
    def test_token_prf_by_hand(self):
        from bondner.corpus import LabelSequence

        corpus = corpus_of("a b c d")
        gold = (LabelSequence.from_tags(["B-PER", "I-PER", "O", "B-LOC"], SCHEMA),)
        distant = (LabelSequence.from_tags(["B-PER", "O", "B-ORG", "B-LOC"], SCHEMA),)
        labeled = corpus.with_layer("gold", gold).with_layer("distant", distant)
        report = match_report(labeled)
        # non-O distant: 3, of which 2 agree with gold; non-O gold: 3.
        assert report.token_precision == pytest.approx(2 / 3)
        assert report.token_recall == pytest.approx(2 / 3)
        assert report.token_f1 == pytest.approx(2 / 3)
