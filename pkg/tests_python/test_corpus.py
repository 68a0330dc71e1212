"""
Unit tests for corpus ingestion

Parsing, loading, statistics, vocabulary and token encoding.
"""

import logging
import os
from pathlib import Path

import numpy as np
import pytest

from dess_aste.corpus import (
    PAD_ID,
    ROOT,
    UNK_ID,
    Sentence,
    Span,
    Triplet,
    build_vocab,
    dataset_stats,
    encode_tokens,
    load_file,
    load_heads_file,
    load_split,
    parse_aste_line,
    serialize_sentence,
)
from dess_aste.errors import ParseError, ValidationError
from dess_aste.literals import Sentiment


TABLE5 = {
    "14lap": {"train": (906, 1460), "dev": (219, 346), "test": (328, 543)},
    "14res": {"train": (1266, 2338)},
    "15res": {"train": (754, 1272)},
    "16res": {"train": (857, 1389)},
}


class TestParseAsteLine:
    """Line grammar"""

    def test_two_triplets(self):
        """Food/service example parses to both gold triplets"""
        line = "The food was delicious , but the service was slow####[([1], [3], 'POS'), ([7], [9], 'NEG')]"
        sentence = parse_aste_line(line)

        assert len(sentence) == 10
        assert sentence.gold_set == {
            Triplet(Span(1, 1), Span(3, 3), Sentiment.POS),
            Triplet(Span(7, 7), Span(9, 9), Sentiment.NEG),
        }
        assert sentence.text(Span(7, 7)) == "service"

    def test_empty_triplet_list(self):
        """A single token with no triplets"""
        sentence = parse_aste_line("a####[]")
        assert sentence.tokens == ("a",)
        assert sentence.gold == ()

    def test_multi_token_spans(self):
        """Index runs become inclusive spans"""
        sentence = parse_aste_line(
            "the battery drains too quickly####[([1], [2, 3, 4], 'NEG')]"
        )
        assert sentence.gold[0].opinion == Span(2, 4)
        assert sentence.text(sentence.gold[0].opinion) == "drains too quickly"

    def test_non_contiguous_indices(self):
        """Gaps in an index list are a validation error"""
        with pytest.raises(ValidationError):
            parse_aste_line("x y####[([0,2], [1], 'POS')]")

    def test_out_of_range_index(self):
        """Indices past the last token are a validation error"""
        with pytest.raises(ValidationError):
            parse_aste_line("x y####[([0], [2], 'POS')]")

    def test_overlapping_aspect_and_opinion(self):
        with pytest.raises(ValidationError):
            parse_aste_line("x y z####[([0, 1], [1], 'POS')]")

    def test_missing_separator_reports_offset(self):
        """Offset points at the end of the line"""
        with pytest.raises(ParseError) as exc_info:
            parse_aste_line("no separator here")
        assert exc_info.value.offset == len("no separator here")

    def test_malformed_list_reports_offset(self):
        """Offset is a byte position inside the annotation"""
        line = "x y####[([0], [1], 'POS')"
        with pytest.raises(ParseError) as exc_info:
            parse_aste_line(line)
        assert exc_info.value.offset >= line.index("####")

    def test_offset_counts_bytes(self):
        """Multi-byte characters before the fault shift the offset"""
        with pytest.raises(ParseError) as exc_info:
            parse_aste_line("café  bar####[]")
        assert exc_info.value.offset == len("café ".encode("utf-8"))

    def test_unknown_sentiment(self):
        with pytest.raises(ParseError):
            parse_aste_line("x y####[([0], [1], 'GOOD')]")

    def test_duplicate_triplets_removed(self):
        sentence = parse_aste_line("x y####[([0], [1], 'POS'), ([0], [1], 'POS')]")
        assert len(sentence.gold) == 1

    def test_same_spans_different_sentiment_are_distinct(self):
        sentence = parse_aste_line("x y####[([0], [1], 'POS'), ([0], [1], 'NEG')]")
        assert len(sentence.gold_set) == 2


class TestSerialization:
    """Canonical line output"""

    def test_round_trip(self, examples):
        """Parsing a serialized sentence gives back the same tokens and gold"""
        for sentence in examples.values():
            line = serialize_sentence(sentence)
            again = parse_aste_line(line, sentence_id=sentence.id)
            assert again == sentence
            assert serialize_sentence(again) == line

    def test_canonical_form(self):
        """Spacing inside the annotation is normalised"""
        sentence = parse_aste_line("x y z####[( [0],[1, 2] , 'NEU' )]")
        assert serialize_sentence(sentence) == "x y z####[([0], [1, 2], 'NEU')]"

    def test_random_lines(self):
        """Generated grammar-valid lines survive the round trip"""
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            tokens = [f"w{int(rng.integers(50))}" for _ in range(n)]
            cut = int(rng.integers(1, n))
            a_start = int(rng.integers(0, cut))
            a_end = int(rng.integers(a_start, cut))
            o_start = int(rng.integers(cut, n))
            o_end = int(rng.integers(o_start, n))
            tag = ["POS", "NEU", "NEG"][int(rng.integers(3))]
            annotation = [(list(range(a_start, a_end + 1)), list(range(o_start, o_end + 1)), tag)]
            line = " ".join(tokens) + "####" + repr(annotation)
            assert serialize_sentence(parse_aste_line(line)) == line


class TestSentence:
    """Sentence invariants"""

    def test_empty_tokens_rejected(self):
        with pytest.raises(ValidationError):
            Sentence(id="s", tokens=())

    def test_heads_length_mismatch(self):
        with pytest.raises(ValidationError):
            Sentence(id="s", tokens=("a", "b"), dep_heads=(ROOT,))

    def test_self_head_rejected(self):
        with pytest.raises(ValidationError):
            Sentence(id="s", tokens=("a", "b"), dep_heads=(0, ROOT))

    def test_truncate_drops_and_remaps(self):
        """Triplets past the cut are dropped and heads past it become root"""
        sentence = Sentence(
            id="s",
            tokens=("a", "b", "c", "d"),
            gold=(Triplet(Span(0, 0), Span(1, 1), Sentiment.POS), Triplet(Span(0, 0), Span(3, 3), Sentiment.NEG)),
            dep_heads=(ROOT, 0, 3, 0),
        )
        cut, dropped = sentence.truncate(3)
        assert cut.tokens == ("a", "b", "c")
        assert dropped == 1
        assert cut.dep_heads == (ROOT, 0, ROOT)


class TestLoading:
    """File and split loading"""

    def test_ids_follow_line_numbers(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text("a b####[]\nc d####[([0], [1], 'NEG')]\n", encoding="utf-8")

        sentences = load_file(path, "train")

        assert [s.id for s in sentences] == ["train-1", "train-2"]

    def test_blank_lines_skipped(self, tmp_path):
        """Blank lines do not shift the ids of later lines"""
        path = tmp_path / "dev.txt"
        path.write_text("a b####[]\n\nc d####[]\n", encoding="utf-8")

        assert [s.id for s in load_file(path, "dev")] == ["dev-1", "dev-3"]

    def test_error_carries_file_and_line(self, tmp_path):
        path = tmp_path / "test.txt"
        path.write_text("a b####[]\nbroken line\n", encoding="utf-8")

        with pytest.raises(ParseError) as exc_info:
            load_file(path, "test")

        assert exc_info.value.line_number == 2
        assert exc_info.value.path == str(path)
        assert "line=2" in str(exc_info.value)

    def test_validation_error_carries_line(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text("a b####[]\na b####[([0], [5], 'POS')]\n", encoding="utf-8")

        with pytest.raises(ValidationError) as exc_info:
            load_file(path, "train")
        assert exc_info.value.line_number == 2

    def test_three_empty_files(self, tmp_path):
        for name in ("train", "dev", "test"):
            (tmp_path / f"{name}.txt").write_text("", encoding="utf-8")

        split = load_split(tmp_path / "train.txt", tmp_path / "dev.txt", tmp_path / "test.txt")

        assert split.train == [] and split.dev == [] and split.test == []

    def test_mini_split(self, mini_split):
        assert [len(mini_split.train), len(mini_split.dev), len(mini_split.test)] == [5, 2, 3]
        assert mini_split.dev[0].id == "dev-1"

    def test_heads_sidecar(self, fixtures_dir):
        """Heads attach by line; blank sidecar lines leave the sentence without heads"""
        sentences = load_file(fixtures_dir / "train_triplets.txt", "train", fixtures_dir / "train_heads.txt")

        assert sentences[0].dep_heads == (1, 3, 3, ROOT, 3, 3, 7, 9, 9, 3)
        assert sentences[1].dep_heads is None
        assert sentences[4].dep_heads == (1, ROOT, 1, 1, 1)

    def test_heads_sidecar_line_mismatch(self, tmp_path, fixtures_dir):
        heads = tmp_path / "heads.txt"
        heads.write_text("-1\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_file(fixtures_dir / "train_triplets.txt", "train", heads)

    def test_heads_file_rejects_non_integers(self, tmp_path):
        heads = tmp_path / "heads.txt"
        heads.write_text("1 x\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_heads_file(heads)


class TestDatasetStats:
    """Sentence and triplet counts"""

    def test_bundled_fixture_counts(self, mini_split):
        """Bundled corpus has known counts"""
        assert dataset_stats(mini_split.train).to_json() == {
            "sentences": 5, "triplets": 9, "pos": 5, "neu": 1, "neg": 3,
        }
        assert dataset_stats(mini_split.dev).to_json() == {
            "sentences": 2, "triplets": 2, "pos": 1, "neu": 0, "neg": 1,
        }
        assert dataset_stats(mini_split.test).to_json() == {
            "sentences": 3, "triplets": 3, "pos": 2, "neu": 1, "neg": 0,
        }

    def test_empty(self):
        stats = dataset_stats([])
        assert (stats.num_sentences, stats.num_triplets, stats.pos, stats.neu, stats.neg) == (0, 0, 0, 0, 0)

    def test_sentiments_partition_triplets(self, mini_split):
        for sentences in (mini_split.train, mini_split.dev, mini_split.test):
            stats = dataset_stats(sentences)
            assert stats.pos + stats.neu + stats.neg == stats.num_triplets

    @pytest.mark.skipif(not os.getenv("DESS_DATA_DIR"), reason="DESS_DATA_DIR not set")
    def test_public_benchmark_counts(self):
        """ASTE-Data-V2 counts when the public files are available"""
        root = Path(os.environ["DESS_DATA_DIR"])
        for dataset, splits in TABLE5.items():
            for split, expected in splits.items():
                stats = dataset_stats(load_file(root / dataset / f"{split}_triplets.txt", split))
                assert (stats.num_sentences, stats.num_triplets) == expected
        stats = dataset_stats(load_file(root / "14res" / "train_triplets.txt", "train"))
        assert (stats.pos, stats.neu, stats.neg) == (1692, 166, 480)


class TestVocab:
    """Vocabulary construction"""

    def test_empty_corpus(self):
        vocab = build_vocab([])
        assert vocab.tokens == ("<pad>", "<unk>")

    def test_min_freq(self):
        vocab = build_vocab([Sentence(id="s", tokens=("a", "a", "b"))], min_freq=2)
        assert vocab.tokens == ("<pad>", "<unk>", "a")
        assert vocab.id_of("a") == 2

    def test_frequency_then_lexicographic(self):
        vocab = build_vocab([Sentence(id="s", tokens=("b", "a", "c", "b", "a"))])
        assert vocab.tokens[2:] == ("a", "b", "c")

    def test_invalid_min_freq(self):
        with pytest.raises(ValidationError):
            build_vocab([], min_freq=0)


class TestEncodeTokens:
    """Token ids and truncation"""

    def test_unknown_token(self, mini_vocab):
        encoded = encode_tokens(mini_vocab, Sentence(id="s", tokens=("food", "zeppelin")))
        assert encoded.ids[0] == mini_vocab.id_of("food")
        assert encoded.ids[1] == UNK_ID
        assert PAD_ID not in encoded.ids

    def test_unpadded_length(self, mini_vocab, mini_split):
        sentence = mini_split.train[0]
        assert len(encode_tokens(mini_vocab, sentence).ids) == len(sentence)

    def test_long_sentence_truncated(self, mini_vocab, caplog):
        """130 tokens become 128; triplets touching the tail are dropped and counted"""
        tokens = tuple(f"t{i}" for i in range(130))
        gold = (
            Triplet(Span(0, 0), Span(1, 1), Sentiment.POS),
            Triplet(Span(2, 2), Span(129, 129), Sentiment.NEG),
        )
        with caplog.at_level(logging.WARNING, logger="dess_aste"):
            encoded = encode_tokens(mini_vocab, Sentence(id="long", tokens=tokens, gold=gold), max_len=128)

        assert len(encoded.ids) == 128
        assert encoded.dropped_triplets == 1
        assert encoded.sentence.gold == gold[:1]
        assert any("triplets_truncated" in record.getMessage() for record in caplog.records)

    def test_deterministic(self, mini_vocab, mini_split):
        sentence = mini_split.train[1]
        assert encode_tokens(mini_vocab, sentence).ids == encode_tokens(mini_vocab, sentence).ids
