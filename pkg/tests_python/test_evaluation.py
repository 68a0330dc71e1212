"""Unit tests for exact-match scoring and the error report"""

import numpy as np
import pytest

from dess_aste.corpus import Span, Triplet
from dess_aste.errors import ValidationError
from dess_aste.evaluation import MAX_EXAMPLES, Metrics, categorize_errors, exact_match
from dess_aste.literals import Sentiment


def t(aspect, opinion, sentiment="POS"):
    return Triplet(Span(*aspect), Span(*opinion), Sentiment(sentiment))


def random_triplets(rng, count):
    triplets = []
    for _ in range(count):
        a_start, o_start = int(rng.integers(0, 3)), int(rng.integers(4, 7))
        triplets.append(t(
            (a_start, a_start + int(rng.integers(0, 2))),
            (o_start, o_start + int(rng.integers(0, 2))),
            ["POS", "NEU", "NEG"][int(rng.integers(0, 3))],
        ))
    return triplets


def brute_force_counts(pred, gold):
    """Pairwise matching over de-duplicated lists"""
    def unique(items):
        out = []
        for item in items:
            if not any(item == seen for seen in out):
                out.append(item)
        return out

    pred, gold = unique(pred), unique(gold)
    used = [False] * len(pred)
    tp = 0
    for g in gold:
        for i, p in enumerate(pred):
            if not used[i] and p.aspect == g.aspect and p.opinion == g.opinion and p.sentiment == g.sentiment:
                used[i] = True
                tp += 1
                break
    return tp, len(pred) - tp, len(gold) - tp


class TestMetrics:
    """Precision, recall and F1 from counts"""

    def test_zero_counts(self):
        metrics = Metrics.from_counts(0, 0, 0)
        assert (metrics.precision, metrics.recall, metrics.f1) == (0.0, 0.0, 0.0)

    def test_addition(self):
        total = Metrics.from_counts(1, 1, 0) + Metrics.from_counts(1, 0, 2)
        assert (total.tp, total.fp, total.fn) == (2, 1, 2)
        assert total.precision == pytest.approx(2 / 3)
        assert total.recall == pytest.approx(0.5)

    def test_json(self):
        assert set(Metrics.from_counts(1, 0, 0).to_json()) == {"precision", "recall", "f1", "tp", "fp", "fn"}


class TestExactMatch:
    """Strict triplet matching"""

    def test_gold_as_predictions(self, examples):
        for name in ("food_service", "screen_battery", "multi_word"):
            gold = {name: examples[name].gold}
            assert exact_match(gold, gold).f1 == 1.0

    def test_half_overlap(self):
        t1, t2, t3 = t((0, 0), (2, 2)), t((0, 0), (3, 3)), t((1, 1), (3, 3))
        metrics = exact_match({"s": [t1, t2]}, {"s": [t1, t3]})
        assert (metrics.precision, metrics.recall, metrics.f1) == (0.5, 0.5, 0.5)

    def test_empty_prediction(self):
        metrics = exact_match({"s": []}, {"s": [t((0, 0), (2, 2))]})
        assert (metrics.tp, metrics.fp, metrics.fn, metrics.f1) == (0, 0, 1, 0.0)

    def test_sentiment_must_match(self):
        metrics = exact_match({"s": [t((0, 0), (2, 2), "NEG")]}, {"s": [t((0, 0), (2, 2), "POS")]})
        assert metrics.tp == 0

    def test_symmetric_f1(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = {"s": random_triplets(rng, int(rng.integers(0, 5)))}
            b = {"s": random_triplets(rng, int(rng.integers(0, 5)))}
            assert exact_match(a, b).f1 == pytest.approx(exact_match(b, a).f1)

    def test_id_mismatch(self):
        with pytest.raises(ValidationError):
            exact_match({"a": []}, {"b": []})

    def test_matches_brute_force_counter(self):
        """1000 random prediction/gold pairs, exact integer counts"""
        rng = np.random.default_rng(0)
        for case in range(1000):
            sentences = int(rng.integers(1, 4))
            pred, gold, expected = {}, {}, [0, 0, 0]
            for i in range(sentences):
                p = random_triplets(rng, int(rng.integers(0, 6)))
                g = random_triplets(rng, int(rng.integers(0, 6)))
                pred[f"s{i}"], gold[f"s{i}"] = p, g
                for k, value in enumerate(brute_force_counts(p, g)):
                    expected[k] += value
            metrics = exact_match(pred, gold)
            assert [metrics.tp, metrics.fp, metrics.fn] == expected, case


class TestCategorizeErrors:
    """Error report categories"""

    def test_negation_is_boundary_error(self, examples):
        gold = {"negation": examples["negation"].gold}
        pred = {"negation": [t((2, 2), (5, 5), "POS")]}

        report = categorize_errors(pred, gold)

        assert report.boundary_error == 1
        assert report.missed_triplet == report.spurious_triplet == report.sentiment_error == 0
        assert report.examples["boundary_error"] == [{"id": "negation", "aspect": [2, 2], "opinion": [4, 5], "sentiment": "NEG"}]

    def test_all_missed(self):
        gold = {"s": [t((0, 0), (4, 4)), t((1, 1), (5, 5)), t((2, 2), (6, 6))]}
        report = categorize_errors({"s": []}, gold)
        assert report.missed_triplet == 3
        assert report.spurious_triplet == 0

    def test_sentiment_error(self):
        report = categorize_errors({"s": [t((0, 0), (2, 2), "NEG")]}, {"s": [t((0, 0), (2, 2), "POS")]})
        assert report.sentiment_error == 1
        assert report.spurious_triplet == 0

    def test_exact_spans_win_over_overlap(self):
        gold = {"s": [t((0, 1), (4, 4), "POS")]}
        pred = {"s": [t((1, 1), (4, 4), "POS"), t((0, 1), (4, 4), "NEG")]}
        report = categorize_errors(pred, gold)
        assert report.sentiment_error == 1
        assert report.spurious_triplet == 1
        assert report.boundary_error == 0

    def test_multi_word_aspect_boundary(self, examples):
        """Predicting only part of 'battery life'"""
        gold = {"multi_word": examples["multi_word"].gold}
        pred = {"multi_word": [t((3, 3), (8, 8)), t((6, 6), (8, 8))]}
        report = categorize_errors(pred, gold)
        assert report.boundary_error == 1
        assert report.to_json()["missed_triplet"] == 0

    def test_implicit_sentiment_missed(self, examples):
        """'could be more helpful' carries no explicit opinion the model picks up"""
        report = categorize_errors({"implicit": []}, {"implicit": examples["implicit"].gold})
        assert report.missed_triplet == 1

    def test_multi_word_aspect_missed(self, examples):
        gold = {"multi_word": examples["multi_word"].gold}
        report = categorize_errors({"multi_word": [t((3, 3), (8, 8))]}, gold)
        assert report.missed_triplet == 1
        assert report.examples["missed_triplet"][0]["aspect"] == [5, 6]

    def test_spurious_only(self):
        report = categorize_errors({"s": [t((0, 0), (2, 2))]}, {"s": []})
        assert report.spurious_triplet == 1

    def test_every_unmatched_triplet_counted_once(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p, g = set(random_triplets(rng, 4)), set(random_triplets(rng, 4))
            report = categorize_errors({"s": p}, {"s": g})
            paired = report.boundary_error + report.sentiment_error
            assert report.missed_triplet + paired == len(g - p)
            assert report.spurious_triplet + paired == len(p - g)

    def test_examples_are_capped(self):
        gold = {f"s{i:02d}": [t((0, 0), (2, 2))] for i in range(30)}
        report = categorize_errors({key: [] for key in gold}, gold)
        assert report.missed_triplet == 30
        assert len(report.examples["missed_triplet"]) == MAX_EXAMPLES
