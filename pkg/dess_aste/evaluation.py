"""
Exact-match triplet scoring and error categorization

A predicted triplet is correct only when aspect span, opinion span and
sentiment all equal a gold triplet. Counts are micro-averaged over sentences.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Set

from .corpus import Triplet
from .errors import ValidationError


ERROR_CATEGORIES = ("missed_triplet", "spurious_triplet", "boundary_error", "sentiment_error")
MAX_EXAMPLES = 20


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Metrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)

    @classmethod
    def empty(cls) -> "Metrics":
        return cls.from_counts(0, 0, 0)

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics.from_counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_json(self) -> Dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


@dataclass
class ErrorReport:
    counts: Counter = field(default_factory=Counter)
    examples: Dict[str, List[Dict[str, object]]] = field(default_factory=dict)

    @property
    def missed_triplet(self) -> int:
        return self.counts["missed_triplet"]

    @property
    def spurious_triplet(self) -> int:
        return self.counts["spurious_triplet"]

    @property
    def boundary_error(self) -> int:
        return self.counts["boundary_error"]

    @property
    def sentiment_error(self) -> int:
        return self.counts["sentiment_error"]

    def add(self, category: str, sentence_id: str, triplet: Triplet) -> None:
        self.counts[category] += 1
        bucket = self.examples.setdefault(category, [])
        if len(bucket) < MAX_EXAMPLES:
            bucket.append({"id": sentence_id, **triplet.to_json()})

    def to_json(self) -> Dict[str, object]:
        payload: Dict[str, object] = {name: self.counts[name] for name in ERROR_CATEGORIES}
        payload["examples"] = self.examples
        return payload


def _check_ids(pred: Mapping[str, Iterable[Triplet]], gold: Mapping[str, Iterable[Triplet]]) -> None:
    if set(pred) != set(gold):
        missing = sorted(set(gold) - set(pred))[:5]
        extra = sorted(set(pred) - set(gold))[:5]
        raise ValidationError(f"sentence ids differ between predictions and gold (missing={missing}, extra={extra})")


def exact_match(pred: Mapping[str, Iterable[Triplet]], gold: Mapping[str, Iterable[Triplet]]) -> Metrics:
    _check_ids(pred, gold)
    total = Metrics.empty()
    for sentence_id, gold_triplets in gold.items():
        predicted: Set[Triplet] = set(pred[sentence_id])
        expected: Set[Triplet] = set(gold_triplets)
        tp = len(predicted & expected)
        total = total + Metrics.from_counts(tp, len(predicted) - tp, len(expected) - tp)
    return total


def categorize_errors(pred: Mapping[str, Iterable[Triplet]], gold: Mapping[str, Iterable[Triplet]]) -> ErrorReport:
    """
    Assign every unmatched gold and predicted triplet one category

    For each unmatched gold triplet (in span order): ``sentiment_error`` if an
    unconsumed prediction has exactly its spans; otherwise ``boundary_error``
    if an unconsumed prediction overlaps both of its spans; otherwise
    ``missed_triplet``. Predictions consumed this way are not counted again;
    the rest are ``spurious_triplet``.
    """
    _check_ids(pred, gold)
    report = ErrorReport()
    for sentence_id in sorted(gold):
        predicted = set(pred[sentence_id])
        expected = set(gold[sentence_id])
        unmatched_pred = sorted(predicted - expected, key=Triplet.sort_key)
        consumed: Set[Triplet] = set()
        for g in sorted(expected - predicted, key=Triplet.sort_key):
            exact = [p for p in unmatched_pred if p not in consumed and p.aspect == g.aspect and p.opinion == g.opinion]
            if exact:
                consumed.add(exact[0])
                report.add("sentiment_error", sentence_id, g)
                continue
            near = [p for p in unmatched_pred if p not in consumed and p.aspect.overlaps(g.aspect) and p.opinion.overlaps(g.opinion)]
            if near:
                consumed.add(near[0])
                report.add("boundary_error", sentence_id, g)
                continue
            report.add("missed_triplet", sentence_id, g)
        for p in unmatched_pred:
            if p not in consumed:
                report.add("spurious_triplet", sentence_id, p)
    return report
