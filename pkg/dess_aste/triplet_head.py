"""
Span-based triplet head

Enumerates candidate spans, classifies them as NONE/ASPECT/OPINION, scores
aspect-opinion pairs as INVALID/POS/NEU/NEG, samples negatives for training
and decodes predicted triplets.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import torch
from torch import nn

from .corpus import Sentence, Span, Triplet
from .errors import ShapeFault
from .literals import EntityLabel, PairLabel
from .logging_utils import log_event


logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, torch.Tensor]


def enumerate_spans(seq_len: int, max_span: int) -> List[Span]:
    """All spans of width 1..max_span, ordered by (start, end)."""
    return [
        Span(start, end)
        for start in range(seq_len)
        for end in range(start, min(start + max_span, seq_len))
    ]


@dataclass
class SpanCandidate:
    span: Span
    representation: torch.Tensor
    logits: Optional[torch.Tensor] = None


@dataclass
class PairScores:
    pairs: List[Tuple[int, int]]
    logits: torch.Tensor


@dataclass
class NegativeSample:
    """Training targets for one sentence"""
    entities: List[Tuple[Span, EntityLabel]] = field(default_factory=list)
    pairs: List[Tuple[Span, Span, PairLabel]] = field(default_factory=list)
    skipped_gold: int = 0


class FeedForwardClassifier(nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int, num_labels: int):
        super().__init__()
        self.hidden = nn.Linear(input_dim, hidden_dim)
        self.out = nn.Linear(hidden_dim, num_labels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(torch.relu(self.hidden(x)))


class SpanRepresenter(nn.Module):
    """[h_start ; h_end ; mean(h_start..h_end) ; size_embedding(width)]"""

    def __init__(self, feature_dim: int, max_span: int, size_dim: int):
        super().__init__()
        self.feature_dim = feature_dim
        self.max_span = max_span
        self.size_embeddings = nn.Embedding(max_span + 1, size_dim)

    @property
    def output_dim(self) -> int:
        return 3 * self.feature_dim + self.size_embeddings.embedding_dim

    def forward(self, features: torch.Tensor, spans: Sequence[Span]) -> torch.Tensor:
        length = features.shape[0]
        if not spans:
            return features.new_zeros((0, self.output_dim))
        for span in spans:
            if span.end >= length:
                raise ShapeFault(f"span {span} out of bounds for {length} tokens")
            if span.width > self.max_span:
                raise ShapeFault(f"span {span} wider than max_span {self.max_span}")
        starts = torch.tensor([s.start for s in spans], device=features.device)
        ends = torch.tensor([s.end for s in spans], device=features.device)
        cumulative = torch.cat([features.new_zeros((1, features.shape[1])), features.cumsum(dim=0)])
        widths = ends - starts + 1
        pooled = (cumulative[ends + 1] - cumulative[starts]) / widths[:, None].to(features.dtype)
        return torch.cat([features[starts], features[ends], pooled, self.size_embeddings(widths)], dim=-1)


def between_pool(features: torch.Tensor, aspect: Span, opinion: Span) -> torch.Tensor:
    """Mean of the tokens strictly between two disjoint spans; zeros when adjacent."""
    lo = min(aspect.end, opinion.end) + 1
    hi = max(aspect.start, opinion.start)
    if lo >= hi:
        return features.new_zeros(features.shape[1])
    return features[lo:hi].mean(dim=0)


def pair_representation(
    features: torch.Tensor,
    aspect: SpanCandidate,
    opinion: SpanCandidate,
) -> torch.Tensor:
    return torch.cat([aspect.representation, opinion.representation, between_pool(features, aspect.span, opinion.span)])


def score_entities(
    features: torch.Tensor,
    spans: Sequence[Span],
    representer: SpanRepresenter,
    classifier: FeedForwardClassifier,
) -> List[SpanCandidate]:
    """Representation and NONE/ASPECT/OPINION logits for every span."""
    reps = representer(features, spans)
    logits = classifier(reps)
    return [SpanCandidate(span, reps[i], logits[i]) for i, span in enumerate(spans)]


def _pair_confidence(aspect: SpanCandidate, opinion: SpanCandidate) -> float:
    if aspect.logits is None or opinion.logits is None:
        return 0.0
    a = torch.softmax(aspect.logits.detach(), dim=-1)[EntityLabel.ASPECT.value]
    o = torch.softmax(opinion.logits.detach(), dim=-1)[EntityLabel.OPINION.value]
    return float(a + o)


def score_pairs(
    features: torch.Tensor,
    aspects: Sequence[SpanCandidate],
    opinions: Sequence[SpanCandidate],
    classifier: FeedForwardClassifier,
    max_pairs: int,
) -> PairScores:
    """
    Score disjoint aspect/opinion pairs

    Pairs are ranked by summed entity confidence (stable, so ties keep
    aspect-major index order) and cut to ``max_pairs``. ``pairs`` holds
    (aspect index, opinion index) into the given lists.
    """
    candidates = [
        (ai, oi)
        for ai, aspect in enumerate(aspects)
        for oi, opinion in enumerate(opinions)
        if not aspect.span.overlaps(opinion.span)
    ]
    ranked = sorted(
        range(len(candidates)),
        key=lambda k: -_pair_confidence(aspects[candidates[k][0]], opinions[candidates[k][1]]),
    )
    kept = [candidates[k] for k in ranked[:max_pairs]]
    if not kept:
        return PairScores(pairs=[], logits=features.new_zeros((0, len(PairLabel))))
    reps = torch.stack([pair_representation(features, aspects[ai], opinions[oi]) for ai, oi in kept])
    return PairScores(pairs=kept, logits=classifier(reps))


def sample_negatives(
    sentence: Sentence,
    candidates: Sequence[Span],
    neg_entity: int,
    neg_triple: int,
    rng: np.random.Generator,
) -> NegativeSample:
    """
    Build entity and pair training targets for one sentence

    Positives are every gold aspect/opinion span and gold pair; up to
    ``neg_entity`` non-gold candidate spans (NONE) and ``neg_triple`` non-gold
    disjoint candidate pairs (INVALID) are drawn without replacement. INVALID
    pairs come from gold-aspect x gold-opinion crossings first, then from
    uniformly drawn candidate x candidate pairs.
    Gold spans that are not candidates (wider than the span limit) are
    skipped and counted.
    """
    candidate_set = set(candidates)
    sample = NegativeSample()
    labels: Dict[Span, EntityLabel] = {}
    gold_pairs: Dict[Tuple[Span, Span], PairLabel] = {}

    for triplet in sentence.gold:
        if triplet.aspect not in candidate_set or triplet.opinion not in candidate_set:
            sample.skipped_gold += 1
            continue
        labels.setdefault(triplet.aspect, EntityLabel.ASPECT)
        labels.setdefault(triplet.opinion, EntityLabel.OPINION)
        gold_pairs.setdefault((triplet.aspect, triplet.opinion), PairLabel.from_sentiment(triplet.sentiment))

    if sample.skipped_gold:
        log_event(logger, "gold_span_too_wide", logging.WARNING, sentence=sentence.id, skipped=sample.skipped_gold)

    sample.entities = list(labels.items())
    negatives = [span for span in candidates if span not in labels]
    if negatives and neg_entity > 0:
        chosen = rng.choice(len(negatives), size=min(neg_entity, len(negatives)), replace=False)
        sample.entities += [(negatives[i], EntityLabel.NONE) for i in sorted(chosen)]

    sample.pairs = [(a, o, label) for (a, o), label in gold_pairs.items()]
    aspects = [s for s, label in labels.items() if label is EntityLabel.ASPECT]
    opinions = [s for s, label in labels.items() if label is EntityLabel.OPINION]
    crossings = [
        (a, o) for a in aspects for o in opinions
        if (a, o) not in gold_pairs and not a.overlaps(o)
    ]
    invalid = _draw(crossings, neg_triple, rng)
    taken = set(gold_pairs) | set(invalid)
    others = [
        (a, o) for a in candidates for o in candidates
        if (a, o) not in taken and not a.overlaps(o)
    ]
    invalid += _draw(others, neg_triple - len(invalid), rng)
    sample.pairs += [(a, o, PairLabel.INVALID) for a, o in invalid]
    return sample


def _draw(pool: Sequence[Tuple[Span, Span]], count: int, rng: np.random.Generator) -> List[Tuple[Span, Span]]:
    if not pool or count <= 0:
        return []
    chosen = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return [pool[i] for i in sorted(chosen)]


def _as_array(values: ArrayLike) -> np.ndarray:
    if isinstance(values, torch.Tensor):
        values = values.detach().cpu().double().numpy()
    return np.asarray(values, dtype=np.float64)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def select_entities(entity_logits: ArrayLike, spans: Sequence[Span]) -> Dict[EntityLabel, List[int]]:
    """
    Steps 1-2 of decoding: keep ASPECT/OPINION spans, then within each label
    drop spans overlapping a kept higher-confidence one (ties: earlier start).
    """
    logits = _as_array(entity_logits).reshape(len(spans), len(EntityLabel))
    labels = logits.argmax(axis=-1) if len(spans) else np.zeros(0, dtype=int)
    confidence = _softmax(logits).max(axis=-1) if len(spans) else np.zeros(0)
    kept: Dict[EntityLabel, List[int]] = {}
    for label in (EntityLabel.ASPECT, EntityLabel.OPINION):
        members = [i for i in range(len(spans)) if labels[i] == label.value]
        members.sort(key=lambda i: (-confidence[i], spans[i].start, spans[i].end))
        chosen: List[int] = []
        for i in members:
            if not any(spans[i].overlaps(spans[j]) for j in chosen):
                chosen.append(i)
        kept[label] = sorted(chosen)
    return kept


def decode_triplets(
    entity_logits: ArrayLike,
    pair_logits: ArrayLike,
    spans: Sequence[Span],
    pairs: Sequence[Tuple[int, int]],
) -> Set[Triplet]:
    """
    Turn logits into triplets

    ``pairs`` index into ``spans`` as (aspect, opinion). A pair yields a
    triplet when its aspect survived as ASPECT, its opinion as OPINION, the
    spans are disjoint, and its argmax label is not INVALID.
    """
    kept = select_entities(entity_logits, spans)
    aspects = set(kept[EntityLabel.ASPECT])
    opinions = set(kept[EntityLabel.OPINION])
    scores = _as_array(pair_logits).reshape(len(pairs), len(PairLabel))
    triplets: Set[Triplet] = set()
    for k, (ai, oi) in enumerate(pairs):
        if ai not in aspects or oi not in opinions or spans[ai].overlaps(spans[oi]):
            continue
        label = PairLabel(int(scores[k].argmax()))
        if label is not PairLabel.INVALID:
            triplets.add(Triplet(spans[ai], spans[oi], label.to_sentiment()))
    return triplets
