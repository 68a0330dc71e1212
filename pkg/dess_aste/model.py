"""
Dual-channel triplet extractor

Semantic channel (disentangled-attention encoder -> GCN over head-mean
attention) and syntactic channel (BiLSTM over the shared embeddings -> GCN
over the dependency graph) are fused by a gate; the triplet head sees the
fused features concatenated with the projected encoder output.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Set, Tuple

import torch
from torch import nn

from .batching import Batch, bucket_batches
from .config import ModelConfig
from .corpus import Sentence, Span, Triplet, Vocab, encode_tokens
from .encoder import Encoder
from .graph import GCN, semantic_adjacency
from .hfim import GatedFusion
from .literals import EntityLabel, PairLabel
from .syntax_channel import BiLstmEncoder
from .triplet_head import (
    FeedForwardClassifier,
    SpanCandidate,
    SpanRepresenter,
    decode_triplets,
    enumerate_spans,
    pair_representation,
    score_entities,
    score_pairs,
    select_entities,
)


@dataclass
class ChannelOutput:
    features: torch.Tensor
    h_syn: torch.Tensor
    h_sem: torch.Tensor
    attentions: Tuple[torch.Tensor, ...]


class DessModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        enc, gcn, head = config.encoder, config.gcn, config.head
        self.encoder = Encoder(enc)
        self.bilstm = BiLstmEncoder(enc.hidden_dim, config.lstm)
        self.syntactic_gcn = GCN(self.bilstm.output_dim, gcn)
        self.semantic_gcn = GCN(enc.hidden_dim, gcn)
        self.fusion = GatedFusion(gcn.hidden_dim)
        self.semantic_proj = nn.Linear(enc.hidden_dim, gcn.hidden_dim)
        self.span_representer = SpanRepresenter(config.feature_dim, head.max_span, head.size_embedding_dim)
        span_dim = self.span_representer.output_dim
        self.entity_classifier = FeedForwardClassifier(span_dim, head.classifier_hidden, len(EntityLabel))
        self.pair_classifier = FeedForwardClassifier(2 * span_dim + config.feature_dim, head.classifier_hidden, len(PairLabel))

    def encoder_parameter_names(self) -> List[str]:
        return [name for name, _ in self.named_parameters() if name.startswith("encoder.")]

    def encode_batch(self, batch: Batch) -> ChannelOutput:
        semantic = self.encoder(batch.ids, batch.mask)
        lstm_out = self.bilstm(self.encoder.word_embeddings(batch.ids), batch.lengths)
        h_syn = self.syntactic_gcn(lstm_out, batch.dep_adjacency)
        h_sem = self.semantic_gcn(semantic.hidden, semantic_adjacency(semantic.attentions))
        fused = self.fusion(h_syn, h_sem)
        features = torch.cat([fused, self.semantic_proj(semantic.hidden)], dim=-1)
        return ChannelOutput(features=features, h_syn=h_syn, h_sem=h_sem, attentions=semantic.attentions)

    def entity_logits(self, features: torch.Tensor, spans: Sequence[Span]) -> torch.Tensor:
        return self.entity_classifier(self.span_representer(features, spans))

    def pair_logits(self, features: torch.Tensor, pairs: Sequence[Tuple[Span, Span]]) -> torch.Tensor:
        if not pairs:
            return features.new_zeros((0, len(PairLabel)))
        aspect_reps = self.span_representer(features, [a for a, _ in pairs])
        opinion_reps = self.span_representer(features, [o for _, o in pairs])
        reps = torch.stack([
            pair_representation(features, SpanCandidate(a, aspect_reps[k]), SpanCandidate(o, opinion_reps[k]))
            for k, (a, o) in enumerate(pairs)
        ])
        return self.pair_classifier(reps)

    def decode_sentence(self, features: torch.Tensor) -> Set[Triplet]:
        """Decode one sentence from its unpadded (length, feature_dim) features."""
        spans = enumerate_spans(features.shape[0], self.config.head.max_span)
        candidates = score_entities(features, spans, self.span_representer, self.entity_classifier)
        entity_logits = torch.stack([c.logits for c in candidates])
        kept = select_entities(entity_logits, spans)
        aspect_ids, opinion_ids = kept[EntityLabel.ASPECT], kept[EntityLabel.OPINION]
        scored = score_pairs(
            features,
            [candidates[i] for i in aspect_ids],
            [candidates[i] for i in opinion_ids],
            self.pair_classifier,
            self.config.head.max_pairs,
        )
        pairs = [(aspect_ids[a], opinion_ids[o]) for a, o in scored.pairs]
        return decode_triplets(entity_logits, scored.logits, spans, pairs)

    @torch.no_grad()
    def predict(self, batch: Batch) -> List[Set[Triplet]]:
        output = self.encode_batch(batch)
        return [
            self.decode_sentence(output.features[i, :int(batch.lengths[i])])
            for i in range(len(batch))
        ]


def predict_sentences(
    model: DessModel,
    vocab: Vocab,
    sentences: Sequence[Sentence],
    batch_size: int = 16,
) -> Dict[str, Set[Triplet]]:
    """Predicted triplets per sentence id; dropout is off and the previous mode restored."""
    if not sentences:
        return {}
    encoded = [encode_tokens(vocab, s, model.config.encoder.max_len) for s in sentences]
    was_training = model.training
    model.eval()
    predictions: Dict[str, Set[Triplet]] = {}
    try:
        for batch in bucket_batches(encoded, batch_size):
            for sentence, triplets in zip(batch.sentences, model.predict(batch)):
                predictions[sentence.id] = triplets
    finally:
        model.train(was_training)
    return predictions
