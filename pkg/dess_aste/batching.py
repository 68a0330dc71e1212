"""Length-bucketed batching with padding masks."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from .corpus import PAD_ID, EncodedSentence, Sentence
from .syntax_channel import build_dep_adjacency


@dataclass
class Batch:
    ids: torch.Tensor
    mask: torch.Tensor
    lengths: torch.Tensor
    dep_adjacency: torch.Tensor
    sentences: List[Sentence]

    def __len__(self) -> int:
        return len(self.sentences)


def collate(encoded: Sequence[EncodedSentence]) -> Batch:
    """
    Pad a group of encoded sentences

    Padded positions get PAD ids, a False mask, and a lone self-loop in the
    dependency adjacency so every row stays normalizable.
    """
    lengths = [len(e.ids) for e in encoded]
    width = max(lengths)
    ids = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(encoded), width), dtype=torch.bool)
    adjacency = torch.eye(width).repeat(len(encoded), 1, 1)
    for row, item in enumerate(encoded):
        n = lengths[row]
        ids[row, :n] = torch.tensor(item.ids, dtype=torch.long)
        mask[row, :n] = True
        adjacency[row, :n, :n] = build_dep_adjacency(item.sentence)
    return Batch(
        ids=ids,
        mask=mask,
        lengths=torch.tensor(lengths, dtype=torch.long),
        dep_adjacency=adjacency,
        sentences=[e.sentence for e in encoded],
    )


def bucket_batches(
    encoded: Sequence[EncodedSentence],
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> List[Batch]:
    """Group sentences of similar length; batch order is shuffled when an rng is given."""
    order = sorted(range(len(encoded)), key=lambda i: (len(encoded[i].ids), i))
    groups = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if rng is not None:
        groups = [groups[i] for i in rng.permutation(len(groups))]
    return [collate([encoded[i] for i in group]) for group in groups]
