"""
Attention heatmap export

Per-sentence attention matrices from the semantic encoder, written as CSV
data plus an optional binary PGM (P5) image where brighter pixels are
higher weights.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import torch

from .corpus import EncodedSentence, Sentence, Vocab, encode_tokens
from .errors import ShapeFault
from .logging_utils import log_event
from .model import DessModel


logger = logging.getLogger(__name__)

HeadSelector = Union[int, str]


def attention_matrix(model: DessModel, encoded: EncodedSentence, layer: int = -1, head: HeadSelector = "mean") -> np.ndarray:
    """
    Attention weights of one sentence, (length, length), rows summing to 1

    Args:
        layer: Encoder layer index; negative values count from the last layer
        head: Head index, or ``"mean"`` for the average over heads
    """
    num_layers = model.config.encoder.num_layers
    num_heads = model.config.encoder.num_heads
    if not -num_layers <= layer < num_layers:
        raise ShapeFault(f"layer {layer} out of range for {num_layers} layers")
    if head != "mean" and not (isinstance(head, int) and 0 <= head < num_heads):
        raise ShapeFault(f"head {head!r} must be 'mean' or an index below {num_heads}")

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            ids = torch.tensor([encoded.ids], dtype=torch.long)
            probs = model.encoder(ids).attentions[layer][0]
    finally:
        model.train(was_training)
    matrix = probs.mean(dim=0) if head == "mean" else probs[head]
    return matrix.double().cpu().numpy()


def write_attention_csv(matrix: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    np.savetxt(path, matrix, delimiter=",", fmt="%.8f", encoding="utf-8")
    return path


def to_grayscale(matrix: np.ndarray) -> np.ndarray:
    """Scale to 0..255 by the matrix maximum; an all-zero matrix stays black."""
    peak = float(matrix.max()) if matrix.size else 0.0
    if peak <= 0.0:
        return np.zeros(matrix.shape, dtype=np.uint8)
    return np.clip(np.rint(255.0 * matrix / peak), 0, 255).astype(np.uint8)


def write_pgm(matrix: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    pixels = to_grayscale(matrix)
    height, width = pixels.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        handle.write(pixels.tobytes())
    return path


def export_attention(
    model: DessModel,
    vocab: Vocab,
    sentences: Sequence[Sentence],
    out_dir: Union[str, Path],
    layer: int = -1,
    head: HeadSelector = "mean",
    pgm: bool = False,
) -> List[Path]:
    """Write ``<id>.csv`` (and ``<id>.pgm``) for every sentence into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for sentence in sentences:
        encoded = encode_tokens(vocab, sentence, model.config.encoder.max_len)
        matrix = attention_matrix(model, encoded, layer, head)
        written.append(write_attention_csv(matrix, out_dir / f"{sentence.id}.csv"))
        if pgm:
            written.append(write_pgm(matrix, out_dir / f"{sentence.id}.pgm"))
    log_event(logger, "attention_exported", sentences=len(sentences), layer=layer, head=head, files=len(written))
    return written
