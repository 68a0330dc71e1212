"""
Checkpoint archive

A single ``numpy.savez`` archive: one row-major little-endian float64 array
per parameter tensor, plus ``__header__`` holding a JSON document with the
model config, vocabulary, epoch and dev metrics.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import torch

from .config import ModelConfig
from .corpus import Vocab
from .errors import ValidationError
from .evaluation import Metrics
from .model import DessModel


HEADER_KEY = "__header__"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    state: Dict[str, torch.Tensor]
    epoch: int
    dev_metrics: Metrics
    model_config: ModelConfig
    vocab: Vocab
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def capture(cls, model: DessModel, epoch: int, dev_metrics: Metrics, vocab: Vocab, **extra: Any) -> "Checkpoint":
        state = {name: tensor.detach().clone() for name, tensor in model.state_dict().items()}
        return cls(state=state, epoch=epoch, dev_metrics=dev_metrics, model_config=model.config, vocab=vocab, extra=extra)

    def build_model(self) -> DessModel:
        model = DessModel(self.model_config)
        model.load_state_dict(self.state)
        model.eval()
        return model


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "epoch": checkpoint.epoch,
        "dev_metrics": checkpoint.dev_metrics.to_json(),
        "model_config": checkpoint.model_config.to_dict(),
        "vocab": {"tokens": list(checkpoint.vocab.tokens), "min_freq": checkpoint.vocab.min_freq},
        "shapes": {name: list(t.shape) for name, t in checkpoint.state.items()},
        "extra": checkpoint.extra,
    }
    arrays = {
        name: np.ascontiguousarray(tensor.detach().cpu().double().numpy(), dtype="<f8")
        for name, tensor in checkpoint.state.items()
    }
    arrays[HEADER_KEY] = np.array(json.dumps(header, sort_keys=True))
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path: Union[str, Path], dtype: Optional[torch.dtype] = torch.float32) -> Checkpoint:
    with np.load(path, allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise ValidationError(f"{path} is not a dess_aste checkpoint (missing header)")
        header = json.loads(str(archive[HEADER_KEY]))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"unsupported checkpoint format {header.get('format_version')}")
        state = {}
        for name, shape in header["shapes"].items():
            array = archive[name]
            if list(array.shape) != shape:
                raise ValidationError(f"tensor {name} has shape {list(array.shape)}, header says {shape}")
            state[name] = torch.from_numpy(array.astype("<f8")).to(dtype)
    metrics = header["dev_metrics"]
    return Checkpoint(
        state=state,
        epoch=header["epoch"],
        dev_metrics=Metrics.from_counts(metrics["tp"], metrics["fp"], metrics["fn"]),
        model_config=ModelConfig.from_dict(header["model_config"]),
        vocab=Vocab(tokens=tuple(header["vocab"]["tokens"]), min_freq=header["vocab"]["min_freq"]),
        extra=header.get("extra", {}),
    )
