"""
Model and training configuration

Dataclass configs for every component, the named presets, and loading of a
JSON or TOML config file layered over a preset. Precedence is
preset < config file < command-line overrides.
"""

import json
import tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .errors import ValidationError
from .literals import EncoderShape, KlDirection, PresetName


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 2
    hidden_dim: int = 768
    num_heads: int = 12
    num_layers: int = 12
    max_rel_distance: int = 64
    ffn_dim: int = 3072
    dropout_rate: float = 0.1
    max_len: int = 128
    layer_norm_eps: float = 1e-7

    def __post_init__(self) -> None:
        _require(self.vocab_size >= 2, "vocab_size must cover PAD and UNK")
        _require(self.num_heads >= 1 and self.hidden_dim % self.num_heads == 0,
                 f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}")
        _require(self.num_layers >= 1, "num_layers must be >= 1")
        _require(self.max_rel_distance >= 1, "max_rel_distance must be >= 1")
        _require(self.ffn_dim >= 1 and self.max_len >= 1, "ffn_dim and max_len must be positive")
        _require(0.0 <= self.dropout_rate < 1.0, "dropout_rate must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


@dataclass(frozen=True)
class LstmConfig:
    hidden_per_direction: int = 384
    num_layers: int = 2
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        _require(self.hidden_per_direction >= 1 and self.num_layers >= 1, "LSTM sizes must be positive")
        _require(0.0 <= self.dropout_rate < 1.0, "dropout_rate must be in [0, 1)")

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_per_direction


@dataclass(frozen=True)
class GcnConfig:
    hidden_dim: int = 384
    num_layers: int = 2
    dropout_rate: float = 0.3

    def __post_init__(self) -> None:
        _require(self.hidden_dim >= 1 and self.num_layers >= 1, "GCN sizes must be positive")
        _require(0.0 <= self.dropout_rate < 1.0, "dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class HeadConfig:
    max_span: int = 8
    neg_entity: int = 50
    neg_triple: int = 50
    max_pairs: int = 100
    size_embedding_dim: int = 25
    classifier_hidden: int = 768

    def __post_init__(self) -> None:
        for f in fields(self):
            _require(getattr(self, f.name) >= 1, f"{f.name} must be positive")


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    gcn: GcnConfig = field(default_factory=GcnConfig)
    head: HeadConfig = field(default_factory=HeadConfig)

    @property
    def feature_dim(self) -> int:
        """Per-token width seen by the triplet head: fused GCN features + projected encoder output."""
        return 2 * self.gcn.hidden_dim

    def with_vocab_size(self, vocab_size: int) -> "ModelConfig":
        return replace(self, encoder=replace(self.encoder, vocab_size=vocab_size))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig(**data.get("encoder", {})),
            lstm=LstmConfig(**data.get("lstm", {})),
            gcn=GcnConfig(**data.get("gcn", {})),
            head=HeadConfig(**data.get("head", {})),
        )


@dataclass(frozen=True)
class TrainConfig:
    lr_encoder: float = 2e-5
    lr_other: float = 1e-4
    weight_decay: float = 0.01
    warmup_ratio: float = 0.1
    max_grad_norm: float = 1.0
    epochs: int = 120
    batch_size: int = 8
    seed: int = 42
    lambda_kl: float = 0.1
    kl_direction: KlDirection = "sem_to_syn"
    patience: int = 10
    stop_at_f1: Optional[float] = None
    min_freq: int = 1

    def __post_init__(self) -> None:
        _require(self.lr_encoder > 0 and self.lr_other > 0, "learning rates must be positive")
        _require(0.0 <= self.warmup_ratio < 1.0, "warmup_ratio must be in [0, 1)")
        _require(self.epochs >= 1, "epochs must be >= 1")
        _require(self.batch_size >= 1 and self.patience >= 1, "batch_size and patience must be positive")
        _require(self.max_grad_norm > 0, "max_grad_norm must be positive")
        _require(self.weight_decay >= 0 and self.lambda_kl >= 0, "weight_decay and lambda_kl must be >= 0")
        _require(self.kl_direction in ("sem_to_syn", "syn_to_sem"), f"unknown kl_direction {self.kl_direction}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


ENCODER_SHAPES: Dict[EncoderShape, EncoderConfig] = {
    "v3-base": EncoderConfig(hidden_dim=768, num_heads=12, num_layers=12, ffn_dim=3072, max_rel_distance=64),
    "v3-large": EncoderConfig(hidden_dim=1024, num_heads=16, num_layers=24, ffn_dim=4096, max_rel_distance=64),
    "v2-xxlarge": EncoderConfig(hidden_dim=1536, num_heads=24, num_layers=48, ffn_dim=6144, max_rel_distance=64),
    "toy": EncoderConfig(hidden_dim=64, num_heads=4, num_layers=2, ffn_dim=128, max_rel_distance=8,
                         dropout_rate=0.0, max_len=32),
}

_BASE_MODEL = ModelConfig(encoder=ENCODER_SHAPES["v3-base"])
_LARGE_MODEL = ModelConfig(encoder=ENCODER_SHAPES["v3-large"])
_XXLARGE_MODEL = ModelConfig(encoder=ENCODER_SHAPES["v2-xxlarge"])

_TOY_MODEL = ModelConfig(
    encoder=ENCODER_SHAPES["toy"],
    lstm=LstmConfig(hidden_per_direction=32, num_layers=2, dropout_rate=0.0),
    gcn=GcnConfig(hidden_dim=32, num_layers=2, dropout_rate=0.0),
    head=HeadConfig(max_span=4, size_embedding_dim=8, classifier_hidden=64),
)


def _trial(lr: float, weight_decay: float, batch: int, max_span: int, warmup: float, grad_norm: float):
    model = replace(_BASE_MODEL, head=replace(_BASE_MODEL.head, max_span=max_span, neg_entity=50, neg_triple=50))
    train = TrainConfig(lr_encoder=lr, lr_other=lr, weight_decay=weight_decay, batch_size=batch,
                        warmup_ratio=warmup, max_grad_norm=grad_norm, epochs=20)
    return model, train


PRESETS: Dict[PresetName, Tuple[ModelConfig, TrainConfig]] = {
    "paper-main": (_BASE_MODEL, TrainConfig(lr_encoder=2e-5, lr_other=1e-4, warmup_ratio=0.1, batch_size=8, epochs=120)),
    "table1-base": (_BASE_MODEL, TrainConfig(lr_encoder=5e-5, lr_other=1e-4, warmup_ratio=0.0, batch_size=16, epochs=120)),
    "table1-large": (_LARGE_MODEL, TrainConfig(lr_encoder=5e-6, lr_other=1e-4, warmup_ratio=0.2, batch_size=12, epochs=120)),
    "table1-xxlarge": (_XXLARGE_MODEL, TrainConfig(lr_encoder=5e-6, lr_other=1e-4, warmup_ratio=0.2, batch_size=8, epochs=120)),
    "table3": (_BASE_MODEL, TrainConfig(lr_encoder=5e-5, lr_other=1e-4, warmup_ratio=0.2, batch_size=16, epochs=20)),
    "table3-large": (_LARGE_MODEL, TrainConfig(lr_encoder=5e-6, lr_other=1e-4, warmup_ratio=0.2, batch_size=12, epochs=20)),
    "table3-xxlarge": (_XXLARGE_MODEL, TrainConfig(lr_encoder=5e-6, lr_other=1e-4, warmup_ratio=0.2, batch_size=8, epochs=20)),
    "trial-0": _trial(9.54706e-5, 4.08672e-4, 64, 7, 1.63430e-1, 1.47640),
    "trial-1": _trial(1.62565e-4, 4.51598e-5, 32, 7, 1.58632e-1, 0.80677),
    "trial-2": _trial(8.64886e-5, 2.07628e-5, 64, 6, 4.34641e-2, 1.44531),
    "toy": (_TOY_MODEL, TrainConfig(lr_encoder=1e-3, lr_other=1e-3, weight_decay=0.0, warmup_ratio=0.1,
                                    max_grad_norm=5.0, epochs=300, batch_size=4, patience=300)),
}


def _merge(base: Any, overrides: Mapping[str, Any]) -> Any:
    if not isinstance(overrides, Mapping):
        raise ValidationError(
            f"{type(base).__name__} overrides must be a table of fields, got {type(overrides).__name__} {overrides!r}"
        )
    known = {f.name for f in fields(base)}
    unknown = set(overrides) - known
    if unknown:
        raise ValidationError(f"unknown {type(base).__name__} fields: {sorted(unknown)}")
    changes = {}
    for name, value in overrides.items():
        current = getattr(base, name)
        changes[name] = _merge(current, value) if hasattr(current, "__dataclass_fields__") else value
    return replace(base, **changes)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON (``.json``) or TOML (anything else) config file."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse config file {path}: {exc}") from exc


def resolve_config(
    preset: PresetName = "paper-main",
    config: Optional[Mapping[str, Any]] = None,
    train_overrides: Optional[Mapping[str, Any]] = None,
    encoder_shape: Optional[EncoderShape] = None,
) -> Tuple[ModelConfig, TrainConfig]:
    """
    Build the effective configuration

    Args:
        preset: Named preset to start from
        config: Parsed config file, ``{"model": {...}, "train": {...}}``. The
            model section may name ``"encoder_shape"``, which swaps in that
            whole encoder shape before any ``"encoder"`` field overrides.
        train_overrides: Command-line overrides for TrainConfig fields (None values ignored)
        encoder_shape: Command-line shape; wins over the config file's

    Returns:
        (ModelConfig, TrainConfig)
    """
    if preset not in PRESETS:
        raise ValidationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    model, train = PRESETS[preset]
    config = config or {}
    unknown = set(config) - {"model", "train"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")

    model_section = config.get("model", {})
    if isinstance(model_section, Mapping):
        model_section = dict(model_section)
        file_shape = model_section.pop("encoder_shape", None)
        encoder_shape = encoder_shape or file_shape
    if encoder_shape is not None:
        if encoder_shape not in ENCODER_SHAPES:
            raise ValidationError(f"unknown encoder shape {encoder_shape!r}; choose from {sorted(ENCODER_SHAPES)}")
        model = replace(model, encoder=ENCODER_SHAPES[encoder_shape])
    model = _merge(model, model_section)
    train = _merge(train, config.get("train", {}))
    if train_overrides:
        train = _merge(train, {k: v for k, v in train_overrides.items() if v is not None})
    return model, train
