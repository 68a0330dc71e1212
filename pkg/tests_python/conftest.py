"""Shared fixtures for the dess_aste test suite"""

from pathlib import Path
from typing import Callable, Dict

import pytest
import torch
from torch import nn

from dess_aste.config import EncoderConfig, GcnConfig, HeadConfig, LstmConfig, ModelConfig, TrainConfig
from dess_aste.corpus import build_vocab, load_split, parse_aste_line
from dess_aste.encoder import init_params
from dess_aste.model import DessModel


FIXTURES = Path(__file__).parent / "fixtures"

EXAMPLE_LINES = {
    "food_service": "The food was delicious , but the service was slow####[([1], [3], 'POS'), ([7], [9], 'NEG')]",
    "screen_battery": (
        "While the screen is bright and sharp , the battery drains too quickly .####"
        "[([2], [4], 'POS'), ([2], [6], 'POS'), ([9], [10, 11, 12], 'NEG')]"
    ),
    "implicit": "The staff could be more helpful .####[([1], [2, 3, 4, 5], 'NEG')]",
    "multi_word": "The phone 's camera and battery life are excellent .####[([3], [8], 'POS'), ([5, 6], [8], 'POS')]",
    "negation": "The new update is not better than the previous version .####[([2], [4, 5], 'NEG')]",
}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def mini_split():
    """Bundled corpus: train 5/9 (POS 5, NEU 1, NEG 3), dev 2/2, test 3/3"""
    return load_split(
        FIXTURES / "train_triplets.txt",
        FIXTURES / "dev_triplets.txt",
        FIXTURES / "test_triplets.txt",
    )


@pytest.fixture
def examples():
    return {name: parse_aste_line(line, sentence_id=name) for name, line in EXAMPLE_LINES.items()}


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """Smaller than the toy preset so full-model tests stay fast"""
    return ModelConfig(
        encoder=EncoderConfig(vocab_size=2, hidden_dim=16, num_heads=2, num_layers=2, max_rel_distance=4,
                              ffn_dim=32, dropout_rate=0.0, max_len=32),
        lstm=LstmConfig(hidden_per_direction=8, num_layers=2, dropout_rate=0.0),
        gcn=GcnConfig(hidden_dim=8, num_layers=2, dropout_rate=0.0),
        head=HeadConfig(max_span=4, neg_entity=10, neg_triple=10, max_pairs=100, size_embedding_dim=4,
                        classifier_hidden=16),
    )


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(lr_encoder=1e-3, lr_other=1e-3, weight_decay=0.0, warmup_ratio=0.0, max_grad_norm=5.0,
                       epochs=3, batch_size=2, seed=7, patience=3)


@pytest.fixture
def mini_vocab(mini_split):
    return build_vocab(mini_split.train)


@pytest.fixture
def tiny_model(tiny_model_config, mini_vocab) -> DessModel:
    model = DessModel(tiny_model_config.with_vocab_size(len(mini_vocab)))
    init_params(model, seed=3)
    return model.eval()


def finite_difference_check(
    module: nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    eps: float = 1e-5,
) -> Dict[str, float]:
    """
    Compare autograd gradients of every parameter with central differences

    ``module`` must already be in float64 and eval mode. Returns the relative
    error ||analytic - numeric|| / (||analytic|| + ||numeric||) per parameter;
    tensors whose gradients are both ~0 report 0.
    """
    module.zero_grad(set_to_none=True)
    loss_fn().backward()
    errors: Dict[str, float] = {}
    with torch.no_grad():
        for name, param in module.named_parameters():
            analytic = torch.zeros_like(param) if param.grad is None else param.grad.clone()
            numeric = torch.zeros_like(param)
            flat, flat_numeric = param.view(-1), numeric.view(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + eps
                plus = loss_fn().item()
                flat[i] = original - eps
                minus = loss_fn().item()
                flat[i] = original
                flat_numeric[i] = (plus - minus) / (2 * eps)
            scale = float(analytic.norm() + numeric.norm())
            diff = float((analytic - numeric).norm())
            errors[name] = 0.0 if scale < 1e-8 and diff < 1e-8 else diff / scale
    return errors


@pytest.fixture
def fd_check():
    return finite_difference_check
