"""
Training protocol

Only train sentences produce gradients. After each epoch the dev split is
scored without updates, the best dev-F1 checkpoint is kept, and training stops
after ``patience`` epochs without improvement. The test split is scored once,
on the returned checkpoint.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .batching import Batch, bucket_batches
from .checkpoint import Checkpoint
from .config import ModelConfig, TrainConfig
from .corpus import DatasetSplit, Sentence, Vocab, build_vocab, encode_tokens
from .encoder import init_params
from .errors import NumericalFault, ProtocolFault, ShapeFault, ValidationError
from .evaluation import Metrics, exact_match
from .hfim import channel_kl
from .literals import KlDirection
from .logging_utils import log_event
from .model import DessModel, predict_sentences
from .triplet_head import enumerate_spans, sample_negatives


logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
NO_DECAY_PREFIX = "bias"
LOG_COLUMNS = ["epoch", "train_loss", "dev_P", "dev_R", "dev_F1", "lr"]


@dataclass
class LossTerms:
    total: torch.Tensor
    entity: torch.Tensor
    pair: torch.Tensor
    kl: torch.Tensor


@dataclass
class ProtocolCounters:
    """Optimizer steps are attributed to whichever phase is active when they happen"""
    phase: str = "train"
    backward_passes: int = 0
    train_batches: int = 0
    train_updates: int = 0
    dev_updates: int = 0
    test_updates: int = 0
    test_evaluations: int = 0

    def record_update(self, *_: object) -> None:
        name = f"{self.phase}_updates"
        setattr(self, name, getattr(self, name) + 1)


@dataclass
class EpochRecord:
    """One CSV row; ``lr`` is the encoder group's scheduled rate after the epoch's last step"""
    epoch: int
    train_loss: float
    dev: Metrics
    lr: float

    def to_row(self) -> Dict[str, float]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "dev_P": self.dev.precision,
            "dev_R": self.dev.recall,
            "dev_F1": self.dev.f1,
            "lr": self.lr,
        }


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: List[EpochRecord]
    test_metrics: Metrics
    counters: ProtocolCounters
    epochs_run: int


def loss_terms(
    entity_logits: torch.Tensor,
    entity_labels: torch.Tensor,
    pair_logits: torch.Tensor,
    pair_labels: torch.Tensor,
    h_syn: torch.Tensor,
    h_sem: torch.Tensor,
    lambda_kl: float,
    mask: Optional[torch.Tensor] = None,
    kl_direction: KlDirection = "sem_to_syn",
) -> LossTerms:
    if entity_logits.shape[0] == 0:
        raise ShapeFault("no entity samples; cannot average the entity loss")
    entity = F.cross_entropy(entity_logits, entity_labels)
    pair = F.cross_entropy(pair_logits, pair_labels) if pair_logits.shape[0] else entity.new_zeros(())
    kl = channel_kl(h_syn, h_sem, mask, kl_direction)
    return LossTerms(total=entity + pair + lambda_kl * kl, entity=entity, pair=pair, kl=kl)


def total_loss(
    entity_logits: torch.Tensor,
    entity_labels: torch.Tensor,
    pair_logits: torch.Tensor,
    pair_labels: torch.Tensor,
    h_syn: torch.Tensor,
    h_sem: torch.Tensor,
    lambda_kl: float,
    mask: Optional[torch.Tensor] = None,
    kl_direction: KlDirection = "sem_to_syn",
) -> torch.Tensor:
    """Mean entity CE + mean pair CE + lambda_kl * channel KL."""
    return loss_terms(entity_logits, entity_labels, pair_logits, pair_labels,
                      h_syn, h_sem, lambda_kl, mask, kl_direction).total


def lr_multiplier(step: int, total_steps: int, warmup_ratio: float) -> float:
    """Linear 0 -> 1 over ceil(warmup_ratio * total_steps) steps, then linear 1 -> 0."""
    warmup = math.ceil(warmup_ratio * total_steps)
    if step < warmup:
        return step / warmup
    remaining = total_steps - warmup
    if remaining <= 0:
        return 0.0
    return max(0.0, min(1.0, (total_steps - step) / remaining))


def clip_gradients(named_parameters: Iterable[Tuple[str, nn.Parameter]], max_norm: float) -> float:
    """
    Scale all gradients by max_norm / g when the global L2 norm g exceeds max_norm

    Returns:
        The global norm before clipping

    Raises:
        NumericalFault: A gradient holds NaN or inf; location names the parameter
    """
    grads = []
    for name, param in named_parameters:
        if param.grad is None:
            continue
        if not bool(torch.isfinite(param.grad).all()):
            raise NumericalFault("non-finite gradient", location=name)
        grads.append(param.grad)
    if not grads:
        return 0.0
    norm = float(torch.linalg.vector_norm(torch.stack([torch.linalg.vector_norm(g) for g in grads])))
    if norm > max_norm:
        scale = max_norm / norm
        for grad in grads:
            grad.mul_(scale)
    return norm


def param_groups(model: DessModel, config: TrainConfig) -> List[Dict[str, object]]:
    """
    Encoder vs. other learning rates; biases and LayerNorm parameters are not decayed.
    Groups are named ``encoder``, ``encoder_no_decay``, ``other`` and ``other_no_decay``.
    """
    norm_ids = {id(p) for m in model.modules() if isinstance(m, nn.LayerNorm) for p in m.parameters()}
    groups: Dict[Tuple[bool, bool], List[nn.Parameter]] = {}
    for name, param in model.named_parameters():
        is_encoder = name.startswith("encoder.")
        decay = not (name.rsplit(".", 1)[-1].startswith(NO_DECAY_PREFIX) or id(param) in norm_ids)
        groups.setdefault((is_encoder, decay), []).append(param)
    return [
        {
            "name": ("encoder" if is_encoder else "other") + ("" if decay else "_no_decay"),
            "params": params,
            "lr": config.lr_encoder if is_encoder else config.lr_other,
            "weight_decay": config.weight_decay if decay else 0.0,
        }
        for (is_encoder, decay), params in sorted(groups.items())
    ]


def build_optimizer(model: DessModel, config: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(param_groups(model, config), betas=ADAM_BETAS, eps=ADAM_EPS)


def build_scheduler(optimizer: torch.optim.Optimizer, total_steps: int, warmup_ratio: float):
    return torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: lr_multiplier(min(step, total_steps), total_steps, warmup_ratio)
    )


def group_lr(optimizer: torch.optim.Optimizer, name: str) -> float:
    """Current (scheduled) learning rate of the param group called ``name``."""
    for group in optimizer.param_groups:
        if group.get("name") == name:
            return float(group["lr"])
    raise KeyError(f"no param group named {name!r}")


def optimizer_step(optimizer: torch.optim.Optimizer, scheduler=None) -> None:
    optimizer.step()
    if scheduler is not None:
        scheduler.step()
    optimizer.zero_grad(set_to_none=True)


class EarlyStopping:
    """Tracks the best dev F1; stops after ``patience`` epochs without a strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_f1 = -math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, f1: float) -> bool:
        if f1 > self.best_f1:
            self.best_f1 = f1
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


class TrainingLog:
    """CSV epoch log, flushed after every row"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.records: List[EpochRecord] = []
        if self.path is not None:
            with open(self.path, "w", newline="", encoding="utf-8") as handle:
                csv.DictWriter(handle, fieldnames=LOG_COLUMNS).writeheader()

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", newline="", encoding="utf-8") as handle:
                csv.DictWriter(handle, fieldnames=LOG_COLUMNS).writerow(record.to_row())


def batch_loss(
    model: DessModel,
    batch: Batch,
    config: TrainConfig,
    rng: np.random.Generator,
) -> LossTerms:
    head = model.config.head
    output = model.encode_batch(batch)
    entity_logits, entity_labels, pair_logits, pair_labels = [], [], [], []
    for i, sentence in enumerate(batch.sentences):
        features = output.features[i, :len(sentence)]
        candidates = enumerate_spans(len(sentence), head.max_span)
        sample = sample_negatives(sentence, candidates, head.neg_entity, head.neg_triple, rng)
        entity_logits.append(model.entity_logits(features, [s for s, _ in sample.entities]))
        entity_labels += [label.value for _, label in sample.entities]
        pair_logits.append(model.pair_logits(features, [(a, o) for a, o, _ in sample.pairs]))
        pair_labels += [label.value for _, _, label in sample.pairs]
    return loss_terms(
        torch.cat(entity_logits),
        torch.tensor(entity_labels, dtype=torch.long),
        torch.cat(pair_logits),
        torch.tensor(pair_labels, dtype=torch.long),
        output.h_syn,
        output.h_sem,
        config.lambda_kl,
        batch.mask,
        config.kl_direction,
    )


def evaluate_split(
    model: Union[Checkpoint, DessModel],
    sentences: Sequence[Sentence],
    vocab: Optional[Vocab] = None,
    batch_size: int = 16,
) -> Metrics:
    """Exact-match metrics of a checkpoint (or live model plus vocab) on a list of sentences."""
    if isinstance(model, Checkpoint):
        vocab = model.vocab
        model = model.build_model()
    if vocab is None:
        raise ValidationError("vocab is required when evaluating a live model")
    if not sentences:
        return Metrics.empty()
    predictions = predict_sentences(model, vocab, sentences, batch_size)
    return exact_match(predictions, {s.id: s.gold for s in sentences})


def train(
    split: DatasetSplit,
    model_config: ModelConfig,
    train_config: TrainConfig,
    log_path: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """
    Fit a model on ``split.train`` with dev-based early stopping

    Args:
        split: Train/dev/test sentences; ids must not leak across partitions
        model_config: Architecture (vocab_size is replaced by the built vocab)
        train_config: Optimisation and protocol settings
        log_path: Optional CSV epoch log

    Returns:
        TrainResult with the best dev checkpoint and its single test evaluation
    """
    # The split's lists are mutable, so re-check before any gradient is taken.
    split.check_isolation()
    if not split.train:
        raise ProtocolFault("training split is empty")

    torch.manual_seed(train_config.seed)
    rng = np.random.default_rng(train_config.seed)
    vocab = build_vocab(split.train, train_config.min_freq)
    model_config = model_config.with_vocab_size(len(vocab))
    encoded = [encode_tokens(vocab, s, model_config.encoder.max_len) for s in split.train]

    model = init_params(DessModel(model_config), train_config.seed)
    batches_per_epoch = math.ceil(len(encoded) / train_config.batch_size)
    total_steps = batches_per_epoch * train_config.epochs
    optimizer = build_optimizer(model, train_config)
    scheduler = build_scheduler(optimizer, total_steps, train_config.warmup_ratio)

    counters = ProtocolCounters()
    optimizer.register_step_post_hook(counters.record_update)
    stopper = EarlyStopping(train_config.patience)
    log = TrainingLog(log_path)
    best: Optional[Checkpoint] = None
    epochs_run = 0

    for epoch in range(1, train_config.epochs + 1):
        started = time.perf_counter()
        counters.phase = "train"
        model.train()
        losses = []
        batches = bucket_batches(encoded, train_config.batch_size, rng)
        counters.train_batches = len(batches)
        for batch in batches:
            terms = batch_loss(model, batch, train_config, rng)
            terms.total.backward()
            counters.backward_passes += 1
            clip_gradients(model.named_parameters(), train_config.max_grad_norm)
            optimizer_step(optimizer, scheduler)
            losses.append(float(terms.total.detach()))

        counters.phase = "dev"
        dev_metrics = evaluate_split(model, split.dev, vocab)
        epochs_run = epoch
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            dev=dev_metrics,
            lr=group_lr(optimizer, "encoder"),
        )
        log.append(record)
        log_event(
            logger,
            "epoch_end",
            epoch=epoch,
            train_loss=record.train_loss,
            dev_f1=dev_metrics.f1,
            lr=record.lr,
            lr_other=group_lr(optimizer, "other"),
            duration_ms=(time.perf_counter() - started) * 1000,
        )

        if stopper.update(epoch, dev_metrics.f1):
            best = Checkpoint.capture(model, epoch, dev_metrics, vocab)
        if stopper.should_stop:
            log_event(logger, "early_stop", epoch=epoch, best_epoch=stopper.best_epoch, best_dev_f1=stopper.best_f1)
            break
        if train_config.stop_at_f1 is not None and dev_metrics.f1 >= train_config.stop_at_f1:
            log_event(logger, "target_reached", epoch=epoch, dev_f1=dev_metrics.f1)
            break

    counters.phase = "test"
    test_metrics = evaluate_split(best, split.test)
    counters.test_evaluations += 1
    log_event(logger, "test_evaluated", best_epoch=best.epoch, test_f1=test_metrics.f1)
    return TrainResult(checkpoint=best, log=log.records, test_metrics=test_metrics, counters=counters, epochs_run=epochs_run)
