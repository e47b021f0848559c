"""Two-phase learning: supervised pretraining, then hyperspherical finetuning."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .miner import SeverityGroup, SLSample
from .model import FINETUNE, PRETRAIN, LogEncoder, ModelConfig, bce_loss, build_model, hyperspherical_loss
from .preprocess import TokenSequence, Vocabulary, build_vocabulary, encode_batch

log = logging.getLogger(__name__)


class EarlyStopping:
    """Track the best validation loss; signal a stop after ``patience`` misses.

    Improvement is strict (no minimum delta).
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = -1
        self.misses = 0

    def step(self, epoch: int, loss: float) -> tuple[bool, bool]:
        """Record one epoch; returns ``(improved, should_stop)``."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.misses = 0
            return True, False
        self.misses += 1
        return False, self.misses >= self.patience


@dataclass
class PretrainResult:
    model: LogEncoder
    vocab: Vocabulary
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1


def _as_indices(items, vocab: Vocabulary, max_len: int) -> torch.Tensor:
    """Accept SL samples, token lists, TokenSequences or an index array."""
    if isinstance(items, torch.Tensor):
        return items.long()
    if isinstance(items, np.ndarray):
        return torch.from_numpy(items.astype(np.int64))
    items = list(items)
    if items and isinstance(items[0], TokenSequence):
        return torch.tensor([s.indices for s in items], dtype=torch.long)
    token_lists = [s.tokens if isinstance(s, SLSample) else s for s in items]
    return torch.from_numpy(encode_batch(token_lists, vocab, max_len))


def _check_two_classes(samples: Sequence[SLSample], name: str) -> None:
    if not samples:
        raise ValueError(f"{name} is empty")
    groups = {s.group for s in samples}
    if len(groups) < 2:
        raise ValueError(f"{name} contains a single severity group; both are required")


def _labels(samples: Sequence[SLSample]) -> torch.Tensor:
    return torch.tensor([s.label for s in samples], dtype=torch.long)


@torch.no_grad()
def evaluate_pretrain(model: LogEncoder, indices: torch.Tensor, labels: torch.Tensor, batch_size: int):
    """Return (mean BCE, accuracy) with dropout disabled."""
    was_training = model.training
    model.eval()
    total, correct = 0.0, 0
    for start in range(0, len(indices), batch_size):
        idx = indices[start : start + batch_size]
        y = labels[start : start + batch_size]
        logits = model(idx, PRETRAIN)
        total += float(bce_loss(logits, y)) * len(idx)
        correct += int((logits.argmax(dim=1) == y).sum())
    model.train(was_training)
    n = max(1, len(indices))
    return total / n, correct / n


def pretrain(
    sl_train: Sequence[SLSample],
    sl_val: Sequence[SLSample],
    config: ModelConfig,
    vocab: Vocabulary | None = None,
) -> PretrainResult:
    """Train embeddings, encoder and head set 1 on severity classification.

    ``sl_train`` is expected to be masked already. Stops after
    ``patience_epochs`` epochs without validation improvement (or at
    ``max_epochs``) and restores the best-validation parameters.
    """
    _check_two_classes(sl_train, "sl_train")
    _check_two_classes(sl_val, "sl_val")
    if vocab is None:
        vocab = build_vocabulary([s.tokens for s in sl_train] + [s.tokens for s in sl_val])
    torch.manual_seed(config.seed)
    model = build_model(vocab.size, config)
    x_train = _as_indices(sl_train, vocab, config.max_len)
    y_train = _labels(sl_train)
    x_val = _as_indices(sl_val, vocab, config.max_len)
    y_val = _labels(sl_val)

    opt = torch.optim.Adam(
        model.encoder_parameters(), lr=config.learning_rate, betas=(config.beta1, config.beta2), eps=1e-8
    )
    gen = torch.Generator().manual_seed(config.seed + 1)
    stopper = EarlyStopping(config.patience_epochs)
    best_state = copy.deepcopy(model.state_dict())
    history = []
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        order = torch.randperm(len(x_train), generator=gen)
        train_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            opt.zero_grad()
            loss = bce_loss(model(x_train[batch], PRETRAIN), y_train[batch])
            loss.backward()
            opt.step()
            train_loss += loss.item() * len(batch)
        val_loss, val_acc = evaluate_pretrain(model, x_val, y_val, config.batch_size)
        improved, stop = stopper.step(epoch, val_loss)
        history.append(
            {"epoch": epoch, "train_loss": train_loss / len(x_train), "val_loss": val_loss, "val_accuracy": val_acc}
        )
        log.debug("pretrain epoch %d val_loss %.5f val_acc %.4f", epoch, val_loss, val_acc)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
        if stop:
            break
    model.load_state_dict(best_state)
    model.eval()
    return PretrainResult(model, vocab, history, stopper.best_epoch)


@torch.no_grad()
def lme_vectors(model: LogEncoder, indices: torch.Tensor, batch_size: int = 1024) -> torch.Tensor:
    model.eval()
    chunks = [model.encode_lme(indices[s : s + batch_size]) for s in range(0, len(indices), batch_size)]
    if not chunks:
        return torch.zeros(0, model.config.model_size)
    return torch.cat(chunks)


def finetune_batches(n_normal: int, n_abnormal: int, fraction: float, batch_size: int, rng: np.random.Generator):
    """Compose one finetuning epoch as index batches with a fixed abnormal share.

    Every target log appears once; ``round(fraction / (1 - fraction) * n_normal)``
    abnormal draws (at least one) are spread evenly over the batches. Yields
    ``(normal_idx, abnormal_idx)`` pairs.
    """
    k = max(1, round(fraction / (1.0 - fraction) * n_normal))
    normal = rng.permutation(n_normal)
    if k <= n_abnormal:
        abnormal = rng.permutation(n_abnormal)[:k]
    else:
        abnormal = np.concatenate([rng.permutation(n_abnormal) for _ in range(math.ceil(k / n_abnormal))])[:k]
    n_batches = max(1, math.ceil((n_normal + k) / batch_size))
    for norm_part, abn_part in zip(np.array_split(normal, n_batches), np.array_split(abnormal, n_batches)):
        yield norm_part, abn_part


def finetune(
    target_normal,
    sl_abnormal,
    pretrained: PretrainResult,
    config: ModelConfig,
) -> LogEncoder:
    """Fit head set 2 with the hyperspherical loss; everything else stays frozen.

    Works on a copy, so ``pretrained.model`` is left untouched.

    ``target_normal`` holds unlabeled target-system logs (label 0) and
    ``sl_abnormal`` the abnormal SL samples (label 1). Both may be given as
    token lists, :class:`TokenSequence` objects or index arrays. Because the
    encoder is frozen and run without dropout, its [LME] outputs are computed
    once and reused across epochs.
    """
    if config.abnormal_fraction <= 0.0:
        raise ValueError("abnormal_fraction must be > 0: finetuning needs the anomalous class")
    model = copy.deepcopy(pretrained.model)
    vocab = pretrained.vocab
    x_norm = _as_indices(target_normal, vocab, config.max_len)
    x_abn = _as_indices(sl_abnormal, vocab, config.max_len)
    if len(x_norm) == 0:
        raise ValueError("finetuning needs target-system logs")
    if len(x_abn) == 0:
        raise ValueError("finetuning needs abnormal samples (the anomalous class)")
    if isinstance(sl_abnormal, Sequence) and sl_abnormal and isinstance(sl_abnormal[0], SLSample):
        if any(s.group is not SeverityGroup.ABNORMAL for s in sl_abnormal):
            raise ValueError("sl_abnormal must contain only abnormal samples")

    for p in model.encoder_parameters():
        p.requires_grad_(False)
    h_norm = lme_vectors(model, x_norm)
    h_abn = lme_vectors(model, x_abn)

    torch.manual_seed(config.seed + 2)
    rng = np.random.default_rng(config.seed + 2)
    opt = torch.optim.Adam(
        model.set2.parameters(), lr=config.ft_learning_rate, betas=(config.beta1, config.beta2), eps=1e-8
    )
    model.set2.train()
    for epoch in range(config.finetune_epochs):
        total = 0.0
        for ni, ai in finetune_batches(len(h_norm), len(h_abn), config.abnormal_fraction, config.ft_batch_size, rng):
            h = torch.cat([h_norm[torch.from_numpy(ni)], h_abn[torch.from_numpy(ai)]])
            y = torch.cat([torch.zeros(len(ni)), torch.ones(len(ai))])
            opt.zero_grad()
            loss = hyperspherical_loss(model.set2(h), y)
            loss.backward()
            opt.step()
            total += loss.item()
        log.debug("finetune epoch %d loss %.5f", epoch + 1, total)
    model.eval()
    return model


@torch.no_grad()
def embed(model: LogEncoder, logs, vocab: Vocabulary, batch_size: int = 1024) -> np.ndarray:
    """Final log representations (head set 2 outputs) without dropout."""
    model.eval()
    x = _as_indices(logs, vocab, model.config.max_len)
    out = [model(x[s : s + batch_size], FINETUNE) for s in range(0, len(x), batch_size)]
    if not out:
        return np.zeros((0, model.config.model_size), dtype=np.float32)
    return torch.cat(out).numpy()


def split_sl(samples: Sequence[SLSample], val_frac: float, seed: int) -> tuple[list[SLSample], list[SLSample]]:
    """Stratified random train/validation split, at least one of each group per side."""
    rng = np.random.default_rng(seed)
    train, val = [], []
    for group in SeverityGroup:
        members = [s for s in samples if s.group is group]
        if len(members) < 2:
            raise ValueError(f"need at least two {group.value} samples to split")
        order = rng.permutation(len(members))
        n_val = min(len(members) - 1, max(1, round(val_frac * len(members))))
        val.extend(members[i] for i in order[:n_val])
        train.extend(members[i] for i in order[n_val:])
    return train, val
