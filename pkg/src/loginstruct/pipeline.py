"""Glue between the stages: SL data in, calibrated detector out."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .detector import DecisionThreshold, normality_score, select_threshold
from .miner import SeverityGroup, SLSample
from .model import LogEncoder, ModelConfig
from .preprocess import Vocabulary, build_vocabulary, mask_for_pretraining, normalize_text
from .training import PretrainResult, embed, finetune, pretrain, split_sl


def to_tokens(items) -> list[list[str]]:
    """Normalize raw message strings; token lists pass through unchanged."""
    return [normalize_text(x) if isinstance(x, str) else list(x) for x in items]


def pretrain_on_sl(samples: Sequence[SLSample], config: ModelConfig) -> PretrainResult:
    """Split SL data, mask the training part and pretrain."""
    train, val = split_sl(samples, config.val_frac, config.seed)
    masked = mask_for_pretraining(train, config.sample_frac, config.token_frac, config.seed)
    vocab_corpus = [s.tokens for s in train] + [s.tokens for s in val]
    return pretrain(masked, val, config, vocab=build_vocabulary(vocab_corpus))


def split_calibration(n: int, frac: float) -> int:
    """Number of items kept for fitting when the last ``frac`` is held out."""
    n_val = min(n - 1, max(1, round(frac * n)))
    return n - n_val


def finetune_and_calibrate(
    pretrained: PretrainResult, target, abnormal, config: ModelConfig
) -> tuple[LogEncoder, DecisionThreshold]:
    """Finetune head set 2, then choose the decision threshold.

    The last ``threshold_val_frac`` of the (time-ordered) target logs and a
    random ``abnormal_val_frac`` of the abnormal samples are held out; the
    threshold maximizes ``threshold_criterion`` on that held-out set.
    """
    target_tokens = to_tokens(target)
    abnormal_tokens = [list(s.tokens) if isinstance(s, SLSample) else list(s) for s in abnormal]
    if len(target_tokens) < 2 or len(abnormal_tokens) < 2:
        raise ValueError("finetuning needs at least two target logs and two abnormal samples")
    cut = split_calibration(len(target_tokens), config.threshold_val_frac)
    rng = np.random.default_rng(config.seed + 3)
    order = rng.permutation(len(abnormal_tokens))
    a_cut = split_calibration(len(abnormal_tokens), config.abnormal_val_frac)
    abn_fit = [abnormal_tokens[i] for i in order[:a_cut]]
    abn_val = [abnormal_tokens[i] for i in order[a_cut:]]

    model = finetune(target_tokens[:cut], abn_fit, pretrained, config)
    val_scores = np.concatenate([
        score_messages(model, pretrained.vocab, target_tokens[cut:]),
        score_messages(model, pretrained.vocab, abn_val),
    ])
    labels = np.r_[np.zeros(len(target_tokens) - cut, dtype=int), np.ones(len(abn_val), dtype=int)]
    return model, select_threshold(val_scores, labels, config.threshold_criterion)


def score_messages(model: LogEncoder, vocab: Vocabulary, messages) -> np.ndarray:
    return normality_score(embed(model, to_tokens(messages), vocab))


def abnormal_samples(samples: Sequence[SLSample]) -> list[SLSample]:
    return [s for s in samples if s.group is SeverityGroup.ABNORMAL]
