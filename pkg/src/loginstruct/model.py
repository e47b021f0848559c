"""Transformer encoder over log tokens with two classification head sets.

Head set 1 (``set1``) produces two severity logits and is trained together
with the embeddings and the encoder. Head set 2 (``set2``) maps the [LME]
vector to the final log representation and is the only part updated while
finetuning with the hyperspherical loss.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import torch
import torch.nn as nn
import torch.nn.functional as F

from .preprocess import LME_INDEX, PAD_INDEX

PRETRAIN = "pretrain"
FINETUNE = "finetune"
SQNORM_FLOOR = 1e-9


@dataclass
class ModelConfig:
    model_size: int = 16
    num_heads: int = 2
    num_layers: int = 2
    max_len: int = 32
    dropout_rate: float = 0.05
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    batch_size: int = 512
    patience_epochs: int = 5
    max_epochs: int = 100
    finetune_epochs: int = 5
    finetune_batch_size: int | None = None
    finetune_learning_rate: float | None = None
    abnormal_fraction: float = 0.05
    sample_frac: float = 0.15
    token_frac: float = 0.20
    val_frac: float = 0.1
    threshold_val_frac: float = 0.1
    abnormal_val_frac: float = 0.5
    threshold_criterion: str = "f1"
    positional_encoding: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.model_size < 1 or self.num_heads < 1 or self.model_size % self.num_heads:
            raise ValueError("model_size must be a positive multiple of num_heads")
        if self.num_layers < 0 or self.max_len < 1:
            raise ValueError("num_layers must be >= 0 and max_len >= 1")
        for name in ("learning_rate", "beta1", "beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 1 or self.patience_epochs < 1 or self.finetune_epochs < 0:
            raise ValueError("batch_size and patience_epochs must be >= 1, finetune_epochs >= 0")
        if not 0.0 <= self.abnormal_fraction < 1.0:
            raise ValueError("abnormal_fraction must lie in [0, 1)")
        if self.threshold_criterion not in ("f1", "precision", "recall"):
            raise ValueError("threshold_criterion must be f1, precision or recall")

    @property
    def ft_batch_size(self) -> int:
        return self.finetune_batch_size or self.batch_size

    @property
    def ft_learning_rate(self) -> float:
        return self.finetune_learning_rate or self.learning_rate

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def sinusoidal_encoding(length: int, d: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=torch.float64) * (-math.log(10000.0) / d))
    pe = torch.zeros(length, d, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div)[:, : d // 2]
    return pe.float()


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = d // heads
        self.query = nn.Linear(d, d)
        self.key = nn.Linear(d, d)
        self.value = nn.Linear(d, d)
        self.output = nn.Linear(d, d)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape

        def split(h):
            return h.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        # pad_mask: True where the key is padding
        scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        attn = self.dropout(torch.softmax(scores, dim=-1))
        out = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.output(out)


class EncoderLayer(nn.Module):
    """Post-norm encoder block: attention and a 4x feed-forward, each residual."""

    def __init__(self, d: int, heads: int, dropout: float):
        super().__init__()
        self.attention = MultiHeadSelfAttention(d, heads, dropout)
        self.norm1 = nn.LayerNorm(d)
        self.ff_in = nn.Linear(d, 4 * d)
        self.ff_out = nn.Linear(4 * d, d)
        self.norm2 = nn.LayerNorm(d)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.dropout(self.attention(x, pad_mask)))
        ff = self.ff_out(self.dropout(F.relu(self.ff_in(x))))
        return self.norm2(x + self.dropout(ff))


class LogEncoder(nn.Module):
    def __init__(self, vocab_size: int, config: ModelConfig):
        super().__init__()
        d = config.model_size
        self.vocab_size = vocab_size
        self.config = config
        self.embedding = nn.Embedding(vocab_size, d)
        self.register_buffer("positions", sinusoidal_encoding(config.max_len + 1, d), persistent=False)
        self.use_positions = config.positional_encoding
        self.dropout = nn.Dropout(config.dropout_rate)
        self.layers = nn.ModuleList(
            EncoderLayer(d, config.num_heads, config.dropout_rate) for _ in range(config.num_layers)
        )
        self.set1 = nn.Sequential(nn.Linear(d, d), nn.ReLU(), nn.Linear(d, 2))
        self.set2 = nn.Sequential(nn.Linear(d, d), nn.ReLU(), nn.Linear(d, d))

    def reset_parameters(self, generator: torch.Generator) -> None:
        """Uniform init in +-1/sqrt(fan_in); layer norms start at identity."""
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    module.weight.uniform_(-bound, bound, generator=generator)
                    module.bias.uniform_(-bound, bound, generator=generator)
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.zero_()
            self.embedding.weight.uniform_(-1.0, 1.0, generator=generator)

    def encoder_parameters(self):
        """Parameters frozen after pretraining (embeddings, encoder, head set 1)."""
        for name, p in self.named_parameters():
            if not name.startswith("set2."):
                yield p

    def encode_lme(self, indices: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        if indices.dim() != 2 or indices.shape[1] != self.config.max_len + 1:
            raise ValueError(
                f"expected indices of shape (batch, {self.config.max_len + 1}), got {tuple(indices.shape)}"
            )
        if indices.numel() and (int(indices.max()) >= self.vocab_size or int(indices.min()) < 0):
            raise IndexError("token index outside the vocabulary")
        if pad_mask is None:
            pad_mask = indices == PAD_INDEX
        # [LME] is never masked so every attention row has a valid key
        pad_mask = pad_mask.clone()
        pad_mask[:, 0] = False
        h = self.embedding(indices)
        if self.use_positions:
            h = h + self.positions[: indices.shape[1]]
        h = self.dropout(h)
        for layer in self.layers:
            h = layer(h, pad_mask)
        return h[:, 0]

    def forward(
        self, indices: torch.Tensor, phase: str = PRETRAIN, pad_mask: torch.Tensor | None = None
    ) -> torch.Tensor:
        lme = self.encode_lme(indices, pad_mask)
        if phase == PRETRAIN:
            return self.set1(lme)
        if phase == FINETUNE:
            return self.set2(lme)
        raise ValueError(f"unknown phase {phase!r}")


def build_model(vocab_size: int, config: ModelConfig) -> LogEncoder:
    model = LogEncoder(vocab_size, config)
    gen = torch.Generator().manual_seed(config.seed)
    model.reset_parameters(gen)
    return model


def bce_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of the true class under a 2-way softmax."""
    return F.cross_entropy(logits, labels.long())


def hyperspherical_loss(x: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Pull label-0 embeddings to the origin, push label-1 ones away.

    Per log: ``|x|^2`` for label 0 and ``-log(1 - exp(-|x|^2))`` for label 1,
    with ``|x|^2`` floored at 1e-9 in the second term so it stays finite.
    """
    sq = (x * x).sum(dim=-1)
    labels = labels.to(sq.dtype)
    far = -torch.log(-torch.expm1(-sq.clamp_min(SQNORM_FLOOR)))
    return ((1.0 - labels) * sq + labels * far).mean()
