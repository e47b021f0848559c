"""Log text normalization, vocabulary and fixed-length encoding.

The same normalization chain is applied to raw target-system messages and to
static texts mined from source code, so both land in one token space.
"""

from __future__ import annotations

import math
import os
import re
import string
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

LME = "[LME]"
PAD = "[PD]"
UNK = "[UNK]"
RESERVED = (LME, PAD, UNK)
LME_INDEX, PAD_INDEX, UNK_INDEX = 0, 1, 2

DEFAULT_MAX_LEN = 32
STOPWORDS_ENV = "LOGINSTRUCT_STOPWORDS"

_PATH_RE = re.compile(r"(/[^\s/]+){2,}/?")
_DIGIT_RE = re.compile(r"\d")
_SPECIAL = str.maketrans("", "", string.punctuation)

# printf-style (incl. %(name)s), brace-style, shell-style
_PLACEHOLDER_RE = re.compile(
    r"%\(\w+\)[-+ #0]*\d*(?:\.\d+)?[diouxXeEfFgGcrsa]"
    r"|%[-+ #0]*(?:\d+|\*)?(?:\.(?:\d+|\*))?(?:hh|h|ll|l|L|q|j|z|t)?[diouxXeEfFgGcrsapn@]"
    r"|\{[^{}]*\}"
    r"|\$\{[^}]*\}|\$\w+"
)


def load_stopwords(path: str | os.PathLike | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line, ``#`` comments).

    Without an explicit path the ``LOGINSTRUCT_STOPWORDS`` environment
    variable is consulted before falling back to the shipped list.
    """
    path = path or os.environ.get(STOPWORDS_ENV)
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = resources.files("loginstruct.data").joinpath("stopwords.txt").read_text("utf-8")
    words = (line.strip().lower() for line in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


@lru_cache(maxsize=8)
def _cached_stopwords(path: str | None) -> frozenset[str]:
    return load_stopwords(path)


def default_stopwords() -> frozenset[str]:
    return _cached_stopwords(os.environ.get(STOPWORDS_ENV))


def strip_placeholders(text: str) -> str:
    """Remove format placeholders (``%s``, ``%(x)d``, ``{}``, ``{name}``, ``$VAR``)."""
    return _PLACEHOLDER_RE.sub(" ", text)


def normalize_text(raw: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Turn one message into its normalized token list.

    Steps, in order: delete path-like substrings, split on whitespace, drop
    tokens containing a digit, strip ASCII punctuation (dropping tokens that
    become empty), lowercase, drop stopwords.
    """
    stop = default_stopwords() if stopwords is None else frozenset(stopwords)
    text = _PATH_RE.sub(" ", raw)
    tokens = []
    for tok in text.split():
        if _DIGIT_RE.search(tok):
            continue
        tok = tok.translate(_SPECIAL)
        if not tok:
            continue
        tok = tok.lower()
        if tok in stop:
            continue
        tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token to index map with the three reserved entries first."""

    token_to_index: dict[str, int]
    index_to_token: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        inv = sorted(self.token_to_index.items(), key=lambda kv: kv[1])
        if [i for _, i in inv] != list(range(len(inv))):
            raise ValueError("vocabulary indices must be contiguous from 0")
        for tok, idx in zip(RESERVED, (LME_INDEX, PAD_INDEX, UNK_INDEX)):
            if self.token_to_index.get(tok) != idx:
                raise ValueError(f"reserved token {tok} must map to {idx}")
        object.__setattr__(self, "index_to_token", tuple(t for t, _ in inv))

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def to_json(self) -> dict[str, int]:
        return dict(self.token_to_index)

    @classmethod
    def from_json(cls, data: dict[str, int]) -> "Vocabulary":
        return cls({str(k): int(v) for k, v in data.items()})


def build_vocabulary(corpus: Sequence[Sequence[str]]) -> Vocabulary:
    """Index every corpus token by descending frequency, ties lexicographic."""
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for tokens in corpus for tok in tokens if tok not in RESERVED)
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    mapping = {tok: i for i, tok in enumerate(RESERVED)}
    for tok in ordered:
        mapping[tok] = len(mapping)
    return Vocabulary(mapping)


@dataclass(frozen=True)
class TokenSequence:
    indices: tuple[int, ...]
    attention_mask: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.indices)


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> TokenSequence:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    body = [vocab.index(t) for t in tokens[:max_len]]
    pad = max_len - len(body)
    indices = (LME_INDEX, *body) + (PAD_INDEX,) * pad
    mask = (True,) * (1 + len(body)) + (False,) * pad
    return TokenSequence(indices, mask)


def encode_batch(
    token_lists: Iterable[Sequence[str]], vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN
) -> np.ndarray:
    """Encode many token lists straight into an ``(N, max_len + 1)`` int64 array."""
    rows = [encode(t, vocab, max_len).indices for t in token_lists]
    if not rows:
        return np.zeros((0, max_len + 1), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


def mask_for_pretraining(samples, sample_frac: float = 0.15, token_frac: float = 0.20, seed: int = 0):
    """Replace a fraction of tokens in a random subset of samples with ``[UNK]``.

    Each sample is selected independently with probability ``sample_frac``;
    inside a selected sample ``ceil(token_frac * len)`` distinct positions are
    replaced. Samples are dataclasses with a ``tokens`` field; labels are kept.
    """
    if not (0.0 <= sample_frac <= 1.0 and 0.0 <= token_frac <= 1.0):
        raise ValueError("fractions must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    out = []
    for sample in samples:
        selected = rng.random() < sample_frac
        tokens = list(sample.tokens)
        if not selected or not tokens:
            out.append(sample)
            continue
        # guard against 0.2 * 15 = 3.0000000000000004 rounding up
        k = min(len(tokens), math.ceil(token_frac * len(tokens) - 1e-9))
        for pos in rng.choice(len(tokens), size=k, replace=False):
            tokens[int(pos)] = UNK
        out.append(replace(sample, tokens=tuple(tokens)))
    return out
