from pathlib import Path

import numpy as np
import pytest

from loginstruct.miner import SeverityGroup, SLSample
from loginstruct.model import ModelConfig
from loginstruct.synthetic import ABNORMAL_WORDS, NORMAL_WORDS

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def src_tree() -> Path:
    return FIXTURES / "src_tree"


def make_sl(n: int, seed: int = 0) -> list[SLSample]:
    """Separable SL samples: half from the normal pool, half from the abnormal pool."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        group = SeverityGroup.NORMAL if i % 2 == 0 else SeverityGroup.ABNORMAL
        pool = NORMAL_WORDS if group is SeverityGroup.NORMAL else ABNORMAL_WORDS
        k = int(rng.integers(3, 8))
        out.append(SLSample(tuple(str(w) for w in rng.choice(pool, size=k, replace=False)), group))
    return out


# desk-scale training settings; the defaults target much larger corpora
FAST = dict(learning_rate=1e-3, batch_size=16, finetune_batch_size=32, finetune_learning_rate=1e-3,
            max_len=12, patience_epochs=3, max_epochs=20)


@pytest.fixture
def fast_config() -> ModelConfig:
    return ModelConfig(**FAST)
