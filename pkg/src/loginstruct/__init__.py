"""Mine log instructions from code and use them to detect anomalous logs."""

from .detector import DecisionThreshold, Verdict, aggregate_sequence, detect, normality_score, select_threshold
from .miner import SeverityGroup, SLSample, build_sl_dataset, extract_instructions, map_severity
from .model import ModelConfig, bce_loss, build_model, hyperspherical_loss
from .preprocess import Vocabulary, build_vocabulary, encode, mask_for_pretraining, normalize_text
from .study import coverage_report, entropy_stats, extract_ngrams, ngram_entropy

__version__ = "0.1.0"
