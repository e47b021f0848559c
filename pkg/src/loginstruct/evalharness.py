"""Dataset adapters, chronological splits, sequence grouping and experiments.

Supported input formats:

``bgl``
    One log per line. Field 0 is ``-`` for normal lines and an alert tag
    otherwise, field 1 is a unix timestamp, the message starts at field 9
    (``message_field`` in the adapter config).
``hdfs``
    ``yymmdd HHMMSS pid LEVEL component: message`` lines plus a CSV label
    table ``BlockId,Label`` with ``Normal``/``Anomaly`` values. Every line
    carries the label of the block it mentions.
``generic``
    JSON lines with ``timestamp``, ``message`` and optional ``label`` and
    ``group`` fields.
``plain``
    One message per line; timestamps are line numbers and there are no
    labels.
"""

from __future__ import annotations

import csv
import json
import os
import re
import time
from calendar import timegm
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Callable, Sequence

import numpy as np

from .metrics import MetricsReport, compute_metrics

__all__ = [
    "AdapterConfig",
    "LabeledLog",
    "MetricsReport",
    "chronological_split",
    "compute_metrics",
    "group_by_key",
    "group_by_time_window",
    "load_dataset",
    "read_logs",
    "sequence_labels",
]

HDFS_BLOCK_RE = r"blk_-?[0-9]+"
BGL_WINDOW_SECONDS = 6 * 3600
FORMATS = ("bgl", "hdfs", "generic", "plain")


@dataclass(frozen=True)
class LabeledLog:
    timestamp: int
    message: str
    label: int | None = None
    group_key: str | None = None


@dataclass
class AdapterConfig:
    format: str
    path: str
    label_path: str | None = None
    group_key_regex: str | None = None
    window_seconds: int | None = None
    train_frac: float = 0.8
    message_field: int | None = None
    encoding: str = "utf-8"

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValueError(f"unknown dataset format {self.format!r}; expected one of {FORMATS}")
        if self.format == "hdfs" and self.group_key_regex is None:
            self.group_key_regex = HDFS_BLOCK_RE

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "AdapterConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        for key in ("path", "label_path"):
            if data.get(key) and not os.path.isabs(data[key]):
                data[key] = os.path.join(base, data[key])
        return cls(**data)


def _attach_keys(logs: list[LabeledLog], pattern: str | None) -> list[LabeledLog]:
    if not pattern:
        return logs
    rx = re.compile(pattern)
    out = []
    for lg in logs:
        m = rx.search(lg.message)
        out.append(replace(lg, group_key=m.group(0) if m else lg.group_key))
    return out


def _read_bgl(cfg: AdapterConfig) -> list[LabeledLog]:
    msg_field = 9 if cfg.message_field is None else cfg.message_field
    logs = []
    with open(cfg.path, encoding=cfg.encoding, errors="replace") as fh:
        for line in fh:
            parts = line.rstrip("\n").split()
            if len(parts) < 2:
                continue
            logs.append(
                LabeledLog(int(parts[1]), " ".join(parts[msg_field:]), 0 if parts[0] == "-" else 1)
            )
    return logs


def _read_hdfs_labels(path: str) -> dict[str, int]:
    labels = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            labels[row["BlockId"].strip()] = 1 if row["Label"].strip().lower() == "anomaly" else 0
    return labels


def _read_hdfs(cfg: AdapterConfig) -> list[LabeledLog]:
    msg_field = 5 if cfg.message_field is None else cfg.message_field
    labels = _read_hdfs_labels(cfg.label_path) if cfg.label_path else None
    block_rx = re.compile(cfg.group_key_regex or HDFS_BLOCK_RE)
    logs = []
    with open(cfg.path, encoding=cfg.encoding, errors="replace") as fh:
        for line in fh:
            parts = line.rstrip("\n").split()
            if len(parts) < msg_field:
                continue
            ts = timegm(datetime.strptime(f"{parts[0]} {parts[1]}", "%y%m%d %H%M%S").timetuple())
            message = " ".join(parts[msg_field:])
            m = block_rx.search(message)
            key = m.group(0) if m else None
            label = None
            if labels is not None:
                if key is None or key not in labels:
                    raise ValueError(f"no label for line {line.strip()!r}")
                label = labels[key]
            logs.append(LabeledLog(ts, message, label, key))
    return logs


def _read_generic(cfg: AdapterConfig) -> list[LabeledLog]:
    logs = []
    with open(cfg.path, encoding=cfg.encoding) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            label = rec.get("label")
            logs.append(
                LabeledLog(int(rec["timestamp"]), rec["message"], None if label is None else int(label), rec.get("group"))
            )
    return logs


def _read_plain(cfg: AdapterConfig) -> list[LabeledLog]:
    with open(cfg.path, encoding=cfg.encoding, errors="replace") as fh:
        return [LabeledLog(i, line.rstrip("\n")) for i, line in enumerate(fh)]


_READERS: dict[str, Callable[[AdapterConfig], list[LabeledLog]]] = {
    "bgl": _read_bgl,
    "hdfs": _read_hdfs,
    "generic": _read_generic,
    "plain": _read_plain,
}


def load_dataset(cfg: AdapterConfig) -> list[LabeledLog]:
    """Read a dataset and sort it by timestamp (stable)."""
    logs = _READERS[cfg.format](cfg)
    if cfg.format != "hdfs":
        logs = _attach_keys(logs, cfg.group_key_regex)
    return sorted(logs, key=lambda lg: lg.timestamp)


def read_logs(path: str | os.PathLike, fmt: str = "plain", **kwargs) -> list[LabeledLog]:
    return load_dataset(AdapterConfig(format=fmt, path=str(path), **kwargs))


def chronological_split(logs: Sequence[LabeledLog], train_frac: float = 0.8):
    """First ``floor(train_frac * N)`` logs train, the rest test. No shuffling."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    cut = int(np.floor(train_frac * len(logs)))
    train, test = list(logs[:cut]), list(logs[cut:])
    if not train or not test:
        raise ValueError(f"split of {len(logs)} logs at {train_frac} leaves an empty side")
    return train, test


def group_by_key(logs: Sequence[LabeledLog]) -> "OrderedDict[str, list[int]]":
    """Map each group key to the positions of its logs, in first-seen order."""
    groups: OrderedDict[str, list[int]] = OrderedDict()
    for i, lg in enumerate(logs):
        if lg.group_key is None:
            raise ValueError(f"log {i} has no group key")
        groups.setdefault(lg.group_key, []).append(i)
    return groups


def group_by_time_window(logs: Sequence[LabeledLog], window_seconds: int = BGL_WINDOW_SECONDS) -> list[list[int]]:
    """Fixed non-overlapping windows anchored at the first timestamp.

    Returns position lists; empty windows are omitted.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    if not logs:
        return []
    t0 = logs[0].timestamp
    windows: OrderedDict[int, list[int]] = OrderedDict()
    for i, lg in enumerate(logs):
        k = (lg.timestamp - t0) // window_seconds
        if k < 0:
            raise ValueError("logs must be in time order")
        windows.setdefault(k, []).append(i)
    return [windows[k] for k in sorted(windows)]


def sequence_labels(groups, per_log: Sequence[int]) -> list[int]:
    """OR over each group's members; accepts a key map or a list of position lists."""
    members = groups.values() if isinstance(groups, dict) else groups
    return [int(any(per_log[i] for i in idx)) for idx in members]


def build_groups(logs: Sequence[LabeledLog], group_key_regex: str | None = None, window_seconds: int | None = None):
    """Return ``(group ids, position lists)`` using keys or time windows."""
    if group_key_regex is not None:
        keyed = _attach_keys(list(logs), group_key_regex)
        positions = [i for i, lg in enumerate(keyed) if lg.group_key is not None]
        groups = group_by_key([keyed[i] for i in positions])
        return list(groups), [[positions[j] for j in idx] for idx in groups.values()]
    if window_seconds is not None:
        windows = group_by_time_window(logs, window_seconds)
        ids = [f"window-{logs[w[0]].timestamp}" for w in windows]
        return ids, windows
    if all(lg.group_key is not None for lg in logs):
        groups = group_by_key(logs)
        return list(groups), list(groups.values())
    raise ValueError("sequence grouping needs a group key regex, a window size or keyed logs")


@dataclass
class ExperimentData:
    """Inputs shared by every cell of an experiment."""

    sl_samples: list
    train_logs: list[LabeledLog]
    test_logs: list[LabeledLog]
    external_abnormal: list[list[str]] | None = None
    group_key_regex: str | None = None
    window_seconds: int | None = None


def evaluate_logs(model, vocab, threshold, logs: Sequence[LabeledLog], **group_kwargs) -> dict:
    """Single-line metrics and, when grouping is possible, sequence metrics."""
    from .pipeline import score_messages
    from .detector import detect_scores

    if any(lg.label is None for lg in logs):
        raise ValueError("evaluation needs labelled logs")
    scores = score_messages(model, vocab, [lg.message for lg in logs])
    flags = detect_scores(scores, threshold).astype(int)
    truth = [lg.label for lg in logs]
    report = {"single": compute_metrics(flags, truth).to_dict(), "n_logs": len(logs)}
    try:
        _, groups = build_groups(logs, **group_kwargs)
    except ValueError:
        groups = None
    if groups:
        seq_pred = sequence_labels(groups, flags)
        seq_true = sequence_labels(groups, truth)
        report["sequence"] = compute_metrics(seq_pred, seq_true).to_dict()
        report["n_sequences"] = len(groups)
    return report


def run_label_ratio_experiment(ratios: Sequence[float], data: ExperimentData, config, pretrained=None,
                               abnormal_source: str = "sl") -> list[dict]:
    """Finetune once per abnormal fraction and evaluate on the test logs.

    ``abnormal_source`` selects the anomalous class: ``"sl"`` uses the
    abnormal SL samples, ``"external"`` uses ``data.external_abnormal``.
    """
    from .pipeline import finetune_and_calibrate, pretrain_on_sl

    if pretrained is None:
        pretrained = pretrain_on_sl(data.sl_samples, config)
    abnormal = _abnormal_source(data, abnormal_source)
    out = []
    for r in ratios:
        cfg = replace(config, abnormal_fraction=r)
        model, threshold = finetune_and_calibrate(pretrained, [lg.message for lg in data.train_logs], abnormal, cfg)
        report = evaluate_logs(model, pretrained.vocab, threshold, data.test_logs,
                               group_key_regex=data.group_key_regex, window_seconds=data.window_seconds)
        out.append({"ratio": r, "abnormal_source": abnormal_source, "threshold": threshold.a_tilde, **report})
    return out


def _abnormal_source(data: ExperimentData, source: str) -> list[list[str]]:
    from .miner import SeverityGroup

    if source == "sl":
        return [list(s.tokens) for s in data.sl_samples if s.group is SeverityGroup.ABNORMAL]
    if source == "external":
        if not data.external_abnormal:
            raise ValueError("external abnormal source requested but none supplied")
        return data.external_abnormal
    raise ValueError(f"unknown abnormal source {source!r}")


def run_sensitivity_experiment(model_sizes: Sequence[int], batch_sizes: Sequence[int], data: ExperimentData,
                               config) -> list[dict]:
    """Full model-size x batch-size grid; records F1 and train+update seconds per cell."""
    from .pipeline import finetune_and_calibrate, pretrain_on_sl

    abnormal = _abnormal_source(data, "sl")
    cells = []
    for d in model_sizes:
        for b in batch_sizes:
            cfg = replace(config, model_size=d, batch_size=b, finetune_batch_size=None)
            start = time.perf_counter()
            pretrained = pretrain_on_sl(data.sl_samples, cfg)
            model, threshold = finetune_and_calibrate(pretrained, [lg.message for lg in data.train_logs], abnormal, cfg)
            elapsed = time.perf_counter() - start
            report = evaluate_logs(model, pretrained.vocab, threshold, data.test_logs,
                                   group_key_regex=data.group_key_regex, window_seconds=data.window_seconds)
            epochs = len(pretrained.history)
            cells.append({"model_size": d, "batch_size": b, "seconds": elapsed, "pretrain_epochs": epochs,
                          "seconds_per_epoch": elapsed / max(1, epochs + cfg.finetune_epochs), **report})
    return cells
