"""Generated corpora for desk-scale checks.

Normal and abnormal events use disjoint word pools. The generator writes a
small multi-language source tree full of log calls (the SL side) and a
time-ordered target log with block ids and a few injected anomalies.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evalharness import LabeledLog

NORMAL_WORDS = (
    "started completed successfully connected received accepted registered allocated finished "
    "initialized updated loaded saved created verified ready listening scheduled processing "
    "replicated committed stored synchronized granted established opened served joined "
    "acknowledged approved enabled restored recovered healthy running stable passed confirmed "
    "welcome starting serving transferred"
).split()

ABNORMAL_WORDS = (
    "failed error exception timeout refused corrupted crashed unreachable denied fatal panic "
    "overflow lost aborted invalid missing unable broken rejected interrupted mismatch failure "
    "unavailable terminated killed violation dropped stalled leaked halted deadlock malformed "
    "illegal forbidden expired disconnected faulty unexpected severe wrong"
).split()

# words only the target system uses (never seen in mined code)
SYSTEM_WORDS = (
    "packetresponder datanode namesystem replica blockmap receiver writer serverthread "
    "dataxceiver volume checksum heartbeat quorum shard partition scrubber ledger"
).split()

_PY = "logger.{level}({text!r}{args})"
_JAVA = "LOG.{level}({text}{args});"
_CPP = "spdlog::{level}({text}{args});"


@dataclass
class SyntheticCorpus:
    target_logs: list[LabeledLog]
    source_root: Path | None = None
    counts: dict | None = None


def _phrase(rng: np.random.Generator, pool, lo: int, hi: int) -> list[str]:
    return list(rng.choice(pool, size=int(rng.integers(lo, hi + 1)), replace=False))


def _sl_text(rng: np.random.Generator, words: list[str]) -> str:
    words = list(words)
    words[0] = words[0].capitalize()
    # sprinkle placeholders the miner has to strip
    for ph in ("%s", "{}", "%d"):
        if rng.random() < 0.4:
            words.insert(int(rng.integers(1, len(words) + 1)), ph)
    return " ".join(words)


def write_source_tree(root: str | os.PathLike, n_normal: int = 500, n_abnormal: int = 500,
                      seed: int = 0, files: int = 20) -> dict:
    """Write ``files`` source files holding the requested number of log calls.

    Normal calls use level info, abnormal ones error/fatal/critical. Extra
    debug and warning calls are mixed in and must be ignored by the miner.
    Returns the counts written.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    calls = [("info", _sl_text(rng, _phrase(rng, NORMAL_WORDS, 3, 7))) for _ in range(n_normal)]
    abnormal_levels = ("error", "fatal", "critical")
    calls += [
        (abnormal_levels[int(rng.integers(3))], _sl_text(rng, _phrase(rng, ABNORMAL_WORDS, 3, 7)))
        for _ in range(n_abnormal)
    ]
    n_noise = max(1, (n_normal + n_abnormal) // 10)
    calls += [("debug" if i % 2 else "warning", _sl_text(rng, _phrase(rng, SYSTEM_WORDS, 3, 5))) for i in range(n_noise)]
    order = rng.permutation(len(calls))
    per_file = np.array_split(order, files)
    langs = ("py", "java", "cpp")
    for f, idx in enumerate(per_file):
        ext = langs[f % 3]
        lines = []
        for j, k in enumerate(idx):
            level, text = calls[int(k)]
            args = ", value" if "%" in text or "{}" in text else ""
            if ext == "py":
                level = "warning" if level == "warning" else level
                lines.append(f"def handler_{j}(value):")
                lines.append("    " + _PY.format(level=level, text=text, args=args))
                lines.append("")
            elif ext == "java":
                level = "warn" if level == "warning" else level
                lines.append(f"    void handler{j}(int value) {{ " + _JAVA.format(level=level, text=json.dumps(text), args=args) + " }")
            else:
                level = "warn" if level == "warning" else level
                lines.append(f"void handler_{j}(int value) {{ " + _CPP.format(level=level, text=json.dumps(text), args=args) + " }")
        body = "\n".join(lines) + "\n"
        if ext == "java":
            body = f"class Module{f} {{\n{body}}}\n"
        (root / f"module_{f:03d}.{ext}").write_text(body, encoding="utf-8")
    return {"normal": n_normal, "abnormal": n_abnormal, "noise": n_noise}


def _templates(rng: np.random.Generator, pool, n: int, system_words: bool) -> list[list[str]]:
    out = []
    for _ in range(n):
        words = _phrase(rng, pool, 2, 4)
        words += _phrase(rng, SYSTEM_WORDS, 1, 3) if system_words else _phrase(rng, pool, 1, 2)
        out.append([str(w) for w in rng.permutation(words)])
    return out


def _render(rng: np.random.Generator, words: list[str], block: str) -> str:
    parts = list(words)
    parts.insert(int(rng.integers(0, len(parts) + 1)), block)
    if rng.random() < 0.5:
        parts.append(f"{int(rng.integers(1, 255))}.{int(rng.integers(0, 255))}.0.{int(rng.integers(1, 255))}:50010")
    if rng.random() < 0.3:
        parts.append(f"/data/disk{int(rng.integers(1, 9))}/current/{block}")
    if rng.random() < 0.5:
        parts.append(str(int(rng.integers(0, 1 << 26))))
    return " ".join(parts)


def generate_target_logs(n_logs: int = 5000, anomaly_rate: float = 0.02, seed: int = 0,
                         n_normal_templates: int = 25, n_anomaly_templates: int = 8,
                         block_size: tuple[int, int] = (5, 15)) -> list[LabeledLog]:
    """Time-ordered target logs; each mentions a block id that is also its group key.

    Normal templates mix normal words with target-only system words;
    anomaly templates use abnormal words only, so the two stay disjoint.
    """
    rng = np.random.default_rng(seed)
    normal_t = _templates(rng, NORMAL_WORDS, n_normal_templates, system_words=True)
    anomaly_t = _templates(rng, ABNORMAL_WORDS, n_anomaly_templates, system_words=False)
    n_anom = int(round(anomaly_rate * n_logs))
    anomalous = set(int(i) for i in rng.choice(n_logs, size=n_anom, replace=False))
    t = 1_200_000_000
    active: list[list] = []
    next_block = 0
    logs = []
    for i in range(n_logs):
        while len(active) < 5:
            sign = "-" if rng.random() < 0.5 else ""
            active.append([f"blk_{sign}{10**15 + 7919 * next_block}", int(rng.integers(*block_size))])
            next_block += 1
        slot = int(rng.integers(len(active)))
        block = active[slot][0]
        active[slot][1] -= 1
        if active[slot][1] <= 0:
            active.pop(slot)
        if i in anomalous:
            words, label = anomaly_t[int(rng.integers(len(anomaly_t)))], 1
        else:
            words, label = normal_t[int(rng.integers(len(normal_t)))], 0
        t += int(rng.integers(0, 30))
        logs.append(LabeledLog(t, _render(rng, words, block), label, block))
    return logs


def write_generic(logs, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for lg in logs:
            rec = {"timestamp": lg.timestamp, "message": lg.message}
            if lg.label is not None:
                rec["label"] = lg.label
            if lg.group_key is not None:
                rec["group"] = lg.group_key
            fh.write(json.dumps(rec) + "\n")


def make_corpus(workdir: str | os.PathLike, seed: int = 0, n_sl: int = 1000, n_logs: int = 5000,
                anomaly_rate: float = 0.02) -> SyntheticCorpus:
    """Write the source tree and the target log file under ``workdir``."""
    workdir = Path(workdir)
    counts = write_source_tree(workdir / "src", n_sl // 2, n_sl - n_sl // 2, seed=seed)
    logs = generate_target_logs(n_logs, anomaly_rate, seed=seed + 1)
    write_generic(logs, workdir / "target.jsonl")
    return SyntheticCorpus(logs, workdir / "src", counts)
