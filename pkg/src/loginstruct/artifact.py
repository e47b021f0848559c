"""On-disk model artifact: config.json, vocab.json, params.manifest, params.bin.

``params.bin`` is the concatenation of every named tensor as row-major
little-endian float32; ``params.manifest`` (JSON) lists name, shape, byte
offset and byte length for each one, in state-dict order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .detector import DecisionThreshold
from .model import LogEncoder, ModelConfig
from .preprocess import Vocabulary

FORMAT_VERSION = 1
STAGE_PRETRAINED = "pretrained"
STAGE_FINETUNED = "finetuned"


class ArtifactError(Exception):
    """Raised for unreadable, mismatched or wrong-stage artifacts."""


@dataclass
class Artifact:
    model: LogEncoder
    vocab: Vocabulary
    config: ModelConfig
    stage: str
    threshold: DecisionThreshold | None = None
    extra: dict = field(default_factory=dict)

    def require_threshold(self) -> DecisionThreshold:
        if self.threshold is None:
            raise ArtifactError(
                f"artifact has no threshold (stage {self.stage!r}); run finetune on it first"
            )
        return self.threshold


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def tensors_to_bytes(state: dict[str, torch.Tensor]) -> tuple[list[dict], bytes]:
    manifest, chunks, offset = [], [], 0
    for name, tensor in state.items():
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy().astype("<f4"))
        payload = arr.tobytes(order="C")
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(payload)})
        chunks.append(payload)
        offset += len(payload)
    return manifest, b"".join(chunks)


def bytes_to_tensors(manifest: list[dict], blob: bytes) -> dict[str, torch.Tensor]:
    state = {}
    for entry in manifest:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(blob):
            raise ArtifactError(f"params.bin truncated at tensor {entry['name']}")
        arr = np.frombuffer(blob, dtype="<f4", count=n // 4, offset=start).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float32))
    return state


def save_artifact(path: str | os.PathLike, artifact: Artifact) -> Path:
    if (artifact.stage == STAGE_FINETUNED) != (artifact.threshold is not None):
        raise ArtifactError("a threshold is stored exactly when the artifact is finetuned")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    manifest, blob = tensors_to_bytes(artifact.model.state_dict())
    config = {
        "format_version": FORMAT_VERSION,
        "stage": artifact.stage,
        "vocab_size": artifact.vocab.size,
        "model": artifact.config.to_dict(),
        "threshold": None
        if artifact.threshold is None
        else {
            "a_tilde": artifact.threshold.a_tilde,
            "criterion": artifact.threshold.criterion,
            "value": artifact.threshold.value,
        },
        "extra": artifact.extra,
    }
    _dump_json(config, out / "config.json")
    _dump_json(artifact.vocab.to_json(), out / "vocab.json")
    _dump_json({"format_version": FORMAT_VERSION, "dtype": "float32", "byte_order": "little",
                "tensors": manifest}, out / "params.manifest")
    (out / "params.bin").write_bytes(blob)
    return out


def load_artifact(path: str | os.PathLike) -> Artifact:
    src = Path(path)
    try:
        config = json.loads((src / "config.json").read_text(encoding="utf-8"))
        vocab_data = json.loads((src / "vocab.json").read_text(encoding="utf-8"))
        manifest = json.loads((src / "params.manifest").read_text(encoding="utf-8"))
        blob = (src / "params.bin").read_bytes()
    except FileNotFoundError as exc:
        raise ArtifactError(f"incomplete artifact at {src}: missing {Path(exc.filename).name}") from exc
    for name, doc in (("config.json", config), ("params.manifest", manifest)):
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise ArtifactError(f"{name} has format version {version}, expected {FORMAT_VERSION}")
    model_cfg = ModelConfig.from_dict(config["model"])
    vocab = Vocabulary.from_json(vocab_data)
    model = LogEncoder(vocab.size, model_cfg)
    try:
        model.load_state_dict(bytes_to_tensors(manifest["tensors"], blob))
    except RuntimeError as exc:
        raise ArtifactError(f"parameters do not match the stored config: {exc}") from exc
    model.eval()
    thr = config.get("threshold")
    threshold = None if thr is None else DecisionThreshold(thr["a_tilde"], thr["criterion"], thr.get("value"))
    return Artifact(model, vocab, model_cfg, config["stage"], threshold, config.get("extra", {}))
