"""Command line entry point: ``loginstruct <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import artifact as art
from .detector import Verdict, detect_scores
from .evalharness import (
    AdapterConfig,
    ExperimentData,
    build_groups,
    chronological_split,
    evaluate_logs,
    load_dataset,
    read_logs,
    run_label_ratio_experiment,
    run_sensitivity_experiment,
    sequence_labels,
)
from .miner import build_sl_dataset, mine_directory, read_sl_jsonl, write_sl_jsonl
from .model import ModelConfig
from .pipeline import abnormal_samples, finetune_and_calibrate, pretrain_on_sl, score_messages
from .preprocess import normalize_text
from .study import DEFAULT_MIN_COUNT, DEFAULT_SENTIMENT_TAU, LexiconScorer, study_corpus, write_records_tsv
from .training import PretrainResult

log = logging.getLogger("loginstruct")


class CommandError(Exception):
    pass


def _config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model config (override --config)")
    group.add_argument("--config", type=Path, help="JSON file with model config fields")
    for f in dataclasses.fields(ModelConfig):
        kind = {"int": int, "float": float, "str": str, "bool": _bool}.get(
            str(f.type).split(" |")[0].replace("'", ""), str
        )
        group.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", type=kind, default=None,
                           metavar=f.name.upper())


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _resolve_config(args, base: ModelConfig | None = None) -> ModelConfig:
    data = (base or ModelConfig()).to_dict()
    if getattr(args, "config", None):
        data.update(json.loads(args.config.read_text(encoding="utf-8")))
    for f in dataclasses.fields(ModelConfig):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            data[f.name] = value
    return ModelConfig.from_dict(data)


def _write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_sl(path: Path):
    try:
        samples = read_sl_jsonl(path)
    except OSError as exc:
        raise CommandError(f"cannot read SL file {path}: {exc}") from exc
    if not samples:
        raise CommandError(f"SL file {path} holds no samples")
    return samples


def _load_artifact(path: Path) -> art.Artifact:
    try:
        return art.load_artifact(path)
    except art.ArtifactError as exc:
        raise CommandError(str(exc)) from exc


def cmd_mine(args) -> int:
    src = Path(args.src_dir)
    if not src.is_dir():
        raise CommandError(f"source directory {src} is not readable")
    instructions = mine_directory(src)
    samples = build_sl_dataset(instructions)
    if not samples:
        raise CommandError(f"no usable log instructions found under {src}")
    write_sl_jsonl(samples, args.out)
    counts = Counter(s.group.value for s in samples)
    print(f"instructions={len(instructions)} samples={len(samples)} "
          f"normal={counts.get('normal', 0)} abnormal={counts.get('abnormal', 0)}")
    return 0


def cmd_study(args) -> int:
    samples = _load_sl(args.sl_file)
    scorer = LexiconScorer.from_file(args.lexicon) if args.lexicon else None
    report, records = study_corpus(samples, args.sizes, args.min_count, scorer, args.tau)
    _write_json(report, args.out)
    if args.records:
        write_records_tsv(records, args.records)
    pooled = report["pooled"]["entropy"]
    print(f"ngrams={report['pooled']['records']} median_entropy={pooled['median'] if pooled else 'n/a'}")
    return 0


def cmd_pretrain(args) -> int:
    samples = _load_sl(args.sl_file)
    config = _resolve_config(args)
    result = pretrain_on_sl(samples, config)
    extra = {"pretrain": {"best_epoch": result.best_epoch, "epochs_run": len(result.history),
                          "history": result.history}}
    art.save_artifact(args.out, art.Artifact(result.model, result.vocab, config, art.STAGE_PRETRAINED, None, extra))
    best = result.history[result.best_epoch - 1]
    print(f"pretrained epochs={len(result.history)} best_epoch={result.best_epoch} "
          f"val_loss={best['val_loss']:.5f} val_accuracy={best['val_accuracy']:.4f}")
    return 0


def _target_messages(args) -> list[str]:
    if args.dataset_config:
        cfg = AdapterConfig.from_file(args.dataset_config)
        train, _ = chronological_split(load_dataset(cfg), cfg.train_frac)
        return [lg.message for lg in train]
    return [lg.message for lg in read_logs(args.target, args.format)]


def cmd_finetune(args) -> int:
    loaded = _load_artifact(args.artifact)
    config = _resolve_config(args, loaded.config)
    messages = _target_messages(args)
    if args.abnormal_file:
        abnormal = [normalize_text(lg.message) for lg in read_logs(args.abnormal_file, "plain")]
        abnormal = [t for t in abnormal if t]
    else:
        abnormal = abnormal_samples(_load_sl(args.sl_file))
    if not abnormal:
        raise CommandError("no abnormal samples available for finetuning")
    pretrained = PretrainResult(loaded.model, loaded.vocab)
    model, threshold = finetune_and_calibrate(pretrained, messages, abnormal, config)
    extra = dict(loaded.extra)
    extra["finetune"] = {"target_logs": len(messages), "abnormal_samples": len(abnormal)}
    art.save_artifact(args.out, art.Artifact(model, loaded.vocab, config, art.STAGE_FINETUNED, threshold, extra))
    print(f"finetuned threshold={threshold.a_tilde:.6g} {threshold.criterion}={threshold.value:.4f}")
    return 0


def cmd_detect(args) -> int:
    loaded = _load_artifact(args.artifact)
    threshold = loaded.require_threshold()
    logs = read_logs(args.log_file, args.format)
    scores = score_messages(loaded.model, loaded.vocab, [lg.message for lg in logs])
    flags = detect_scores(scores, threshold)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for i, (s, f) in enumerate(zip(scores, flags)):
            verdict = Verdict.ANOMALOUS if f else Verdict.NORMAL
            fh.write(json.dumps({"line_no": i, "score": float(s), "verdict": verdict.value}) + "\n")
    n_seq = 0
    if args.group_key_regex or args.window_seconds:
        ids, groups = build_groups(logs, args.group_key_regex, args.window_seconds)
        seq_out = args.sequence_out or args.out.with_name(args.out.stem + ".sequences.jsonl")
        with open(seq_out, "w", encoding="utf-8", newline="\n") as fh:
            for gid, verdict in zip(ids, sequence_labels(groups, flags.astype(int))):
                value = Verdict.ANOMALOUS.value if verdict else Verdict.NORMAL.value
                fh.write(json.dumps({"group_id": gid, "verdict": value}) + "\n")
        n_seq = len(groups)
    print(f"logs={len(logs)} anomalous={int(flags.sum())}" + (f" sequences={n_seq}" if n_seq else ""))
    return 0


def _dataset_split(path: Path):
    cfg = AdapterConfig.from_file(path)
    logs = load_dataset(cfg)
    train, test = chronological_split(logs, cfg.train_frac)
    return cfg, train, test


def cmd_evaluate(args) -> int:
    loaded = _load_artifact(args.artifact)
    threshold = loaded.require_threshold()
    cfg, _, test = _dataset_split(args.dataset_config)
    report = evaluate_logs(loaded.model, loaded.vocab, threshold, test,
                           group_key_regex=cfg.group_key_regex, window_seconds=cfg.window_seconds)
    report["threshold"] = threshold.a_tilde
    _write_json(report, args.out)
    line = f"single f1={report['single']['f1']:.4f}"
    if "sequence" in report:
        line += f" sequence f1={report['sequence']['f1']:.4f}"
    print(line)
    return 0


def _experiment_data(args) -> ExperimentData:
    cfg, train, test = _dataset_split(args.dataset_config)
    external = None
    if getattr(args, "external_abnormal", None):
        external = [t for t in (normalize_text(lg.message) for lg in read_logs(args.external_abnormal)) if t]
    return ExperimentData(_load_sl(args.sl_file), train, test, external, cfg.group_key_regex, cfg.window_seconds)


def cmd_ratio_exp(args) -> int:
    data = _experiment_data(args)
    config = _resolve_config(args)
    pretrained = None
    if args.artifact:
        loaded = _load_artifact(args.artifact)
        pretrained = PretrainResult(loaded.model, loaded.vocab)
    rows = run_label_ratio_experiment(args.ratios, data, config, pretrained, args.abnormal_source)
    _write_json({"experiment": "label_ratio", "results": rows}, args.out)
    for row in rows:
        print(f"ratio={row['ratio']} f1={row['single']['f1']:.4f}")
    return 0


def cmd_sensitivity_exp(args) -> int:
    data = _experiment_data(args)
    config = _resolve_config(args)
    cells = run_sensitivity_experiment(args.model_sizes, args.batch_sizes, data, config)
    _write_json({"experiment": "sensitivity", "results": cells}, args.out)
    for c in cells:
        print(f"d={c['model_size']} batch={c['batch_size']} f1={c['single']['f1']:.4f} seconds={c['seconds']:.2f}")
    return 0


def cmd_synth(args) -> int:
    from .synthetic import make_corpus

    corpus = make_corpus(args.out_dir, args.seed, args.sl_samples, args.logs, args.anomaly_rate)
    _write_json({"format": "generic", "path": "target.jsonl", "group_key_regex": r"blk_-?[0-9]+",
                 "train_frac": 0.8}, Path(args.out_dir) / "dataset.json")
    print(f"wrote {corpus.source_root} and {len(corpus.target_logs)} target logs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loginstruct", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="extract log instructions into an SL dataset")
    p.add_argument("src_dir", type=Path)
    p.add_argument("out", type=Path)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("study", help="n-gram entropy and sentiment study of an SL dataset")
    p.add_argument("sl_file", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--tau", type=float, default=DEFAULT_SENTIMENT_TAU)
    p.add_argument("--lexicon", type=Path, help="word polarity file replacing the shipped lexicon")
    p.add_argument("--records", type=Path, help="also dump all n-gram records as TSV")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("pretrain", help="pretrain the encoder on SL data")
    p.add_argument("sl_file", type=Path)
    p.add_argument("out", type=Path)
    _config_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="finetune a pretrained artifact and pick the threshold")
    p.add_argument("artifact", type=Path)
    p.add_argument("sl_file", type=Path, nargs="?")
    p.add_argument("out", type=Path)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", type=Path, help="target-system log file")
    src.add_argument("--dataset-config", type=Path, help="use the training split of this dataset")
    p.add_argument("--format", default="plain", choices=["plain", "generic", "bgl", "hdfs"])
    p.add_argument("--abnormal-file", type=Path, help="plain file of abnormal messages replacing SL abnormal")
    _config_flags(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("detect", help="score logs with a finetuned artifact")
    p.add_argument("artifact", type=Path)
    p.add_argument("log_file", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--format", default="plain", choices=["plain", "generic", "bgl", "hdfs"])
    p.add_argument("--group-key-regex")
    p.add_argument("--window-seconds", type=int)
    p.add_argument("--sequence-out", type=Path)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="metrics on the test split of a labelled dataset")
    p.add_argument("artifact", type=Path)
    p.add_argument("dataset_config", type=Path)
    p.add_argument("out", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ratio-exp", help="abnormal-fraction experiment")
    p.add_argument("sl_file", type=Path)
    p.add_argument("dataset_config", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--ratios", type=float, nargs="+", default=[0.01, 0.05, 0.10, 0.20])
    p.add_argument("--artifact", type=Path, help="reuse this pretrained artifact")
    p.add_argument("--abnormal-source", choices=["sl", "external"], default="sl")
    p.add_argument("--external-abnormal", type=Path, help="plain file of externally labelled anomalies")
    _config_flags(p)
    p.set_defaults(func=cmd_ratio_exp)

    p = sub.add_parser("sensitivity-exp", help="model-size x batch-size grid")
    p.add_argument("sl_file", type=Path)
    p.add_argument("dataset_config", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--model-sizes", type=int, nargs="+", default=[16, 64, 256])
    p.add_argument("--batch-sizes", type=int, nargs="+", default=[32, 64, 256, 512])
    _config_flags(p)
    p.set_defaults(func=cmd_sensitivity_exp)

    p = sub.add_parser("synth", help="write a synthetic source tree and target log")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sl-samples", type=int, default=1000)
    p.add_argument("--logs", type=int, default=5000)
    p.add_argument("--anomaly-rate", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "finetune" and not args.sl_file and not args.abnormal_file:
        parser.error("finetune needs an SL file or --abnormal-file")
    try:
        return args.func(args)
    except (CommandError, art.ArtifactError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
