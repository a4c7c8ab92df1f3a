"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 configuration/prerequisite error,
3 runtime failure. ``--seed`` determines all stochastic behavior.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config file


def load_config_file(path) -> dict:
    """Flat key = value config with one section per module."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    merged = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            merged[key] = value
    return merged


_TRAIN_KEYS = {
    "epochs": int, "batch_size": int, "lr": float, "beta1": float,
    "beta2": float, "weight_decay": float, "seed": int, "hard_ratio": float,
    "max_steps": int, "log_every": int, "checkpoint_every": int,
}
_MODEL_KEYS = {
    "vocab_size": int, "n_mels": int, "text_dim": int, "style_dim": int,
    "decoder_wide": int, "decoder_narrow": int, "residual_dim": int,
    "style_enc_base": int, "style_enc_max": int, "aligner_dim": int,
    "pitch_dim": int, "prosody_dim": int,
}


def _build_train_config(args, vocab_size: int):
    from . import train
    from .nets import ModelConfig, StyleInjection

    overrides = load_config_file(args.config) if args.config else {}
    kwargs = {}
    for key, cast in _TRAIN_KEYS.items():
        if key in overrides:
            kwargs[key] = cast(overrides[key])
    model_kwargs = {
        k: cast(overrides[k]) for k, cast in _MODEL_KEYS.items() if k in overrides
    }
    model_kwargs.setdefault("vocab_size", vocab_size)
    toy = overrides.get("toy", "true").lower() in ("1", "true", "yes")
    if toy:
        model = ModelConfig.toy(**model_kwargs)
    else:
        model = ModelConfig(**model_kwargs)

    style_mode = getattr(args, "style_mode", None) or overrides.get("style_mode")
    if style_mode:
        model.style_injection_mode = StyleInjection(style_mode)
    if getattr(args, "no_discriminator", False):
        model.use_discriminator = False
    if getattr(args, "no_residual", False):
        model.use_residual_features = False

    cfg = train.TrainConfig(model=model, **kwargs)
    for attr in ("seed", "epochs", "batch_size", "max_steps", "hard_ratio"):
        if getattr(args, attr, None) is not None:
            setattr(cfg, attr, getattr(args, attr))
    cfg.use_s2s = not getattr(args, "no_s2s", False)
    cfg.use_mono = not getattr(args, "no_mono", False)
    cfg.use_pitch_extractor = not getattr(args, "no_pitch_extractor", False)
    cfg.use_pretrained_aligner = not getattr(args, "no_pretrained_aligner", False)
    cfg.use_augmentation = not getattr(args, "no_augmentation", False)
    return cfg


# ---------------------------------------------------------------------------
# Shared helpers


def _require_file(path, what: str, exit_configish: bool = False):
    if path is None or not Path(path).exists():
        exc = ConfigError if exit_configish else UsageError
        raise exc(f"missing {what}: {path}")
    return Path(path)


def _require_checkpoint(path, what: str):
    from . import checkpoint

    if path is None:
        raise ConfigError(f"missing prerequisite checkpoint: {what}")
    try:
        return checkpoint.load_manifest(path)
    except checkpoint.CheckpointError as exc:
        raise ConfigError(f"cannot load {what} checkpoint at {path}: {exc}") from exc


def _load_models(ckpt_dir):
    from . import checkpoint, train
    from .nets import ModelConfig

    manifest = _require_checkpoint(ckpt_dir, "model")
    config = ModelConfig.from_dict(manifest["config"])
    models = train.Models.build(config, seed=int(manifest.get("seed") or 0))
    checkpoint.load_modules(
        manifest, {n: getattr(models, n) for n in manifest["modules"]}
    )
    for module in models.as_dict().values():
        module.eval()
    return models, manifest


def _load_symbols(args, ckpt_dir) -> dict[str, int]:
    if getattr(args, "symbols", None):
        return json.loads(Path(args.symbols).read_text())
    candidate = Path(ckpt_dir).parent / "symbols.json"
    if candidate.exists():
        return json.loads(candidate.read_text())
    raise ConfigError("no symbol table: pass --symbols or keep symbols.json "
                      "next to the checkpoint directory")


def _parse_ids(args, table) -> np.ndarray:
    from . import corpus

    ids = getattr(args, "text_ids", None)
    text = getattr(args, "text", None)
    if ids:
        return np.array([int(x) for x in ids.split(",")], dtype=np.int64)
    if text:
        return corpus.encode_transcript(text, table)
    raise UsageError("provide --text-ids or --text")


def _load_reference_mel(path):
    from . import dsp, formats

    path = Path(path)
    if path.suffix == ".mel":
        values = formats.read_mel1(path)
        return dsp.MelSpectrogram(
            values=values, n_mels=values.shape[0],
            hop_length=dsp.DEFAULT_HOP, sample_rate=dsp.DEFAULT_SAMPLE_RATE,
        )
    clip = dsp.load_audio(path, target_rate=dsp.DEFAULT_SAMPLE_RATE)
    return dsp.mel_spectrogram(clip)


def _write_outputs(mel, out_path, wav_path):
    from . import dsp, formats

    formats.write_mel1(out_path, mel.values)
    if wav_path:
        clip = dsp.griffin_lim_invert(mel)
        dsp.save_audio(wav_path, clip)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_prepare(args) -> int:
    from . import corpus

    manifest = corpus.load_manifest(_require_file(args.manifest, "manifest"))
    result = corpus.prepare_cache(manifest, args.cache_dir)
    print(f"prepared {result.computed} computed, {result.skipped} unchanged")
    if result.failures:
        report = Path(args.cache_dir) / "failures.txt"
        report.write_text(
            "".join(f"{p}\t{msg}\n" for p, msg in result.failures)
        )
        print(f"{len(result.failures)} failures listed in {report}",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_train(args, stage: str) -> int:
    from . import corpus, train

    manifest_path = _require_file(args.manifest, "manifest")
    manifest = corpus.load_manifest(manifest_path)
    vocab = len(manifest.symbol_table()) + 1
    config = _build_train_config(args, vocab)

    init = []
    if stage == train.STAGE1:
        if config.use_pretrained_aligner:
            _require_checkpoint(args.aligner_ckpt, "aligner pre-training")
            init.append(args.aligner_ckpt)
        if config.use_pitch_extractor and args.pitch_ckpt is not None:
            _require_checkpoint(args.pitch_ckpt, "pitch-extractor pre-training")
            init.append(args.pitch_ckpt)
        elif config.use_pitch_extractor:
            raise ConfigError(
                "missing prerequisite checkpoint: pitch-extractor pre-training"
            )
    elif stage == train.STAGE2:
        _require_checkpoint(args.stage1_ckpt, "stage-1 training")
        init.append(args.stage1_ckpt)

    final = train.run_training(
        config,
        manifest_path,
        stage,
        args.out,
        cache_dir=args.cache_dir,
        init_checkpoints=init,
        resume_from=args.resume,
    )
    print(f"checkpoint written: {final}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    from . import synth

    models, manifest = _load_models(args.checkpoint)
    if "predictor" not in manifest["modules"]:
        raise ConfigError("checkpoint lacks the predictor module; "
                          "synthesis needs a stage-2 checkpoint")
    table = _load_symbols(args, args.checkpoint)
    ids = _parse_ids(args, table)
    reference = _load_reference_mel(_require_file(args.reference, "reference"))
    req = synth.SynthesisRequest(
        ids=ids,
        reference_mel=reference,
        duration_scale=args.duration_scale,
        pitch_offset_hz=args.pitch_shift,
        pitch_scale=args.pitch_scale,
        energy_offset=args.energy_offset,
    )
    mel, durations, _ = synth.synthesize(req, models)
    _write_outputs(mel, args.out, args.wav)
    print(f"synthesized {mel.n_frames} frames "
          f"({len(durations)} symbols) -> {args.out}")
    return EXIT_OK


def cmd_convert(args) -> int:
    from . import synth

    models, _ = _load_models(args.checkpoint)
    table = _load_symbols(args, args.checkpoint)
    if not args.source_ids and not args.source_text:
        raise UsageError("provide --source-ids or --source-text")
    args.text_ids, args.text = args.source_ids, args.source_text
    ids = _parse_ids(args, table)
    source = _load_reference_mel(_require_file(args.source, "source audio"))
    target = _load_reference_mel(_require_file(args.target, "target audio"))
    mel = synth.voice_convert(source, ids, target, models)
    _write_outputs(mel, args.out, args.wav)
    print(f"converted {mel.n_frames} frames -> {args.out}")
    return EXIT_OK


def cmd_eval_correlations(args) -> int:
    from . import evalsuite

    pairs_file = _require_file(args.pairs, "pairs file")
    pairs = []
    for line in pairs_file.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            ref, syn = line.split("|")
        except ValueError:
            raise UsageError(f"bad pairs line (want 'ref|syn'): {line!r}")
        base = pairs_file.parent
        pairs.append(
            (_load_reference_or_clip(base / ref), _load_reference_or_clip(base / syn))
        )
    report = evalsuite.correlation_report(pairs)
    Path(args.out).write_text(report.to_csv())
    summary = ",".join(
        f"{name}={report.correlations[name]:.4f}"
        for name in evalsuite.FEATURE_NAMES
    )
    print(summary)
    return EXIT_OK


def _load_reference_or_clip(path):
    from . import dsp

    path = Path(path)
    if not path.exists():
        raise UsageError(f"missing file: {path}")
    if path.suffix == ".mel":
        return _load_reference_mel(path)
    return dsp.load_audio(path, target_rate=dsp.DEFAULT_SAMPLE_RATE)


def cmd_eval_styles(args) -> int:
    from . import evalsuite, formats

    style_file = _require_file(args.styles, "style-vector file")
    records = formats.read_sty1(style_file)
    if args.labels:
        label_map = dict(
            line.split("|")
            for line in Path(args.labels).read_text().splitlines()
            if line.strip()
        )
        labels = [label_map[utt_id] for utt_id, _ in records]
    else:
        labels = [utt_id.split("_")[0] for utt_id, _ in records]
    vectors = np.stack([vec for _, vec in records])
    accuracy = evalsuite.style_separability(vectors, labels)
    print(f"separability={accuracy:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="styletts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="extract mel/pitch/energy cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache-dir", required=True)
    p.set_defaults(fn=cmd_prepare)

    def add_train_args(p, stage):
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--cache-dir", default=None)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--max-steps", type=int, default=None)
        p.add_argument("--resume", default=None)
        if stage in ("STAGE1", "STAGE2"):
            p.add_argument("--hard-ratio", type=float, default=None)
            p.add_argument("--style-mode",
                           choices=["adain", "adaln", "concat", "in"])
            p.add_argument("--no-discriminator", action="store_true")
            p.add_argument("--no-residual", action="store_true")
            p.add_argument("--no-s2s", action="store_true")
            p.add_argument("--no-mono", action="store_true")
            p.add_argument("--no-pitch-extractor", action="store_true")
            p.add_argument("--no-pretrained-aligner", action="store_true")
            p.add_argument("--no-augmentation", action="store_true")
        if stage == "STAGE1":
            p.add_argument("--aligner-ckpt", default=None)
            p.add_argument("--pitch-ckpt", default=None)
        if stage == "STAGE2":
            p.add_argument("--stage1-ckpt", default=None)

    for name, stage in (
        ("pretrain-aligner", "PRETRAIN_ALIGNER"),
        ("pretrain-pitch", "PRETRAIN_PITCH"),
        ("train-stage1", "STAGE1"),
        ("train-stage2", "STAGE2"),
    ):
        p = sub.add_parser(name, help=f"run {stage.lower()} training")
        add_train_args(p, stage)
        p.set_defaults(fn=lambda a, s=stage: _cmd_train(a, s))

    p = sub.add_parser("synthesize", help="text-to-mel with a reference style")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--text-ids", default=None)
    p.add_argument("--text", default=None)
    p.add_argument("--symbols", default=None)
    p.add_argument("--duration-scale", type=float, default=1.0)
    p.add_argument("--pitch-shift", type=float, default=0.0)
    p.add_argument("--pitch-scale", type=float, default=1.0)
    p.add_argument("--energy-offset", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--wav", default=None)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("convert", help="any-to-any voice conversion")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--source-ids", default=None)
    p.add_argument("--source-text", default=None)
    p.add_argument("--symbols", default=None)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--wav", default=None)
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("eval", help="objective evaluation reports")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)
    pc = eval_sub.add_parser("correlations")
    pc.add_argument("--pairs", required=True)
    pc.add_argument("--out", required=True)
    pc.set_defaults(fn=cmd_eval_correlations)
    ps = eval_sub.add_parser("styles")
    ps.add_argument("--styles", required=True)
    ps.add_argument("--labels", default=None)
    ps.set_defaults(fn=cmd_eval_styles)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        from . import alignment, checkpoint, corpus, dsp, evalsuite, train

        known = (
            dsp.DspError, corpus.CorpusError, checkpoint.CheckpointError,
            train.TrainError, alignment.AlignmentError, evalsuite.EvalError,
        )
        if isinstance(exc, known):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        raise


if __name__ == "__main__":
    sys.exit(main())
