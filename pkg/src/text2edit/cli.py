"""Command-line entry points for the full pipeline.

Every stage is reachable: corpus synthesis, vocabulary building, training,
metric evaluation, single-image editing, filter probing, study export, and
the HTTP service. Exit codes: 0 success, 1 for anything wrong with the
invocation or inputs, 2 for runtime failures inside a correctly-posed run.

A JSON ``--config`` file may supply any long-option value by name
(e.g. {"epochs": 3, "batch-size": 2}); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backbone import resize_for_model
from .data import build_vocabulary, load_image, load_manifest, save_image
from .errors import ValidationError
from .generators import FilterBankGenerator
from .losses import LossWeights
from .metrics import StudyRecord, export_rating_tasks, filter_effect_report, lab_l2
from .models import BundleConfig, apply_edit, load_model
from .synth import KINDS, generate_corpus
from .training import IdentityTemplateBank, TrainConfig, run_training


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _cmd_synth_data(args) -> int:
    kinds = tuple(args.kinds.split(",")) if args.kinds else None
    manifest = generate_corpus(
        n_pairs=args.n,
        kinds=kinds,
        image_source=args.images,
        seed=args.seed,
        out_dir=args.out,
        image_size=(args.size[0], args.size[1]),
    )
    counts = manifest.split_counts
    print(f"wrote {len(manifest.records)} pairs to {args.out} (splits: {counts})")
    print(Path(args.out) / "manifest.jsonl")
    return 0


def _cmd_build_vocab(args) -> int:
    manifest = load_manifest(args.manifest, check_images=False)
    corpus = list(manifest.descriptions())
    if not args.no_identity_templates:
        corpus += IdentityTemplateBank.from_payload().expansions()
    vocab = build_vocabulary(corpus, min_count=args.min_count)
    vocab.save(args.out)
    print(f"vocabulary of {vocab.size} tokens -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    bundle_config = BundleConfig(
        kind=args.kind,
        encoder_widths=args.encoder_widths,
        skip_connections=not args.no_skips,
        branches=args.branches,
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        text_encoder=args.text_encoder,
    )
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        lr_floor=args.lr_floor,
        identity_fraction=args.identity_fraction,
        pretrain_epochs=args.pretrain_epochs,
        seed=args.seed,
        deterministic=args.deterministic,
        weights=LossWeights(adversarial=args.adversarial_weight, perceptual=args.perceptual_weight),
        disc_widths=args.disc_widths,
        disc_text_stage=args.disc_text_stage,
    )
    manifest = load_manifest(args.manifest)
    result = run_training(manifest, bundle_config, config, args.out)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"history: {result.history_path}")
    return 0


def _cmd_eval(args) -> int:
    bundle = load_model(args.model)
    manifest = load_manifest(args.manifest)
    records = manifest.split(args.split)
    if not records:
        raise ValidationError(f"manifest has no {args.split!r} records")
    rows = []
    for i, rec in enumerate(records):
        image = load_image(rec.input_path)
        target = load_image(rec.target_path)
        edited, _ = apply_edit(bundle, image, rec.descriptions[0])
        rows.append(
            {
                "index": i,
                "baseline_lab_l2": lab_l2(image, target),
                "model_lab_l2": lab_l2(edited, target),
            }
        )
    baseline = sum(r["baseline_lab_l2"] for r in rows) / len(rows)
    model_err = sum(r["model_lab_l2"] for r in rows) / len(rows)
    print(f"pairs: {len(rows)}")
    print(f"baseline lab_l2 (input vs target): {baseline:.4f}")
    print(f"model lab_l2 (edited vs target):   {model_err:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("index,baseline_lab_l2,model_lab_l2\n")
            for r in rows:
                fh.write(f"{r['index']},{r['baseline_lab_l2']!r},{r['model_lab_l2']!r}\n")
        print(f"per-pair table: {args.out}")
    return 0


def _cmd_edit(args) -> int:
    bundle = load_model(args.model)
    image = load_image(args.image)
    edited, weights = apply_edit(bundle, image, args.text, mode=args.mode)
    save_image(edited, args.out)
    print(args.out)
    if weights is not None and args.weights_out:
        Path(args.weights_out).write_text(json.dumps([float(w) for w in weights]))
        print(args.weights_out)
    return 0


def _cmd_probe_filters(args) -> int:
    bundle = load_model(args.model)
    if not isinstance(bundle.generator, FilterBankGenerator):
        raise ValidationError(f"model kind {bundle.kind!r} has no filter bank to probe")
    images = [
        resize_for_model(load_image(p), multiple=bundle.spatial_multiple)[0]
        for p in args.images
    ]
    report = filter_effect_report(bundle.generator, images, args.out)
    print(f"grid: {report.grid_path}")
    print(f"stats: {report.csv_path}")
    return 0


def _cmd_export_study(args) -> int:
    raw = json.loads(Path(args.records).read_text())
    if not isinstance(raw, list):
        raise ValidationError("records file must hold a JSON list")
    records = []
    for i, obj in enumerate(raw):
        try:
            records.append(
                StudyRecord(
                    input=obj["input"],
                    instruction=obj["instruction"],
                    outputs=dict(obj["outputs"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"records[{i}] is malformed: {exc}") from exc
    payload = export_rating_tasks(records, kind=args.kind, seed=args.seed, path=args.out)
    print(f"{len(payload['tasks'])} tasks -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import build_registry, create_app

    checkpoints = {}
    for spec in args.checkpoint or []:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise ValidationError(f"--checkpoint wants NAME=PATH, got {spec!r}")
        checkpoints[name] = path
    app = create_app(
        build_registry(checkpoints, include_identity=not args.no_identity),
        deterministic=args.deterministic,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--config", help="JSON file of default option values")

    parser = _Parser(prog="text2edit", description="Text-driven global image editing")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth-data", parents=[common], help="generate a synthetic edit corpus")
    p.add_argument("--n", type=int, required=True, help="number of edit pairs")
    p.add_argument("--out", default="synth-data", help="output directory")
    p.add_argument("--size", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    p.add_argument("--kinds", help=f"comma-separated subset of {','.join(KINDS)}")
    p.add_argument("--images", help="directory of base images (default: procedural textures)")
    p.set_defaults(func=_cmd_synth_data)

    p = sub.add_parser("build-vocab", parents=[common], help="build a vocabulary from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument(
        "--no-identity-templates",
        action="store_true",
        help="exclude the identity-augmentation phrases",
    )
    p.set_defaults(func=_cmd_build_vocab)

    p = sub.add_parser("train", parents=[common], help="train an edit model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", required=True, choices=("bucket", "e2e", "filterbank"))
    p.add_argument("--out", required=True, help="output directory for checkpoint and history")
    p.add_argument("--encoder-widths", type=_int_tuple, default=(64, 128, 256, 512, 512, 512, 512, 512))
    p.add_argument("--no-skips", action="store_true")
    p.add_argument("--branches", type=int, default=5)
    p.add_argument("--embed-dim", type=int, default=200)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--text-encoder", choices=("bigru", "graph"), default="bigru")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lr-floor", type=float, default=1e-6)
    p.add_argument("--identity-fraction", type=float, default=0.15)
    p.add_argument("--pretrain-epochs", type=int, default=5)
    p.add_argument("--adversarial-weight", type=float, default=1.0)
    p.add_argument("--perceptual-weight", type=float, default=0.02)
    p.add_argument("--disc-widths", type=_int_tuple, default=(64, 128, 256, 512))
    p.add_argument("--disc-text-stage", type=int, default=2)
    p.add_argument("--deterministic", action="store_true", help="zero recorded wall times")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", parents=[common], help="Lab error of a model over a split")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", help="optional per-pair CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("edit", parents=[common], help="edit one image from an instruction")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--image", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("fusion", "argmax"), default="fusion")
    p.add_argument("--weights-out", help="optional JSON file for branch weights")
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("probe-filters", parents=[common], help="per-filter effect report")
    p.add_argument("--model", required=True, help="filter-bank checkpoint path")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_probe_filters)

    p = sub.add_parser("export-study", parents=[common], help="export anonymized rating tasks")
    p.add_argument("--records", required=True, help="JSON list of study records")
    p.add_argument("--kind", required=True, choices=("standalone", "pairwise"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_study)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP inference service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--checkpoint", action="append", metavar="NAME=PATH")
    p.add_argument("--no-identity", action="store_true", help="omit the identity stub model")
    p.add_argument("--deterministic", action="store_true", help="zero reported timings")
    p.set_defaults(func=_cmd_serve)

    parser.command_parsers = dict(sub.choices)
    return parser


def _apply_config(parser: _Parser, config: dict) -> None:
    """Install config values as option defaults on every subcommand.

    Subparsers parse into a fresh namespace, so plain set_defaults on the
    top-level parser never reaches them. String values run through the
    option's type converter; lists become tuples; keys matching no option
    are ignored. A supplied value also satisfies a required option.
    """
    values = {key.replace("-", "_"): value for key, value in config.items()}
    for p in parser.command_parsers.values():
        for action in p._actions:
            if action.dest not in values:
                continue
            value = values[action.dest]
            if isinstance(value, str) and callable(action.type):
                value = action.type(value)
            elif isinstance(value, list):
                value = tuple(value)
            action.default = value
            action.required = False


def cli_dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            config = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {known.config}: {exc}", file=sys.stderr)
            return 1
        if not isinstance(config, dict):
            print("error: config file must hold a JSON object", file=sys.stderr)
            return 1
        _apply_config(parser, config)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
