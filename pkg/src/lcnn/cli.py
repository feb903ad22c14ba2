"""Command-line interface.

Subcommands: synth-data, features, train, prune, quantize, profile,
ensemble, pipeline. Every command is deterministic given its inputs and
seed; the default seed comes from the LCNN_SEED environment variable.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import container, ensemble, model, profiler, pruning, quantization, synth, training
from .exceptions import LcnnError
from .features import FeatureExtractor
from .wav import load_wav


def _default_seed() -> int:
    return int(os.environ.get("LCNN_SEED", "0"))


def _add_seed(p):
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="RNG seed (default: $LCNN_SEED or 0)")


def _write_kv(path, kv: dict):
    with open(path, "w") as f:
        for k, v in kv.items():
            f.write(f"{k}={v}\n")


# --- commands ---------------------------------------------------------------


def cmd_synth_data(args) -> int:
    manifest = synth.generate(
        args.out_dir, per_class=args.per_class, seed=args.seed, val_ratio=args.val_ratio
    )
    rows = synth.load_manifest(manifest)
    n_train = sum(1 for r in rows if r[2] == "train")
    print(f"wrote {len(rows)} clips ({n_train} train, {len(rows) - n_train} validation)")
    print(f"manifest: {manifest}")
    return 0


def cmd_features(args) -> int:
    clip = load_wav(args.wav)
    extractor = FeatureExtractor(sample_rate=clip.sample_rate)
    feat = extractor(clip)
    out = Path(args.out) if args.out else Path(args.wav).with_suffix(".lcnn")
    container.save_features(out, feat, meta=extractor.config.as_meta())
    print(f"features {feat.shape[1]}x{feat.shape[2]} -> {out}")
    return 0


def _train_config(args, max_epochs, patience) -> training.TrainConfig:
    return training.TrainConfig(
        batch_size=args.batch_size, max_epochs=max_epochs,
        learning_rate=args.lr, patience=patience, seed=args.seed,
        standardize=not args.no_standardize,
    )


def cmd_train(args) -> int:
    train_set, val_set, _ = synth.featurize_manifest(args.manifest)
    config = model.ArchConfig.parse(args.arch)
    net = model.build(config, seed=args.seed)
    net.name = "Unpruned"
    tc = _train_config(args, args.epochs, min(args.patience, args.epochs))
    best, history = training.train(net, train_set, val_set, tc)
    container.save(best, args.out)
    if args.history:
        training.history_to_csv(history, args.history)
    acc, loss = ensemble.evaluate(best, val_set)
    print(f"trained {config.arch_string}: val accuracy {acc:.2f}%, log-loss {loss:.4f}")
    print(f"model: {args.out}")
    return 0


def cmd_prune(args) -> int:
    net = container.load(args.model)
    layers = [s.strip().upper() for s in args.layers.split(",") if s.strip()]
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    if len(layers) != len(counts):
        raise LcnnError(f"{len(layers)} layers but {len(counts)} counts")
    plan = pruning.plan_for_layers(net, dict(zip(layers, counts)))
    pruned = pruning.apply_plan(net, plan)
    pruned.name = "Pruned_C" + "".join(l.lstrip("C") for l in sorted(layers))
    container.save(pruned, args.out)
    if args.plan:
        Path(args.plan).write_text(plan.to_text() + "\n")
    print(f"pruned {net.config.arch_string} -> {pruned.config.arch_string} ({args.out})")
    return 0


def cmd_quantize(args) -> int:
    net = container.load(args.model)
    qnet = quantization.quantize_model(net)
    container.save(qnet, args.out)
    report = profiler.profile(qnet)
    print(f"quantized {net.config.arch_string}: {report.total_kb:.2f} KB ({args.out})")
    return 0


def cmd_profile(args) -> int:
    if args.model:
        report = profiler.profile(container.load(args.model))
    else:
        report = profiler.profile(model.ArchConfig.parse(args.arch))
    print(profiler.format_report(report))
    if args.kv:
        _write_kv(args.kv, profiler.report_kv(report))
    if args.budget:
        result = profiler.budget_gate(report)
        print(result.describe())
        return 0 if result.passed else 1
    return 0


def cmd_ensemble(args) -> int:
    paths = [p.strip() for p in args.members.split(",") if p.strip()]
    nets = [container.load(p) for p in paths]
    if args.exclude:
        excluded = {e.strip() for e in args.exclude.split(",")}
        unknown = excluded - {n.name for n in nets}
        if unknown:
            raise LcnnError(f"--exclude names not among members: {sorted(unknown)}")
        nets = [n for n in nets if n.name not in excluded]
    if not nets:
        raise LcnnError("no ensemble members left")
    _, val_set, _ = synth.featurize_manifest(args.manifest)
    rows = []
    for net in nets:
        acc, loss = ensemble.evaluate(net, val_set)
        rows.append((net.name or net.config.arch_string, acc, loss))
    acc, loss = ensemble.evaluate(nets, val_set)
    rows.append((f"ensemble[{len(nets)}]", acc, loss))
    for name, a, ll in rows:
        print(f"{name}: accuracy {a:.2f}%, log-loss {ll:.4f}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["name", "accuracy", "logloss"])
            for name, a, ll in rows:
                writer.writerow([name, f"{a:.2f}", f"{ll:.6f}"])
    return 0


def cmd_pipeline(args) -> int:
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    counts = tuple(int(c) for c in args.counts.split(","))
    if len(counts) != 3:
        raise LcnnError("--counts needs three values, e.g. 4,4,10")

    stage = "featurize"
    try:
        train_set, val_set, _ = synth.featurize_manifest(args.manifest)

        stage = "train"
        config = model.ArchConfig.parse(args.arch)
        net = model.build(config, seed=args.seed)
        net.name = "Unpruned"
        tc = _train_config(args, args.epochs, min(args.patience, args.epochs))
        unpruned, history = training.train(net, train_set, val_set, tc)
        container.save(unpruned, workdir / "unpruned.lcnn")
        training.history_to_csv(history, workdir / "history_unpruned.csv")

        stage = "quantize Unpruned"
        q_unpruned = quantization.quantize_model(unpruned)
        container.save(q_unpruned, workdir / "unpruned_int8.lcnn")
        acc, loss = ensemble.evaluate(q_unpruned, val_set)
        summary = [(q_unpruned, acc, loss)]

        stage = "prune"
        variants = pruning.make_variants(unpruned, counts)

        ftc = _train_config(args, args.finetune_epochs,
                            min(args.patience, args.finetune_epochs))
        members = []
        for variant in variants:
            stage = f"finetune {variant.name}"
            tuned, hist = training.finetune(variant, train_set, val_set, ftc)
            container.save(tuned, workdir / f"{variant.name.lower()}.lcnn")
            training.history_to_csv(hist, workdir / f"history_{variant.name.lower()}.csv")

            stage = f"quantize {variant.name}"
            qnet = quantization.quantize_model(tuned)
            container.save(qnet, workdir / f"{variant.name.lower()}_int8.lcnn")
            acc, loss = ensemble.evaluate(qnet, val_set)
            summary.append((qnet, acc, loss))
            members.append(qnet)

        stage = "ensemble"
        ensembles = [("Ensemble_all", members)]
        for skip in members:
            rest = [m for m in members if m is not skip]
            ensembles.append((f"Ensemble_minus_{skip.name}", rest))
    except Exception as err:
        raise LcnnError(f"pipeline failed at stage '{stage}': {err}") from err

    out_path = workdir / "summary.csv"
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["name", "arch", "params", "macs", "size_kb", "accuracy", "logloss"]
        )
        for net, acc, loss in summary:
            rep = profiler.profile(net)
            writer.writerow([
                net.name, net.config.arch_string, rep.total_params, rep.total_macs,
                f"{rep.total_kb:.2f}", f"{acc:.2f}", f"{loss:.6f}",
            ])
        for name, nets in ensembles:
            rep = profiler.profile_ensemble(nets, label=name)
            acc, loss = ensemble.evaluate(nets, val_set)
            writer.writerow([
                name, "+".join(n.config.arch_string for n in nets),
                rep.total_params, rep.total_macs, f"{rep.total_kb:.2f}",
                f"{acc:.2f}", f"{loss:.6f}",
            ])
    print(out_path.read_text(), end="")
    print(f"artifacts in {workdir}")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcnn",
        description="Low-complexity acoustic-scene CNN toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic tone dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--val-ratio", type=float, default=1.0 / 3.0)
    _add_seed(p)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("features", help="extract log-mel features from a wav file")
    p.add_argument("wav")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a network on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", default="16-16-32-100")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--history", default=None)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--no-standardize", action="store_true")
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="prune redundant filters from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--layers", required=True, help="e.g. C1,C2")
    p.add_argument("--counts", required=True, help="e.g. 4,4")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--plan", default=None, help="write the pruning plan as text")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("quantize", help="post-training INT8 quantization")
    p.add_argument("model")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("profile", help="parameter/MAC/size report")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--arch", help="architecture string, e.g. 16-16-32-100")
    g.add_argument("--model", help="an .lcnn file")
    p.add_argument("--budget", action="store_true",
                   help="exit nonzero when over the 128K-param / 30M-MAC limits")
    p.add_argument("--kv", default=None, help="also write a key=value report")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("ensemble", help="evaluate an ensemble of models")
    p.add_argument("--members", required=True, help="comma-separated .lcnn paths")
    p.add_argument("--exclude", default=None, help="comma-separated network names")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="write results CSV")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("pipeline", help="train, prune, finetune, quantize, ensemble")
    p.add_argument("--manifest", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--arch", default="16-16-32-100")
    p.add_argument("--counts", default="4,4,10")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--finetune-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--no-standardize", action="store_true")
    _add_seed(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (LcnnError, ValueError, FileNotFoundError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
