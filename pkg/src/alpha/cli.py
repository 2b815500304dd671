"""Command-line entry points for the trace classification pipeline.

Subcommands map one-to-one onto pipeline stages (ingest, corpus build,
tokenizer train, model train, calibrate, classify, density, zipf, report)
plus the convenience chain ``pipeline experiment-c``. Every CSV written
carries a ``# alpha seed=...`` preamble; ``--no-timestamp`` drops the
creation time from it so outputs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import encoder as encoder_mod
from . import report as report_mod
from . import wordpiece
from .errors import AlphaError, EmptyCorpus
from .ingest import (
    BENIGN,
    MALICIOUS,
    RawSample,
    SliceSpec,
    instruction_density,
    load_sample,
)
from .normalize import NormalizationMode
from .pipeline import (
    DEFAULT_MIN_FUNCTIONS,
    PipelineModels,
    calibrate_layers,
    classify_batch,
)
from .svm import load_hyperplane, save_hyperplane

SAMPLES_HEADER = ["sample_id", "label", "malware_type", "family",
                  "instructions", "timestamped", "skipped", "duration_minutes"]


def _default_seed() -> int:
    try:
        return int(os.environ.get("ALPHA_SEED", "0"))
    except ValueError:
        return 0


def _preamble(args: argparse.Namespace) -> str:
    line = f"# alpha seed={getattr(args, 'seed', 0)}"
    if not getattr(args, "no_timestamp", False):
        line += f" generated={datetime.now(timezone.utc).isoformat(timespec='seconds')}"
    return line


def _load_samples(paths, label=None, jobs: int = 1) -> list[RawSample]:
    if jobs > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda p: load_sample(p, label=label), paths))
    return [load_sample(p, label=label) for p in paths]


def _slice_spec(args) -> SliceSpec | None:
    if getattr(args, "no_slice", False):
        return None
    return SliceSpec(args.slice, fallback=not getattr(args, "no_fallback", False))


def _mode_from_args(args, corpus_path=None) -> NormalizationMode:
    if corpus_path is not None and args.address_threshold is None and not args.jmpnz:
        stored = corpus_mod.load_corpus_mode(corpus_path)
        if stored is not None:
            return stored
    threshold = int(args.address_threshold, 0) if args.address_threshold else 0x10000
    return NormalizationMode(jmpnz_folding=args.jmpnz, address_threshold=threshold)


def _sample_rows(samples) -> list[list]:
    rows = []
    for s in samples:
        stamps = [i.timestamp_ms for i in s.instructions if i.timestamp_ms is not None]
        duration = (max(stamps) - min(stamps)) / 60000.0 if stamps else 0.0
        rows.append([
            s.sample_id, s.label, s.malware_type or "", s.family or "",
            len(s.instructions), len(stamps), len(s.skipped_lines), f"{duration:.2f}",
        ])
    return rows


def _read_labels(path) -> dict[str, tuple[str, str | None]]:
    truth = {}
    for row in report_mod.read_csv_rows(path):
        truth[row["sample_id"]] = (row["label"], row.get("malware_type") or None)
    return truth


def _print_summaries(summaries) -> None:
    print(",".join(report_mod.METRICS_HEADER))
    for s in summaries:
        print(",".join(str(x) for x in [
            s.malware_type, s.l1_malware, s.l1_benign, s.l1_flagged,
            s.layer3.tp, s.layer3.fn, s.layer3.fp, s.layer3.tn,
            report_mod.format_percent(s.metrics.accuracy),
            report_mod.format_percent(s.metrics.precision),
            report_mod.format_percent(s.metrics.recall),
            report_mod.format_percent(s.metrics.f1),
        ]))


# --- subcommands ---

def _cap_per_class(pairs, cap: int, seed: int):
    """Deterministically subsample the training sentences per label."""
    if not cap:
        return pairs
    rng = np.random.default_rng(seed)
    by_label: dict[str, list] = {BENIGN: [], MALICIOUS: []}
    for sentence, label in pairs:
        by_label[label].append((sentence, label))
    capped = []
    for label, items in by_label.items():
        if len(items) > cap:
            picks = rng.choice(len(items), size=cap, replace=False)
            items = [items[i] for i in sorted(picks)]
        capped.extend(items)
    return capped


def _encoder_config(args) -> encoder_mod.EncoderConfig:
    return encoder_mod.EncoderConfig(
        layers=args.layers, hidden_dim=args.hidden_dim,
        attention_heads=args.attention_heads, max_len=args.max_len,
        seed=args.seed, epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate,
    )


def cmd_ingest(args) -> int:
    samples = _load_samples(args.traces, label=args.label, jobs=args.jobs)
    rows = _sample_rows(samples)
    if args.out:
        report_mod.write_csv(args.out, SAMPLES_HEADER, rows, _preamble(args))
    for row in rows:
        print(f"{row[0]}: label={row[1]} instructions={row[4]} skipped={row[6]}")
    return 0


def _build_corpus(samples, mode):
    benign = [s for s in samples if s.label == BENIGN]
    malicious = [s for s in samples if s.label == MALICIOUS]
    if not benign or not malicious:
        raise EmptyCorpus("corpus building needs both benign and malicious traces")
    ben_set, ben_stats = corpus_mod.build_function_set(benign, BENIGN, mode)
    mal_set, _ = corpus_mod.build_function_set(malicious, MALICIOUS, mode)
    mal_set = corpus_mod.cross_filter_malicious(mal_set, ben_set)
    mal_stats = corpus_mod.corpus_stats(mal_set)
    training = corpus_mod.TrainingCorpus(benign=ben_set, malicious=mal_set)
    return training, {BENIGN: ben_stats, MALICIOUS: mal_stats}


def cmd_corpus_build(args) -> int:
    mode = _mode_from_args(args)
    samples = _load_samples(args.traces, jobs=args.jobs)
    training, stats = _build_corpus(samples, mode)
    corpus_mod.save_corpus(training, args.out, stats=stats, mode=mode, header=_preamble(args))
    for label, st in stats.items():
        print(f"{label}: initial={st.initial} deduplicated={st.deduplicated} "
              f"filtered={st.filtered} avg_len={st.avg_function_length:.2f} "
              f"unique_words={st.unique_words}")
    return 0


def cmd_tokenizer_train(args) -> int:
    training = corpus_mod.load_corpus(args.corpus)
    sentences = sorted(training.benign.functions | training.malicious.functions)
    vocab = wordpiece.train_wordpiece(sentences, args.vocab_size, args.min_freq)
    wordpiece.save_vocab(vocab, args.out)
    print(f"vocabulary of {vocab.size} tokens written to {args.out}")
    return 0


def cmd_model_train(args) -> int:
    training = corpus_mod.load_corpus(args.corpus)
    vocab = wordpiece.load_vocab(args.vocab)
    pairs = _cap_per_class(corpus_mod.corpus_sentences(training),
                           args.max_per_class, args.seed)
    classifier, val_loss, val_acc = encoder_mod.train_function_classifier(
        pairs, args.val_fraction, _encoder_config(args), vocab
    )
    out = Path(args.out)
    vocab_ref = os.path.relpath(Path(args.vocab).resolve(), out.resolve().parent)
    classifier.save(out, vocab_file=vocab_ref)
    print(f"validation loss {val_loss:.4f}, accuracy {100 * val_acc:.2f}% "
          f"({len(pairs)} training sentences)")
    return 0


def cmd_calibrate(args) -> int:
    training = corpus_mod.load_corpus(args.corpus)
    mode = _mode_from_args(args, corpus_path=args.corpus)
    classifier = encoder_mod.load_model(args.model)
    samples = _load_samples(args.traces, jobs=args.jobs)
    result = calibrate_layers(
        training, samples, classifier, mode=mode,
        slice_spec=_slice_spec(args), min_functions=args.min_functions, c=args.svm_c,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_hyperplane(result.layer1, out / "layer1.json", result.thresholds)
    save_hyperplane(result.layer3, out / "layer3.json")
    print(f"triage thresholds: upper={result.thresholds.upper_threshold:.4f} "
          f"lower={result.thresholds.lower_threshold:.4f}")
    return 0


def _load_models(args, training, mode) -> PipelineModels:
    models_dir = Path(args.models)
    classifier = encoder_mod.load_model(models_dir / "model.bin")
    layer1, thresholds = load_hyperplane(models_dir / "layer1.json")
    if thresholds is None:
        raise AlphaError(f"{models_dir / 'layer1.json'} carries no thresholds")
    layer3, _ = load_hyperplane(models_dir / "layer3.json")
    return PipelineModels(
        corpus=training, layer1=layer1, thresholds=thresholds,
        classifier=classifier, layer3=layer3, mode=mode,
        min_functions=args.min_functions,
    )


def cmd_classify(args) -> int:
    training = corpus_mod.load_corpus(args.corpus)
    mode = _mode_from_args(args, corpus_path=args.corpus)
    models = _load_models(args, training, mode)
    samples = _load_samples(args.traces, label=args.label, jobs=args.jobs)
    results = classify_batch(samples, models, _slice_spec(args),
                             paper_mode=args.paper_mode, jobs=args.jobs)
    out = Path(args.out)
    preamble = _preamble(args)
    verdicts = [v for v, _ in results]
    reports = [r for _, r in results]
    report_mod.verdicts_csv(verdicts, out / "verdicts.csv", preamble)
    report_mod.loss_reports_csv(reports, out / "loss_reports.csv", preamble)
    report_mod.write_csv(out / "labels.csv", SAMPLES_HEADER, _sample_rows(samples), preamble)
    for verdict in verdicts:
        print(f"{verdict.sample_id}: {verdict.decision} ({verdict.decided_at})")
    print(f"wrote {out / 'verdicts.csv'}")
    return 0


def cmd_density(args) -> int:
    samples = _load_samples(args.traces, label=args.label, jobs=args.jobs)
    rows = []
    for sample in samples:
        for minute, count in instruction_density(sample):
            rows.append((sample.sample_id, minute, count))
    report_mod.write_csv(args.out, report_mod.DENSITY_HEADER, rows, _preamble(args))
    if not args.no_figures:
        from . import figures

        figures.render_density(rows, Path(args.out).with_suffix(".png"))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def cmd_zipf(args) -> int:
    if args.corpus:
        training = corpus_mod.load_corpus(args.corpus)
        counts = corpus_mod.word_frequencies(training.benign)
        counts.update(corpus_mod.word_frequencies(training.malicious))
    elif args.traces:
        samples = _load_samples(args.traces, jobs=args.jobs)
        counts = corpus_mod.word_frequencies_from_samples(samples)
    else:
        print("error: zipf needs --corpus or trace files", file=sys.stderr)
        return 2
    table = corpus_mod.zipf_table(counts)
    report_mod.write_csv(args.out, report_mod.ZIPF_HEADER, table, _preamble(args))
    if not args.no_figures:
        from . import figures

        figures.render_zipf(table, Path(args.out).with_suffix(".png"))
    frequent = corpus_mod.count_words_above(counts, 10)
    print(f"wrote {args.out} ({len(table)} words, {frequent} with frequency > 10)")
    return 0


def cmd_report(args) -> int:
    verdicts = report_mod.read_verdicts(args.verdicts)
    truth = _read_labels(args.labels)
    loss_reports = None
    if args.loss_reports:
        from .pipeline import FunctionLossReport

        loss_reports = {}
        for row in report_mod.read_csv_rows(args.loss_reports):
            loss_reports[row["Filename"]] = FunctionLossReport(
                sample_id=row["Filename"],
                initial_length=int(row["Initial Length"]),
                deduplicated_length=int(row["After Deduplication Length"]),
                found_in_benign=int(row["Found in Benign"]),
                found_in_malicious=int(row["Found in Malicious"]),
                remaining=int(row["Final Instructions Left"]),
            )
    density = None
    if args.traces:
        samples = _load_samples(args.traces, jobs=args.jobs)
        density = [
            (s.sample_id, minute, count)
            for s in samples for minute, count in instruction_density(s)
        ]
    zipf = None
    if args.corpus:
        training = corpus_mod.load_corpus(args.corpus)
        counts = corpus_mod.word_frequencies(training.benign)
        counts.update(corpus_mod.word_frequencies(training.malicious))
        zipf = corpus_mod.zipf_table(counts)
    summaries = report_mod.emit_report(
        verdicts, truth, args.out,
        loss_reports=loss_reports, density=density, zipf=zipf,
        preamble=_preamble(args), figures=not args.no_figures,
    )
    _print_summaries(summaries)
    return 0


def cmd_experiment_c(args) -> int:
    out = Path(args.out)
    mode = _mode_from_args(args)
    train_paths = sorted(Path(args.train).glob("*.trace"))
    calib_paths = sorted(Path(args.calib).glob("*.trace"))
    test_paths = sorted(Path(args.test).glob("*.trace"))
    if not train_paths or not calib_paths or not test_paths:
        raise EmptyCorpus("experiment-c needs traces in --train, --calib and --test")

    print(f"[1/6] corpus from {len(train_paths)} training traces")
    train_samples = _load_samples(train_paths, jobs=args.jobs)
    training, stats = _build_corpus(train_samples, mode)
    corpus_mod.save_corpus(training, out / "corpus", stats=stats, mode=mode,
                           header=_preamble(args))

    print("[2/6] tokenizer training")
    sentences = sorted(training.benign.functions | training.malicious.functions)
    vocab = wordpiece.train_wordpiece(sentences, args.vocab_size, args.min_freq)
    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    wordpiece.save_vocab(vocab, models_dir / "vocab.txt")

    print("[3/6] function classifier training")
    pairs = _cap_per_class(corpus_mod.corpus_sentences(training),
                           args.max_per_class, args.seed)
    classifier, val_loss, val_acc = encoder_mod.train_function_classifier(
        pairs, args.val_fraction, _encoder_config(args), vocab
    )
    classifier.save(models_dir / "model.bin", vocab_file="vocab.txt")
    print(f"      validation loss {val_loss:.4f}, accuracy {100 * val_acc:.2f}%")

    print(f"[4/6] calibration on {len(calib_paths)} traces")
    calib_samples = _load_samples(calib_paths, jobs=args.jobs)
    slice_spec = _slice_spec(args)
    result = calibrate_layers(
        training, calib_samples, classifier, mode=mode,
        slice_spec=slice_spec, min_functions=args.min_functions, c=args.svm_c,
    )
    save_hyperplane(result.layer1, models_dir / "layer1.json", result.thresholds)
    save_hyperplane(result.layer3, models_dir / "layer3.json")

    print(f"[5/6] classifying {len(test_paths)} test traces")
    test_samples = _load_samples(test_paths, jobs=args.jobs)
    models = PipelineModels(
        corpus=training, layer1=result.layer1, thresholds=result.thresholds,
        classifier=classifier, layer3=result.layer3, mode=mode,
        min_functions=args.min_functions,
    )
    results = classify_batch(test_samples, models, slice_spec,
                             paper_mode=args.paper_mode, jobs=args.jobs)
    results_dir = out / "results"
    preamble = _preamble(args)
    verdicts = [v for v, _ in results]
    reports = [r for _, r in results]
    report_mod.verdicts_csv(verdicts, results_dir / "verdicts.csv", preamble)
    report_mod.loss_reports_csv(reports, results_dir / "loss_reports.csv", preamble)
    report_mod.write_csv(results_dir / "labels.csv", SAMPLES_HEADER,
                         _sample_rows(test_samples), preamble)

    print("[6/6] report")
    truth = {s.sample_id: (s.label, s.malware_type) for s in test_samples}
    counts = corpus_mod.word_frequencies(training.benign)
    counts.update(corpus_mod.word_frequencies(training.malicious))
    density = [
        (s.sample_id, minute, count)
        for s in test_samples for minute, count in instruction_density(s)
    ]
    summaries = report_mod.emit_report(
        verdicts, truth, results_dir,
        loss_reports={r.sample_id: r for r in reports},
        density=density, zipf=corpus_mod.zipf_table(counts),
        preamble=preamble, figures=not args.no_figures,
    )
    _print_summaries(summaries)
    return 0


# --- parser assembly ---

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=_default_seed(),
                     help="seed for every random choice (env ALPHA_SEED)")
    sub.add_argument("--no-timestamp", action="store_true",
                     help="omit the creation time from output headers")
    sub.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel workers for per-sample stages")
    sub.add_argument("--config", default=None,
                     help="key=value file; flags override its entries")


def _add_mode_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--jmpnz", action="store_true",
                     help="fold jmp/jnz/jz with literal targets into jmpmem/jnzmem/jzmem")
    sub.add_argument("--address-threshold", default=None,
                     help="lowest hex literal treated as a memory address (default 0x10000)")


def _add_slice_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--slice", type=int, default=2, help="minute index to classify on")
    sub.add_argument("--no-slice", action="store_true", help="classify the whole trace")
    sub.add_argument("--no-fallback", action="store_true",
                     help="fail instead of using the last full minute when the slice is empty")


def _add_encoder_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--layers", type=int, default=2)
    sub.add_argument("--hidden-dim", type=int, default=64)
    sub.add_argument("--attention-heads", type=int, default=2)
    sub.add_argument("--max-len", type=int, default=256)
    sub.add_argument("--epochs", type=int, default=3)
    sub.add_argument("--batch-size", type=int, default=16)
    sub.add_argument("--learning-rate", type=float, default=3e-4)
    sub.add_argument("--val-fraction", type=float, default=0.1)
    sub.add_argument("--max-per-class", type=int, default=0,
                     help="cap training sentences per class (0 = no cap)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alpha", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest", help="parse traces and summarize them")
    p.add_argument("traces", nargs="+")
    p.add_argument("--label", choices=[BENIGN, MALICIOUS], default=None)
    p.add_argument("--out", default=None, help="write a sample summary CSV")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    corpus_cmd = commands.add_parser("corpus", help="corpus operations")
    corpus_sub = corpus_cmd.add_subparsers(dest="corpus_command", required=True)
    p = corpus_sub.add_parser("build", help="build a cross-filtered training corpus")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", required=True, help="corpus directory to create")
    _add_mode_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_corpus_build)

    tok_cmd = commands.add_parser("tokenizer", help="tokenizer operations")
    tok_sub = tok_cmd.add_subparsers(dest="tokenizer_command", required=True)
    p = tok_sub.add_parser("train", help="train a subword vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="vocab.txt path")
    p.add_argument("--vocab-size", type=int, default=30522)
    p.add_argument("--min-freq", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_tokenizer_train)

    model_cmd = commands.add_parser("model", help="classifier operations")
    model_sub = model_cmd.add_subparsers(dest="model_command", required=True)
    p = model_sub.add_parser("train", help="train the function classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="model artifact path")
    _add_encoder_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_model_train)

    p = commands.add_parser("calibrate", help="fit the triage and final SVM layers")
    p.add_argument("traces", nargs="+")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="directory for layer1/layer3 records")
    p.add_argument("--min-functions", type=int, default=DEFAULT_MIN_FUNCTIONS)
    p.add_argument("--svm-c", type=float, default=1.0)
    _add_slice_flags(p)
    _add_mode_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = commands.add_parser("classify", help="run the full three-layer classification")
    p.add_argument("traces", nargs="+")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True,
                   help="directory holding model.bin, layer1.json, layer3.json")
    p.add_argument("--out", default=".", help="directory for verdicts.csv and loss_reports.csv")
    p.add_argument("--label", choices=[BENIGN, MALICIOUS], default=None)
    p.add_argument("--paper-mode", action="store_true",
                   help="refit the SVM layers on the classified cohort itself")
    p.add_argument("--min-functions", type=int, default=DEFAULT_MIN_FUNCTIONS)
    _add_slice_flags(p)
    _add_mode_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = commands.add_parser("density", help="per-minute instruction counts")
    p.add_argument("traces", nargs="+")
    p.add_argument("--label", choices=[BENIGN, MALICIOUS], default=None)
    p.add_argument("--out", default="density.csv")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_density)

    p = commands.add_parser("zipf", help="word rank/frequency table")
    p.add_argument("traces", nargs="*")
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default="zipf.csv")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_zipf)

    p = commands.add_parser("report", help="metrics table and plot data from verdicts")
    p.add_argument("traces", nargs="*", help="optional traces for density data")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--labels", required=True, help="sample summary CSV from ingest/classify")
    p.add_argument("--loss-reports", default=None)
    p.add_argument("--corpus", default=None, help="optional corpus for the zipf table")
    p.add_argument("--out", default="report")
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    pipe_cmd = commands.add_parser("pipeline", help="chained workflows")
    pipe_sub = pipe_cmd.add_subparsers(dest="pipeline_command", required=True)
    p = pipe_sub.add_parser("experiment-c",
                            help="corpus, tokenizer, model, calibration, classify, report")
    p.add_argument("--train", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-size", type=int, default=2000)
    p.add_argument("--min-freq", type=int, default=2)
    p.add_argument("--min-functions", type=int, default=DEFAULT_MIN_FUNCTIONS)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--paper-mode", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    _add_encoder_flags(p)
    _add_slice_flags(p)
    _add_mode_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment_c)

    return parser


def _known_actions(parser: argparse.ArgumentParser) -> dict[str, list[argparse.Action]]:
    actions: dict[str, list[argparse.Action]] = {}

    def walk(p: argparse.ArgumentParser) -> None:
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                for child in action.choices.values():
                    walk(child)
            elif action.dest != "help":
                actions.setdefault(action.dest, []).append(action)

    walk(parser)
    return actions


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Turn key=value lines into argument defaults; explicit flags still win.

    Defaults are written onto every matching subcommand action, since each
    subparser parses into a fresh namespace.
    """
    actions = _known_actions(parser)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise AlphaError(f"{path}:{lineno}: expected key=value")
        dest = key.strip().replace("-", "_")
        if dest not in actions:
            raise AlphaError(f"{path}:{lineno}: unknown option {key.strip()!r}")
        raw = value.strip()
        for action in actions[dest]:
            if isinstance(action, argparse._StoreTrueAction):
                action.default = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                action.default = action.type(raw)
            else:
                action.default = raw


def run(argv) -> int:
    argv = list(argv)
    parser = build_parser()
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
        if config_path:
            try:
                _apply_config(parser, config_path)
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return 2
            except AlphaError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (AlphaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
