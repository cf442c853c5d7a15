"""Command-line front end: synth, train, decode, score, analyze.

Flag values override config-file values, which override built-in defaults.
Config files are flat ``key = value`` lines keyed by the long flag names
(dashes and underscores are interchangeable).  Each command writes fixed
filenames into --out-dir and removes whatever it wrote if it fails, so exit
code 0 means every output landed.

Exit codes: 0 ok, 2 usage, 3 malformed data files, 4 bad configuration or
values, 5 training could not proceed, 1 unexpected error.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .analysis import (
    blank_distance_report,
    embedding_matrix,
    frequency_margin_table,
    histogram_tsv,
    overlap_histograms,
    permutation_pvalue,
    table_tsv,
)
from .ctc import Vocabulary, greedy_decode
from .data import (
    SIL,
    DataFormatError,
    ManifestError,
    SynthConfig,
    generate_synthetic,
    load_corpus,
    load_lexicon,
    load_transcripts,
    save_synth_corpus,
)
from .metrics import edit_distance, error_rate, fer_report, pool, score_report
from .network import (
    Network,
    SequenceTooShortError,
    downsample_schedule,
    load_network,
    network_forward,
    save_network,
    transfer_bottom_layers,
)
from .training import (
    TrainConfig,
    TrainingError,
    classifier_frame_predictions,
    convert_transcripts_to_phonemes,
    format_train_log,
    train,
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONFIG = 4
EXIT_TRAINING = 5


@dataclass(frozen=True)
class Opt:
    name: str
    type: object
    default: object
    help: str
    flag: bool = False
    required: bool = False


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: %r" % text)


_SYNTH = [
    Opt("out_dir", str, None, "output directory", required=True),
    Opt("seed", int, 0, "generator seed"),
    Opt("vocab_size", int, 50, "number of words"),
    Opt("n_phonemes", int, 12, "phoneme inventory size"),
    Opt("feature_dim", int, 8, "feature dimension"),
    Opt("phoneme_duration_mean", float, 8.16, "mean phoneme duration in frames"),
    Opt("phoneme_duration_std", float, 4.67, "phoneme duration stddev in frames"),
    Opt("min_pronunciation", int, 2, "shortest pronunciation"),
    Opt("max_pronunciation", int, 5, "longest pronunciation"),
    Opt("noise_scale", float, 0.3, "feature noise stddev"),
    Opt("min_words", int, 4, "fewest words per utterance"),
    Opt("max_words", int, 8, "most words per utterance"),
    Opt("n_train", int, 800, "training utterances"),
    Opt("n_dev", int, 40, "development utterances"),
    Opt("n_test", int, 40, "test utterances"),
    Opt("silence_prob", float, 0.3, "probability of silence between words"),
    Opt("zipf_exponent", float, 1.0, "word frequency skew (0 = uniform)"),
]

_TRAIN = [
    Opt("data", str, None, "corpus directory written by synth", required=True),
    Opt("out_dir", str, None, "output directory", required=True),
    Opt("mode", str, "word-ctc", "word-ctc | phoneme-ctc | frame-classifier"),
    Opt("downsample", int, 1, "total frame-rate reduction factor (power of two)"),
    Opt("layers", int, 4, "number of LSTM layers"),
    Opt("hidden", int, 500, "hidden units per layer"),
    Opt("phase1_epochs", int, 20, "epochs at the constant step size"),
    Opt("phase1_lr", float, 0.05, "phase-1 step size"),
    Opt("phase2_epochs", int, 20, "epochs with the decayed step size"),
    Opt("phase2_lr", float, 0.0375, "phase-2 initial step size"),
    Opt("phase2_decay", float, 0.75, "per-epoch decay in phase 2"),
    Opt("clip_norm", float, 5.0, "global gradient-norm bound"),
    Opt("init_from", str, "", "checkpoint to transfer bottom layers from"),
    Opt("init_layers", int, 3, "how many bottom layers to transfer"),
    Opt("data_fraction", float, 1.0, "seeded fraction of the training set to use"),
    Opt("seed", int, 0, "seed for init, shuffling, and subsetting"),
]

_DECODE = [
    Opt("model", str, None, "trained checkpoint", required=True),
    Opt("data", str, None, "corpus directory to decode", required=True),
    Opt("out_dir", str, None, "output directory", required=True),
]

_SCORE = [
    Opt("ref", str, None, "reference transcripts (corpus.tsv or id<TAB>text)", required=True),
    Opt("hyp", str, None, "hypothesis transcripts (id<TAB>text)", required=True),
    Opt("out_dir", str, None, "output directory", required=True),
    Opt("fer", _bool, False, "score per-frame labels instead of sequences", flag=True),
]

_ANALYZE = [
    Opt("model", str, None, "trained checkpoint", required=True),
    Opt("lexicon", str, None, "lexicon.tsv for pronunciation overlap", required=True),
    Opt("out_dir", str, None, "output directory", required=True),
    Opt("transcripts", str, "", "training corpus.tsv for word counts"),
    Opt("overlap", _bool, False, "only the pronunciation-overlap histograms", flag=True),
    Opt("blank", _bool, False, "only the blank-distance report", flag=True),
    Opt("margin", _bool, False, "only the margin/frequency table", flag=True),
    Opt("seed", int, 0, "seed for the permutation test"),
]

_SCHEMAS = {
    "synth": _SYNTH,
    "train": _TRAIN,
    "decode": _DECODE,
    "score": _SCORE,
    "analyze": _ANALYZE,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wordctc",
        description="Acoustics-to-word CTC toolkit on synthetic or prepared corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        p = sub.add_parser(command, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key=value config file")
        for opt in schema:
            flag = "--" + opt.name.replace("_", "-")
            if opt.flag:
                p.add_argument(flag, action="store_true", help=opt.help)
            else:
                p.add_argument(flag, type=opt.type, help=opt.help + " (default %r)" % (opt.default,))
    return parser


def _parse_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError("%s line %d: expected key=value" % (path, lineno))
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(schema, ns):
    values = {opt.name: opt.default for opt in schema}
    by_name = {opt.name: opt for opt in schema}
    config_path = getattr(ns, "config", None)
    if config_path:
        for key, raw in _parse_config_file(config_path).items():
            if key not in by_name:
                raise ValueError("%s: unknown config key %r" % (config_path, key))
            values[key] = by_name[key].type(raw)
    for opt in schema:
        if hasattr(ns, opt.name):
            values[opt.name] = getattr(ns, opt.name)
    for opt in schema:
        if opt.required and values[opt.name] is None:
            raise ValueError("missing required option --%s" % opt.name.replace("_", "-"))
    return SimpleNamespace(**values)


class _Outputs:
    """Tracks files written by one command; cleanup removes them on failure."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = []

    def write_text(self, name, text):
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.written.append(path)
        return path

    def claim(self, name):
        path = self.root / name
        self.written.append(path)
        return path

    def cleanup(self):
        for path in self.written:
            if path.is_dir():
                for child in sorted(path.rglob("*"), reverse=True):
                    if child.is_file():
                        child.unlink()
                    else:
                        child.rmdir()
                path.rmdir()
            elif path.exists():
                path.unlink()


def _format_config(schema, opts):
    lines = []
    for opt in sorted(schema, key=lambda o: o.name):
        lines.append("%s = %s" % (opt.name, getattr(opts, opt.name)))
    return "\n".join(lines) + "\n"


def cmd_synth(opts, out):
    cfg = SynthConfig(
        seed=opts.seed,
        vocab_size=opts.vocab_size,
        n_phonemes=opts.n_phonemes,
        feature_dim=opts.feature_dim,
        phoneme_duration_mean=opts.phoneme_duration_mean,
        phoneme_duration_std=opts.phoneme_duration_std,
        min_pronunciation=opts.min_pronunciation,
        max_pronunciation=opts.max_pronunciation,
        noise_scale=opts.noise_scale,
        min_words=opts.min_words,
        max_words=opts.max_words,
        n_train=opts.n_train,
        n_dev=opts.n_dev,
        n_test=opts.n_test,
        silence_prob=opts.silence_prob,
        zipf_exponent=opts.zipf_exponent,
    )
    corpus = generate_synthetic(cfg)
    out.claim("lexicon.tsv")
    for split in corpus.splits:
        out.claim(split)
    save_synth_corpus(corpus, out.root)
    out.write_text("synth.config", _format_config(_SYNTH[1:], opts))
    n_frames = sum(u.n_frames for u in corpus.train)
    print(
        "wrote %d/%d/%d utterances (%.1f min of training speech) to %s"
        % (len(corpus.train), len(corpus.dev), len(corpus.test), n_frames / 6000.0, out.root)
    )
    return EXIT_OK


def _vocab_for_mode(mode, lexicon):
    if mode == "word-ctc":
        return Vocabulary(tuple(sorted(lexicon.words)))
    if mode == "phoneme-ctc":
        return Vocabulary(lexicon.inventory)
    if mode == "frame-classifier":
        return Vocabulary(tuple(sorted(lexicon.words)), reserved=SIL)
    raise ValueError("unknown mode %r" % mode)


def cmd_train(opts, out):
    data = Path(opts.data)
    lexicon = load_lexicon(data / "lexicon.tsv")
    words = set(lexicon.words)
    train_utts = load_corpus(data / "train", known_words=words)
    dev_utts = load_corpus(data / "dev", known_words=words)
    if opts.mode == "phoneme-ctc":
        train_utts = convert_transcripts_to_phonemes(train_utts, lexicon)
        dev_utts = convert_transcripts_to_phonemes(dev_utts, lexicon)
    if not 0 < opts.data_fraction <= 1:
        raise ValueError("data fraction must be in (0, 1]")
    init_seed, shuffle_seed, subset_seed = np.random.SeedSequence(opts.seed).spawn(3)
    if opts.data_fraction < 1:
        k = max(1, round(opts.data_fraction * len(train_utts)))
        order = np.random.default_rng(subset_seed).permutation(len(train_utts))
        keep = sorted(int(i) for i in order[:k])
        train_utts = [train_utts[i] for i in keep]
    vocab = _vocab_for_mode(opts.mode, lexicon)
    input_dim = train_utts[0].features.shape[1]
    schedule = downsample_schedule(opts.downsample, opts.layers)
    model = Network.random(
        input_dim,
        [opts.hidden] * opts.layers,
        vocab,
        opts.mode,
        downsample=schedule,
        seed=init_seed,
    )
    if opts.init_from:
        source = load_network(opts.init_from)
        model = transfer_bottom_layers(source, model, opts.init_layers)
    cfg = TrainConfig(
        phase1_epochs=opts.phase1_epochs,
        phase1_lr=opts.phase1_lr,
        phase2_epochs=opts.phase2_epochs,
        phase2_lr=opts.phase2_lr,
        phase2_decay=opts.phase2_decay,
        clip_norm=opts.clip_norm,
        seed=shuffle_seed,
        mode=opts.mode,
    )
    result = train(model, train_utts, dev_utts, cfg)
    save_network(result.model, out.claim("model.net"))
    out.write_text("trainlog.tsv", format_train_log(result.log))
    print(
        "best dev metric %.4f at epoch %d (%d utterances, %d epochs)"
        % (result.best_metric, result.best_epoch, len(train_utts), len(result.log))
    )
    return EXIT_OK


def cmd_decode(opts, out):
    model = load_network(opts.model)
    utts = load_corpus(opts.data)
    lines = []
    for u in utts:
        try:
            lattice, _ = network_forward(model, u.features)
        except SequenceTooShortError:
            lines.append("%s\t" % u.utt_id)
            continue
        if model.mode == "frame-classifier":
            pred = classifier_frame_predictions(model, lattice)
            text = " ".join(model.vocab.label_of(int(i)) for i in pred)
        else:
            text = " ".join(model.vocab.decode(greedy_decode(lattice)))
        lines.append("%s\t%s" % (u.utt_id, text))
    out.write_text("hypotheses.tsv", "\n".join(lines) + "\n")
    print("decoded %d utterances" % len(utts))
    return EXIT_OK


def cmd_score(opts, out):
    refs = load_transcripts(opts.ref)
    hyps = load_transcripts(opts.hyp)
    missing = [utt_id for utt_id in hyps if utt_id not in refs]
    if missing:
        raise ManifestError("%s: no reference for %r" % (opts.hyp, missing[0]))
    if opts.fer:
        rows = []
        for utt_id, hyp in hyps.items():
            ref = refs[utt_id]
            if len(ref) != len(hyp):
                raise ManifestError(
                    "frame counts differ for %r: %d vs %d" % (utt_id, len(ref), len(hyp))
                )
            rows.append((utt_id, sum(a != b for a, b in zip(ref, hyp)), len(ref)))
        out.write_text("report.tsv", fer_report(rows))
        total = sum(r[2] for r in rows)
        wrong = sum(r[1] for r in rows)
        print("FER%% %.4f over %d frames" % (100.0 * wrong / total if total else 0.0, total))
        return EXIT_OK
    stats = [(utt_id, edit_distance(refs[utt_id], hyp)) for utt_id, hyp in hyps.items()]
    out.write_text("report.tsv", score_report(stats))
    pooled = pool(st for _, st in stats)
    print("WER%% %.4f over %d reference words" % (error_rate(pooled), pooled.ref_len))
    return EXIT_OK


def cmd_analyze(opts, out):
    model = load_network(opts.model)
    lexicon = load_lexicon(opts.lexicon)
    emb = embedding_matrix(model)
    wanted = {"overlap": opts.overlap, "blank": opts.blank, "margin": opts.margin}
    if not any(wanted.values()):
        wanted = {k: True for k in wanted}
    summary = []
    if wanted["overlap"]:
        hist = overlap_histograms(emb, lexicon)
        out.write_text(
            "overlap_histogram.tsv",
            histogram_tsv(hist.bin_edges, hist.close_counts, hist.far_counts, names=("close", "far")),
        )
        pvalue = permutation_pvalue(hist.close_values, hist.far_values, seed=opts.seed)
        summary.append(("close_overlap_mean", hist.close_mean))
        summary.append(("far_overlap_mean", hist.far_mean))
        summary.append(("overlap_permutation_pvalue", pvalue))
    if wanted["blank"]:
        report = blank_distance_report(emb)
        out.write_text(
            "blank_histogram.tsv", histogram_tsv(report.bin_edges, report.counts)
        )
        summary.append(("blank_mean_distance", report.blank_mean))
        summary.append(("word_word_median_distance", report.word_word_median))
    if wanted["margin"]:
        transcripts = []
        if opts.transcripts:
            transcripts = list(load_transcripts(opts.transcripts).values())
        table = frequency_margin_table(emb, transcripts)
        rows = [
            (w, int(c), float(m))
            for w, c, m in zip(table.words, table.counts, table.margins)
        ]
        out.write_text("margin_table.tsv", table_tsv(("word", "count", "margin"), rows))
        corr = "undefined" if table.rank_correlation is None else table.rank_correlation
        summary.append(("frequency_margin_spearman", corr))
    out.write_text(
        "summary.tsv",
        table_tsv(("metric", "value"), summary),
    )
    for name, value in summary:
        print("%s\t%s" % (name, value))
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "decode": cmd_decode,
    "score": cmd_score,
    "analyze": cmd_analyze,
}


def main(argv=None):
    ns = _build_parser().parse_args(argv)
    try:
        opts = _resolve(_SCHEMAS[ns.command], ns)
    except (ValueError, OSError) as exc:
        print("wordctc %s: %s" % (ns.command, exc), file=sys.stderr)
        return EXIT_CONFIG
    out = None
    try:
        out = _Outputs(opts.out_dir)
        return _COMMANDS[ns.command](opts, out)
    except Exception as exc:
        if out is not None:
            out.cleanup()
        if isinstance(exc, DataFormatError):
            code = EXIT_DATA
        elif isinstance(exc, TrainingError):
            code = EXIT_TRAINING
        elif isinstance(exc, (ValueError, KeyError, OSError)):
            code = EXIT_CONFIG
        else:
            raise
        print("wordctc %s: %s" % (ns.command, exc), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
