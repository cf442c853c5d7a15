"""Dataset types, on-disk formats, and the synthetic corpus generator.

File formats (all integers little-endian, all text UTF-8, tab-separated):

  *.feat       binary features: magic "FEAT", u32 version, u32 T, u32 d,
               then T*d float32 values row-major.
  corpus.tsv   one utterance per line: id, feature path (relative to the
               manifest), space-separated transcript.
  lexicon.tsv  one word per line: word, space-separated phonemes.
  align.tsv    one utterance per line: id, space-separated per-frame word
               labels (SIL marks silence).

The generator builds every utterance from per-phoneme prototype vectors,
each repeated for a duration drawn from a truncated normal, plus Gaussian
noise.  All randomness comes from a single numpy PCG64 stream
(numpy.random.default_rng) seeded from the config, so equal configs give
bit-identical corpora on any platform.
"""

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

SIL = "SIL"

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sIII")


class DataFormatError(ValueError):
    """Malformed on-disk data; the message names the file and position."""


class FeatureFileError(DataFormatError):
    """Bad magic, version, or trailing bytes in a feature file."""


class TruncatedFileError(DataFormatError):
    """Feature payload shorter than its header promises."""


class ManifestError(DataFormatError):
    """Bad record in a manifest, lexicon, or alignment file."""


class UnknownWordError(DataFormatError):
    """Transcript word missing from the vocabulary or lexicon."""


@dataclass
class Utterance:
    utt_id: str
    features: np.ndarray
    transcript: tuple
    alignment: tuple = None

    @property
    def n_frames(self):
        return self.features.shape[0]


@dataclass(frozen=True)
class Lexicon:
    """Word -> canonical pronunciation, plus the phoneme inventory."""

    entries: dict

    def __post_init__(self):
        for word, pron in self.entries.items():
            if not pron:
                raise ValueError("empty pronunciation for %r" % word)

    @property
    def words(self):
        return tuple(self.entries)

    @property
    def inventory(self):
        """Sorted distinct phonemes appearing in the pronunciations."""
        seen = set()
        for pron in self.entries.values():
            seen.update(pron)
        return tuple(sorted(seen))

    def __contains__(self, word):
        return word in self.entries

    def pronunciation(self, word):
        try:
            return self.entries[word]
        except KeyError:
            raise UnknownWordError("no pronunciation for %r" % (word,)) from None


def alignment_to_transcript(labels):
    """Collapse per-frame word labels to the transcript: merge runs, drop SIL."""
    out = []
    prev = None
    for lab in labels:
        if lab != prev:
            out.append(lab)
            prev = lab
    return tuple(w for w in out if w != SIL)


# ---------------------------------------------------------------------------
# feature files


def save_features(path, features):
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("features must be a (T, d) matrix")
    with open(path, "wb") as fh:
        fh.write(_FEAT_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def load_features(path):
    data = Path(path).read_bytes()
    if len(data) < _FEAT_HEADER.size:
        raise FeatureFileError("%s: header truncated at byte %d" % (path, len(data)))
    magic, version, n_frames, dim = _FEAT_HEADER.unpack_from(data)
    if magic != FEAT_MAGIC:
        raise FeatureFileError("%s: bad magic %r" % (path, magic))
    if version != FEAT_VERSION:
        raise FeatureFileError("%s: unsupported feature version %d" % (path, version))
    expected = _FEAT_HEADER.size + 4 * n_frames * dim
    if len(data) < expected:
        raise TruncatedFileError(
            "%s: payload ends at byte %d, header promises %d bytes" % (path, len(data), expected)
        )
    if len(data) > expected:
        raise FeatureFileError("%s: %d trailing bytes" % (path, len(data) - expected))
    return (
        np.frombuffer(data, dtype="<f4", count=n_frames * dim, offset=_FEAT_HEADER.size)
        .reshape(n_frames, dim)
        .copy()
    )


# ---------------------------------------------------------------------------
# lexicon and corpus files


def save_lexicon(lexicon, path):
    lines = ["%s\t%s" % (w, " ".join(p)) for w, p in lexicon.entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_lexicon(path):
    """Read a lexicon; a word listed more than once keeps its first
    (canonical) pronunciation."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ManifestError("%s line %d: expected word<TAB>phonemes" % (path, lineno))
        word, pron = parts[0], tuple(parts[1].split())
        if not pron:
            raise ManifestError("%s line %d: empty pronunciation for %r" % (path, lineno, word))
        entries.setdefault(word, pron)
    return Lexicon(entries)


def save_corpus(utterances, out_dir):
    """Write corpus.tsv, feats/*.feat, and align.tsv (when alignments exist)."""
    out = Path(out_dir)
    (out / "feats").mkdir(parents=True, exist_ok=True)
    manifest = []
    aligned = []
    for u in utterances:
        rel = "feats/%s.feat" % u.utt_id
        save_features(out / rel, u.features)
        manifest.append("%s\t%s\t%s" % (u.utt_id, rel, " ".join(u.transcript)))
        if u.alignment is not None:
            aligned.append("%s\t%s" % (u.utt_id, " ".join(u.alignment)))
    (out / "corpus.tsv").write_text("\n".join(manifest) + "\n")
    if aligned:
        (out / "align.tsv").write_text("\n".join(aligned) + "\n")


def load_corpus(corpus_dir, known_words=None):
    """Read a corpus directory written by save_corpus.

    When known_words is given, every transcript word must be in it.
    Alignments (when present) must have one label per frame and collapse to
    the transcript.
    """
    root = Path(corpus_dir)
    manifest = root / "corpus.tsv"
    if not manifest.exists():
        raise ManifestError("%s: no corpus.tsv" % root)
    alignments = {}
    align_path = root / "align.tsv"
    if align_path.exists():
        for lineno, raw in enumerate(align_path.read_text().splitlines(), 1):
            if not raw.strip():
                continue
            parts = raw.split("\t")
            if len(parts) != 2:
                raise ManifestError("%s line %d: expected id<TAB>labels" % (align_path, lineno))
            if parts[0] in alignments:
                raise ManifestError("%s line %d: duplicate id %r" % (align_path, lineno, parts[0]))
            alignments[parts[0]] = tuple(parts[1].split())
    utterances = []
    seen = set()
    for lineno, raw in enumerate(manifest.read_text().splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ManifestError(
                "%s line %d: expected id<TAB>path<TAB>transcript" % (manifest, lineno)
            )
        utt_id, rel, text = parts
        if utt_id in seen:
            raise ManifestError("%s line %d: duplicate id %r" % (manifest, lineno, utt_id))
        seen.add(utt_id)
        transcript = tuple(text.split())
        if known_words is not None:
            for w in transcript:
                if w not in known_words:
                    raise UnknownWordError(
                        "%s line %d: unknown word %r" % (manifest, lineno, w)
                    )
        features = load_features(root / rel)
        alignment = alignments.pop(utt_id, None)
        if alignment is not None:
            if len(alignment) != features.shape[0]:
                raise ManifestError(
                    "%s: alignment for %r has %d labels for %d frames"
                    % (align_path, utt_id, len(alignment), features.shape[0])
                )
            if alignment_to_transcript(alignment) != transcript:
                raise ManifestError(
                    "%s: alignment for %r does not collapse to its transcript"
                    % (align_path, utt_id)
                )
        utterances.append(Utterance(utt_id, features, transcript, alignment))
    if alignments:
        raise ManifestError(
            "%s: alignment for unknown utterance %r" % (align_path, sorted(alignments)[0])
        )
    return utterances


def load_transcripts(path):
    """id -> transcript from a corpus.tsv (3 columns) or an id<TAB>text file.

    Preserves file order; the text column may be empty.
    """
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) == 3:
            utt_id, text = parts[0], parts[2]
        elif len(parts) == 2:
            utt_id, text = parts
        else:
            raise ManifestError("%s line %d: expected 2 or 3 tab-separated fields" % (path, lineno))
        if utt_id in out:
            raise ManifestError("%s line %d: duplicate id %r" % (path, lineno, utt_id))
        out[utt_id] = tuple(text.split())
    return out


def train_dev_split(utterances, fraction, seed):
    """Seeded partition into (train, dev); dev gets floor((1 - fraction) * n).

    The fraction is interpreted exactly (via its decimal literal), so e.g.
    0.9 of 10 utterances is a 9/1 split.  Both sides keep the original
    relative order.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be strictly between 0 and 1")
    n = len(utterances)
    n_dev = int((1 - Fraction(str(fraction))) * n)
    if n_dev == 0 or n_dev == n:
        raise ValueError("split of %d utterances at %r leaves an empty side" % (n, fraction))
    order = np.random.default_rng(seed).permutation(n)
    dev_idx = set(int(i) for i in order[:n_dev])
    train = [u for i, u in enumerate(utterances) if i not in dev_idx]
    dev = [u for i, u in enumerate(utterances) if i in dev_idx]
    return train, dev


# ---------------------------------------------------------------------------
# synthetic corpus generator


@dataclass
class SynthConfig:
    """Knobs for the self-contained toy corpus.

    Durations are in 10 ms frames; the defaults put a phoneme at
    8.16 +/- 4.67 frames (81.6 +/- 46.7 ms), which matches typical read
    speech.  zipf_exponent skews how often words occur (0 means uniform).
    """

    seed: int = 0
    vocab_size: int = 50
    n_phonemes: int = 12
    feature_dim: int = 8
    phoneme_duration_mean: float = 8.16
    phoneme_duration_std: float = 4.67
    min_pronunciation: int = 2
    max_pronunciation: int = 5
    noise_scale: float = 0.3
    min_words: int = 4
    max_words: int = 8
    n_train: int = 800
    n_dev: int = 40
    n_test: int = 40
    silence_prob: float = 0.3
    zipf_exponent: float = 1.0


@dataclass
class SynthCorpus:
    train: list
    dev: list
    test: list
    lexicon: Lexicon

    @property
    def splits(self):
        return {"train": self.train, "dev": self.dev, "test": self.test}


def _check_config(cfg):
    if cfg.vocab_size < 1 or cfg.n_phonemes < 1 or cfg.feature_dim < 1:
        raise ValueError("vocabulary, phoneme inventory, and feature dim must be positive")
    if cfg.phoneme_duration_mean <= 0 or cfg.phoneme_duration_std < 0:
        raise ValueError("durations must be positive")
    if not 1 <= cfg.min_pronunciation <= cfg.max_pronunciation:
        raise ValueError("bad pronunciation length range")
    if not 1 <= cfg.min_words <= cfg.max_words:
        raise ValueError("bad words-per-utterance range")
    if min(cfg.n_train, cfg.n_dev, cfg.n_test) < 1:
        raise ValueError("every split needs at least one utterance")
    if not 0 <= cfg.silence_prob <= 1:
        raise ValueError("silence_prob must be a probability")
    if cfg.noise_scale < 0:
        raise ValueError("noise_scale must be nonnegative")
    n_prons = 0
    for length in range(cfg.min_pronunciation, cfg.max_pronunciation + 1):
        n_prons += cfg.n_phonemes**length
        if n_prons >= cfg.vocab_size:
            break
    if n_prons < cfg.vocab_size:
        raise ValueError("not enough distinct pronunciations for the vocabulary")


def _duration(rng, mean, std):
    # symmetric rejection window keeps the sample mean at the configured
    # mean; truncating only from below would bias it upward
    lo = 0.5
    hi = 2.0 * mean - 0.5
    if hi <= lo:
        hi = math.inf
    while True:
        x = rng.normal(mean, std)
        if lo <= x <= hi:
            return int(round(x))


def generate_synthetic(cfg):
    """Deterministic toy corpus with frame alignments and a lexicon.

    Each phoneme gets a fixed random prototype vector; a word's realization
    concatenates its phonemes' prototypes, each repeated for a drawn
    duration, and i.i.d. Gaussian noise is added on top.  Silence (an
    all-zero prototype) is inserted between words at silence_prob, always
    between repeats of the same word so alignments collapse exactly to the
    transcript, and optionally at the utterance edges.
    """
    _check_config(cfg)
    rng = np.random.default_rng(cfg.seed)
    width = max(2, len(str(cfg.n_phonemes - 1)))
    phonemes = ["p%0*d" % (width, i) for i in range(cfg.n_phonemes)]
    prototypes = rng.normal(0.0, 1.0, size=(cfg.n_phonemes, cfg.feature_dim))
    silence_proto = np.zeros(cfg.feature_dim)
    width = max(2, len(str(cfg.vocab_size - 1)))
    words = ["w%0*d" % (width, i) for i in range(cfg.vocab_size)]
    entries = {}
    seen = set()
    for w in words:
        while True:
            length = int(rng.integers(cfg.min_pronunciation, cfg.max_pronunciation + 1))
            pron = tuple(
                phonemes[int(i)] for i in rng.integers(0, cfg.n_phonemes, size=length)
            )
            if pron not in seen:
                break
        seen.add(pron)
        entries[w] = pron
    lexicon = Lexicon(entries)
    phoneme_row = {p: i for i, p in enumerate(phonemes)}

    weights = 1.0 / np.arange(1.0, cfg.vocab_size + 1.0) ** cfg.zipf_exponent
    weights /= weights.sum()

    def make_utterance(utt_id):
        n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
        chosen = [words[int(i)] for i in rng.choice(cfg.vocab_size, size=n_words, p=weights)]
        blocks = []
        labels = []

        def silence():
            dur = _duration(rng, cfg.phoneme_duration_mean, cfg.phoneme_duration_std)
            blocks.append(np.tile(silence_proto, (dur, 1)))
            labels.extend([SIL] * dur)

        if rng.random() < cfg.silence_prob:
            silence()
        prev = None
        for w in chosen:
            if prev is not None and (w == prev or rng.random() < cfg.silence_prob):
                silence()
            for ph in lexicon.pronunciation(w):
                dur = _duration(rng, cfg.phoneme_duration_mean, cfg.phoneme_duration_std)
                blocks.append(np.tile(prototypes[phoneme_row[ph]], (dur, 1)))
                labels.extend([w] * dur)
            prev = w
        if rng.random() < cfg.silence_prob:
            silence()
        feats = np.concatenate(blocks)
        feats = feats + rng.normal(0.0, cfg.noise_scale, size=feats.shape)
        return Utterance(utt_id, feats.astype(np.float32), tuple(chosen), tuple(labels))

    splits = {}
    for split, count in (("train", cfg.n_train), ("dev", cfg.n_dev), ("test", cfg.n_test)):
        width = len(str(count - 1)) if count > 1 else 1
        splits[split] = [make_utterance("%s-%0*d" % (split, width, i)) for i in range(count)]
    return SynthCorpus(splits["train"], splits["dev"], splits["test"], lexicon)


def save_synth_corpus(corpus, out_dir):
    """Write lexicon.tsv plus one corpus directory per split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_lexicon(corpus.lexicon, out / "lexicon.tsv")
    for split, utts in corpus.splits.items():
        save_corpus(utts, out / split)
