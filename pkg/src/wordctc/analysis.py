"""Embedding-space diagnostics over the softmax weight rows.

All of these read the output weight matrix only (one row per label, the
reserved blank row last; the softmax bias is deliberately excluded) and
report neighbor structure: who sits close to whom in L2 distance, how far
the blank sits from everything, how pronunciation overlap relates to
proximity, and how a word's training-set frequency relates to its margin.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats


@dataclass(frozen=True)
class EmbeddingMatrix:
    vectors: np.ndarray
    vocab: object

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float64))
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.vocab.size:
            raise ValueError(
                "need one row per label (%d), got %r" % (self.vocab.size, self.vectors.shape)
            )


def embedding_matrix(net):
    """Softmax weight rows of a network as an EmbeddingMatrix."""
    return EmbeddingMatrix(net.w_out.copy(), net.vocab)


@dataclass(frozen=True)
class NeighborList:
    ids: tuple
    distances: tuple


def _distances_from(emb, row_id):
    return np.linalg.norm(emb.vectors - emb.vectors[row_id], axis=1)


def neighbors(emb, word, k):
    """The k nearest rows by L2 distance, the query row excluded.

    Ties are broken toward the lower label id.  `word` may be a label
    string or a row id.
    """
    row = word if isinstance(word, (int, np.integer)) else emb.vocab.id_of(word)
    n = emb.vectors.shape[0]
    if not 0 <= row < n:
        raise ValueError("row id %d out of range" % row)
    if not 1 <= k <= n - 1:
        raise ValueError("k must be in [1, %d], got %d" % (n - 1, k))
    dist = _distances_from(emb, row)
    ids = np.concatenate([np.arange(row), np.arange(row + 1, n)])
    dist = dist[ids]
    order = np.argsort(dist, kind="stable")[:k]
    return NeighborList(
        tuple(int(i) for i in ids[order]), tuple(float(d) for d in dist[order])
    )


def margin(emb, word):
    """Distance from a word's row to its first nearest neighbor."""
    return neighbors(emb, word, 1).distances[0]


def pronunciation_overlap(word_a, word_b, lexicon):
    """Shared phoneme tokens over the shorter pronunciation's length.

    "Shared" counts multiset intersection, so a repeated phoneme has to be
    repeated in both words to count twice.  Always in [0, 1] and symmetric.
    """
    pron_a = Counter(lexicon.pronunciation(word_a))
    pron_b = Counter(lexicon.pronunciation(word_b))
    shared = sum((pron_a & pron_b).values())
    return shared / min(sum(pron_a.values()), sum(pron_b.values()))


@dataclass(frozen=True)
class OverlapHistograms:
    close_values: np.ndarray
    far_values: np.ndarray
    bin_edges: np.ndarray
    close_counts: np.ndarray
    far_counts: np.ndarray

    @property
    def close_mean(self):
        return float(self.close_values.mean())

    @property
    def far_mean(self):
        return float(self.far_values.mean())


def overlap_histograms(emb, lexicon, close_ranks=(1, 3), far_ranks=(48, 50), n_bins=20):
    """Pronunciation overlap of every word against its close and far neighbors.

    Only rows with a pronunciation participate (the blank row never does),
    both as queries and as neighbor candidates.  Ranks are 1-based and
    inclusive; the defaults compare neighbors 1-3 against neighbors 48-50.
    """
    words = [w for w in emb.vocab.labels if w in lexicon]
    needed = far_ranks[1] + 1
    if len(words) < needed:
        raise ValueError("need at least %d words with pronunciations, have %d" % (needed, len(words)))
    rows = np.array([emb.vocab.id_of(w) for w in words])
    sub = emb.vectors[rows]
    close_values = []
    far_values = []
    for qi, w in enumerate(words):
        dist = np.linalg.norm(sub - sub[qi], axis=1)
        ids = np.concatenate([np.arange(qi), np.arange(qi + 1, len(words))])
        order = np.argsort(dist[ids], kind="stable")
        ranked = ids[order]
        for r in range(close_ranks[0] - 1, close_ranks[1]):
            close_values.append(pronunciation_overlap(w, words[int(ranked[r])], lexicon))
        for r in range(far_ranks[0] - 1, far_ranks[1]):
            far_values.append(pronunciation_overlap(w, words[int(ranked[r])], lexicon))
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    close_values = np.asarray(close_values)
    far_values = np.asarray(far_values)
    return OverlapHistograms(
        close_values,
        far_values,
        edges,
        np.histogram(close_values, bins=edges)[0],
        np.histogram(far_values, bins=edges)[0],
    )


def permutation_pvalue(a, b, n_rounds=2000, seed=0):
    """One-sided permutation p-value for mean(a) > mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    observed = a.mean() - b.mean()
    pooled = np.concatenate([a, b])
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_rounds):
        perm = rng.permutation(pooled)
        if perm[: len(a)].mean() - perm[len(a) :].mean() >= observed:
            hits += 1
    return (hits + 1) / (n_rounds + 1)


@dataclass(frozen=True)
class BlankDistanceReport:
    pooled_distances: np.ndarray
    per_word_means: np.ndarray
    blank_mean: float
    word_word_median: float
    bin_edges: np.ndarray
    counts: np.ndarray


def blank_distance_report(emb, top=25, n_bins=20):
    """Word-to-word neighbor distances pooled, next to the blank's mean.

    For every word: distances to its `top` nearest words (the blank row is
    not a candidate).  The blank's mean distance to its own `top` nearest
    words is reported against the pooled histogram; per-word mean distances
    are included as well.
    """
    n_words = len(emb.vocab.labels)
    if n_words < top + 1:
        raise ValueError("need at least %d words, have %d" % (top + 1, n_words))
    word_rows = emb.vectors[:n_words]
    pooled = []
    per_word = []
    for i in range(n_words):
        dist = np.linalg.norm(word_rows - word_rows[i], axis=1)
        dist = np.delete(dist, i)
        dist.sort()
        pooled.append(dist[:top])
        per_word.append(dist[:top].mean())
    pooled = np.concatenate(pooled)
    blank_dist = np.linalg.norm(word_rows - emb.vectors[n_words], axis=1)
    blank_dist.sort()
    blank_mean = float(blank_dist[:top].mean())
    hi = max(float(pooled.max()), blank_mean)
    edges = np.linspace(0.0, hi if hi > 0 else 1.0, n_bins + 1)
    return BlankDistanceReport(
        pooled,
        np.asarray(per_word),
        blank_mean,
        float(np.median(pooled)),
        edges,
        np.histogram(pooled, bins=edges)[0],
    )


@dataclass(frozen=True)
class FrequencyMarginTable:
    words: tuple
    counts: np.ndarray
    margins: np.ndarray
    rank_correlation: object  # float, or None when either column is constant


def frequency_margin_table(emb, transcripts):
    """Per-word training-set count next to its margin, with their Spearman
    rank correlation.  The correlation is None (flagged undefined) when all
    counts or all margins are equal."""
    counter = Counter(w for transcript in transcripts for w in transcript)
    words = emb.vocab.labels
    counts = np.array([counter.get(w, 0) for w in words], dtype=np.float64)
    margins = np.array([margin(emb, w) for w in words])
    if np.unique(counts).size < 2 or np.unique(margins).size < 2:
        corr = None
    else:
        corr = float(scipy_stats.spearmanr(counts, margins).statistic)
    return FrequencyMarginTable(tuple(words), counts, margins, corr)


# ---------------------------------------------------------------------------
# delimited-text rendering (one-line header, suitable for external plotting)


def histogram_tsv(edges, *count_columns, names=("count",)):
    lines = ["bin_lo\tbin_hi\t" + "\t".join(names)]
    for i in range(len(edges) - 1):
        row = [repr(float(edges[i])), repr(float(edges[i + 1]))]
        row.extend(str(int(col[i])) for col in count_columns)
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def table_tsv(header_fields, rows):
    lines = ["\t".join(header_fields)]
    for row in rows:
        lines.append("\t".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
