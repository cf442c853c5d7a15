"""SGD training loops for word CTC, phoneme CTC, and the word frame classifier.

The recipe is fixed: mini-batches of one utterance, global-norm clipping at
5, a constant-rate first phase, then a second phase seeded from the first
phase's best dev checkpoint with the rate decayed by 0.75 every epoch.  The
best model on dev over all epochs is returned.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .ctc import InfeasibleTargetError, ctc_log_likelihood, ctc_loss_and_gradient, greedy_decode
from .data import Utterance
from .metrics import EditStats, edit_distance, error_rate
from .network import SequenceTooShortError, network_backward, network_forward, sgd_update
from .numerics import clip_global_norm

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training cannot proceed (for example, every utterance is infeasible)."""


@dataclass
class TrainConfig:
    phase1_epochs: int = 20
    phase1_lr: float = 0.05
    phase2_epochs: int = 20
    phase2_lr: float = 0.0375
    phase2_decay: float = 0.75
    clip_norm: float = 5.0
    seed: int = 0
    mode: str = "word-ctc"

    def __post_init__(self):
        if self.phase1_lr <= 0 or self.phase2_lr <= 0:
            raise ValueError("step sizes must be positive")
        if not 0 < self.phase2_decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")
        if self.clip_norm <= 0:
            raise ValueError("clip norm must be positive")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    phase: int
    lr: float
    train_loss: float
    train_perplexity: float
    dev_metric: float
    skipped: int
    clip_events: int = 0  # updates where the norm bound actually bit


@dataclass
class TrainResult:
    model: object
    log: list
    best_epoch: int
    best_metric: float


def convert_transcripts_to_phonemes(utterances, lexicon):
    """Replace each word by its canonical pronunciation, concatenated in order.

    Word-level alignments are dropped since they no longer match the new
    transcripts.
    """
    out = []
    for u in utterances:
        phones = []
        for w in u.transcript:
            phones.extend(lexicon.pronunciation(w))
        out.append(Utterance(u.utt_id, u.features, tuple(phones), None))
    return out


def _prepare(utterances, model):
    """Pair each utterance with its encoded target for the model's mode."""
    vocab = model.vocab
    prepared = []
    for u in utterances:
        if model.mode == "frame-classifier":
            if u.alignment is None:
                raise ValueError("utterance %r has no frame alignment" % u.utt_id)
            target = np.array([vocab.id_of(lab) for lab in u.alignment], dtype=np.int64)
        else:
            target = vocab.encode(u.transcript)
        prepared.append((u.utt_id, u.features, target))
    return prepared


def frame_loss_and_gradient(net, lattice, frame_labels):
    """Cross entropy against per-frame labels with the configured lookahead.

    Output position t is scored against the label of frame t - lookahead;
    the first `lookahead` positions are untrained and get zero gradient.
    Frame classification requires the full frame rate (no down-sampling).
    """
    if net.rate_factor != 1:
        raise ValueError("frame classification requires down-sampling factor 1")
    T = lattice.shape[0]
    if len(frame_labels) != T:
        raise ValueError("%d frame labels for %d frames" % (len(frame_labels), T))
    positions = np.arange(net.lookahead, T)
    targets = np.asarray(frame_labels)[positions - net.lookahead]
    loss = -float(lattice[positions, targets].sum())
    grad = np.zeros_like(lattice)
    grad[positions] = np.exp(lattice[positions])
    grad[positions, targets] -= 1.0
    return loss, grad, len(positions)


def classifier_frame_predictions(net, lattice):
    """Predicted label id per original frame.

    The prediction for frame s comes from output position s + lookahead;
    the last `lookahead` frames reuse the final output, which is all the
    model has seen when the stream ends.
    """
    T = lattice.shape[0]
    best = np.argmax(lattice, axis=1)
    idx = np.minimum(np.arange(T) + net.lookahead, T - 1)
    return best[idx]


def _utterance_pass(model, features, target):
    lattice, tape = network_forward(model, features)
    if model.mode == "frame-classifier":
        loss, d_logits, n_labels = frame_loss_and_gradient(model, lattice, target)
    else:
        loss, d_logits = ctc_loss_and_gradient(lattice, target)
        n_labels = len(target)
    return loss, d_logits, n_labels, tape


def evaluate(model, utterances):
    """Pooled dev metric for the model's mode: WER/PER for CTC, FER otherwise.

    Utterances too short to run through the network count as fully deleted
    (CTC) or fully wrong (classifier) rather than being dropped.
    """
    return _evaluate_prepared(model, _prepare(utterances, model))


def _evaluate_prepared(model, prepared):
    if model.mode == "frame-classifier":
        if model.rate_factor != 1:
            raise ValueError("frame classification requires down-sampling factor 1")
        wrong = total = 0
        for _, features, target in prepared:
            try:
                lattice, _ = network_forward(model, features)
            except SequenceTooShortError:
                wrong += len(target)
                total += len(target)
                continue
            pred = classifier_frame_predictions(model, lattice)
            wrong += int(np.sum(pred != target))
            total += len(target)
        if total == 0:
            raise ValueError("no frames to evaluate")
        return 100.0 * wrong / total
    pooled = EditStats(0, 0, 0, 0)
    for _, features, target in prepared:
        try:
            lattice, _ = network_forward(model, features)
            hyp = greedy_decode(lattice)
        except SequenceTooShortError:
            hyp = ()
        pooled = pooled + edit_distance(target, hyp)
    return error_rate(pooled)


def training_perplexity(model, utterances):
    """Summed negative log-likelihood divided by the number of labels.

    CTC modes count target labels; the frame classifier counts scored
    frames.  Infeasible utterances contribute +inf.
    """
    total = 0.0
    n_labels = 0
    for _, features, target in _prepare(utterances, model):
        lattice, _ = network_forward(model, features)
        if model.mode == "frame-classifier":
            loss, _, n = frame_loss_and_gradient(model, lattice, target)
        else:
            loss = -ctc_log_likelihood(lattice, target)
            n = len(target)
        total += loss
        n_labels += n
    if n_labels == 0:
        raise ValueError("no labels to normalize by")
    return total / n_labels


def train(model, train_utterances, dev_utterances, cfg):
    """Run the two-phase recipe; returns the best-on-dev model and epoch log.

    Every epoch shuffles the utterance order deterministically from
    cfg.seed.  Infeasible utterances are skipped with a logged warning and
    counted in the epoch record; an epoch with no usable utterance raises
    TrainingError.
    """
    if not train_utterances or not dev_utterances:
        raise ValueError("train and dev sets must be nonempty")
    if cfg.mode != model.mode:
        raise ValueError("config mode %r != model mode %r" % (cfg.mode, model.mode))
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    prepared = _prepare(train_utterances, model)
    dev_prepared = _prepare(dev_utterances, model)

    records = []
    best_model = model.copy()
    best_metric = math.inf
    best_epoch = 0
    epoch = 0
    for phase in (1, 2):
        n_epochs = cfg.phase1_epochs if phase == 1 else cfg.phase2_epochs
        if phase == 2 and best_epoch > 0:
            model = best_model.copy()
        for e in range(1, n_epochs + 1):
            lr = cfg.phase1_lr if phase == 1 else cfg.phase2_lr * cfg.phase2_decay ** (e - 1)
            epoch += 1
            loss_sum = 0.0
            n_labels = 0
            skipped = 0
            updates = 0
            clip_events = 0
            for i in rng.permutation(len(prepared)):
                utt_id, features, target = prepared[i]
                try:
                    loss, d_logits, n, tape = _utterance_pass(model, features, target)
                except (InfeasibleTargetError, SequenceTooShortError) as exc:
                    skipped += 1
                    log.warning("epoch %d: skipping %s: %s", epoch, utt_id, exc)
                    continue
                grads, _ = network_backward(model, tape, d_logits)
                clipped, factor = clip_global_norm(grads.arrays(), cfg.clip_norm)
                clip_events += factor < 1.0
                sgd_update(model, clipped, lr)
                loss_sum += loss
                n_labels += n
                updates += 1
            if updates == 0:
                raise TrainingError("epoch %d: every utterance was infeasible" % epoch)
            dev_metric = _evaluate_prepared(model, dev_prepared)
            perplexity = loss_sum / n_labels if n_labels else math.inf
            records.append(
                EpochRecord(epoch, phase, lr, loss_sum, perplexity, dev_metric,
                            skipped, clip_events)
            )
            if dev_metric < best_metric:
                best_metric = dev_metric
                best_model = model.copy()
                best_epoch = epoch
    if best_epoch == 0:
        raise TrainingError("no epochs were run")
    return TrainResult(best_model, records, best_epoch, best_metric)


def format_train_log(records):
    """One TSV record per epoch, fields in fixed order:
    epoch, phase, lr, train_loss, train_perplexity, dev_metric, skipped."""
    lines = [
        "\t".join(
            (
                str(r.epoch),
                str(r.phase),
                repr(r.lr),
                repr(r.train_loss),
                repr(r.train_perplexity),
                repr(r.dev_metric),
                str(r.skipped),
            )
        )
        for r in records
    ]
    return "\n".join(lines) + "\n"
