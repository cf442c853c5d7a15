"""Train a small acoustics-to-word CTC model on synthetic speech.

Generates a reduced toy corpus (so the demo finishes in about a minute),
runs a shortened version of the two-phase SGD recipe, and scores the result
with greedy decoding.  Raise the sizes/epochs toward the defaults for a
model that actually converges.
"""

import wordctc as w

cfg = w.SynthConfig(seed=0, vocab_size=20, n_train=150, n_dev=25, n_test=25)
corpus = w.generate_synthetic(cfg)
minutes = sum(u.n_frames for u in corpus.train) / 6000.0
print("corpus: %d words, %.1f minutes of training speech" % (cfg.vocab_size, minutes))

vocab = w.Vocabulary(tuple(sorted(corpus.lexicon.words)))
net = w.Network.random(cfg.feature_dim, [32, 32], vocab, "word-ctc",
                       downsample=w.downsample_schedule(4, 2), seed=1)

# The full recipe is 20 + 20 epochs (lr 0.05, then 0.0375 decayed by 0.75,
# clip norm 5, one utterance per update); this demo trims the epoch counts.
recipe = w.TrainConfig(phase1_epochs=14, phase2_epochs=6, seed=7)
result = w.train(net, corpus.train, corpus.dev, recipe)

print("\nepoch  phase  lr       train-perplexity  dev-WER%  skipped")
for r in result.log:
    print("%4d   %d      %.5f  %10.3f      %8.2f  %d"
          % (r.epoch, r.phase, r.lr, r.train_perplexity, r.dev_metric, r.skipped))
print("\nbest dev WER %.2f%% at epoch %d" % (result.best_metric, result.best_epoch))

# Score the held-out test split by hand with greedy decoding.
stats = w.EditStats(0, 0, 0, 0)
for utt in corpus.test:
    lattice, _ = w.network_forward(result.model, utt.features)
    hyp = vocab.decode(w.greedy_decode(lattice))
    stats = stats + w.edit_distance(utt.transcript, hyp)
print("test WER %.2f%%  (S=%d D=%d I=%d over %d words)"
      % (w.error_rate(stats), stats.substitutions, stats.deletions,
         stats.insertions, stats.ref_len))

example = corpus.test[0]
lattice, _ = w.network_forward(result.model, example.features)
print("\nreference :", " ".join(example.transcript))
print("hypothesis:", " ".join(vocab.decode(w.greedy_decode(lattice))))
