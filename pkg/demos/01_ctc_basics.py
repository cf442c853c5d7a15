"""The collapse function, its pre-image, and the CTC loss.

Walks through the pieces on instances small enough to verify by hand:
collapsing frame paths, enumerating every path that collapses to a target,
and checking the dynamic-programming likelihood against the brute-force sum.
"""

import math

import numpy as np

import wordctc as w

vocab = w.Vocabulary(("a", "b"))
blank = vocab.blank_id
print("vocabulary:", vocab.labels, "+ blank at id", blank)

# Collapse merges runs first, then drops blanks, in that order.
for path in [(0, 0, blank, 1, blank, 1), (blank, blank, blank), (0, blank, 0)]:
    print("collapse(%s) = %s" % (path, vocab.decode(w.collapse(path, blank))))

# The pre-image of a target is every frame path that collapses to it.
target = (0,)
paths = w.enumerate_preimage(target, 3, vocab)
print("\n%d paths of length 3 collapse to %s:" % (len(paths), vocab.decode(target)))
for p in sorted(paths):
    print("  ", vocab.decode(p))

# A lattice holds per-frame log-probabilities over labels + blank.  The CTC
# likelihood sums the probability of every path in the pre-image; the
# forward recursion computes the same number without enumerating anything.
rng = np.random.default_rng(0)
lattice = w.log_softmax(rng.normal(0, 1.5, size=(5, vocab.size)))

target = (0, 1)
brute = sum(math.exp(w.path_log_prob(lattice, p))
            for p in w.enumerate_preimage(target, 5, vocab))
dp = math.exp(w.ctc_log_likelihood(lattice, target))
print("\np(%s | x): brute force %.12f, dynamic program %.12f" %
      (vocab.decode(target), brute, dp))

# The loss gradient with respect to the logits is softmax minus the
# posterior symbol occupancy, so every row sums to zero.
nll, grad = w.ctc_loss_and_gradient(lattice, target)
print("loss %.6f, gradient row sums:" % nll, np.abs(grad.sum(axis=1)).max())

# Greedy (best-path) decoding: per-frame argmax, then collapse.
print("greedy decode:", vocab.decode(w.greedy_decode(lattice)))
