"""Frame-rate reduction between LSTM layers.

Down-sampling keeps the 1st, 3rd, 5th, ... hidden vectors, halving the frame
rate each time.  Stacking halvings between layers shortens the output
lattice by a power of two, which acts as a minimum-duration constraint on
what each output label can span.
"""

import numpy as np

import wordctc as w

seq = np.arange(7)
print("frames            :", seq.tolist())
print("halved once       :", w.downsample(seq).tolist(), " (length 7 // 2 = 3)")
print("halved twice      :", w.downsample(w.downsample(seq)).tolist())

# Where the halvings go for a given total factor: between the early layers
# first, anything left over lands in front of layer 1.
for factor in (1, 2, 4, 8, 16):
    print("factor %2d over 4 layers -> halvings before each layer: %s"
          % (factor, w.downsample_schedule(factor, 4)))

# The lattice height is floor(T / 2^m).
vocab = w.Vocabulary(("a", "b", "c"))
x = np.random.default_rng(0).normal(size=(100, 8))
for factor in (1, 2, 4):
    net = w.Network.random(8, [16, 16, 16], vocab, "word-ctc",
                           downsample=w.downsample_schedule(factor, 3), seed=0)
    lattice, _ = w.network_forward(net, x)
    print("factor %d: 100 input frames -> %d output frames" % (factor, lattice.shape[0]))

# Gradients only flow into the frames that were kept.
net = w.Network.random(8, [16], vocab, "word-ctc", downsample=(1,), seed=0)
lattice, tape = w.network_forward(net, x[:6])
_, d_logits = w.ctc_loss_and_gradient(lattice, (0,))
_, d_input = w.network_backward(net, tape, d_logits)
print("input-gradient norms per frame (dropped frames are exactly zero):")
print(np.linalg.norm(d_input, axis=1).round(6))
