"""Train the masked autoencoder for inbetweening and compare it to interpolation.

Synthetic walking data: 200 training and 50 test sequences of 64 frames.  The
model sees 10 past poses and 1 future pose and fills the 15 frames between
them.  Linear interpolation between the two key poses is the baseline to beat.

    python demos/02_inbetween_vs_interpolation.py --steps 2000   # about 7 min on one core
    python demos/02_inbetween_vs_interpolation.py --steps 300    # quick look
"""
import argparse
import time

import numpy as np

from unimask.masking import MaskSpec
from unimask.metrics import baseline_interpolation, mpjpe
from unimask.model import ModelConfig, UniMaskM
from unimask.runner import eval_masks, evaluation_windows
from unimask.synthetic import SyntheticGaitParams, generate_dataset
from unimask.trainer import TrainConfig, train

parser = argparse.ArgumentParser()
parser.add_argument("--steps", type=int, default=2000)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

train_x, test_x = generate_dataset(SyntheticGaitParams())
spec = MaskSpec("inbetween", past=10, transition=15, future=1)
T = spec.window_length()
print(f"train {train_x.shape}, test {test_x.shape}, window {T} frames")

model = UniMaskM(ModelConfig(seed=args.seed))
model.set_normalization(train_x)
print(f"model: {model.num_parameters():,} parameters, {model.scheme.num_patches} patches per pose")

t0 = time.time()
result = train(model, list(train_x), TrainConfig(steps=args.steps, mask=spec, seed=args.seed))
losses = result.losses
print(f"trained {args.steps} steps in {time.time() - t0:.0f} s")
for s in range(0, args.steps, max(args.steps // 8, 1)):
    print(f"  step {s:5d}  loss(avg of 50) {losses[s:s + 50].mean():.5f}")

windows = evaluation_windows(list(test_x), T)
vis = eval_masks(spec, len(windows), T, model.scheme, seed=args.seed)
transition = slice(10, 25)
ours = mpjpe(model.predict(windows, vis), windows)[transition] * 1000
interp = mpjpe(baseline_interpolation(windows, vis), windows)[transition] * 1000

print("\nMPJPE (mm) over the transition frames")
print("  frame  interpolation  model")
for i, (a, b) in enumerate(zip(interp, ours)):
    print(f"  {10 + i:5d}  {a:13.1f}  {b:5.1f}")
print(f"  mean   {interp.mean():13.1f}  {ours.mean():5.1f}   ratio {ours.mean() / interp.mean():.3f}")
