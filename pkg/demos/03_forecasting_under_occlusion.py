"""Forecasting when some observed joints are missing.

Two models with the same architecture are trained for forecasting (10 observed
frames, 25 predicted).  One only ever sees clean observations; the other is
trained with 20% of its observed joints hidden at random.  Both are then asked
to forecast from observations with 20% of joints occluded.  Repeat-last-pose
is printed as a reference point.

    python demos/03_forecasting_under_occlusion.py --steps 2000   # about 25 min on one core
    python demos/03_forecasting_under_occlusion.py --steps 300    # quick look
"""
import argparse
import time

from unimask.kinematics import default_topology
from unimask.masking import MaskSpec
from unimask.metrics import baseline_zero_velocity, mpjpe
from unimask.model import ModelConfig, UniMaskM
from unimask.patches import make_scheme
from unimask.runner import eval_masks, evaluation_windows
from unimask.synthetic import SyntheticGaitParams, generate_dataset
from unimask.trainer import TrainConfig, train

parser = argparse.ArgumentParser()
parser.add_argument("--steps", type=int, default=2000)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

train_x, test_x = generate_dataset(SyntheticGaitParams())
clean = MaskSpec("forecast", t_obs=10, horizon=25)
occluded = MaskSpec("occlusion", t_obs=10, horizon=25, p=0.2)
T = clean.window_length()
windows = evaluation_windows(list(test_x), T)
scheme = make_scheme("S3", default_topology())

inputs = {
    "clean input": eval_masks(clean, len(windows), T, scheme, seed=args.seed),
    "occluded input": eval_masks(occluded, len(windows), T, scheme, seed=args.seed),
}
hidden = 1 - inputs["occluded input"][:, :10].mean()
print(f"{len(windows)} test windows of {T} frames; {100 * hidden:.1f}% of observed joints occluded")


def future_mm(pred):
    return 1000 * mpjpe(pred, windows)[10:].mean()


rows = {"repeat last pose": {k: future_mm(baseline_zero_velocity(windows, v)) for k, v in inputs.items()}}
for name, spec in (("trained clean", clean), ("trained occluded", occluded)):
    model = UniMaskM(ModelConfig(seed=args.seed))
    model.set_normalization(train_x)
    t0 = time.time()
    train(model, list(train_x), TrainConfig(steps=args.steps, mask=spec, seed=args.seed))
    print(f"{name}: {args.steps} steps in {time.time() - t0:.0f} s")
    rows[name] = {k: future_mm(model.predict(windows, v)) for k, v in inputs.items()}

print("\nMPJPE (mm) over the 25 forecast frames")
print(f"  {'':18s} {'clean input':>12s} {'occluded input':>15s}")
for name, r in rows.items():
    print(f"  {name:18s} {r['clean input']:12.1f} {r['occluded input']:15.1f}")
