"""Every synthesis task is a visibility mask over (frame, joint).

This script prints the four masking patterns as ``#`` (visible) / ``.`` (hidden)
grids and shows how the S3 body-part scheme turns a joint mask into a token
mask: a patch token is visible only when all of its joints are.

    python demos/01_masks_and_patches.py
"""
import numpy as np

from unimask.kinematics import default_topology
from unimask.masking import MaskSpec, patchify_mask
from unimask.patches import make_scheme


def show(title, vis, every=1):
    print(f"\n{title}  ({vis.shape[0]} frames x {vis.shape[1]} joints)")
    for t in range(0, vis.shape[0], every):
        print(f"  {t:3d} " + "".join("#" if v else "." for v in vis[t]))


topo = default_topology()
scheme = make_scheme("S3", topo)
print("S3 patches:")
for g in scheme.groups:
    print("  ", [topo.names[j] for j in g])

specs = {
    "forecast (10 observed, 25 predicted)": MaskSpec("forecast"),
    "inbetween (10 past, 15 transition, 1 future)": MaskSpec("inbetween"),
    "completion (90% of future patches hidden)": MaskSpec("completion", p=0.9),
    "occlusion (20% of observed joints hidden)": MaskSpec("occlusion", p=0.2),
}
for title, spec in specs.items():
    show(title, spec.generate(spec.window_length(), scheme, seed=0))

# From joints to tokens.  One hidden wrist hides the whole arm patch.
vis = np.ones((2, 22), bool)
vis[1, topo.index("LeftHand")] = False
tokens = patchify_mask(vis, scheme).reshape(2, scheme.num_patches)
print("\ntoken visibility with LeftHand hidden at frame 1:")
print("  frame 0:", tokens[0].astype(int))
print("  frame 1:", tokens[1].astype(int))
