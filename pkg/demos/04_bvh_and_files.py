"""From a BVH capture to positions, a motion file and back.

Parses the three-joint test capture, runs forward kinematics, writes the
motion as a JSON motion file and reads it back bit for bit.  Any BVH with a
single ROOT works the same way; pass its path as the first argument.

    python demos/04_bvh_and_files.py [capture.bvh]
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

from unimask.bvh import parse_bvh
from unimask.kinematics import forward_kinematics, rot6d_to_quaternion
from unimask.motionfile import load_motion, save_motion

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests" / "data" / "three_joint.bvh"
topo, motion = parse_bvh(path)
print(f"{path.name}: {topo.num_joints} joints, {motion.shape[0]} frames at {motion.frame_rate:g} fps")
for name, parent, off in zip(topo.names, topo.parents, topo.offsets):
    print(f"  {name:12s} parent={parent:2d} offset={off}")

np.set_printoptions(precision=4, suppress=True)
for t in range(min(motion.shape[0], 3)):
    pos = forward_kinematics(topo, motion.values[t], motion.root_translation[t])
    print(f"\nframe {t}: local rotations (w, x, y, z)")
    print(rot6d_to_quaternion(motion.values[t]))
    print("global joint positions")
    print(pos)

with tempfile.TemporaryDirectory() as tmp:
    out = save_motion(Path(tmp) / "capture.json", motion, topo)
    back, topo2 = load_motion(out)
    same = back.values.tobytes() == motion.values.tobytes() and topo2 == topo
    print(f"\nmotion file {out.stat().st_size} bytes; round trip bit-exact: {same}")
