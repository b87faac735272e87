"""Masked-autoencoder motion synthesis on a small numpy autodiff core.

A skeleton motion ``(T, J, n)`` with a visibility mask is filled by
interpolation, split into body-part tokens, passed through a transformer
encoder/decoder, regrouped into poses and added back onto the filled motion.
Forecasting, inbetweening, completion and occlusion are all the same
reconstruction problem with different masks.
"""
from .kinematics import MotionTensor, SkeletonTopology, default_topology, forward_kinematics
from .masking import MaskSpec, curriculum_p, patchify_mask
from .model import ModelConfig, UniMaskM, load_checkpoint, save_checkpoint
from .patches import PatchScheme, make_scheme
from .pipeline import apply_delta, fill_motion
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "MaskSpec",
    "ModelConfig",
    "MotionTensor",
    "PatchScheme",
    "SkeletonTopology",
    "TrainConfig",
    "UniMaskM",
    "apply_delta",
    "curriculum_p",
    "default_topology",
    "fill_motion",
    "forward_kinematics",
    "load_checkpoint",
    "make_scheme",
    "patchify_mask",
    "save_checkpoint",
    "train",
]
