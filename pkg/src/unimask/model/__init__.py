from .checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from .layers import Attention, Block, Linear, LayerNorm, Module, TempMLP, TransformerStack, sinusoidal_embedding
from .network import (
    ConfigError,
    ModelConfig,
    UniMaskM,
    count_parameters,
    match_parameter_budget,
    pose_decompose,
    pose_regroup,
)

__all__ = [
    "Attention", "Block", "CHECKPOINT_VERSION", "ConfigError", "LayerNorm", "Linear",
    "ModelConfig", "Module", "TempMLP", "TransformerStack", "UniMaskM", "count_parameters",
    "load_checkpoint", "match_parameter_budget", "pose_decompose", "pose_regroup",
    "save_checkpoint", "sinusoidal_embedding",
]
