from .checkpoint import CheckpointError, load_checkpoint, read_header, save_checkpoint
from .convlstm import ConvLSTMCell, ConvLSTMState, convlstm_forward, convlstm_step
from .variants import VariantModel, build_variant, count_params, predict_clip

__all__ = [
    "CheckpointError",
    "ConvLSTMCell",
    "ConvLSTMState",
    "VariantModel",
    "build_variant",
    "convlstm_forward",
    "convlstm_step",
    "count_params",
    "load_checkpoint",
    "predict_clip",
    "read_header",
    "save_checkpoint",
]
