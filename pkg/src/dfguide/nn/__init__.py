from dfguide.nn.encoding import DenseGrid, encode_static, eps1_encoding, one_blob, spherical_harmonics, static_width, triangle_wave
from dfguide.nn.losses import luminance, relative_l2_loss, weighted_log_density_loss
from dfguide.nn.mlp import GridMlp, Mlp
from dfguide.nn.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "DenseGrid",
    "GridMlp",
    "Mlp",
    "adam_step",
    "encode_static",
    "luminance",
    "one_blob",
    "relative_l2_loss",
    "spherical_harmonics",
    "static_width",
    "eps1_encoding",
    "triangle_wave",
    "weighted_log_density_loss",
]
