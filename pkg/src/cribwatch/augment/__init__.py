from .policy import TRANSFORM_ORDER, AugmentPolicy, AugmentSpec, sample_spec
from .transforms import (
    add_noise,
    apply,
    apply_to_frame,
    elastic,
    gaussian_blur,
    gaussian_kernel,
    hflip,
    occlude,
    resize,
    rotate,
)

__all__ = [
    "TRANSFORM_ORDER",
    "AugmentPolicy",
    "AugmentSpec",
    "add_noise",
    "apply",
    "apply_to_frame",
    "elastic",
    "gaussian_blur",
    "gaussian_kernel",
    "hflip",
    "occlude",
    "resize",
    "rotate",
    "sample_spec",
]
