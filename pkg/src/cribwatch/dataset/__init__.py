from .manifest import (
    ClipRecord,
    Manifest,
    class_weights,
    load_manifest,
    save_manifest,
    split_manifest,
)
from .rawclip import (
    FormatError,
    RawClip,
    denormalize,
    frames_from_window,
    load_clip,
    normalize,
    normalize_stats,
    save_clip,
)
from .synth import SOURCE_CLASSES, TARGET_CLASSES, SynthConfig, render_clip, synth_generate

__all__ = [
    "ClipRecord",
    "FormatError",
    "Manifest",
    "RawClip",
    "SOURCE_CLASSES",
    "SynthConfig",
    "TARGET_CLASSES",
    "class_weights",
    "denormalize",
    "frames_from_window",
    "load_clip",
    "load_manifest",
    "normalize",
    "normalize_stats",
    "render_clip",
    "save_clip",
    "save_manifest",
    "split_manifest",
    "synth_generate",
]
