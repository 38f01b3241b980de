"""Codec-free binary clip storage (BBRC) and per-clip normalization.

File layout, all integers little-endian u32 unless noted:
  magic "BBRC", version, width, height, frame_count, channels (=3),
  fps_milli (fps x 1000), then frame_count frames of channel-planar
  row-major uint8 — payload length frame_count*channels*height*width.
"""

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"BBRC"
VERSION = 1
EPS = 1e-8


class FormatError(ValueError):
    pass


@dataclass
class RawClip:
    frames: np.ndarray  # (T, C, H, W) uint8
    fps_milli: int

    @property
    def frame_count(self):
        return self.frames.shape[0]

    @property
    def channels(self):
        return self.frames.shape[1]

    @property
    def height(self):
        return self.frames.shape[2]

    @property
    def width(self):
        return self.frames.shape[3]

    @property
    def fps(self):
        return self.fps_milli / 1000.0

    def copy(self):
        return RawClip(self.frames.copy(), self.fps_milli)


def save_clip(clip, path):
    frames = np.ascontiguousarray(clip.frames, dtype=np.uint8)
    t, c, h, w = frames.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIIII", VERSION, w, h, t, c, clip.fps_milli))
        fh.write(frames.tobytes())


def load_clip(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FormatError(f"bad clip magic {magic!r} in {path}")
        head = fh.read(24)
        if len(head) != 24:
            raise FormatError(f"truncated clip header in {path}")
        version, w, h, t, c, fps_milli = struct.unpack("<IIIIII", head)
        if version != VERSION:
            raise FormatError(f"unsupported clip version {version}")
        if 0 in (w, h, t, c):
            raise FormatError(f"zero dimension in clip header of {path}")
        expected = t * c * h * w
        payload = fh.read(expected + 1)
        if len(payload) != expected:
            raise FormatError(
                f"payload length {len(payload)} != header product {expected} in {path}"
            )
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(t, c, h, w).copy()
    return RawClip(frames, fps_milli)


def normalize(clip):
    """(frames - clip mean) / (clip std + 1e-8) as float64 (C,T,H,W)."""
    x = clip.frames.astype(np.float64).transpose(1, 0, 2, 3)
    mean = x.mean()
    std = x.std()
    return np.ascontiguousarray((x - mean) / (std + EPS))


def normalize_stats(clip):
    x = clip.frames.astype(np.float64)
    return float(x.mean()), float(x.std())


def denormalize(tensor, mean, std):
    """Invert normalize(); returns float64 frames in clip layout (T,C,H,W)."""
    return (np.asarray(tensor) * (std + EPS) + mean).transpose(1, 0, 2, 3)


def frames_from_window(frames_u8):
    """Normalize a stacked (T,C,H,W) uint8 window without a RawClip wrapper."""
    return normalize(RawClip(frames_u8, 0))
