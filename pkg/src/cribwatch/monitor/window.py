"""Sliding-window frame buffer for streaming inference."""

from collections import deque

import numpy as np

from ..dataset import frames_from_window


class WindowBuffer:
    """Ring of the last L frames; fires every S frames once full.

    Frames carry a monotone sequence number so a window assembled after
    drops is flagged with gap=True instead of silently mixing
    non-contiguous frames.
    """

    def __init__(self, length=40, stride=8):
        if length < 1 or stride < 1:
            raise ValueError("window length and stride must be >= 1")
        self.length = length
        self.stride = stride
        self.frames = deque(maxlen=length)
        self.count = 0
        self.last_fire = None
        self.last_ts = None

    def ingest(self, frame, ts_ms, seq=None):
        """Add one (C,H,W) uint8 frame; returns (window, end_ts, gap) or None.

        The window is the normalized (3,L,H,W) tensor of the last L frames.
        """
        if self.last_ts is not None and ts_ms <= self.last_ts:
            raise ValueError(
                f"out-of-order timestamp {ts_ms} (last was {self.last_ts})"
            )
        self.last_ts = ts_ms
        seq = self.count if seq is None else seq
        self.frames.append((seq, ts_ms, frame))
        self.count += 1
        if len(self.frames) < self.length:
            return None
        if self.last_fire is not None and self.count - self.last_fire < self.stride:
            return None
        self.last_fire = self.count
        stack = np.stack([f for _seq, _ts, f in self.frames])
        gap = self.frames[-1][0] - self.frames[0][0] != self.length - 1
        return frames_from_window(stack), ts_ms, gap
