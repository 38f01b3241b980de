"""Synthetic crib-scene generator.

Each clip is a soft-edged elliptical actor over a static nursery backdrop
(gradient, mattress band, rail bar, per-clip texture). Classes differ mainly
in the actor's temporal trajectory; rise timing is randomized per clip so a
time-averaged view of the pose classes is ambiguous while the trailing
frames stay crisp.

The source-task profile swaps the palette and actor shape and uses five
different motions; it exists so a trunk can be pretrained off-task and
transferred.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .manifest import ClipRecord, Manifest, save_manifest
from .rawclip import RawClip, save_clip

TARGET_CLASSES = ("lying_still", "rolling", "sitting_up", "standing", "climbing")
SOURCE_CLASSES = ("drifting", "descending", "traversing", "bouncing", "circling")
DEFAULT_UNSAFE = ("standing", "climbing")

RAIL_Y = 14
FLOOR_Y = 46


@dataclass
class SynthConfig:
    seed: int = 0
    clips_per_class: int = 20
    classes: tuple = TARGET_CLASSES
    unsafe: tuple = DEFAULT_UNSAFE
    width: int = 64
    height: int = 64
    frames: int = 40
    fps: float = 8.0
    appearance: str = "nursery"

    def validate(self):
        if not self.classes:
            raise ValueError("class list must be nonempty")
        known = set(TARGET_CLASSES) | set(SOURCE_CLASSES)
        unknown = [c for c in self.classes if c not in known]
        if unknown:
            raise ValueError(f"no trajectory defined for classes {unknown}; known: {sorted(known)}")
        missing = [c for c in self.unsafe if c not in self.classes]
        if missing:
            raise ValueError(f"unsafe classes {missing} not in class list")
        if min(self.width, self.height, self.frames, self.clips_per_class) <= 0:
            raise ValueError("dimensions and clip counts must be positive")
        return self


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _rise_profile(rng, t01, start_lo, start_hi, dur_lo, dur_hi):
    t0 = rng.uniform(start_lo, start_hi)
    dur = rng.uniform(dur_lo, dur_hi)
    return _smoothstep((t01 - t0) / dur), t0 + dur


def _traj_lying(rng, t01, w, h):
    cx = np.full_like(t01, rng.uniform(0.35 * w, 0.65 * w))
    cy = np.full_like(t01, rng.uniform(0.78 * h, 0.84 * h))
    rx = np.full_like(t01, rng.uniform(9, 13) * w / 64)
    ry = np.full_like(t01, rng.uniform(5, 7) * h / 64)
    return cx, cy, rx, ry


def _traj_rolling(rng, t01, w, h):
    cx0 = rng.uniform(0.42 * w, 0.58 * w)
    amp = rng.uniform(8, 14) * w / 64
    freq = rng.uniform(1.0, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    cx = cx0 + amp * np.sin(2.0 * np.pi * freq * t01 + phase)
    cy = np.full_like(t01, rng.uniform(0.78 * h, 0.84 * h))
    rx = np.full_like(t01, rng.uniform(9, 12) * w / 64)
    wob = 1.0 + 0.12 * np.sin(2.0 * np.pi * freq * t01 + phase + np.pi / 3)
    ry = rng.uniform(5, 7) * h / 64 * wob
    return cx, cy, rx, ry


def _pose_rise(rng, t01, w, h, final_cy, final_rx, final_ry, start_hi):
    p, _end = _rise_profile(rng, t01, 0.1, start_hi, 0.2, 0.35)
    cx = np.full_like(t01, rng.uniform(0.38 * w, 0.62 * w))
    cy = 0.81 * h - (0.81 * h - final_cy) * p
    rx = 11 * w / 64 + (final_rx - 11 * w / 64) * p
    ry = 6 * h / 64 + (final_ry - 6 * h / 64) * p
    return cx, cy, rx, ry


def _traj_sitting(rng, t01, w, h):
    return _pose_rise(rng, t01, w, h, 0.5 * h, 7 * w / 64, 10 * h / 64, 0.55)


def _traj_standing(rng, t01, w, h):
    return _pose_rise(rng, t01, w, h, 0.31 * h, 5.5 * w / 64, 12 * h / 64, 0.5)


def _traj_climbing(rng, t01, w, h):
    p, rise_end = _rise_profile(rng, t01, 0.05, 0.3, 0.2, 0.3)
    cx0 = rng.uniform(0.38 * w, 0.62 * w)
    cy = 0.81 * h - (0.81 * h - 0.31 * h) * p
    rx = 11 * w / 64 + (5.5 * w / 64 - 11 * w / 64) * p
    ry = 6 * h / 64 + (12 * h / 64 - 6 * h / 64) * p
    t1 = rise_end + rng.uniform(0.05, 0.15)
    d2 = rng.uniform(0.15, 0.25)
    q = _smoothstep((t01 - t1) / d2)
    edge = rng.choice([0.09 * w, 0.91 * w])
    cx = cx0 + (edge - cx0) * q
    cy = cy - (0.31 * h - RAIL_Y * h / 64) * q  # crests the rail line
    return cx, cy, rx, ry


def _traj_drifting(rng, t01, w, h):
    cx = 0.25 * w + 0.5 * w * t01
    cy = np.full_like(t01, rng.uniform(0.4 * h, 0.6 * h))
    r = rng.uniform(6, 10) * w / 64
    return cx, cy, np.full_like(t01, r), np.full_like(t01, r)


def _traj_descending(rng, t01, w, h):
    cx = np.full_like(t01, rng.uniform(0.3 * w, 0.7 * w))
    cy = 0.19 * h + (0.78 * h - 0.19 * h) * t01
    r = rng.uniform(6, 10) * w / 64
    return cx, cy, np.full_like(t01, r), np.full_like(t01, r)


def _traj_traversing(rng, t01, w, h):
    down = rng.random() < 0.5
    cx = 0.15 * w + 0.7 * w * t01
    cy = 0.2 * h + 0.6 * h * (t01 if down else 1.0 - t01)
    r = rng.uniform(6, 10) * w / 64
    return cx, cy, np.full_like(t01, r), np.full_like(t01, r)


def _traj_bouncing(rng, t01, w, h):
    freq = rng.uniform(1.0, 2.5)
    cx = np.full_like(t01, rng.uniform(0.3 * w, 0.7 * w))
    cy = 0.65 * h - 0.35 * h * np.abs(np.sin(2.0 * np.pi * freq * t01))
    r = rng.uniform(6, 10) * w / 64
    return cx, cy, np.full_like(t01, r), np.full_like(t01, r)


def _traj_circling(rng, t01, w, h):
    radius = rng.uniform(10, 16) * w / 64
    freq = rng.uniform(1.0, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    ang = 2.0 * np.pi * freq * t01 + phase
    cx = 0.5 * w + radius * np.cos(ang)
    cy = 0.5 * h + radius * np.sin(ang)
    r = rng.uniform(6, 9) * w / 64
    return cx, cy, np.full_like(t01, r), np.full_like(t01, r)


TRAJECTORIES = {
    "lying_still": _traj_lying,
    "rolling": _traj_rolling,
    "sitting_up": _traj_sitting,
    "standing": _traj_standing,
    "climbing": _traj_climbing,
    "drifting": _traj_drifting,
    "descending": _traj_descending,
    "traversing": _traj_traversing,
    "bouncing": _traj_bouncing,
    "circling": _traj_circling,
}


def _background(rng, cfg):
    h, w = cfg.height, cfg.width
    ys = np.arange(h, dtype=np.float64)[:, None] / max(h - 1, 1)
    if cfg.appearance == "source":
        base = rng.uniform(15, 65, 3)
    else:
        base = rng.uniform(120, 185, 3)
    grad = rng.uniform(-25, 25)
    bg = np.empty((3, h, w))
    for c in range(3):
        bg[c] = base[c] + grad * ys
    floor_y = int(FLOOR_Y * h / 64)
    bg[:, floor_y:, :] += rng.uniform(-18, 18)
    rail_y = int(RAIL_Y * h / 64)
    bg[:, rail_y : rail_y + 2, :] = rng.uniform(30, 70) if cfg.appearance != "source" else rng.uniform(120, 180)
    bg += rng.normal(0.0, rng.uniform(1.0, 4.0), (h, w))
    return bg


def render_clip(label, cfg, clip_seed):
    """Deterministically render one clip for `label` from an integer seed tuple."""
    rng = np.random.default_rng(np.random.SeedSequence(clip_seed))
    h, w, T = cfg.height, cfg.width, cfg.frames
    bg = _background(rng, cfg)
    if cfg.appearance == "source":
        color = rng.uniform(165, 240, 3)
    else:
        color = rng.uniform(25, 95, 3)
    t01 = np.arange(T, dtype=np.float64) / max(T - 1, 1)
    cx, cy, rx, ry = TRAJECTORIES[label](rng, t01, w, h)
    jitter = rng.normal(0.0, 0.3, (2, T))
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    frames = np.empty((T, 3, h, w), dtype=np.uint8)
    for t in range(T):
        dx = (xs - (cx[t] + jitter[0, t])) / rx[t]
        dy = (ys - (cy[t] + jitter[1, t])) / ry[t]
        alpha = np.clip(1.5 * (1.0 - (dx * dx + dy * dy)), 0.0, 1.0)
        frame = bg * (1.0 - alpha) + color[:, None, None] * alpha
        frames[t] = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    return RawClip(frames, int(round(cfg.fps * 1000)))


def synth_generate(cfg, out_dir):
    """Render the corpus and write clips + manifest; deterministic per seed."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for ci, label in enumerate(cfg.classes):
        for i in range(cfg.clips_per_class):
            clip = render_clip(label, cfg, (cfg.seed, ci, i))
            name = f"{label}_{i:04d}.bbrc"
            save_clip(clip, out_dir / name)
            records.append(
                ClipRecord(
                    path=name,
                    label=label,
                    split="train",
                    frames=cfg.frames,
                    fps=cfg.fps,
                    source="synthetic",
                )
            )
    manifest = Manifest(list(cfg.classes), list(cfg.unsafe), records, out_dir)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
