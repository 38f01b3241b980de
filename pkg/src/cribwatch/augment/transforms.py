"""Clip-consistent frame transforms.

Geometry (rotate, resize, elastic) is inverse-mapped bilinear sampling with
zero fill outside bounds. Resize re-crops/pads to the input dimensions in
the same pass, so output dims always equal input dims. Blur uses a discrete
gaussian truncated at radius ceil(3*sigma), normalized to sum 1, with
replicate borders (a constant image stays exactly constant). Noise adds one
shared field to every frame and clamps to [0,255]; occlusion zero-fills its
rectangle. Each transform quantizes back to uint8, and pure index ops
(hflip, occlude) never leave uint8, keeping involutions bit-exact.
"""

import numpy as np
from scipy.ndimage import convolve1d

from ..backend import kernels


def _to_u8(x):
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def _warp_frame(frame_u8, ys, xs):
    src = np.ascontiguousarray(frame_u8, dtype=np.float64)
    out = np.empty_like(src)
    kernels.bilinear_warp(src, ys, xs, out)
    return _to_u8(out)


def _grid(h, w):
    ys = np.arange(h, dtype=np.float64)[:, None] * np.ones((1, w))
    xs = np.ones((h, 1)) * np.arange(w, dtype=np.float64)[None, :]
    return ys, xs


def hflip(frame):
    return frame[:, :, ::-1].copy()


def rotate(frame, degrees):
    """Rotate counterclockwise about the frame center."""
    c, h, w = frame.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    th = np.deg2rad(degrees)
    ys, xs = _grid(h, w)
    dy, dx = ys - cy, xs - cx
    # inverse mapping: rotate destination coords by -theta
    src_y = cy + np.sin(-th) * dx + np.cos(-th) * dy
    src_x = cx + np.cos(-th) * dx - np.sin(-th) * dy
    return _warp_frame(frame, np.ascontiguousarray(src_y), np.ascontiguousarray(src_x))


def resize(frame, scale):
    """Scale about the center, then center-crop / zero-pad back to H x W."""
    c, h, w = frame.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = _grid(h, w)
    src_y = cy + (ys - cy) / scale
    src_x = cx + (xs - cx) / scale
    return _warp_frame(frame, np.ascontiguousarray(src_y), np.ascontiguousarray(src_x))


def gaussian_kernel(sigma):
    radius = int(np.ceil(3.0 * sigma))
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(frame, sigma):
    k = gaussian_kernel(sigma)
    x = frame.astype(np.float64)
    x = convolve1d(x, k, axis=1, mode="nearest")
    x = convolve1d(x, k, axis=2, mode="nearest")
    return _to_u8(x)


def smoothed_field(raw, sigma):
    """Gaussian-smooth an i.i.d. +-1 field (2,H,W); used to build elastic maps."""
    k = gaussian_kernel(sigma)
    out = convolve1d(raw, k, axis=1, mode="nearest")
    return convolve1d(out, k, axis=2, mode="nearest")


def elastic(frame, field):
    c, h, w = frame.shape
    if field.shape != (2, h, w):
        raise ValueError(f"elastic field shape {field.shape} != (2,{h},{w})")
    ys, xs = _grid(h, w)
    return _warp_frame(
        frame,
        np.ascontiguousarray(ys + field[0]),
        np.ascontiguousarray(xs + field[1]),
    )


def add_noise(frame, sigma, seed):
    h, w = frame.shape[1:]
    noise = np.random.default_rng(np.random.SeedSequence(seed)).normal(0.0, sigma, (h, w))
    return _to_u8(frame.astype(np.float64) + noise[None])


def occlude(frame, rect):
    y0, x0, rh, rw = rect
    out = frame.copy()
    out[:, y0 : y0 + rh, x0 : x0 + rw] = 0
    return out


def apply_to_frame(spec, frame):
    """Run one frame (C,H,W) uint8 through every fired transform, in order."""
    if frame.shape[1:] != (spec.height, spec.width):
        raise ValueError(
            f"spec built for {(spec.height, spec.width)}, frame is {frame.shape[1:]}"
        )
    out = frame
    if spec.hflip:
        out = hflip(out)
    if spec.rotate is not None:
        out = rotate(out, spec.rotate)
    if spec.resize is not None:
        out = resize(out, spec.resize)
    if spec.elastic is not None:
        out = elastic(out, spec.elastic)
    if spec.blur is not None:
        out = gaussian_blur(out, spec.blur)
    if spec.noise is not None:
        out = add_noise(out, *spec.noise)
    if spec.occlude is not None:
        out = occlude(out, spec.occlude)
    return out


def apply(spec, clip):
    """Apply a sampled spec identically to every frame of a RawClip."""
    if clip.frames.size == 0:
        raise ValueError("cannot augment an empty clip")
    if spec.is_identity():
        return clip.copy()
    frames = np.stack([apply_to_frame(spec, f) for f in clip.frames])
    out = clip.copy()
    out.frames = frames
    return out
