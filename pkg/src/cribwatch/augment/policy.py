"""Augmentation policy and per-clip sampled specs.

A policy holds firing probabilities and parameter ranges; sample_spec draws
one concrete AugmentSpec per clip. Applying a spec is fully deterministic —
the elastic displacement field is materialized at sampling time and the
noise field is regenerated from a stored seed — so one spec produces the
exact same change on every frame of a clip.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .transforms import smoothed_field

TRANSFORM_ORDER = ("hflip", "rotate", "resize", "elastic", "blur", "noise", "occlude")


@dataclass
class AugmentPolicy:
    p_hflip: float = 0.5
    p_rotate: float = 0.5
    p_resize: float = 0.5
    p_elastic: float = 0.5
    p_blur: float = 0.5
    p_noise: float = 0.5
    p_occlude: float = 0.5
    rotate_deg: tuple = (-15.0, 15.0)
    resize_scale: tuple = (0.8, 1.2)
    elastic_alpha: tuple = (1.0, 4.0)
    elastic_sigma: tuple = (4.0, 8.0)
    blur_sigma: tuple = (0.5, 2.0)
    noise_sigma: tuple = (2.0, 10.0)
    occlude_frac: tuple = (0.10, 0.25)

    def probability(self, name):
        return getattr(self, f"p_{name}")

    def validate(self):
        for name in TRANSFORM_ORDER:
            p = self.probability(name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability p_{name}={p} outside [0,1]")
        for rng_name in ("rotate_deg", "resize_scale", "elastic_alpha",
                         "elastic_sigma", "blur_sigma", "noise_sigma", "occlude_frac"):
            lo, hi = getattr(self, rng_name)
            if lo > hi:
                raise ValueError(f"range {rng_name} has low {lo} > high {hi}")
        return self

    @classmethod
    def identity(cls):
        return cls(p_hflip=0, p_rotate=0, p_resize=0, p_elastic=0,
                   p_blur=0, p_noise=0, p_occlude=0)

    @classmethod
    def always(cls):
        return cls(p_hflip=1, p_rotate=1, p_resize=1, p_elastic=1,
                   p_blur=1, p_noise=1, p_occlude=1)


@dataclass
class AugmentSpec:
    height: int
    width: int
    hflip: bool = False
    rotate: Optional[float] = None          # degrees, counterclockwise
    resize: Optional[float] = None          # scale, recropped to input dims
    elastic: Optional[np.ndarray] = None    # displacement field (2,H,W), pixels
    blur: Optional[float] = None            # gaussian sigma, pixels
    noise: Optional[tuple] = None           # (sigma, seed) for the shared field
    occlude: Optional[tuple] = None         # (y0, x0, rect_h, rect_w)

    def fired(self):
        names = []
        for n in TRANSFORM_ORDER:
            v = getattr(self, n)
            if v is not None and v is not False:
                names.append(n)
        return names

    def is_identity(self):
        return not self.fired()


def sample_spec(policy, seed, height=64, width=64):
    """Draw one concrete spec. Same (policy, seed, dims) -> identical spec.

    Every transform's parameters are drawn whether or not it fires, so the
    random stream position never depends on earlier outcomes.
    """
    policy.validate()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    spec = AugmentSpec(height, width)

    spec.hflip = bool(rng.random() < policy.p_hflip)

    fire = rng.random() < policy.p_rotate
    deg = rng.uniform(*policy.rotate_deg)
    spec.rotate = float(deg) if fire else None

    fire = rng.random() < policy.p_resize
    scale = rng.uniform(*policy.resize_scale)
    spec.resize = float(scale) if fire else None

    fire = rng.random() < policy.p_elastic
    alpha = rng.uniform(*policy.elastic_alpha)
    sigma = rng.uniform(*policy.elastic_sigma)
    raw = rng.uniform(-1.0, 1.0, (2, height, width))
    if fire:
        spec.elastic = smoothed_field(raw, sigma) * alpha

    fire = rng.random() < policy.p_blur
    bsigma = rng.uniform(*policy.blur_sigma)
    spec.blur = float(bsigma) if fire else None

    fire = rng.random() < policy.p_noise
    nsigma = rng.uniform(*policy.noise_sigma)
    nseed = int(rng.integers(0, 2**63 - 1))
    spec.noise = (float(nsigma), nseed) if fire else None

    fire = rng.random() < policy.p_occlude
    frac = rng.uniform(*policy.occlude_frac)
    aspect = rng.uniform(0.5, 2.0)
    rect_h = int(np.clip(np.round(np.sqrt(frac * height * width * aspect)), 1, height))
    rect_w = int(np.clip(np.round(frac * height * width / rect_h), 1, width))
    y0 = int(rng.integers(0, height - rect_h + 1))
    x0 = int(rng.integers(0, width - rect_w + 1))
    spec.occlude = (y0, x0, rect_h, rect_w) if fire else None

    return spec
