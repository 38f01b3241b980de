import numpy as np
import pytest

from cribwatch.augment import (
    TRANSFORM_ORDER,
    AugmentPolicy,
    apply,
    apply_to_frame,
    gaussian_blur,
    gaussian_kernel,
    rotate,
    sample_spec,
)
from cribwatch.dataset import RawClip


def _clip(rng, t=5, h=16, w=16):
    return RawClip(rng.integers(0, 256, (t, 3, h, w), dtype=np.uint8), 8000)


class TestSpecSampling:
    def test_zero_probabilities_identity(self):
        spec = sample_spec(AugmentPolicy.identity(), seed=3)
        assert spec.is_identity()

    def test_all_probabilities_fire(self):
        spec = sample_spec(AugmentPolicy.always(), seed=3)
        assert set(spec.fired()) == set(TRANSFORM_ORDER)

    def test_same_seed_same_spec(self):
        pol = AugmentPolicy()
        a = sample_spec(pol, seed=99)
        b = sample_spec(pol, seed=99)
        assert a.hflip == b.hflip and a.rotate == b.rotate and a.noise == b.noise
        assert a.occlude == b.occlude and a.blur == b.blur and a.resize == b.resize
        if a.elastic is None:
            assert b.elastic is None
        else:
            np.testing.assert_array_equal(a.elastic, b.elastic)

    def test_firing_counts_within_binomial_bounds(self):
        # 99.9% binomial interval for n=1000, p=0.5 is [434, 566]
        pol = AugmentPolicy()
        counts = dict.fromkeys(TRANSFORM_ORDER, 0)
        for seed in range(1000):
            spec = sample_spec(pol, seed)
            for name in spec.fired():
                counts[name] += 1
        for name, n in counts.items():
            assert 434 <= n <= 566, (name, n)

    def test_invalid_policy(self):
        with pytest.raises(ValueError, match="probability"):
            AugmentPolicy(p_blur=1.5).validate()
        with pytest.raises(ValueError, match="range"):
            AugmentPolicy(rotate_deg=(10, -10)).validate()


class TestApply:
    def test_identity_spec_bit_identical(self, rng):
        clip = _clip(rng)
        out = apply(sample_spec(AugmentPolicy.identity(), 5), clip)
        np.testing.assert_array_equal(out.frames, clip.frames)

    def test_hflip_involution_bit_exact(self, rng):
        clip = _clip(rng)
        pol = AugmentPolicy.identity()
        pol.p_hflip = 1.0
        spec = sample_spec(pol, 7, 16, 16)
        once = apply(spec, clip)
        assert not np.array_equal(once.frames, clip.frames)
        twice = apply(spec, once)
        np.testing.assert_array_equal(twice.frames, clip.frames)

    def test_dimension_preservation(self, rng):
        clip = _clip(rng, t=3, h=20, w=12)
        for seed in range(8):
            out = apply(sample_spec(AugmentPolicy.always(), seed, height=20, width=12), clip)
            assert out.frames.shape == clip.frames.shape

    def test_frame_consistency_all_transforms(self, rng):
        # whole-clip application == per-frame application with the shared spec
        clip = _clip(rng)
        spec = sample_spec(AugmentPolicy.always(), 11, 16, 16)
        whole = apply(spec, clip)
        for t in range(clip.frame_count):
            np.testing.assert_array_equal(whole.frames[t], apply_to_frame(spec, clip.frames[t]))

    def test_deterministic_across_runs(self, rng):
        clip = _clip(rng)
        spec1 = sample_spec(AugmentPolicy(), 123, 16, 16)
        spec2 = sample_spec(AugmentPolicy(), 123, 16, 16)
        np.testing.assert_array_equal(apply(spec1, clip).frames, apply(spec2, clip).frames)

    def test_wrong_dimensions_rejected(self, rng):
        clip = _clip(rng, h=16, w=16)
        spec = sample_spec(AugmentPolicy.always(), 1, height=32, width=32)
        with pytest.raises(ValueError, match="spec built for"):
            apply(spec, clip)

    def test_output_bounds(self, rng):
        clip = _clip(rng)
        for seed in range(6):
            out = apply(sample_spec(AugmentPolicy.always(), seed, 16, 16), clip)
            assert out.frames.dtype == np.uint8  # u8 can never leave [0,255]


class TestIndividualTransforms:
    def test_rotate_zero_is_identity(self, rng):
        frame = rng.integers(0, 256, (3, 9, 11), dtype=np.uint8)
        np.testing.assert_array_equal(rotate(frame, 0.0), frame)

    def test_blur_preserves_constant_exactly(self):
        frame = np.full((3, 12, 12), 131, dtype=np.uint8)
        out = gaussian_blur(frame, 1.7)
        np.testing.assert_array_equal(out, frame)

    def test_blur_impulse_equals_kernel(self):
        # direct kernel evaluation oracle: separable gaussian at the impulse
        sigma = 1.0
        k = gaussian_kernel(sigma)
        frame = np.zeros((1, 21, 21))
        frame[0, 10, 10] = 255.0
        out = gaussian_blur(frame.astype(np.uint8), sigma)
        r = len(k) // 2
        expected = np.clip(np.rint(255.0 * np.outer(k, k)), 0, 255)
        np.testing.assert_array_equal(
            out[0, 10 - r : 10 + r + 1, 10 - r : 10 + r + 1], expected
        )

    def test_occlusion_zeroes_rectangle(self, rng):
        clip = _clip(rng)
        pol = AugmentPolicy.identity()
        pol.p_occlude = 1.0
        spec = sample_spec(pol, 4, 16, 16)
        y0, x0, rh, rw = spec.occlude
        area = rh * rw / (16 * 16)
        assert 0.08 <= area <= 0.3
        out = apply(spec, clip)
        assert not out.frames[:, :, y0 : y0 + rh, x0 : x0 + rw].any()

    def test_noise_shared_across_frames(self, rng):
        clip = RawClip(np.full((4, 3, 16, 16), 128, dtype=np.uint8), 8000)
        pol = AugmentPolicy.identity()
        pol.p_noise = 1.0
        out = apply(sample_spec(pol, 21, 16, 16), clip)
        for t in range(1, 4):
            np.testing.assert_array_equal(out.frames[t], out.frames[0])
        assert not np.array_equal(out.frames[0], clip.frames[0])
