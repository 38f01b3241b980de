import numpy as np
import pytest

from oracles import central_diff, max_rel_err

from cribwatch.model import (
    CheckpointError,
    build_variant,
    count_params,
    load_checkpoint,
    predict_clip,
    save_checkpoint,
)
from cribwatch.model import backbone

SMALL_SHAPE = (3, 4, 16, 16)  # trunk-compatible toy input for fast tests


class TestBackbone:
    def test_output_shape_invariant(self, rng):
        params = backbone.init_params(rng)
        clip = rng.standard_normal((3, 40, 64, 64))
        feats = backbone.forward(params, clip)
        assert feats.shape == (64, 20, 8, 8)

    def test_param_count_closed_form(self, rng):
        # hand sum over declared shapes:
        # 16*(3*27)+16 + 32*(16*27)+32 + 64*(32*27)+64 = 1312+13856+55360
        expected = (16 * 3 * 27 + 16) + (32 * 16 * 27 + 32) + (64 * 32 * 27 + 64)
        assert expected == 70528
        assert backbone.param_count() == expected
        params = backbone.init_params(rng)
        assert sum(p.size for p in params.values()) == expected

    def test_backward_matches_fd(self, rng):
        params = backbone.init_params(rng)
        clip = rng.standard_normal(SMALL_SHAPE)
        feats, cache = backbone.forward(params, clip, want_cache=True)
        up = rng.standard_normal(feats.shape)
        grads, _ = backbone.backward(params, cache, up)

        for name in ("backbone.conv1.kernel", "backbone.conv3.bias"):
            arr = params[name]
            coords = [tuple(rng.integers(0, s) for s in arr.shape) for _ in range(4)]
            for c in coords:
                h = 1e-5
                orig = arr[c]
                arr[c] = orig + h
                fp = float(np.sum(up * backbone.forward(params, clip)))
                arr[c] = orig - h
                fm = float(np.sum(up * backbone.forward(params, clip)))
                arr[c] = orig
                num = (fp - fm) / (2 * h)
                assert max_rel_err(np.array(grads[name][c]), np.array(num)) < 1e-5


class TestVariants:
    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown variant"):
            build_variant("V", 5)

    def test_variant_ii_has_one_cell(self):
        m = build_variant("II", 5, input_shape=SMALL_SHAPE)
        assert m.cell is not None
        cell_params = [n for n in m.params if n.startswith("head.cell.")]
        assert len(cell_params) == 15  # 4 ff + 4 rec kernels, 3 peepholes, 4 biases

    def test_variant_i_valid_distribution(self, rng):
        m = build_variant("I", 5, input_shape=SMALL_SHAPE, seed=3)
        probs = predict_clip(m, rng.standard_normal(SMALL_SHAPE))
        assert probs.shape == (5,)
        assert (probs >= 0).all()
        assert abs(probs.sum() - 1.0) < 1e-9

    def test_prediction_purity(self, rng):
        m = build_variant("II", 4, input_shape=SMALL_SHAPE, seed=1)
        clip = rng.standard_normal(SMALL_SHAPE)
        np.testing.assert_array_equal(predict_clip(m, clip), predict_clip(m, clip))

    def test_iv_matches_ii_param_count(self):
        # augmentation is preprocessing-only; the trainable graph is identical
        m2 = build_variant("II", 5)
        m4 = build_variant("IV", 5)
        assert count_params(m2) == count_params(m4)
        assert m4.augment_enabled and not m2.augment_enabled
        m3 = build_variant("III", 5)
        m1 = build_variant("I", 5)
        assert count_params(m3) == count_params(m1)

    def test_variant_totals_closed_form(self):
        # derived: trunk + cell + dense sums over declared shapes
        trunk = 70528
        k = 5
        cell = (4 * 32 * 64 * 9) + (4 * 32 * 32 * 9) + (3 * 32 * 8 * 8) + (4 * 32)
        dense_ii = 32 * 8 * 8 * k + k
        total_ii, trainable_ii = count_params(build_variant("II", k))
        assert total_ii == trunk + cell + dense_ii
        assert trainable_ii == total_ii
        dense_i = (4096 * 64 + 64) + (64 * k + k)
        total_i, _ = count_params(build_variant("I", k))
        assert total_i == trunk + dense_i

    def test_freezing_reduces_trainable_by_trunk_size(self):
        m = build_variant("I", 5)
        total, trainable = count_params(m)
        assert trainable == total
        m.frozen = {"backbone"}
        total2, trainable2 = count_params(m)
        assert total2 == total
        assert trainable2 == total - 70528

    @pytest.mark.parametrize("tag", ["I", "II"])
    def test_full_model_gradient_spot_check(self, tag, rng):
        m = build_variant(tag, 3, input_shape=SMALL_SHAPE, seed=9)
        clip = rng.standard_normal(SMALL_SHAPE)
        target = np.zeros(3)
        target[1] = 1.0
        probs, cache = m.forward(clip, want_cache=True)
        grads = m.backward(cache, target)

        from cribwatch.tensor import cross_entropy

        def loss():
            return cross_entropy(m.forward(clip), target)

        names = [n for n in sorted(grads) if grads[n].size]
        picked = [names[i] for i in rng.choice(len(names), size=min(6, len(names)), replace=False)]
        for name in picked:
            arr = m.params[name]
            c = tuple(rng.integers(0, s) for s in arr.shape)
            h = 1e-5
            orig = arr[c]
            arr[c] = orig + h
            fp = loss()
            arr[c] = orig - h
            fm = loss()
            arr[c] = orig
            num = (fp - fm) / (2 * h)
            assert max_rel_err(np.array(grads[name][c]), np.array(num)) < 1e-4, name


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        m = build_variant("II", 5, input_shape=SMALL_SHAPE, seed=5)
        path = tmp_path / "model.bbck"
        save_checkpoint(m, path)
        loaded, names = load_checkpoint(path)
        assert names == set(m.params)
        for n, p in m.params.items():
            np.testing.assert_array_equal(loaded.params[n], p)
        # byte-for-byte stable on re-save
        path2 = tmp_path / "again.bbck"
        save_checkpoint(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.bbck"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(p)

    def test_truncated_payload(self, tmp_path):
        m = build_variant("I", 3, input_shape=SMALL_SHAPE)
        p = tmp_path / "m.bbck"
        save_checkpoint(m, p)
        raw = p.read_bytes()
        p.write_bytes(raw[: len(raw) - 17])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.bbck")

    def test_class_count_change_reinits_head_only(self, tmp_path):
        m = build_variant("I", 5, input_shape=SMALL_SHAPE, seed=2)
        p = tmp_path / "m.bbck"
        save_checkpoint(m, p)
        swapped, loaded = load_checkpoint(p, classes=["a", "b", "c"])
        trunk_names = {n for n in m.params if n.startswith("backbone.")}
        assert trunk_names <= loaded
        for n in trunk_names:
            np.testing.assert_array_equal(swapped.params[n], m.params[n])
        assert "head.fc2.weight" not in loaded
        assert swapped.params["head.fc2.weight"].shape == (3, 64)
        # fc1 keeps its shape, so it is reused
        assert "head.fc1.weight" in loaded

    def test_partial_checkpoint_loads_into_variants(self, tmp_path):
        m = build_variant("I", 5, input_shape=SMALL_SHAPE, seed=4)
        p = tmp_path / "trunk.bbck"
        save_checkpoint(m, p, param_filter=lambda n: n.startswith("backbone."))
        for tag in ("I", "II"):
            rebuilt, loaded = load_checkpoint(p, variant=tag, classes=m.class_names)
            assert loaded == {n for n in m.params if n.startswith("backbone.")}
            for n in loaded:
                np.testing.assert_array_equal(rebuilt.params[n], m.params[n])

    def test_frozen_flags_round_trip(self, tmp_path):
        m = build_variant("I", 4, input_shape=SMALL_SHAPE)
        m.frozen = {"backbone"}
        p = tmp_path / "m.bbck"
        save_checkpoint(m, p)
        loaded, _ = load_checkpoint(p)
        assert loaded.frozen_param_names() == m.frozen_param_names()
