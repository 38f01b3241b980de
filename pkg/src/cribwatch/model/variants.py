"""The four model variants.

I:   trunk -> temporal average pool -> dense 4096->64 -> relu -> dense -> softmax
II:  trunk -> ConvLSTM (64->32, k=3) over the 20 trunk steps -> dense -> softmax
III: same architecture as I, training-time augmentation enabled
IV:  same architecture as II, training-time augmentation enabled
"""

import numpy as np

from ..tensor import ops
from . import backbone
from .convlstm import GATE_ORDER, ConvLSTMCell

VARIANT_TAGS = ("I", "II", "III", "IV")
LSTM_CHANNELS = 32
LSTM_KERNEL = 3
HIDDEN_UNITS = 64


class VariantModel:
    """Parameter container plus forward/backward for one variant."""

    def __init__(self, tag, class_names, input_shape=(3, 40, 64, 64), seed=0):
        if tag not in VARIANT_TAGS:
            raise ValueError(f"unknown variant tag {tag!r}; expected one of {VARIANT_TAGS}")
        self.tag = tag
        self.class_names = list(class_names)
        self.input_shape = tuple(input_shape)
        self.augment_enabled = tag in ("III", "IV")
        self.recurrent = tag in ("II", "IV")
        self.frozen = set()
        self.feat_shape = backbone.output_shape(self.input_shape)

        rng = np.random.default_rng(seed)
        self.params = backbone.init_params(rng)
        k = len(self.class_names)
        c, t, h, w = self.feat_shape
        if self.recurrent:
            self.cell = ConvLSTMCell(c, LSTM_CHANNELS, LSTM_KERNEL, (h, w), rng)
            for name, arr in self.cell.params.items():
                self.params[f"head.cell.{name}"] = arr
            flat = LSTM_CHANNELS * h * w
            self._add_dense(rng, "head.fc", flat, k)
        else:
            self.cell = None
            flat = c * h * w
            self._add_dense(rng, "head.fc1", flat, HIDDEN_UNITS)
            self._add_dense(rng, "head.fc2", HIDDEN_UNITS, k)

    def _add_dense(self, rng, name, n_in, n_out):
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.params[f"{name}.weight"] = rng.uniform(-limit, limit, (n_out, n_in))
        self.params[f"{name}.bias"] = np.zeros(n_out)

    # cell params live in self.params as the same arrays; keep the cell's dict
    # pointing at them after checkpoint loads swap buffers
    def _sync_cell(self):
        if self.cell is not None:
            for name in self.cell.params:
                self.cell.params[name] = self.params[f"head.cell.{name}"]

    def trunk_forward(self, clip, want_cache=False):
        if clip.shape != self.input_shape:
            raise ValueError(f"clip shape {clip.shape} != expected {self.input_shape}")
        if want_cache:
            return backbone.forward(self.params, clip, want_cache=True)
        return backbone.forward(self.params, clip), None

    def head_forward(self, feats, want_cache=False):
        """Classifier head on trunk features (64,T',8,8)."""
        self._sync_cell()
        cache = {"feats": feats}
        if self.recurrent:
            final, _history, lstm_cache = self.cell.forward_sequence(feats)
            cache["lstm"] = lstm_cache
            flat = final.h.reshape(-1)
            cache["flat"] = flat
            logits = ops.dense(flat, self.params["head.fc.weight"], self.params["head.fc.bias"])
        else:
            tmean = feats.mean(axis=1)
            flat = tmean.reshape(-1)
            cache["flat"] = flat
            hid = ops.dense(flat, self.params["head.fc1.weight"], self.params["head.fc1.bias"])
            hid_r = ops.relu(hid)
            cache["hid_r"] = hid_r
            logits = ops.dense(hid_r, self.params["head.fc2.weight"], self.params["head.fc2.bias"])
        probs = ops.softmax(logits)
        cache["probs"] = probs
        return (probs, cache) if want_cache else probs

    def head_backward(self, cache, target_one_hot, loss_weight=1.0):
        """Head grads plus the gradient flowing into the trunk features."""
        probs = cache["probs"]
        gprobs = ops.cross_entropy_backward(probs, target_one_hot) * loss_weight
        glogits = ops.softmax_backward(gprobs, probs)
        grads = {}
        if self.recurrent:
            gflat, gw, gb = ops.dense_backward(cache["flat"], self.params["head.fc.weight"], glogits)
            grads["head.fc.weight"] = gw
            grads["head.fc.bias"] = gb
            dh_final = gflat.reshape(LSTM_CHANNELS, *self.feat_shape[2:])
            cell_grads, gfeats = self.cell.backward(cache["lstm"], dh_final=dh_final)
            for name, g in cell_grads.items():
                grads[f"head.cell.{name}"] = g
        else:
            ghid_r, gw2, gb2 = ops.dense_backward(cache["hid_r"], self.params["head.fc2.weight"], glogits)
            grads["head.fc2.weight"] = gw2
            grads["head.fc2.bias"] = gb2
            ghid = ops.relu_backward(ghid_r, cache["hid_r"])
            gflat, gw1, gb1 = ops.dense_backward(cache["flat"], self.params["head.fc1.weight"], ghid)
            grads["head.fc1.weight"] = gw1
            grads["head.fc1.bias"] = gb1
            c, t, h, w = self.feat_shape
            gfeats = np.ascontiguousarray(
                np.broadcast_to(gflat.reshape(c, 1, h, w) / t, (c, t, h, w))
            )
        return grads, gfeats

    def forward(self, clip, want_cache=False):
        """clip (3,T,H,W) float64 -> class probabilities."""
        feats, bb_cache = self.trunk_forward(clip, want_cache=want_cache)
        if not want_cache:
            return self.head_forward(feats)
        probs, cache = self.head_forward(feats, want_cache=True)
        cache["bb"] = bb_cache
        return probs, cache

    def backward(self, cache, target_one_hot, loss_weight=1.0):
        """Grads of weighted cross-entropy w.r.t. every parameter."""
        grads, gfeats = self.head_backward(cache, target_one_hot, loss_weight)
        if self.trunk_frozen():
            return grads
        bb_grads, _ = backbone.backward(self.params, cache["bb"], gfeats)
        grads.update(bb_grads)
        return grads

    def trunk_frozen(self):
        return all(self._is_frozen(n) for n in self.params if n.startswith("backbone."))

    def _is_frozen(self, name):
        # frozen entries are exact parameter names or dotted prefixes
        return any(name == f or name.startswith(f + ".") for f in self.frozen)

    def frozen_param_names(self):
        return {n for n in self.params if self._is_frozen(n)}

    def predict(self, clip):
        probs = self.forward(clip)
        ops.assert_finite(probs, "class probabilities")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise FloatingPointError("class probabilities do not sum to 1")
        return probs


def build_variant(tag, class_count_or_names, input_shape=(3, 40, 64, 64), seed=0):
    """Construct one of the four variants."""
    if isinstance(class_count_or_names, int):
        names = [f"class_{i}" for i in range(class_count_or_names)]
    else:
        names = list(class_count_or_names)
    return VariantModel(tag, names, input_shape, seed)


def count_params(model):
    """(total, trainable) parameter scalars."""
    total = sum(p.size for p in model.params.values())
    frozen = model.frozen_param_names()
    trainable = sum(p.size for n, p in model.params.items() if n not in frozen)
    return total, trainable


def predict_clip(model, clip):
    """Class-probability vector for one normalized clip (3,T,H,W)."""
    return model.predict(np.ascontiguousarray(clip, dtype=np.float64))
