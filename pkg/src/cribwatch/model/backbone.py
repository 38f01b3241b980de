"""Compact 3-D convolutional trunk shared by all model variants.

Stack: conv3d(3→16, k=3³, stride (1,2,2), same) + relu + maxpool(1,2,2)
       conv3d(16→32, k=3³, same) + relu + maxpool(2,2,2)
       conv3d(32→64, k=3³, same) + relu

A (3,40,64,64) clip comes out as (64,20,8,8).
"""

import numpy as np

from ..backend import kernels
from ..tensor import ops

LAYERS = (
    ("conv1", 3, 16, (1, 2, 2), (1, 2, 2)),
    ("conv2", 16, 32, (1, 1, 1), (2, 2, 2)),
    ("conv3", 32, 64, (1, 1, 1), None),
)


def init_params(rng, prefix="backbone"):
    params = {}
    for name, cin, cout, _stride, _pool in LAYERS:
        fan_in = cin * 27
        fan_out = cout * 27
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"{prefix}.{name}.kernel"] = rng.uniform(-limit, limit, (cout, cin, 3, 3, 3))
        params[f"{prefix}.{name}.bias"] = np.zeros(cout)
    return params


def forward(params, x, prefix="backbone", want_cache=False):
    """Run the trunk; optionally return layer caches for backward()."""
    cache = []
    cur = np.ascontiguousarray(x, dtype=np.float64)
    for name, _cin, _cout, stride, pool in LAYERS:
        kern = params[f"{prefix}.{name}.kernel"]
        bias = params[f"{prefix}.{name}.bias"]
        xpad, pads, outs = ops._conv3d_prepare(cur, kern, stride, "same")
        act = np.empty((kern.shape[0], *outs))
        kernels.conv3d_forward(xpad, kern, bias, *stride, True, act)
        pooled = act
        idx = None
        if pool is not None:
            pooled = np.empty((act.shape[0], *(n // p for n, p in zip(act.shape[1:], pool))))
            idx = np.empty(pooled.shape, dtype=np.int64)
            kernels.maxpool3d_forward(act, *pool, *pool, pooled, idx)
        if want_cache:
            cache.append({
                "xshape": cur.shape, "xpad": xpad, "pads": pads, "act": act,
                "idx": idx, "stride": stride, "pool": pool,
            })
        cur = pooled
    return (cur, cache) if want_cache else cur


def backward(params, cache, gout, prefix="backbone", need_input_grad=False):
    """Backprop through the trunk; reuses the padded inputs cached by forward."""
    grads = {}
    g = gout
    for layer_i in reversed(range(len(LAYERS))):
        name, _cin, _cout, stride, pool = LAYERS[layer_i]
        entry = cache[layer_i]
        act = entry["act"]
        if pool is not None:
            gact = np.zeros(act.size)
            kernels.maxpool3d_backward(np.ascontiguousarray(g), entry["idx"], gact, act[0].size)
            g = gact.reshape(act.shape)
        else:
            g = np.ascontiguousarray(g)
        kernels.relu_backward_inplace(g, act)
        kern = params[f"{prefix}.{name}.kernel"]
        gk = np.empty_like(kern)
        kernels.conv3d_grad_w(entry["xpad"], g, *stride, gk)
        grads[f"{prefix}.{name}.kernel"] = gk
        grads[f"{prefix}.{name}.bias"] = g.sum(axis=(1, 2, 3))
        if layer_i == 0 and not need_input_grad:
            g = None
        else:
            g = ops._conv3d_grad_x(entry["xshape"], kern, g, stride, entry["pads"])
    return grads, g


def output_shape(input_shape=(3, 40, 64, 64)):
    c, t, h, w = input_shape
    return (64, t // 2, h // 8, w // 8)


def param_count():
    """Closed-form hand sum over the declared layer shapes."""
    total = 0
    for _name, cin, cout, _stride, _pool in LAYERS:
        total += cout * cin * 27 + cout
    return total
