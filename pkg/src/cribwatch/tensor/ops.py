"""Dense-tensor ops with hand-written backward passes.

Conventions:
  * everything is float64; convolution is cross-correlation (no kernel flip)
  * `same` padding zero-fills, with the extra element of an odd total pad on
    the high-index side; `valid` applies no padding
  * each `<op>_backward` is the exact vector-Jacobian product of its forward,
    checked against central finite differences in the test suite
"""

from dataclasses import dataclass, field

import numpy as np

from ..backend import kernels

CLAMP = 1e-12


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def assert_finite(x, name="tensor"):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {name}")


def _pad_spec(n, k, s, padding):
    """Return (lo, hi, out_extent) for one axis."""
    if padding == "same":
        out = -(-n // s)
        total = max((out - 1) * s + k - n, 0)
        lo = total // 2
        return lo, total - lo, out
    if padding == "valid":
        if k > n:
            raise ValueError(f"kernel extent {k} exceeds input extent {n} (valid padding)")
        return 0, 0, (n - k) // s + 1
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def _zero_pad(x, pads):
    """Zero-pad the trailing axes of (C, ...) x; faster than np.pad."""
    if all(lo == 0 and hi == 0 for lo, hi in pads):
        return np.ascontiguousarray(x)
    shape = (x.shape[0], *(n + lo + hi for n, (lo, hi) in zip(x.shape[1:], pads)))
    out = np.zeros(shape)
    sl = tuple(slice(lo, lo + n) for n, (lo, _hi) in zip(x.shape[1:], pads))
    out[(slice(None), *sl)] = x
    return out


def _conv3d_prepare(x, kern, stride, padding):
    x = _f64(x)
    kern = _f64(kern)
    if x.ndim != 4 or kern.ndim != 5:
        raise ValueError(f"conv3d expects input (C,T,H,W) and kernel (Co,Ci,kT,kH,kW), got {x.shape} and {kern.shape}")
    if x.shape[0] != kern.shape[1]:
        raise ValueError(f"input has {x.shape[0]} channels but kernel expects {kern.shape[1]}")
    pads, outs = [], []
    for n, k, s in zip(x.shape[1:], kern.shape[2:], stride):
        lo, hi, out = _pad_spec(n, k, s, padding)
        pads.append((lo, hi))
        outs.append(out)
    return _zero_pad(x, pads), pads, outs


def conv3d(x, kern, bias=None, stride=(1, 1, 1), padding="same"):
    """Cross-correlate x (Ci,T,H,W) with kern (Co,Ci,kT,kH,kW)."""
    xpad, _, outs = _conv3d_prepare(x, kern, stride, padding)
    Co = kern.shape[0]
    b = np.zeros(Co) if bias is None else _f64(bias)
    out = np.empty((Co, *outs))
    kernels.conv3d_forward(xpad, _f64(kern), b, *stride, False, out)
    return out


def conv3d_backward(x, kern, gout, stride=(1, 1, 1), padding="same"):
    """Gradients of sum(gout * conv3d(x, kern)) w.r.t. x, kern, bias."""
    xpad, pads, outs = _conv3d_prepare(x, kern, stride, padding)
    kern = _f64(kern)
    gout = _f64(gout)
    if gout.shape != (kern.shape[0], *outs):
        raise ValueError(f"gout shape {gout.shape} does not match conv output {(kern.shape[0], *outs)}")
    gkern = np.empty_like(kern)
    kernels.conv3d_grad_w(xpad, gout, *stride, gkern)
    gbias = gout.sum(axis=(1, 2, 3))
    gx = _conv3d_grad_x(x.shape, kern, gout, stride, pads)
    return gx, gkern, gbias


def _conv3d_grad_x(xshape, kern, gout, stride, pads):
    Co, Ci = kern.shape[:2]
    ks = kern.shape[2:]
    if stride == (1, 1, 1):
        # Input gradient of a unit-stride correlation is itself a unit-stride
        # correlation: flipped kernel with in/out channels swapped, applied to
        # gout padded so the output lands exactly on the input extent.
        kflip = np.ascontiguousarray(
            kern[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4)
        )
        gpads = []
        for n, k, (lo, _hi), go_n in zip(xshape[1:], ks, pads, gout.shape[1:]):
            plo = k - 1 - lo
            phi = (n + k - 1) - go_n - plo
            gpads.append((plo, phi))
        gpad = _zero_pad(gout, gpads)
        gx = np.empty(xshape)
        kernels.conv3d_forward(gpad, kflip, np.zeros(Ci), 1, 1, 1, False, gx)
        return gx
    gxpad = np.zeros(
        (Ci, *(n + lo + hi for n, (lo, hi) in zip(xshape[1:], pads)))
    )
    kernels.conv3d_grad_x(gxpad, kern, gout, *stride)
    sl = tuple(slice(lo, lo + n) for n, (lo, _hi) in zip(xshape[1:], pads))
    return np.ascontiguousarray(gxpad[(slice(None), *sl)])


def conv2d(x, kern, bias=None, padding="same"):
    """Cross-correlate x (Ci,H,W) with kern (Co,Ci,kH,kW), unit stride."""
    x = _f64(x)
    kern = _f64(kern)
    if x.ndim != 3 or kern.ndim != 4:
        raise ValueError(f"conv2d expects input (C,H,W) and kernel (Co,Ci,kH,kW), got {x.shape} and {kern.shape}")
    out = conv3d(x[:, None], kern[:, :, None], bias, (1, 1, 1), padding)
    return out[:, 0]


def conv2d_backward(x, kern, gout, padding="same"):
    gx, gk, gb = conv3d_backward(
        _f64(x)[:, None], _f64(kern)[:, :, None], _f64(gout)[:, None],
        (1, 1, 1), padding,
    )
    return gx[:, 0], gk[:, :, 0], gb


def _pool_prepare(x, window, stride):
    x = _f64(x)
    if x.ndim != 4:
        raise ValueError(f"pooling expects (C,T,H,W), got {x.shape}")
    stride = window if stride is None else stride
    outs = []
    for n, w, s in zip(x.shape[1:], window, stride):
        if w > n:
            raise ValueError(f"pool window {w} exceeds input extent {n}")
        outs.append((n - w) // s + 1)
    return x, window, stride, outs


def maxpool3d(x, window, stride=None):
    x, window, stride, outs = _pool_prepare(x, window, stride)
    out = np.empty((x.shape[0], *outs))
    idx = np.empty(out.shape, dtype=np.int64)
    kernels.maxpool3d_forward(x, *window, *stride, out, idx)
    return out


def maxpool3d_backward(x, gout, window, stride=None):
    x, window, stride, outs = _pool_prepare(x, window, stride)
    out = np.empty((x.shape[0], *outs))
    idx = np.empty(out.shape, dtype=np.int64)
    kernels.maxpool3d_forward(x, *window, *stride, out, idx)
    gx = np.zeros(x.size)
    kernels.maxpool3d_backward(_f64(gout), idx, gx, x[0].size)
    return gx.reshape(x.shape)


def avgpool(x, window, stride=None):
    x, window, stride, outs = _pool_prepare(x, window, stride)
    out = np.empty((x.shape[0], *outs))
    kernels.avgpool3d_forward(x, *window, *stride, out)
    return out


def avgpool_backward(x_shape, gout, window, stride=None):
    stride = window if stride is None else stride
    gx = np.zeros(x_shape)
    kernels.avgpool3d_backward(_f64(gout), *window, *stride, gx)
    return gx


def relu(x):
    return np.maximum(_f64(x), 0.0)


def relu_backward(gout, y):
    """y is the saved relu output; the subgradient at 0 is 0."""
    return np.where(y > 0.0, gout, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-_f64(x)))


def sigmoid_backward(gout, y):
    return gout * y * (1.0 - y)


def tanh(x):
    return np.tanh(_f64(x))


def tanh_backward(gout, y):
    return gout * (1.0 - y * y)


def softmax(x):
    """Stable softmax over a 1-D logit vector; sums to 1 within 1e-12."""
    x = _f64(x)
    e = np.exp(x - x.max())
    return e / e.sum()


def softmax_backward(gout, y):
    return y * (gout - np.dot(gout, y))


def cross_entropy(probs, one_hot):
    """-sum(t * ln(p)) with p clamped below at 1e-12."""
    p = np.maximum(_f64(probs), CLAMP)
    loss = -float(np.dot(_f64(one_hot), np.log(p)))
    assert_finite(np.array(loss), "cross_entropy loss")
    return loss


def cross_entropy_backward(probs, one_hot):
    p = _f64(probs)
    t = _f64(one_hot)
    # below the clamp the loss no longer depends on p
    return np.where(p >= CLAMP, -t / np.maximum(p, CLAMP), 0.0)


def dense(x, weight, bias):
    """weight (out,in) @ x (in,) + bias (out,)."""
    return weight @ _f64(x) + bias


def dense_backward(x, weight, gout):
    gx = weight.T @ gout
    gw = np.outer(gout, x)
    return gx, gw, gout.copy()


@dataclass
class AdamState:
    """Per-parameter first/second moments plus shared hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params, grads, state, frozen=()):
    """One bias-corrected Adam update, in place. Frozen names are untouched."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        if name in frozen:
            continue
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
