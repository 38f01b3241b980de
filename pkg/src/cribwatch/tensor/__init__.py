from .ops import (
    AdamState,
    adam_step,
    assert_finite,
    avgpool,
    avgpool_backward,
    conv2d,
    conv2d_backward,
    conv3d,
    conv3d_backward,
    cross_entropy,
    cross_entropy_backward,
    dense,
    dense_backward,
    maxpool3d,
    maxpool3d_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
)

__all__ = [
    "AdamState",
    "adam_step",
    "assert_finite",
    "avgpool",
    "avgpool_backward",
    "conv2d",
    "conv2d_backward",
    "conv3d",
    "conv3d_backward",
    "cross_entropy",
    "cross_entropy_backward",
    "dense",
    "dense_backward",
    "maxpool3d",
    "maxpool3d_backward",
    "relu",
    "relu_backward",
    "sigmoid",
    "sigmoid_backward",
    "softmax",
    "softmax_backward",
    "tanh",
    "tanh_backward",
]
