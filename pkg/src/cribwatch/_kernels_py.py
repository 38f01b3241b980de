"""Pure-numpy fallback for the compiled kernels.

Same call signatures and semantics as ``_kernels_cy``; convolutions go
through im2col + BLAS matmul instead of direct stencil loops. Used when the
extension is unavailable or when CRIBWATCH_KERNELS=py is set.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _cols(xpad, kshape, st, sh, sw, oshape):
    C = xpad.shape[0]
    _, _, kT, kH, kW = kshape
    _, To, Ho, Wo = oshape
    sC, sT, sH, sW = xpad.strides
    view = as_strided(
        xpad,
        (C, kT, kH, kW, To, Ho, Wo),
        (sC, sT, sH, sW, sT * st, sH * sh, sW * sw),
    )
    return view.reshape(C * kT * kH * kW, To * Ho * Wo)


def conv3d_forward(xpad, kern, bias, st, sh, sw, relu, out):
    Co = kern.shape[0]
    cols = _cols(xpad, kern.shape, st, sh, sw, out.shape)
    res = kern.reshape(Co, -1) @ cols
    res += bias[:, None]
    if relu:
        np.maximum(res, 0.0, out=res)
    out[...] = res.reshape(out.shape)


def conv3d_grad_w(xpad, gout, st, sh, sw, gw):
    Co = gw.shape[0]
    cols = _cols(xpad, gw.shape, st, sh, sw, gout.shape)
    gw[...] = (gout.reshape(Co, -1) @ cols.T).reshape(gw.shape)


def conv3d_grad_x(gxpad, kern, gout, st, sh, sw):
    Co, Ci, kT, kH, kW = kern.shape
    _, To, Ho, Wo = gout.shape
    g2 = gout.reshape(Co, -1)
    for dt in range(kT):
        for dh in range(kH):
            for dw in range(kW):
                contrib = (kern[:, :, dt, dh, dw].T @ g2).reshape(Ci, To, Ho, Wo)
                gxpad[
                    :,
                    dt : dt + (To - 1) * st + 1 : st,
                    dh : dh + (Ho - 1) * sh + 1 : sh,
                    dw : dw + (Wo - 1) * sw + 1 : sw,
                ] += contrib


def _windows(x, wt, wh, ww, st, sh, sw, oshape):
    C, T, H, W = x.shape
    _, To, Ho, Wo = oshape
    sC, sT, sH, sW = x.strides
    return as_strided(
        x,
        (C, To, Ho, Wo, wt, wh, ww),
        (sC, sT * st, sH * sh, sW * sw, sT, sH, sW),
    )


def maxpool3d_forward(x, wt, wh, ww, st, sh, sw, out, idx):
    C, T, H, W = x.shape
    _, To, Ho, Wo = out.shape
    win = _windows(x, wt, wh, ww, st, sh, sw, out.shape).reshape(
        C, To, Ho, Wo, wt * wh * ww
    )
    flat_arg = win.argmax(axis=-1)
    out[...] = np.take_along_axis(win, flat_arg[..., None], axis=-1)[..., 0]
    dt, rem = np.divmod(flat_arg, wh * ww)
    dh, dw = np.divmod(rem, ww)
    c = np.arange(C)[:, None, None, None]
    ti = np.arange(To)[None, :, None, None] * st + dt
    hi = np.arange(Ho)[None, None, :, None] * sh + dh
    wi = np.arange(Wo)[None, None, None, :] * sw + dw
    idx[...] = ((c * T + ti) * H + hi) * W + wi


def maxpool3d_backward(gout, idx, gx_flat, per_channel):
    np.add.at(gx_flat, idx.ravel(), gout.ravel())


def avgpool3d_forward(x, wt, wh, ww, st, sh, sw, out):
    win = _windows(x, wt, wh, ww, st, sh, sw, out.shape)
    out[...] = win.mean(axis=(-3, -2, -1))


def avgpool3d_backward(gout, wt, wh, ww, st, sh, sw, gx):
    share = gout / float(wt * wh * ww)
    for dt in range(wt):
        for dh in range(wh):
            for dw in range(ww):
                To, Ho, Wo = gout.shape[1:]
                gx[
                    :,
                    dt : dt + (To - 1) * st + 1 : st,
                    dh : dh + (Ho - 1) * sh + 1 : sh,
                    dw : dw + (Wo - 1) * sw + 1 : sw,
                ] += share


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_gates_forward(z, c_prev, w_ci, w_cf, w_co, gi, gg, gf, go, c_new, tc, h_new):
    C = c_prev.shape[0]
    gi[...] = _sigmoid(z[:C] + w_ci * c_prev)
    gg[...] = np.tanh(z[C : 2 * C])
    gf[...] = _sigmoid(z[2 * C : 3 * C] + w_cf * c_prev)
    go[...] = _sigmoid(z[3 * C :] + w_co * c_prev)
    c_new[...] = gf * c_prev + gi * gg
    tc[...] = np.tanh(c_new)
    h_new[...] = tc * go


def lstm_gates_backward(dh, dc_in, gi, gg, gf, go, c_prev, tc, w_ci, w_cf, w_co,
                        dz, dc_prev, dw_ci, dw_cf, dw_co):
    C = c_prev.shape[0]
    do = dh * tc
    dc = dc_in + dh * go * (1.0 - tc * tc)
    dzi = dc * gg * gi * (1.0 - gi)
    dzg = dc * gi * (1.0 - gg * gg)
    dzf = dc * c_prev * gf * (1.0 - gf)
    dzo = do * go * (1.0 - go)
    dz[:C] = dzi
    dz[C : 2 * C] = dzg
    dz[2 * C : 3 * C] = dzf
    dz[3 * C :] = dzo
    dw_ci += dzi * c_prev
    dw_cf += dzf * c_prev
    dw_co += dzo * c_prev
    dc_prev[...] = dc * gf + dzi * w_ci + dzf * w_cf + dzo * w_co


def bilinear_warp(src, ys, xs, out):
    C, H, W = src.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0

    def sample(yi, xi):
        inb = (yi >= 0) & (yi < H) & (xi >= 0) & (xi < W)
        v = src[:, np.clip(yi, 0, H - 1), np.clip(xi, 0, W - 1)]
        return np.where(inb, v, 0.0)

    v00 = sample(y0, x0)
    v01 = sample(y0, x0 + 1)
    v10 = sample(y0 + 1, x0)
    v11 = sample(y0 + 1, x0 + 1)
    out[...] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * (
        (1.0 - fx) * v10 + fx * v11
    )
