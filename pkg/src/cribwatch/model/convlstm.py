"""Convolutional LSTM cell with Hadamard peephole connections.

Gate structure, per step (⊙ is elementwise, * is 2-D convolution):

    i = σ(W_xi * x + U_hi * h + W_ci ⊙ c + b_i)
    g = tanh(W_xg * x + U_hg * h + b_g)          # update gate: no peephole
    f = σ(W_xf * x + U_hf * h + W_cf ⊙ c + b_f)
    o = σ(W_xo * x + U_ho * h + W_co ⊙ c + b_o)  # peeks at the *previous* cell
    c' = f ⊙ c + i ⊙ g
    h' = tanh(c') ⊙ o

Peepholes are per-element tensors shaped like the state, not convolutions.
"""

from dataclasses import dataclass

import numpy as np

from ..backend import kernels
from ..tensor import ops

GATE_ORDER = ("i", "g", "f", "o")


@dataclass
class ConvLSTMState:
    c: np.ndarray  # memory cell (C,H,W)
    h: np.ndarray  # hidden output (C,H,W)

    def copy(self):
        return ConvLSTMState(self.c.copy(), self.h.copy())


class ConvLSTMCell:
    """Holds feedforward/recurrent kernels, peepholes, and biases."""

    def __init__(self, in_channels, out_channels, kernel_size, spatial, rng=None):
        if kernel_size % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.spatial = tuple(spatial)
        rng = rng or np.random.default_rng(0)
        k = kernel_size
        co, ci = out_channels, in_channels
        h, w = self.spatial

        def glorot(fan_in, fan_out, shape):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, shape)

        self.params = {}
        for gate in GATE_ORDER:
            self.params[f"w_x{gate}"] = glorot(ci * k * k, co * k * k, (co, ci, k, k))
        for gate in GATE_ORDER:
            self.params[f"u_h{gate}"] = glorot(co * k * k, co * k * k, (co, co, k, k))
        for gate in ("i", "f", "o"):
            self.params[f"w_c{gate}"] = np.zeros((co, h, w))
        for gate in GATE_ORDER:
            # forget bias starts at 1 so early steps retain memory
            fill = 1.0 if gate == "f" else 0.0
            self.params[f"b_{gate}"] = np.full(co, fill)

    def zero_state(self):
        h, w = self.spatial
        return ConvLSTMState(
            np.zeros((self.out_channels, h, w)), np.zeros((self.out_channels, h, w))
        )

    def _stacked(self):
        p = self.params
        wx = np.ascontiguousarray(
            np.concatenate([p[f"w_x{g}"] for g in GATE_ORDER], axis=0)
        )
        uh = np.ascontiguousarray(
            np.concatenate([p[f"u_h{g}"] for g in GATE_ORDER], axis=0)
        )
        bias = np.concatenate([p[f"b_{g}"] for g in GATE_ORDER])
        return wx, uh, bias

    def _check_step_shapes(self, x, state):
        h, w = self.spatial
        if x.shape != (self.in_channels, h, w):
            raise ValueError(f"step input shape {x.shape} != cell input {(self.in_channels, h, w)}")
        if state.c.shape != (self.out_channels, h, w) or state.h.shape != state.c.shape:
            raise ValueError(f"state shapes {state.c.shape}/{state.h.shape} do not match cell")

    def _gates(self, z, state):
        co = self.out_channels
        h, w = self.spatial
        buf = [np.empty((co, h, w)) for _ in range(7)]
        kernels.lstm_gates_forward(
            z, state.c, self.params["w_ci"], self.params["w_cf"], self.params["w_co"],
            *buf,
        )
        return buf  # i, g, f, o, c_new, tanh(c_new), h_new

    def step(self, x, state):
        """One recurrence step; returns the next state."""
        self._check_step_shapes(x, state)
        wx, uh, bias = self._stacked()
        z = ops.conv2d(x, wx, bias) + ops.conv2d(state.h, uh)
        z = np.ascontiguousarray(z)
        *_rest, c_new, _tc, h_new = self._gates(z, state)
        return ConvLSTMState(c_new, h_new)

    def forward_sequence(self, seq, init=None):
        """Run T steps over seq (C_in,T,H,W); returns (final, history, cache).

        history is (T,C_out,H,W). cache carries everything backward() needs,
        including each step's padded hidden state (reused by the recurrent
        convolution gradients).
        """
        ci, T = seq.shape[0], seq.shape[1]
        if ci != self.in_channels:
            raise ValueError(f"sequence has {ci} channels, cell expects {self.in_channels}")
        state = self.zero_state() if init is None else init.copy()
        wx, uh, bias = self._stacked()
        uh5 = uh[:, :, None]
        # feedforward convs for all steps at once: a kT=1 conv over the T axis
        zff = ops.conv3d(seq, wx[:, :, None], bias, (1, 1, 1), "same")
        co = self.out_channels
        h, w = self.spatial
        lo = (self.kernel_size - 1) // 2
        hi = self.kernel_size - 1 - lo
        rec = np.empty((4 * co, 1, h, w))
        nobias = np.zeros(4 * co)
        steps = []
        history = np.empty((T, co, h, w))
        for t in range(T):
            hpad = np.zeros((co, 1, h + lo + hi, w + lo + hi))
            hpad[:, 0, lo : lo + h, lo : lo + w] = state.h
            kernels.conv3d_forward(hpad, uh5, nobias, 1, 1, 1, False, rec)
            z = np.ascontiguousarray(zff[:, t])
            z += rec[:, 0]
            gi, gg, gf, go, c_new, tc, h_new = self._gates(z, state)
            steps.append((state, hpad, gi, gg, gf, go, c_new, tc))
            state = ConvLSTMState(c_new, h_new)
            history[t] = h_new
        cache = {"seq": seq, "steps": steps, "wx": wx, "uh": uh}
        return state, history, cache

    def backward(self, cache, dh_final=None, dh_history=None):
        """BPTT through a cached forward_sequence pass.

        Returns (grads keyed like params, dseq (C_in,T,H,W)).
        """
        seq, steps, wx, uh = cache["seq"], cache["steps"], cache["wx"], cache["uh"]
        T = len(steps)
        co = self.out_channels
        h, w = self.spatial
        k = self.kernel_size
        lo = (k - 1) // 2
        hi = k - 1 - lo
        p = self.params
        dwc = {g: np.zeros((co, h, w)) for g in ("i", "f", "o")}
        g_uh = np.zeros((4 * co, co, 1, k, k))
        g_uh_t = np.empty_like(g_uh)
        uh_flip = np.ascontiguousarray(
            uh[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)[:, :, None]
        )
        nobias = np.zeros(co)
        # full-correlation padding: extent h+k-1 with interior at k-1-lo makes
        # the transpose conv land exactly on the hidden-state extent
        dzpad = np.zeros((4 * co, 1, h + k - 1, w + k - 1))
        dh_prev = np.empty((co, 1, h, w))
        dz_seq = np.empty((4 * co, T, h, w))
        dc = np.zeros((co, h, w))
        dh = np.zeros((co, h, w))
        if dh_final is not None:
            dh = dh + dh_final
        dz = np.empty((4 * co, h, w))
        glo = k - 1 - lo
        for t in reversed(range(T)):
            if dh_history is not None:
                dh = dh + dh_history[t]
            prev, hpad, gi, gg, gf, go, c_new, tc = steps[t]
            dc_prev = np.empty((co, h, w))
            kernels.lstm_gates_backward(
                np.ascontiguousarray(dh), dc, gi, gg, gf, go, prev.c, tc,
                p["w_ci"], p["w_cf"], p["w_co"],
                dz, dc_prev, dwc["i"], dwc["f"], dwc["o"],
            )
            dz_seq[:, t] = dz
            dz4 = dz[:, None]
            kernels.conv3d_grad_w(hpad, dz4, 1, 1, 1, g_uh_t)
            g_uh += g_uh_t
            dzpad[:, 0, glo : glo + h, glo : glo + w] = dz
            kernels.conv3d_forward(dzpad, uh_flip, nobias, 1, 1, 1, False, dh_prev)
            dh = dh_prev[:, 0].copy()
            dc = dc_prev
        # feedforward grads for the whole sequence in one batched conv backward
        dseq, g_wx, g_bias = ops.conv3d_backward(
            seq, wx[:, :, None], dz_seq, (1, 1, 1), "same"
        )
        grads = {}
        for j, gate in enumerate(GATE_ORDER):
            grads[f"w_x{gate}"] = g_wx[j * co : (j + 1) * co, :, 0]
            grads[f"u_h{gate}"] = g_uh[j * co : (j + 1) * co, :, 0]
            grads[f"b_{gate}"] = g_bias[j * co : (j + 1) * co]
        for gate in ("i", "f", "o"):
            grads[f"w_c{gate}"] = dwc[gate]
        return grads, dseq


def convlstm_step(cell, x, prev):
    """Single ConvLSTM step (pure)."""
    return cell.step(x, prev)


def convlstm_forward(cell, sequence, init=None):
    """Run a (T,C_in,H,W) sequence; returns (final state, h history (T,...))."""
    seq = np.ascontiguousarray(np.asarray(sequence, dtype=np.float64).transpose(1, 0, 2, 3))
    final, history, _cache = cell.forward_sequence(seq, init)
    return final, history
