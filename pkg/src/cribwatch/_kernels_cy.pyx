# Hot numeric kernels: direct 3D convolution (forward, weight-grad,
# input-grad), pooling, fused ConvLSTM gate math, and bilinear warping.
# Everything is float64, C-contiguous, and deterministic: each OpenMP task
# writes a disjoint output slab and accumulation orders are fixed, so results
# do not depend on thread count.
#
# The 3x3-tap fast paths are written as lane-parallel stencils (independent
# FMA streams over contiguous lanes) so the C compiler can vectorize them
# under strict IEEE semantics; the stride-2 paths split rows into even/odd
# phases to keep loads contiguous.

from cython.parallel cimport prange

from libc.math cimport exp, tanh
from libc.stdlib cimport free, malloc
from libc.string cimport memset



# Workloads below this many MACs run serially: OpenMP region entry/exit
# dominates for the ConvLSTM's tiny per-step convolutions.
DEF PAR_THRESHOLD = 400000

cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


# ---------------------------------------------------------------------------
# convolution forward
# ---------------------------------------------------------------------------

cdef inline void _row9_s1(double* acc, const double* r0, const double* r1,
                          const double* r2, const double* k9,
                          Py_ssize_t Wo) noexcept nogil:
    # acc[wo] += 3x3 stencil over rows r0..r2, unit W stride. acc is a
    # thread-local scratch row, which the compiler knows cannot alias the
    # input rows, so the loop vectorizes under strict FP semantics.
    cdef Py_ssize_t wo
    cdef double k00 = k9[0], k01 = k9[1], k02 = k9[2]
    cdef double k10 = k9[3], k11 = k9[4], k12 = k9[5]
    cdef double k20 = k9[6], k21 = k9[7], k22 = k9[8]
    for wo in range(Wo):
        acc[wo] += (k00 * r0[wo] + k01 * r0[wo + 1] + k02 * r0[wo + 2]
                    + k10 * r1[wo] + k11 * r1[wo + 1] + k12 * r1[wo + 2]
                    + k20 * r2[wo] + k21 * r2[wo + 1] + k22 * r2[wo + 2])


cdef inline void _row9_eo(double* acc,
                          const double* e0, const double* o0,
                          const double* e1, const double* o1,
                          const double* e2, const double* o2,
                          const double* k9, Py_ssize_t Wo) noexcept nogil:
    # W-stride-2 variant on even/odd phase rows: x[2wo+d] -> e[wo],o[wo],e[wo+1]
    cdef Py_ssize_t wo
    cdef double k00 = k9[0], k01 = k9[1], k02 = k9[2]
    cdef double k10 = k9[3], k11 = k9[4], k12 = k9[5]
    cdef double k20 = k9[6], k21 = k9[7], k22 = k9[8]
    for wo in range(Wo):
        acc[wo] += (k00 * e0[wo] + k01 * o0[wo] + k02 * e0[wo + 1]
                    + k10 * e1[wo] + k11 * o1[wo] + k12 * e1[wo + 1]
                    + k20 * e2[wo] + k21 * o2[wo] + k22 * e2[wo + 1])


cdef inline void _store_row(double* orow, const double* acc, double bias,
                            bint relu, Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t wo
    cdef double v
    for wo in range(Wo):
        v = acc[wo] + bias
        if relu and v < 0.0:
            v = 0.0
        orow[wo] = v


cdef inline void _split_eo(const double* row, double* e, double* o,
                           Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(Wo):
        e[j] = row[2 * j]
        o[j] = row[2 * j + 1]
    e[Wo] = row[2 * Wo]


cdef void _fwd_task_s1(const double* xp, const double* kp, double* op,
                       const double* bp, Py_ssize_t co, Py_ssize_t to,
                       Py_ssize_t Ci, Py_ssize_t kT,
                       Py_ssize_t Tp, Py_ssize_t Hp, Py_ssize_t Wp,
                       Py_ssize_t To, Py_ssize_t Ho, Py_ssize_t Wo,
                       Py_ssize_t st, Py_ssize_t sh, bint relu) noexcept nogil:
    # One (co,to) output slice, unit W stride, 3x3 spatial taps.
    cdef double acc[128]
    cdef Py_ssize_t ho, ci, dt, wo
    cdef const double *base
    for ho in range(Ho):
        for wo in range(Wo):
            acc[wo] = 0.0
        for ci in range(Ci):
            for dt in range(kT):
                base = xp + ((ci * Tp + to * st + dt) * Hp + ho * sh) * Wp
                _row9_s1(acc, base, base + Wp, base + 2 * Wp,
                         kp + ((co * Ci + ci) * kT + dt) * 9, Wo)
        _store_row(op + ((co * To + to) * Ho + ho) * Wo, acc, bp[co], relu, Wo)


cdef void _fwd_task_s1_r2(const double* xp, const double* kp, double* op,
                          const double* bp, Py_ssize_t co, Py_ssize_t to,
                          Py_ssize_t Ci, Py_ssize_t kT,
                          Py_ssize_t Tp, Py_ssize_t Hp, Py_ssize_t Wp,
                          Py_ssize_t To, Py_ssize_t Ho, Py_ssize_t Wo,
                          Py_ssize_t st, bint relu) noexcept nogil:
    # Unit spatial strides, even Ho: adjacent output rows share two of their
    # three input rows, so each kernel-tap load feeds two rows of FMAs.
    cdef double acc0[128]
    cdef double acc1[128]
    cdef Py_ssize_t ho, ci, dt, wo
    cdef const double *r0
    cdef const double *k9
    cdef double k00, k01, k02, k10, k11, k12, k20, k21, k22
    for ho in range(0, Ho, 2):
        for wo in range(Wo):
            acc0[wo] = 0.0
            acc1[wo] = 0.0
        for ci in range(Ci):
            for dt in range(kT):
                r0 = xp + ((ci * Tp + to * st + dt) * Hp + ho) * Wp
                k9 = kp + ((co * Ci + ci) * kT + dt) * 9
                k00 = k9[0]; k01 = k9[1]; k02 = k9[2]
                k10 = k9[3]; k11 = k9[4]; k12 = k9[5]
                k20 = k9[6]; k21 = k9[7]; k22 = k9[8]
                for wo in range(Wo):
                    acc0[wo] += (k00 * r0[wo] + k01 * r0[wo + 1] + k02 * r0[wo + 2]
                                 + k10 * r0[Wp + wo] + k11 * r0[Wp + wo + 1] + k12 * r0[Wp + wo + 2]
                                 + k20 * r0[2 * Wp + wo] + k21 * r0[2 * Wp + wo + 1] + k22 * r0[2 * Wp + wo + 2])
                    acc1[wo] += (k00 * r0[Wp + wo] + k01 * r0[Wp + wo + 1] + k02 * r0[Wp + wo + 2]
                                 + k10 * r0[2 * Wp + wo] + k11 * r0[2 * Wp + wo + 1] + k12 * r0[2 * Wp + wo + 2]
                                 + k20 * r0[3 * Wp + wo] + k21 * r0[3 * Wp + wo + 1] + k22 * r0[3 * Wp + wo + 2])
        _store_row(op + ((co * To + to) * Ho + ho) * Wo, acc0, bp[co], relu, Wo)
        _store_row(op + ((co * To + to) * Ho + ho + 1) * Wo, acc1, bp[co], relu, Wo)


cdef void _fwd_generic(const double* xp, const double* kp, double* orow,
                       Py_ssize_t co, Py_ssize_t to, Py_ssize_t ho,
                       Py_ssize_t Ci, Py_ssize_t kT, Py_ssize_t kH, Py_ssize_t kW,
                       Py_ssize_t Tp, Py_ssize_t Hp, Py_ssize_t Wp,
                       Py_ssize_t st, Py_ssize_t sh, Py_ssize_t sw,
                       Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t ci, dt, dh, dw, wo
    cdef double kv
    cdef const double *xrow
    cdef const double *krow
    for ci in range(Ci):
        for dt in range(kT):
            for dh in range(kH):
                xrow = xp + ((ci * Tp + to * st + dt) * Hp + ho * sh + dh) * Wp
                krow = kp + (((co * Ci + ci) * kT + dt) * kH + dh) * kW
                for dw in range(kW):
                    kv = krow[dw]
                    for wo in range(Wo):
                        orow[wo] += kv * xrow[wo * sw + dw]


cdef void _fwd_block_s2(const double* xp, const double* kp, double* op,
                        const double* bp, Py_ssize_t to,
                        Py_ssize_t Co, Py_ssize_t Ci,
                        Py_ssize_t kT, Py_ssize_t Tp, Py_ssize_t Hp, Py_ssize_t Wp,
                        Py_ssize_t To, Py_ssize_t Ho, Py_ssize_t Wo,
                        Py_ssize_t st, Py_ssize_t sh, bint relu,
                        double* scratch) noexcept nogil:
    # One temporal slice, W stride 2, 3x3 spatial taps. scratch holds
    # Ci*kT*3 even/odd row pairs of length (Wo+1).
    cdef double acc[128]
    cdef Py_ssize_t ho, ci, dt, dh, co, wo, r
    cdef Py_ssize_t pitch = 2 * (Wo + 1)
    cdef const double *xrow
    cdef double *eo
    for ho in range(Ho):
        r = 0
        for ci in range(Ci):
            for dt in range(kT):
                for dh in range(3):
                    xrow = xp + ((ci * Tp + to * st + dt) * Hp + ho * sh + dh) * Wp
                    eo = scratch + r * pitch
                    _split_eo(xrow, eo, eo + (Wo + 1), Wo)
                    r = r + 1
        for co in range(Co):
            for wo in range(Wo):
                acc[wo] = 0.0
            r = 0
            for ci in range(Ci):
                for dt in range(kT):
                    eo = scratch + r * pitch
                    _row9_eo(acc,
                             eo, eo + (Wo + 1),
                             eo + pitch, eo + pitch + (Wo + 1),
                             eo + 2 * pitch, eo + 2 * pitch + (Wo + 1),
                             kp + ((co * Ci + ci) * kT + dt) * 9, Wo)
                    r = r + 3
            _store_row(op + ((co * To + to) * Ho + ho) * Wo, acc, bp[co], relu, Wo)


def conv3d_forward(double[:, :, :, ::1] xpad,
                   double[:, :, :, :, ::1] kern,
                   double[::1] bias,
                   int st, int sh, int sw,
                   bint relu,
                   double[:, :, :, ::1] out):
    """Cross-correlate padded input (Ci,Tp,Hp,Wp) with kern (Co,Ci,kT,kH,kW).

    Writes out (Co,To,Ho,Wo), seeded with bias[co]; optionally clamps at 0.
    """
    cdef Py_ssize_t Co = kern.shape[0], Ci = kern.shape[1]
    cdef Py_ssize_t kT = kern.shape[2], kH = kern.shape[3], kW = kern.shape[4]
    cdef Py_ssize_t To = out.shape[1], Ho = out.shape[2], Wo = out.shape[3]
    cdef Py_ssize_t Tp = xpad.shape[1], Hp = xpad.shape[2], Wp = xpad.shape[3]
    cdef double *xp = &xpad[0, 0, 0, 0]
    cdef double *kp = &kern[0, 0, 0, 0, 0]
    cdef double *op = &out[0, 0, 0, 0]
    cdef double *bp = &bias[0]
    cdef Py_ssize_t p, co, to, ho, wo
    cdef double *orow
    cdef double *scratch
    cdef bint tap9 = kH == 3 and kW == 3 and Wo <= 128
    cdef bint par = Co * To * Ho * Wo * Ci * kT * kH * kW > PAR_THRESHOLD

    if tap9 and sw == 2:
        for to in prange(To, nogil=True, schedule='static', use_threads_if=par):
            scratch = <double *> malloc(Ci * kT * 3 * 2 * (Wo + 1) * sizeof(double))
            _fwd_block_s2(xp, kp, op, bp, to, Co, Ci, kT, Tp, Hp, Wp,
                          To, Ho, Wo, st, sh, relu, scratch)
            free(scratch)
        return

    if tap9 and sw == 1 and sh == 1 and Ho % 2 == 0:
        for p in prange(Co * To, nogil=True, schedule='static', use_threads_if=par):
            _fwd_task_s1_r2(xp, kp, op, bp, p // To, p % To, Ci, kT,
                            Tp, Hp, Wp, To, Ho, Wo, st, relu)
        return

    if tap9 and sw == 1:
        for p in prange(Co * To, nogil=True, schedule='static', use_threads_if=par):
            _fwd_task_s1(xp, kp, op, bp, p // To, p % To, Ci, kT,
                         Tp, Hp, Wp, To, Ho, Wo, st, sh, relu)
        return

    for p in prange(Co * To, nogil=True, schedule='static', use_threads_if=par):
        co = p // To
        to = p % To
        for ho in range(Ho):
            orow = op + ((co * To + to) * Ho + ho) * Wo
            for wo in range(Wo):
                orow[wo] = bp[co]
            _fwd_generic(xp, kp, orow, co, to, ho, Ci, kT, kH, kW,
                         Tp, Hp, Wp, st, sh, sw, Wo)
            if relu:
                for wo in range(Wo):
                    if orow[wo] < 0.0:
                        orow[wo] = 0.0


# ---------------------------------------------------------------------------
# convolution weight gradient
# ---------------------------------------------------------------------------

cdef void _gradw9_s1(const double* gbase, const double* xbase,
                     Py_ssize_t To, Py_ssize_t Ho, Py_ssize_t Wo,
                     Py_ssize_t st, Py_ssize_t sh,
                     Py_ssize_t Hp, Py_ssize_t Wp,
                     double* out9) noexcept nogil:
    # 3x3-tap weight gradient for one (co,ci,dt): nine lane-parallel
    # accumulator vectors, horizontally summed once at the end.
    cdef double a[9][8]
    cdef Py_ssize_t to, ho, wo, l, t
    cdef const double *grow
    cdef const double *r0
    cdef const double *r1
    cdef const double *r2
    cdef double g
    memset(a, 0, sizeof(a))
    for to in range(To):
        for ho in range(Ho):
            grow = gbase + (to * Ho + ho) * Wo
            r0 = xbase + (to * st * Hp + ho * sh) * Wp
            r1 = r0 + Wp
            r2 = r0 + 2 * Wp
            for wo in range(0, Wo, 8):
                for l in range(8):
                    g = grow[wo + l]
                    a[0][l] += g * r0[wo + l]
                    a[1][l] += g * r0[wo + l + 1]
                    a[2][l] += g * r0[wo + l + 2]
                    a[3][l] += g * r1[wo + l]
                    a[4][l] += g * r1[wo + l + 1]
                    a[5][l] += g * r1[wo + l + 2]
                    a[6][l] += g * r2[wo + l]
                    a[7][l] += g * r2[wo + l + 1]
                    a[8][l] += g * r2[wo + l + 2]
    for t in range(9):
        out9[t] = (((a[t][0] + a[t][1]) + (a[t][2] + a[t][3]))
                   + ((a[t][4] + a[t][5]) + (a[t][6] + a[t][7])))


cdef void _gradw9_eo(const double* gp, const double* xp, double* wp,
                     Py_ssize_t task, Py_ssize_t Co, Py_ssize_t Ci,
                     Py_ssize_t kT, Py_ssize_t Tp, Py_ssize_t Hp, Py_ssize_t Wp,
                     Py_ssize_t To, Py_ssize_t Ho, Py_ssize_t Wo,
                     Py_ssize_t st, Py_ssize_t sh,
                     double* acc, double* slab) noexcept nogil:
    # W-stride-2 weight gradient for one (ci,dt) plane pair across all co.
    # acc: Co*9*8 lane accumulators; slab: Hp even/odd row pairs.
    cdef Py_ssize_t ci = task // kT
    cdef Py_ssize_t dt = task % kT
    cdef Py_ssize_t pitch = 2 * (Wo + 1)
    cdef Py_ssize_t to, h, co, ho, wo, l, t
    cdef const double *xrow
    cdef const double *grow
    cdef const double *e0
    cdef const double *o0
    cdef const double *e1
    cdef const double *o1
    cdef const double *e2
    cdef const double *o2
    cdef double *arr
    cdef double g
    memset(acc, 0, Co * 9 * 8 * sizeof(double))
    for to in range(To):
        for h in range(Hp):
            xrow = xp + ((ci * Tp + to * st + dt) * Hp + h) * Wp
            _split_eo(xrow, slab + h * pitch, slab + h * pitch + (Wo + 1), Wo)
        for co in range(Co):
            for ho in range(Ho):
                grow = gp + ((co * To + to) * Ho + ho) * Wo
                e0 = slab + (ho * sh) * pitch
                o0 = e0 + (Wo + 1)
                e1 = slab + (ho * sh + 1) * pitch
                o1 = e1 + (Wo + 1)
                e2 = slab + (ho * sh + 2) * pitch
                o2 = e2 + (Wo + 1)
                arr = acc + co * 72
                for wo in range(0, Wo, 8):
                    for l in range(8):
                        g = grow[wo + l]
                        arr[l] += g * e0[wo + l]
                        arr[8 + l] += g * o0[wo + l]
                        arr[16 + l] += g * e0[wo + l + 1]
                        arr[24 + l] += g * e1[wo + l]
                        arr[32 + l] += g * o1[wo + l]
                        arr[40 + l] += g * e1[wo + l + 1]
                        arr[48 + l] += g * e2[wo + l]
                        arr[56 + l] += g * o2[wo + l]
                        arr[64 + l] += g * e2[wo + l + 1]
    for co in range(Co):
        arr = acc + co * 72
        for t in range(9):
            wp[(((co * Ci + ci) * kT + dt) * 3 + t // 3) * 3 + t % 3] = (
                ((arr[t * 8] + arr[t * 8 + 1]) + (arr[t * 8 + 2] + arr[t * 8 + 3]))
                + ((arr[t * 8 + 4] + arr[t * 8 + 5]) + (arr[t * 8 + 6] + arr[t * 8 + 7])))


def conv3d_grad_w(double[:, :, :, ::1] xpad,
                  double[:, :, :, ::1] gout,
                  int st, int sh, int sw,
                  double[:, :, :, :, ::1] gw):
    """gw[co,ci,dt,dh,dw] = sum_{to,ho,wo} gout[co,to,ho,wo] * xpad[ci,to*st+dt,ho*sh+dh,wo*sw+dw]."""
    cdef Py_ssize_t Co = gw.shape[0], Ci = gw.shape[1]
    cdef Py_ssize_t kT = gw.shape[2], kH = gw.shape[3], kW = gw.shape[4]
    cdef Py_ssize_t To = gout.shape[1], Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t Tp = xpad.shape[1], Hp = xpad.shape[2], Wp = xpad.shape[3]
    cdef double *xp = &xpad[0, 0, 0, 0]
    cdef double *gp = &gout[0, 0, 0, 0]
    cdef double *wp = &gw[0, 0, 0, 0, 0]
    cdef Py_ssize_t p, co, ci, dt, dh, dw, to, ho, wo
    cdef double acc_s
    cdef const double *grow
    cdef const double *xrow
    cdef double *accbuf
    cdef double *slab
    cdef bint tap9 = kH == 3 and kW == 3 and Wo % 8 == 0
    cdef bint par = Co * To * Ho * Wo * Ci * kT * kH * kW > PAR_THRESHOLD

    if tap9 and sw == 1:
        for p in prange(Co * Ci * kT, nogil=True, schedule='static', use_threads_if=par):
            co = p // (Ci * kT)
            ci = (p // kT) % Ci
            dt = p % kT
            _gradw9_s1(gp + co * To * Ho * Wo,
                       xp + (ci * Tp + dt) * Hp * Wp,
                       To, Ho, Wo, st, sh, Hp, Wp,
                       wp + p * 9)
        return

    if tap9 and sw == 2:
        for p in prange(Ci * kT, nogil=True, schedule='static', use_threads_if=par):
            accbuf = <double *> malloc(Co * 72 * sizeof(double))
            slab = <double *> malloc(Hp * 2 * (Wo + 1) * sizeof(double))
            _gradw9_eo(gp, xp, wp, p, Co, Ci, kT, Tp, Hp, Wp,
                       To, Ho, Wo, st, sh, accbuf, slab)
            free(accbuf)
            free(slab)
        return

    for co in prange(Co, nogil=True, schedule='static', use_threads_if=par):
        for ci in range(Ci):
            for dt in range(kT):
                for dh in range(kH):
                    for dw in range(kW):
                        acc_s = 0.0
                        for to in range(To):
                            for ho in range(Ho):
                                grow = gp + ((co * To + to) * Ho + ho) * Wo
                                xrow = xp + ((ci * Tp + to * st + dt) * Hp + ho * sh + dh) * Wp
                                for wo in range(Wo):
                                    acc_s = acc_s + grow[wo] * xrow[wo * sw + dw]
                        wp[(((co * Ci + ci) * kT + dt) * kH + dh) * kW + dw] = acc_s


def conv3d_grad_x(double[:, :, :, ::1] gxpad,
                  double[:, :, :, :, ::1] kern,
                  double[:, :, :, ::1] gout,
                  int st, int sh, int sw):
    """Scatter gout back through the kernel into the zeroed padded-input buffer.

    Generic any-stride path; unit-stride input gradients go through
    conv3d_forward with a flipped/transposed kernel instead (see tensor.ops).
    """
    cdef Py_ssize_t Co = kern.shape[0], Ci = kern.shape[1]
    cdef Py_ssize_t kT = kern.shape[2], kH = kern.shape[3], kW = kern.shape[4]
    cdef Py_ssize_t To = gout.shape[1], Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t Tp = gxpad.shape[1], Hp = gxpad.shape[2], Wp = gxpad.shape[3]
    cdef double *xp = &gxpad[0, 0, 0, 0]
    cdef double *kp = &kern[0, 0, 0, 0, 0]
    cdef double *gp = &gout[0, 0, 0, 0]
    cdef Py_ssize_t ci, co, to, ho, dt, dh, dw, wo
    cdef double kv, g
    cdef double *xrow
    cdef const double *grow
    cdef const double *krow

    # Parallel over input channels: each task owns gxpad[ci], no write races.
    for ci in prange(Ci, nogil=True, schedule='static'):
        for co in range(Co):
            for to in range(To):
                for dt in range(kT):
                    for ho in range(Ho):
                        for dh in range(kH):
                            xrow = xp + ((ci * Tp + to * st + dt) * Hp + ho * sh + dh) * Wp
                            grow = gp + ((co * To + to) * Ho + ho) * Wo
                            krow = kp + (((co * Ci + ci) * kT + dt) * kH + dh) * kW
                            for dw in range(kW):
                                kv = krow[dw]
                                for wo in range(Wo):
                                    xrow[wo * sw + dw] += kv * grow[wo]


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def maxpool3d_forward(double[:, :, :, ::1] x,
                      int wt, int wh, int ww,
                      int st, int sh, int sw,
                      double[:, :, :, ::1] out,
                      long long[:, :, :, ::1] idx):
    """Max over (wt,wh,ww) windows; idx stores the flat argmax into x."""
    cdef Py_ssize_t C = x.shape[0], T = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t To = out.shape[1], Ho = out.shape[2], Wo = out.shape[3]
    cdef Py_ssize_t c, to, ho, wo, dt, dh, dw, ti, hi, wi
    cdef double best, v
    cdef long long besti

    for c in prange(C, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    best = x[c, to * st, ho * sh, wo * sw]
                    besti = ((c * T + to * st) * H + ho * sh) * W + wo * sw
                    for dt in range(wt):
                        ti = to * st + dt
                        for dh in range(wh):
                            hi = ho * sh + dh
                            for dw in range(ww):
                                wi = wo * sw + dw
                                v = x[c, ti, hi, wi]
                                if v > best:
                                    best = v
                                    besti = ((c * T + ti) * H + hi) * W + wi
                    out[c, to, ho, wo] = best
                    idx[c, to, ho, wo] = besti


def maxpool3d_backward(double[:, :, :, ::1] gout,
                       long long[:, :, :, ::1] idx,
                       double[::1] gx_flat,
                       Py_ssize_t per_channel):
    """Scatter-add gout at saved argmax positions (gx_flat pre-zeroed)."""
    cdef Py_ssize_t C = gout.shape[0], To = gout.shape[1]
    cdef Py_ssize_t Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t c, to, ho, wo

    # idx entries for channel c all land in [c*per_channel, (c+1)*per_channel).
    for c in prange(C, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    gx_flat[idx[c, to, ho, wo]] += gout[c, to, ho, wo]


def avgpool3d_forward(double[:, :, :, ::1] x,
                      int wt, int wh, int ww,
                      int st, int sh, int sw,
                      double[:, :, :, ::1] out):
    cdef Py_ssize_t C = x.shape[0]
    cdef Py_ssize_t To = out.shape[1], Ho = out.shape[2], Wo = out.shape[3]
    cdef Py_ssize_t c, to, ho, wo, dt, dh, dw
    cdef double acc, inv
    inv = 1.0 / (wt * wh * ww)

    for c in prange(C, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    acc = 0.0
                    for dt in range(wt):
                        for dh in range(wh):
                            for dw in range(ww):
                                acc = acc + x[c, to * st + dt, ho * sh + dh, wo * sw + dw]
                    out[c, to, ho, wo] = acc * inv


def avgpool3d_backward(double[:, :, :, ::1] gout,
                       int wt, int wh, int ww,
                       int st, int sh, int sw,
                       double[:, :, :, ::1] gx):
    """Spread gout/window_volume over each window (gx pre-zeroed)."""
    cdef Py_ssize_t C = gout.shape[0], To = gout.shape[1]
    cdef Py_ssize_t Ho = gout.shape[2], Wo = gout.shape[3]
    cdef Py_ssize_t c, to, ho, wo, dt, dh, dw
    cdef double share, inv
    inv = 1.0 / (wt * wh * ww)

    for c in prange(C, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    share = gout[c, to, ho, wo] * inv
                    for dt in range(wt):
                        for dh in range(wh):
                            for dw in range(ww):
                                gx[c, to * st + dt, ho * sh + dh, wo * sw + dw] += share


# ---------------------------------------------------------------------------
# fused ConvLSTM gate math
# ---------------------------------------------------------------------------

def lstm_gates_forward(double[:, :, ::1] z,
                       double[:, :, ::1] c_prev,
                       double[:, :, ::1] w_ci,
                       double[:, :, ::1] w_cf,
                       double[:, :, ::1] w_co,
                       double[:, :, ::1] gi,
                       double[:, :, ::1] gg,
                       double[:, :, ::1] gf,
                       double[:, :, ::1] go,
                       double[:, :, ::1] c_new,
                       double[:, :, ::1] tc,
                       double[:, :, ::1] h_new):
    """Fused gate math for one ConvLSTM step.

    z stacks the four pre-activations (conv + bias terms) in gate order
    i,g,f,o along axis 0; peephole terms are added here, before the
    nonlinearities. The update gate g carries no peephole, and the output
    gate peeks at the previous cell state.
    """
    cdef Py_ssize_t C = c_prev.shape[0], H = c_prev.shape[1], W = c_prev.shape[2]
    cdef Py_ssize_t n = C * H * W
    cdef double *zp = &z[0, 0, 0]
    cdef double *cp = &c_prev[0, 0, 0]
    cdef double *pci = &w_ci[0, 0, 0]
    cdef double *pcf = &w_cf[0, 0, 0]
    cdef double *pco = &w_co[0, 0, 0]
    cdef double *ip = &gi[0, 0, 0]
    cdef double *gp = &gg[0, 0, 0]
    cdef double *fp = &gf[0, 0, 0]
    cdef double *op = &go[0, 0, 0]
    cdef double *cn = &c_new[0, 0, 0]
    cdef double *tp = &tc[0, 0, 0]
    cdef double *hp = &h_new[0, 0, 0]
    cdef Py_ssize_t k
    cdef double c0, iv, gv, fv, ov, cv
    cdef bint par = n > 16384

    for k in prange(n, nogil=True, schedule='static', use_threads_if=par):
        c0 = cp[k]
        iv = _sigmoid(zp[k] + pci[k] * c0)
        gv = tanh(zp[n + k])
        fv = _sigmoid(zp[2 * n + k] + pcf[k] * c0)
        ov = _sigmoid(zp[3 * n + k] + pco[k] * c0)
        cv = fv * c0 + iv * gv
        ip[k] = iv
        gp[k] = gv
        fp[k] = fv
        op[k] = ov
        cn[k] = cv
        tp[k] = tanh(cv)
        hp[k] = tp[k] * ov


def lstm_gates_backward(double[:, :, ::1] dh,
                        double[:, :, ::1] dc_in,
                        double[:, :, ::1] gi,
                        double[:, :, ::1] gg,
                        double[:, :, ::1] gf,
                        double[:, :, ::1] go,
                        double[:, :, ::1] c_prev,
                        double[:, :, ::1] tc,
                        double[:, :, ::1] w_ci,
                        double[:, :, ::1] w_cf,
                        double[:, :, ::1] w_co,
                        double[:, :, ::1] dz,
                        double[:, :, ::1] dc_prev,
                        double[:, :, ::1] dw_ci,
                        double[:, :, ::1] dw_cf,
                        double[:, :, ::1] dw_co):
    """Reverse of lstm_gates_forward; accumulates into the peephole grads."""
    cdef Py_ssize_t C = c_prev.shape[0], H = c_prev.shape[1], W = c_prev.shape[2]
    cdef Py_ssize_t n = C * H * W
    cdef double *dhp = &dh[0, 0, 0]
    cdef double *dcp = &dc_in[0, 0, 0]
    cdef double *ip = &gi[0, 0, 0]
    cdef double *gp = &gg[0, 0, 0]
    cdef double *fp = &gf[0, 0, 0]
    cdef double *op = &go[0, 0, 0]
    cdef double *cp = &c_prev[0, 0, 0]
    cdef double *tp = &tc[0, 0, 0]
    cdef double *pci = &w_ci[0, 0, 0]
    cdef double *pcf = &w_cf[0, 0, 0]
    cdef double *pco = &w_co[0, 0, 0]
    cdef double *dzp = &dz[0, 0, 0]
    cdef double *dcn = &dc_prev[0, 0, 0]
    cdef double *dci = &dw_ci[0, 0, 0]
    cdef double *dcf = &dw_cf[0, 0, 0]
    cdef double *dco = &dw_co[0, 0, 0]
    cdef Py_ssize_t k
    cdef double dhv, dc, do_, dzi, dzg, dzf, dzo, iv, gv, fv, ov, tv, c0
    cdef bint par = n > 16384

    for k in prange(n, nogil=True, schedule='static', use_threads_if=par):
        iv = ip[k]
        gv = gp[k]
        fv = fp[k]
        ov = op[k]
        tv = tp[k]
        c0 = cp[k]
        dhv = dhp[k]
        do_ = dhv * tv
        dc = dcp[k] + dhv * ov * (1.0 - tv * tv)
        dzi = dc * gv * iv * (1.0 - iv)
        dzg = dc * iv * (1.0 - gv * gv)
        dzf = dc * c0 * fv * (1.0 - fv)
        dzo = do_ * ov * (1.0 - ov)
        dzp[k] = dzi
        dzp[n + k] = dzg
        dzp[2 * n + k] = dzf
        dzp[3 * n + k] = dzo
        dci[k] += dzi * c0
        dcf[k] += dzf * c0
        dco[k] += dzo * c0
        dcn[k] = dc * fv + dzi * pci[k] + dzf * pcf[k] + dzo * pco[k]


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------

def relu_backward_inplace(double[:, :, :, ::1] grad,
                          double[:, :, :, ::1] activ):
    """Zero grad wherever the saved post-relu activation is <= 0."""
    cdef Py_ssize_t n = grad.shape[0] * grad.shape[1] * grad.shape[2] * grad.shape[3]
    cdef double *g = &grad[0, 0, 0, 0]
    cdef double *a = &activ[0, 0, 0, 0]
    cdef Py_ssize_t k
    for k in prange(n, nogil=True, schedule='static'):
        if a[k] <= 0.0:
            g[k] = 0.0


def bilinear_warp(double[:, :, ::1] src,
                  double[:, ::1] ys,
                  double[:, ::1] xs,
                  double[:, :, ::1] out):
    """Sample src (C,H,W) at (ys,xs) per output pixel; zero outside bounds."""
    cdef Py_ssize_t C = src.shape[0], H = src.shape[1], W = src.shape[2]
    cdef Py_ssize_t Ho = out.shape[1], Wo = out.shape[2]
    cdef Py_ssize_t c, i, j, y0, x0, y1, x1
    cdef double y, x, fy, fx, v00, v01, v10, v11

    for c in prange(C, nogil=True, schedule='static'):
        for i in range(Ho):
            for j in range(Wo):
                y = ys[i, j]
                x = xs[i, j]
                if y <= -1.0 or x <= -1.0 or y >= <double>H or x >= <double>W:
                    out[c, i, j] = 0.0
                    continue
                y0 = <Py_ssize_t>y if y >= 0 else -1
                x0 = <Py_ssize_t>x if x >= 0 else -1
                y1 = y0 + 1
                x1 = x0 + 1
                fy = y - <double>y0
                fx = x - <double>x0
                v00 = src[c, y0, x0] if (y0 >= 0 and x0 >= 0) else 0.0
                v01 = src[c, y0, x1] if (y0 >= 0 and x1 < W) else 0.0
                v10 = src[c, y1, x0] if (y1 < H and x0 >= 0) else 0.0
                v11 = src[c, y1, x1] if (y1 < H and x1 < W) else 0.0
                out[c, i, j] = ((1.0 - fy) * ((1.0 - fx) * v00 + fx * v01)
                                + fy * ((1.0 - fx) * v10 + fx * v11))
