# cython: boundscheck=False, wraparound=False, cdivision=True
"""Direct-convolution kernels, compiled lane.

Same contract as _convkernels_py: padded inputs, cross-correlation,
double precision, C-contiguous arrays. Loops are arranged so the innermost
pass runs along a full output row (axpy/dot shape) and vectorizes.
"""

import numpy as np


def conv2d_forward(double[:, :, :, ::1] xp, double[:, :, :, ::1] w,
                   double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    cdef Py_ssize_t hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t o = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (hp - kh) // stride + 1
    cdef Py_ssize_t wo = (wp - kw) // stride + 1
    out_arr = np.empty((n, o, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bi, oi, ci, i, j, oh, ow
    cdef double wv, bv
    cdef const double *xrow
    cdef double *orow
    for bi in range(n):
        for oi in range(o):
            bv = b[oi]
            for oh in range(ho):
                orow = &out[bi, oi, oh, 0]
                for ow in range(wo):
                    orow[ow] = bv
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[oi, ci, i, j]
                        for oh in range(ho):
                            xrow = &xp[bi, ci, oh * stride + i, j]
                            orow = &out[bi, oi, oh, 0]
                            if stride == 1:
                                for ow in range(wo):
                                    orow[ow] += wv * xrow[ow]
                            else:
                                for ow in range(wo):
                                    orow[ow] += wv * xrow[ow * stride]
    return out_arr


def conv2d_grad_input(double[:, :, :, ::1] w, double[:, :, :, ::1] gout,
                      Py_ssize_t stride, Py_ssize_t hp, Py_ssize_t wp):
    cdef Py_ssize_t n = gout.shape[0], o = gout.shape[1]
    cdef Py_ssize_t ho = gout.shape[2], wo = gout.shape[3]
    cdef Py_ssize_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    dxp_arr = np.zeros((n, c, hp, wp), dtype=np.float64)
    cdef double[:, :, :, ::1] dxp = dxp_arr
    cdef Py_ssize_t bi, oi, ci, i, j, oh, ow
    cdef double wv
    cdef double *drow
    cdef const double *grow
    for bi in range(n):
        for oi in range(o):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[oi, ci, i, j]
                        for oh in range(ho):
                            drow = &dxp[bi, ci, oh * stride + i, j]
                            grow = &gout[bi, oi, oh, 0]
                            if stride == 1:
                                for ow in range(wo):
                                    drow[ow] += wv * grow[ow]
                            else:
                                for ow in range(wo):
                                    drow[ow * stride] += wv * grow[ow]
    return dxp_arr


def conv2d_grad_kernel(double[:, :, :, ::1] xp, double[:, :, :, ::1] gout,
                       Py_ssize_t stride, Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t n = gout.shape[0], o = gout.shape[1]
    cdef Py_ssize_t ho = gout.shape[2], wo = gout.shape[3]
    cdef Py_ssize_t c = xp.shape[1]
    dw_arr = np.zeros((o, c, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t bi, oi, ci, i, j, oh, ow
    cdef double acc
    cdef const double *xrow
    cdef const double *grow
    for bi in range(n):
        for oi in range(o):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        acc = 0.0
                        for oh in range(ho):
                            xrow = &xp[bi, ci, oh * stride + i, j]
                            grow = &gout[bi, oi, oh, 0]
                            if stride == 1:
                                for ow in range(wo):
                                    acc += grow[ow] * xrow[ow]
                            else:
                                for ow in range(wo):
                                    acc += grow[ow] * xrow[ow * stride]
                        dw[oi, ci, i, j] += acc
    return dw_arr
