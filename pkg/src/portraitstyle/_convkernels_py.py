"""Pure-numpy convolution kernels (im2col / col2im lane).

Fallback used when the compiled extension is unavailable. Operates on
already-padded inputs; cross-correlation semantics, double precision.
"""

import numpy as np


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Rearrange (N,C,Hp,Wp) into columns (N, C*kh*kw, Ho*Wo)."""
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, ho, wo),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    return view.reshape(n, c * kh * kw, ho * wo)


def conv2d_forward(xp: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Cross-correlate padded input (N,C,Hp,Wp) with kernel (O,C,kh,kw)."""
    n, _, hp, wp = xp.shape
    o, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = _im2col(xp, kh, kw, stride)
    out = np.matmul(w.reshape(o, -1), cols) + b[:, None]
    return out.reshape(n, o, ho, wo)


def conv2d_grad_input(
    w: np.ndarray, gout: np.ndarray, stride: int, hp: int, wp: int
) -> np.ndarray:
    """Gradient w.r.t. the padded input; scatter-adds column gradients back."""
    n, o, ho, wo = gout.shape
    _, c, kh, kw = w.shape
    dcols = np.matmul(w.reshape(o, -1).T, gout.reshape(n, o, ho * wo))
    dcols = dcols.reshape(n, c, kh, kw, ho, wo)
    dxp = np.zeros((n, c, hp, wp), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += dcols[
                :, :, i, j
            ]
    return dxp


def conv2d_grad_kernel(xp: np.ndarray, gout: np.ndarray, stride: int, kh: int, kw: int) -> np.ndarray:
    """Gradient w.r.t. the kernel (O,C,kh,kw)."""
    n, o, ho, wo = gout.shape
    c = xp.shape[1]
    cols = _im2col(xp, kh, kw, stride)
    dw = np.tensordot(gout.reshape(n, o, ho * wo), cols, axes=([0, 2], [0, 2]))
    return dw.reshape(o, c, kh, kw)
