"""Backend lanes must agree with each other and with the loop oracle."""

import numpy as np
import pytest

from portraitstyle import _convkernels_py, kernels

from test_autodiff import conv_oracle

try:
    from portraitstyle import _convkernels as ext
except ImportError:
    ext = None

needs_ext = pytest.mark.skipif(ext is None, reason="compiled extension not built")

CASES = [
    ((1, 2, 5, 5), (3, 2, 3, 3), 1),
    ((2, 3, 8, 8), (4, 3, 4, 4), 2),
    ((1, 1, 6, 7), (2, 1, 1, 1), 1),
    ((2, 4, 9, 9), (3, 4, 3, 3), 3),
]


def _data(shape, kshape, seed=0):
    rng = np.random.default_rng(seed)
    return (
        rng.normal(size=shape),
        rng.normal(size=kshape),
        rng.normal(size=kshape[0]),
    )


@pytest.mark.parametrize("shape,kshape,stride", CASES)
def test_python_lane_matches_oracle(shape, kshape, stride):
    x, w, b = _data(shape, kshape)
    out = _convkernels_py.conv2d_forward(x, w, b, stride)
    assert np.abs(out - conv_oracle(x, w, b, stride)).max() <= 1e-12


@needs_ext
@pytest.mark.parametrize("shape,kshape,stride", CASES)
def test_lanes_agree(shape, kshape, stride):
    x, w, b = _data(shape, kshape, seed=1)
    f_py = _convkernels_py.conv2d_forward(x, w, b, stride)
    f_cy = ext.conv2d_forward(x, w, b, stride)
    assert np.abs(f_py - f_cy).max() <= 1e-12

    kh, kw = kshape[2:]
    g = np.random.default_rng(2).normal(size=f_py.shape)
    hp, wp = shape[2:]
    di_py = _convkernels_py.conv2d_grad_input(w, g, stride, hp, wp)
    di_cy = ext.conv2d_grad_input(w, g, stride, hp, wp)
    assert np.abs(di_py - di_cy).max() <= 1e-12
    dk_py = _convkernels_py.conv2d_grad_kernel(x, g, stride, kh, kw)
    dk_cy = ext.conv2d_grad_kernel(x, g, stride, kh, kw)
    assert np.abs(dk_py - dk_cy).max() <= 1e-12


def test_backend_reports_active_lane():
    assert kernels.backend() in ("python", "cython")
    assert kernels.backend() == kernels.BACKEND
