"""Convolution kernel backend selection.

Two interchangeable lanes implement the same contract: a numpy im2col lane
that leans on BLAS matmul, and a compiled Cython lane with direct loops.
Benchmarking (see benchmarks/bench_conv.py) shows the BLAS-backed lane is
faster for this network's GEMM-heavy shapes, so it is the default; the
compiled lane wins only small-channel stride-1 cases and stays available via
PORTRAITSTYLE_BACKEND=cython (raises at import if the extension is absent).
Both lanes are cross-checked against each other and a loop oracle in tests.
"""

import os

from . import _convkernels_py

_requested = os.environ.get("PORTRAITSTYLE_BACKEND", "auto")
if _requested not in ("auto", "python", "cython"):
    raise ValueError(f"PORTRAITSTYLE_BACKEND must be auto|python|cython, got {_requested!r}")

_impl = _convkernels_py
BACKEND = "python"
if _requested == "cython":
    try:
        from . import _convkernels as _impl

        BACKEND = "cython"
    except ImportError:
        raise ImportError(
            "PORTRAITSTYLE_BACKEND=cython but the compiled extension is not built; "
            "reinstall with a C compiler available"
        ) from None

conv2d_forward = _impl.conv2d_forward
conv2d_grad_input = _impl.conv2d_grad_input
conv2d_grad_kernel = _impl.conv2d_grad_kernel


def backend() -> str:
    """Name of the active kernel lane: "python" or "cython"."""
    return BACKEND
