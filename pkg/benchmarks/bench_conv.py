"""Benchmark the compiled conv kernels against the numpy im2col lane.

Times forward, input-gradient, and kernel-gradient calls over the shapes the
network actually runs, plus a couple of larger rasters. Run from a checkout
where the extension was built:

    python benchmarks/bench_conv.py
"""

import time

import numpy as np

from portraitstyle import _convkernels_py

try:
    from portraitstyle import _convkernels as _ext
except ImportError:
    _ext = None

# (label, N, C, H, W, O, k, stride); spatial sizes are pre-padding
CASES = [
    ("enc1 16x16", 1, 3, 18, 18, 16, 3, 1),
    ("enc2 16x16", 1, 16, 18, 18, 32, 4, 2),
    ("dec1 16x16", 1, 48, 6, 6, 32, 3, 1),
    ("enc1 64x64", 1, 3, 66, 66, 16, 3, 1),
    ("enc2 64x64", 1, 16, 66, 66, 32, 4, 2),
    ("enc2 128x128", 1, 16, 130, 130, 32, 4, 2),
]


def _time(fn, *args, repeats=20):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(impl, label):
    rng = np.random.default_rng(0)
    print(f"\n== {label}")
    print(f"{'case':>14s} {'forward':>10s} {'grad_in':>10s} {'grad_k':>10s}")
    for name, n, c, h, w, o, k, stride in CASES:
        xp = rng.normal(size=(n, c, h, w))
        wk = rng.normal(size=(o, c, k, k))
        b = rng.normal(size=o)
        ho = (h - k) // stride + 1
        wo = (w - k) // stride + 1
        g = rng.normal(size=(n, o, ho, wo))
        tf = _time(impl.conv2d_forward, xp, wk, b, stride)
        ti = _time(impl.conv2d_grad_input, wk, g, stride, h, w)
        tk = _time(impl.conv2d_grad_kernel, xp, g, stride, k, k)
        print(f"{name:>14s} {tf * 1e6:9.1f}u {ti * 1e6:9.1f}u {tk * 1e6:9.1f}u")


def main():
    bench(_convkernels_py, "numpy im2col lane")
    if _ext is None:
        print("\ncompiled extension not built; skipping the cython lane")
        return
    bench(_ext, "cython lane")
    # cross-check the lanes agree
    rng = np.random.default_rng(1)
    xp = rng.normal(size=(2, 5, 12, 12))
    wk = rng.normal(size=(7, 5, 3, 3))
    b = rng.normal(size=7)
    diff = np.abs(
        _convkernels_py.conv2d_forward(xp, wk, b, 1) - _ext.conv2d_forward(xp, wk, b, 1)
    ).max()
    print(f"\nlane agreement (max abs diff): {diff:.3e}")


if __name__ == "__main__":
    main()
