"""Finite-difference verification of every differentiable operation.

Each check builds a scalar loss from seeded random leaves, runs backward
once, then compares analytic gradients against central differences at
sampled coordinates. Losses are kept at unit scale so the difference
quotient stays well conditioned at h=1e-5.

ReLU makes the loss piecewise smooth: when a kink falls inside the probe
interval the central difference is off by exactly |f(x+h)+f(x-h)-2f(x)|/2h,
so a discrepancy that curvature fully accounts for is a contaminated probe,
not a wrong gradient. Such coordinates are swapped for fresh samples; a bad
vjp corrupts coordinates everywhere and cannot hide behind this test.
"""

from __future__ import annotations

import zlib

import numpy as np

from . import autodiff as ad
from .attention import AttentionBlock, FusionWeights, fuse_levels, sanet_attend
from .autodiff import Tensor
from .network import StyleNet, init_parameters
from .training import TrainConfig, _batch_objective

DEFAULT_TOL = 1e-4
_REL_FLOOR = 1e-3  # coordinates with tiny true gradients are judged near-absolutely
_MAX_COORDS = 24


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), _REL_FLOOR)


def _coords(rng: np.random.Generator, shape: tuple[int, ...], limit: int):
    total = int(np.prod(shape))
    if total <= limit:
        picks = np.arange(total)
    else:
        picks = rng.choice(total, size=limit, replace=False)
    return [np.unravel_index(int(i), shape) for i in picks]


def _check(
    leaves: dict[str, Tensor], build, rng: np.random.Generator, h: float, limit: int = _MAX_COORDS
) -> float:
    """Worst relative error across sampled coordinates of all leaves."""
    for t in leaves.values():
        t.zero_grad()
    build().backward()

    def value() -> float:
        with ad.no_grad():
            return build().item()

    f0 = value()
    worst = 0.0
    for t in leaves.values():
        candidates = _coords(rng, t.data.shape, 3 * limit)
        accepted = 0
        for idx in candidates:
            if accepted >= limit:
                break
            orig = t.data[idx]
            t.data[idx] = orig + h
            fp = value()
            t.data[idx] = orig - h
            fm = value()
            t.data[idx] = orig
            numeric = (fp - fm) / (2.0 * h)
            analytic = float(t.grad[idx])
            err = _rel_err(analytic, numeric)
            if err > DEFAULT_TOL / 4:
                kink = abs(fp + fm - 2.0 * f0) / (2.0 * h)
                if kink >= 0.5 * abs(analytic - numeric):
                    continue  # probe straddles a kink; try another coordinate
            accepted += 1
            worst = max(worst, err)
    return worst


def _proj_loss(out: Tensor, rng: np.random.Generator) -> Tensor:
    """Random fixed projection to a scalar; keeps every output coordinate live."""
    r = Tensor(rng.normal(size=out.shape) / np.sqrt(out.size))
    return ad.sum_all(ad.mul(out, r))


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, x + np.sign(x + 1e-12) * margin, x)


def _check_conv2d(rng, h):
    worst = 0.0
    for stride, pad, mode, k in ((1, 1, "zero", 3), (2, 1, "zero", 4), (1, 1, "reflect", 3)):
        x = Tensor(rng.normal(size=(2, 3, 6, 6)), requires_grad=True)
        w = Tensor(rng.normal(size=(4, 3, k, k)) * 0.5, requires_grad=True)
        b = Tensor(rng.normal(size=4), requires_grad=True)
        with ad.no_grad():
            out_shape = ad.conv2d(x, w, b, stride=stride, padding=mode, pad_size=pad).shape
        r = Tensor(rng.normal(size=out_shape) / np.sqrt(int(np.prod(out_shape))))

        def build(x=x, w=w, b=b, r=r, stride=stride, pad=pad, mode=mode):
            out = ad.conv2d(x, w, b, stride=stride, padding=mode, pad_size=pad)
            return ad.sum_all(ad.mul(out, r))

        worst = max(worst, _check({"x": x, "w": w, "b": b}, build, rng, h))
    return worst


def _check_relu(rng, h):
    x = Tensor(_away_from_zero(rng, (3, 5)), requires_grad=True)
    r = Tensor(rng.normal(size=(3, 5)))
    return _check({"x": x}, lambda: ad.sum_all(ad.mul(ad.relu(x), r)), rng, h)


def _check_instance_norm(rng, h):
    x = Tensor(rng.normal(size=(2, 3, 4, 5)), requires_grad=True)
    r = Tensor(rng.normal(size=(2, 3, 4, 5)))
    return _check({"x": x}, lambda: ad.sum_all(ad.mul(ad.instance_norm(x), r)), rng, h)


def _check_softmax_rows(rng, h):
    x = Tensor(rng.normal(size=(4, 7)), requires_grad=True)
    r = Tensor(rng.normal(size=(4, 7)))
    return _check({"x": x}, lambda: ad.sum_all(ad.mul(ad.softmax_rows(x), r)), rng, h)


def _check_matmul(rng, h):
    a = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    r = Tensor(rng.normal(size=(5, 6)))
    return _check({"a": a, "b": b}, lambda: ad.sum_all(ad.mul(ad.matmul(a, b), r)), rng, h)


def _check_upsample(rng, h):
    x = Tensor(rng.normal(size=(1, 2, 3, 3)), requires_grad=True)
    r = Tensor(rng.normal(size=(1, 2, 6, 6)))
    return _check({"x": x}, lambda: ad.sum_all(ad.mul(ad.upsample_nearest(x, 2), r)), rng, h)


def _check_sanet_attend(rng, h):
    c = 4
    leaves = {
        "fc": Tensor(rng.normal(size=(1, c, 2, 3)), requires_grad=True),
        "fs": Tensor(rng.normal(size=(1, c, 3, 2)), requires_grad=True),
        "fw": Tensor(rng.normal(size=(c // 2, c, 1, 1)), requires_grad=True),
        "fb": Tensor(rng.normal(size=c // 2), requires_grad=True),
        "gw": Tensor(rng.normal(size=(c // 2, c, 1, 1)), requires_grad=True),
        "gb": Tensor(rng.normal(size=c // 2), requires_grad=True),
        "hw": Tensor(rng.normal(size=(c, c, 1, 1)), requires_grad=True),
        "hb": Tensor(rng.normal(size=c), requires_grad=True),
    }
    r = Tensor(rng.normal(size=(1, c, 2, 3)))

    def build():
        block = AttentionBlock(
            leaves["fw"], leaves["fb"], leaves["gw"], leaves["gb"], leaves["hw"], leaves["hb"]
        )
        return ad.sum_all(ad.mul(sanet_attend(block, leaves["fc"], leaves["fs"]), r))

    return _check(leaves, build, rng, h)


def _check_fuse_levels(rng, h):
    leaves = {
        "s4": Tensor(rng.normal(size=(1, 4, 4, 4)), requires_grad=True),
        "s5": Tensor(rng.normal(size=(1, 6, 2, 2)), requires_grad=True),
        "pw": Tensor(rng.normal(size=(4, 6, 1, 1)), requires_grad=True),
        "pb": Tensor(rng.normal(size=4), requires_grad=True),
    }
    weights = FusionWeights(0.7, 0.5)
    r = Tensor(rng.normal(size=(1, 4, 4, 4)))

    def build():
        return ad.sum_all(
            ad.mul(fuse_levels(leaves["s4"], leaves["s5"], weights, leaves["pw"], leaves["pb"]), r)
        )

    return _check(leaves, build, rng, h)


def _check_decode(rng, h):
    net = StyleNet(init_parameters(int(rng.integers(1 << 31))), trainable=True)
    res = Tensor(rng.normal(size=(1, 48, 4, 4)), requires_grad=True)
    r = Tensor(rng.normal(size=(1, 3, 16, 16)) / 48.0)
    leaves = {"res": res}
    for name in ("dec1.weight", "dec1.bias", "dec2.weight", "dec2.bias", "dec3.weight", "dec3.bias"):
        leaves[name] = net.params[name]
    return _check(leaves, lambda: ad.sum_all(ad.mul(net.decode(res), r)), rng, h)


def _check_full_loss(rng, h):
    net = StyleNet(init_parameters(int(rng.integers(1 << 31))), trainable=True)
    config = TrainConfig(content_dir=".", style_dir=".", steps=0)
    ic = Tensor(rng.uniform(0.05, 0.95, size=(1, 3, 16, 16)))
    is_ = Tensor(rng.uniform(0.05, 0.95, size=(1, 3, 16, 16)))

    with ad.no_grad():
        scale = 1.0 / max(1.0, _batch_objective(net, ic, is_, config)[0].item())

    def build():
        total, _ = _batch_objective(net, ic, is_, config)
        return ad.scale(total, scale)

    return _check(net.parameters(), build, rng, h, limit=8)


_CHECKS = [
    ("conv2d", _check_conv2d),
    ("relu", _check_relu),
    ("instance_norm", _check_instance_norm),
    ("softmax_rows", _check_softmax_rows),
    ("matmul", _check_matmul),
    ("upsample_nearest", _check_upsample),
    ("sanet_attend", _check_sanet_attend),
    ("fuse_levels", _check_fuse_levels),
    ("decode", _check_decode),
    ("full_loss", _check_full_loss),
]


def run_gradcheck(seed: int = 42, h: float = 1e-5) -> dict[str, float]:
    """Worst analytic-vs-numeric relative error for every checked op."""
    results: dict[str, float] = {}
    for name, fn in _CHECKS:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        results[name] = fn(rng, h)
    return results


def report(results: dict[str, float], tol: float = DEFAULT_TOL) -> tuple[str, bool]:
    lines = []
    ok = True
    for name, err in results.items():
        passed = err <= tol
        ok = ok and passed
        lines.append(f"{name:18s} worst rel err {err:.3e}  {'ok' if passed else 'FAIL'}")
    return "\n".join(lines), ok
