"""Benchmark the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py

Shapes mirror the real workloads: the stem's strided first convolution over
a long spectrogram, 3x3 convs on pooled maps, and the 2x2 max pools.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from aqakit.neural import _kernels_np as knp  # noqa: E402

try:
    from aqakit.neural import _kernels_cy as kcy
except ImportError:
    kcy = None

CASES = [
    # (label, (n, c, h, w), kernel, stride)
    ("stem first conv  (1x64xT, 3x12 s1x9)", (8, 1, 66, 2400), (3, 12), (1, 9)),
    ("stem 3x3 conv    (32ch, 64xT/9)", (8, 32, 66, 270), (3, 3), (1, 1)),
    ("film 3x3 conv    (34ch, 8xT/72)", (40, 34, 10, 35), (3, 3), (1, 1)),
]
POOL_CASES = [
    ("maxpool 2x2      (32ch, 64xT/9)", (8, 32, 64, 268)),
    ("maxpool 2x2      (128ch, 16xT/36)", (40, 128, 16, 67)),
]


def timeit(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"{'case':42s} {'numpy':>9s} {'cython':>9s} {'speedup':>8s}")
    for label, shape, (kh, kw), (sh, sw) in CASES:
        xp = np.ascontiguousarray(rng.standard_normal(shape).astype(np.float32))
        t_np = timeit(lambda: knp.im2col(xp, kh, kw, sh, sw))
        cols = knp.im2col(xp, kh, kw, sh, sw)
        t_np_b = timeit(lambda: knp.col2im(cols, xp.shape, kh, kw, sh, sw))
        if kcy is not None:
            t_cy = timeit(lambda: kcy.im2col(xp, kh, kw, sh, sw))
            t_cy_b = timeit(lambda: kcy.col2im(cols, *xp.shape, kh, kw, sh, sw))
        else:
            t_cy = t_cy_b = float("nan")
        print(f"{label + ' im2col':42s} {t_np * 1e3:8.2f}m {t_cy * 1e3:8.2f}m "
              f"{t_np / t_cy:7.2f}x" if kcy else f"{label:42s} {t_np * 1e3:8.2f}m")
        print(f"{'  + col2im (backward)':42s} {t_np_b * 1e3:8.2f}m "
              f"{t_cy_b * 1e3:8.2f}m {t_np_b / t_cy_b:7.2f}x" if kcy
              else f"{'  + col2im':42s} {t_np_b * 1e3:8.2f}m")
    for label, shape in POOL_CASES:
        x = np.ascontiguousarray(rng.standard_normal(shape).astype(np.float32))
        t_np = timeit(lambda: knp.maxpool_forward(x, 2, 2, 2, 2))
        if kcy is not None:
            t_cy = timeit(lambda: kcy.maxpool_forward(x, 2, 2, 2, 2))
            print(f"{label:42s} {t_np * 1e3:8.2f}m {t_cy * 1e3:8.2f}m "
                  f"{t_np / t_cy:7.2f}x")
        else:
            print(f"{label:42s} {t_np * 1e3:8.2f}m")
    if kcy is None:
        print("\ncompiled kernels not built; run "
              "`python setup.py build_ext --inplace` to compare")


if __name__ == "__main__":
    main()
