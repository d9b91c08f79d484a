"""Compare the compiled overlap kernels against the numpy reference.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Times box IoU matrices at several problem sizes and RLE mask
intersections at several densities, then prints a speedup table.
The two backends are also cross-checked on every generated input.
"""

import argparse
import time

import numpy as np

from detlens import _kernels
from detlens._kernels import reference
from detlens.geometry import RleMask


def random_boxes(rng, n, canvas=2000.0):
    xy = rng.uniform(0, canvas * 0.9, size=(n, 2))
    wh = rng.uniform(4, canvas * 0.1, size=(n, 2))
    return np.ascontiguousarray(np.hstack([xy, wh]))


def random_rle(rng, height, width, density):
    dense = (rng.random((height, width)) < density).astype(np.uint8)
    return RleMask.from_dense(dense).counts


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_boxes(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for n_det, n_gt in ((100, 100), (500, 500), (2000, 1000)):
        dets = random_boxes(rng, n_det)
        gts = random_boxes(rng, n_gt)
        crowd = (rng.random(n_gt) < 0.05).astype(np.uint8)
        fast = timeit(lambda: _kernels.box_iou_matrix(dets, gts, crowd), repeats)
        slow = timeit(lambda: reference.box_iou_matrix(dets, gts, crowd), repeats)
        np.testing.assert_allclose(
            _kernels.box_iou_matrix(dets, gts, crowd),
            reference.box_iou_matrix(dets, gts, crowd), atol=1e-12)
        rows.append((f"box iou {n_det}x{n_gt}", slow, fast))
    return rows


def bench_rle(repeats):
    rng = np.random.default_rng(1)
    rows = []
    for density in (0.05, 0.3, 0.7):
        a = random_rle(rng, 640, 480, density)
        b = random_rle(rng, 640, 480, density)
        fast = timeit(lambda: _kernels.rle_intersection(a, b), repeats)
        slow = timeit(lambda: reference.rle_intersection(a, b), repeats)
        assert _kernels.rle_intersection(a, b) == reference.rle_intersection(a, b)
        rows.append((f"rle inter 640x480 d={density}", slow, fast))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if _kernels.backend_name() != "native":
        print("compiled backend is not active; timing reference against itself")
    print(f"active backend: {_kernels.backend_name()}")
    print(f"{'case':<28}{'reference':>12}{'active':>12}{'speedup':>9}")
    for name, slow, fast in bench_boxes(args.repeats) + bench_rle(args.repeats):
        print(f"{name:<28}{slow * 1e3:>10.3f}ms{fast * 1e3:>10.3f}ms"
              f"{slow / fast:>8.1f}x")


if __name__ == "__main__":
    main()
