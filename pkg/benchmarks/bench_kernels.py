"""Time every kernel under both backends and check they agree.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 5]

The numba variants are called once before timing so compilation is not
counted.  Results go to stdout as a plain table.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from garmentflow.kernels import correlation, diffusion, raster, warp
from garmentflow.synthdata import Pose, PuppetModel, PuppetSpec


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, atol=1e-9)
    return a == b


def cases(size, rng):
    model = PuppetModel(PuppetSpec(seed=1, canvas=(size, size)))
    mesh = model.meshes(Pose({"l_elbow": 0.4}))[1]
    img = rng.random((size, size, 3))
    uv = rng.uniform(-3, 3, (size, size, 2))
    valid = np.ones((size, size), bool)
    up = rng.standard_normal((size, size, 3))
    fa = rng.standard_normal((size // 2, size // 2, 16)).astype(np.float32)
    fb = rng.standard_normal((size // 2, size // 2, 16)).astype(np.float32)
    base = np.zeros((size // 2, size // 2), np.int64)
    hole = np.zeros((size, size), bool)
    hole[size // 4 : 3 * size // 4, size // 4 : 3 * size // 4] = True
    return {
        "rasterize": (raster._rasterize_numba, raster._rasterize_numpy,
                      (mesh.vertices, mesh.faces, mesh.parts, size, size)),
        "warp_forward": (warp._warp_forward_numba, warp._warp_forward_numpy, (img, uv, valid, 0.0)),
        "warp_flow_grad": (warp._warp_flow_grad_numba, warp._warp_flow_grad_numpy, (img, uv, valid, up)),
        "warp_image_adjoint": (warp._warp_image_adjoint_numba, warp._warp_image_adjoint_numpy,
                               (up, uv, valid, size, size)),
        "correlate": (correlation._correlate_numba, correlation._correlate_numpy, (fa, fb, base, base, 4)),
        "jacobi_fill": (diffusion._jacobi_numba, diffusion._jacobi_numpy, (img, hole, 200, 0.0)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  agree")
    for name, (fast, slow, a) in cases(args.size, rng).items():
        fast(*a)  # compile
        t_fast, out_fast = best_of(fast, a, args.repeat)
        t_slow, out_slow = best_of(slow, a, args.repeat)
        print(
            f"{name:<20}{t_fast * 1e3:>12.2f}{t_slow * 1e3:>12.2f}"
            f"{t_slow / t_fast:>10.1f}  {_same(out_fast, out_slow)}"
        )


if __name__ == "__main__":
    main()
