"""Compare the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--n 512] [--L 20] [--repeat 3]

Times the convolution primitive on the first layer of each slicer family at
MNIST size, then whole CSW estimates, and checks that both backends return
bit-identical values.
"""
import argparse
import time

import numpy as np

from convsw import _backend
from convsw import distances as dist
from convsw import slicer as sl
from convsw.convolution import conv_backward, conv_forward


def best_of(fn, repeat):
    fn()  # warm-up (jit compile on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def timed_by_backend(fn, backends, repeat):
    out = {}
    for name in backends:
        prev = _backend.set_backend(name)
        try:
            out[name] = (best_of(fn, repeat), fn())
        finally:
            _backend.set_backend(prev)
    return out


def print_row(label, res):
    cells = "  ".join(f"{b}={t * 1e3:9.2f} ms" for b, (t, _) in res.items())
    speed = ""
    if "numba" in res and "numpy" in res:
        speed = f"  numpy/numba={res['numpy'][0] / res['numba'][0]:6.2f}x"
    print(f"{label:<28} {cells}{speed}")


def same(res):
    vals = [v for _, v in res.values()]
    if isinstance(vals[0], tuple):
        return all(all(np.array_equal(a, b) for a, b in zip(vals[0], v)) for v in vals[1:])
    return all(np.array_equal(vals[0], v) for v in vals[1:])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--d", type=int, default=28)
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = _backend.available_backends()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.n, 1, args.d, args.d))
    y = rng.standard_normal((args.n, 1, args.d, args.d)) + 0.1
    print(f"backends: {', '.join(backends)}; n={args.n} d={args.d} L={args.L}")
    mismatches = []

    for variant in ("base", "stride", "dilation"):
        layer = sl.make_schedule(variant, 1, args.d).layers[0]
        w = rng.standard_normal(layer.kernel_shape)
        g = rng.standard_normal((args.n, 1, layer.out_size, layer.out_size))
        fwd = timed_by_backend(lambda: conv_forward(x, w, layer.stride, layer.dilation),
                               backends, args.repeat)
        bwd = timed_by_backend(lambda: conv_backward(x, w, g, layer.stride, layer.dilation),
                               backends, args.repeat)
        print_row(f"{variant} layer-1 forward", fwd)
        print_row(f"{variant} layer-1 backward", bwd)
        if not same(fwd):
            mismatches.append(f"{variant} forward")

    for method in ("csw-b", "csw-s", "csw-d", "ncsw-s"):
        spec = dist.MethodSpec(method, L=args.L)
        res = timed_by_backend(lambda: dist.evaluate(spec, x, y, threads=1), backends,
                               args.repeat)
        print_row(f"{method} estimate", res)
        if not same(res):
            mismatches.append(method)

    print("bit-identical across backends:", "yes" if not mismatches else f"NO {mismatches}")


if __name__ == "__main__":
    main()
