"""Time the convolution kernels and a full forward pass on each backend.

    python benchmarks/bench_conv.py [--size 480 640] [--repeat 3] [--threads 1 4]
"""

import argparse
import statistics
import time

import numpy as np

from jointfilter import _backend, net
from jointfilter.tensor import SAME, ConvLayer, conv2d_backward, conv2d_forward


def timed(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(height, width, rng):
    x1 = rng.random((1, height, width), dtype=np.float32)
    x96 = rng.random((96, height, width), dtype=np.float32)
    x48 = rng.random((48, height, width), dtype=np.float32)

    def layer(o, c, k):
        return ConvLayer(rng.normal(0, 0.01, (o, c, k, k)).astype(np.float32), np.zeros(o, np.float32))

    l1, l2, l3 = layer(96, 1, 9), layer(48, 96, 1), layer(1, 48, 5)
    g96 = rng.random((96, height, width), dtype=np.float32)
    model = net.build_network()
    guide = rng.random((3, height, width), dtype=np.float32)
    return {
        "conv 1->96 9x9": lambda: conv2d_forward(x1, l1, SAME),
        "conv 96->48 1x1": lambda: conv2d_forward(x96, l2, SAME),
        "conv 48->1 5x5": lambda: conv2d_forward(x48, l3, SAME),
        "backward 1->96 9x9": lambda: conv2d_backward(x1, l1, SAME, g96, need_input_grad=False),
        "network forward": lambda: net.forward(model, x1, guide),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, nargs=2, default=(480, 640), metavar=("H", "W"))
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, nargs="+", default=[1])
    p.add_argument("--backends", nargs="+", default=sorted(_backend.BACKENDS))
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    work = cases(*args.size, rng)
    print(f"{'case':<22}{'backend':<10}{'threads':>8}{'seconds':>12}")
    for name, fn in work.items():
        for backend in args.backends:
            for threads in args.threads:
                if backend == "python" and threads > 1:
                    continue
                _backend.set_backend(backend)
                _backend.set_num_threads(threads)
                print(f"{name:<22}{backend:<10}{threads:>8}{timed(fn, args.repeat):>12.4f}", flush=True)


if __name__ == "__main__":
    main()
