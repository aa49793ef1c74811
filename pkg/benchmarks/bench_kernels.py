"""Compare the numba kernels against their pure-numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--preset dynamic-jam-20m]

Per-kernel timings run in this process (numba must be importable). The
end-to-end comparison runs ``run_scenario`` in two subprocesses, one with
``CSIJAM_DISABLE_NUMBA=1``, so each sees a single consistent path.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from csijam import kernels


def best_of(fn, repeat):
    fn()  # warm up, includes compilation for the numba path
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_cases(n_packets=6000):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n_packets, 64)) + 1j * rng.standard_normal((n_packets, 64))
    amp = rng.random((n_packets, 7))
    phase = rng.uniform(-np.pi, np.pi, (n_packets, 7))
    bins = rng.integers(0, 64, (n_packets, 7))
    delivered = rng.random(n_packets) < 0.6
    jam = np.arange(n_packets) >= n_packets // 2
    u = rng.random((4, n_packets))
    clock_args = (delivered, jam, u[0], u[1], u[2], u[3], 0.01, 0.5, 2.0, 0.005, 0.004, 2.5, 13.0)
    moving = rng.random(n_packets) < 0.8
    orient_args = (moving, u[0], u[1], 0.15, 0.65, 30.0, 45.0)
    return {
        "fft_rows": (lambda: kernels.fft_rows_numba(x), lambda: kernels.fft_rows_numpy(x)),
        "bin_taps": (lambda: kernels.bin_taps_numba(amp, phase, bins, 64),
                     lambda: kernels.bin_taps_numpy(amp, phase, bins, 64)),
        "clock": (lambda: kernels.clock_numba(*clock_args), lambda: kernels.clock_numpy(*clock_args)),
        "orientation": (lambda: kernels.orientation_numba(*orient_args),
                        lambda: kernels.orientation_numpy(*orient_args)),
    }


_SCENARIO = """
import json, time
from csijam import kernels
from csijam.scenario import preset, run_scenario
cfg = preset({name!r})
run_scenario(cfg)
times = []
for _ in range({repeat}):
    start = time.perf_counter()
    run_scenario(cfg)
    times.append(time.perf_counter() - start)
print(json.dumps({{"numba": kernels.NUMBA_ENABLED, "best": min(times)}}))
"""


def scenario_time(name, repeat, disable):
    env = dict(os.environ, CSIJAM_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", _SCENARIO.format(name=name, repeat=repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--preset", default="dynamic-jam-20m")
    args = parser.parse_args(argv)

    print(f"{'kernel':<14}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    if kernels.NUMBA_ENABLED:
        for name, (fast, slow) in kernel_cases().items():
            a, b = best_of(fast, args.repeat), best_of(slow, args.repeat)
            print(f"{name:<14}{a * 1e3:>12.2f}{b * 1e3:>12.2f}{b / a:>9.1f}x")
    else:
        print("numba unavailable in this process; skipping per-kernel timings")

    compiled = scenario_time(args.preset, args.repeat, disable=False)
    fallback = scenario_time(args.preset, args.repeat, disable=True)
    label = f"run_scenario[{args.preset}]"
    print(f"{label:<14}{compiled['best'] * 1e3:>12.1f}{fallback['best'] * 1e3:>12.1f}"
          f"{fallback['best'] / compiled['best']:>9.1f}x")


if __name__ == "__main__":
    main()
