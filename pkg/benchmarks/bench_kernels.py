"""Time the hot kernels with and without numba.

Each mode runs in a fresh interpreter because the switch is read at import:

    python benchmarks/bench_kernels.py            # both modes, side by side
    python benchmarks/bench_kernels.py --worker   # one mode, current environment
"""
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat):
    fn()  # warm-up (includes compilation when numba is on)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def worker(repeat):
    from steklov_lab._jit import USE_JIT
    from steklov_lab.dnmap import steklov_spectrum
    from steklov_lab.geometry import ConformalFactor, potential_from_factor
    from steklov_lab.transform import build_B, solve_kernel

    f = ConformalFactor.from_spec({"kind": "fourier", "base": 1.0, "cos": [0.0, 0.15]})
    ft = ConformalFactor.from_spec({"kind": "fourier", "base": 1.0, "cos": [0.0, 0.14]})
    q, qt = potential_from_factor(f, 3), potential_from_factor(ft, 3)
    kg, kgt = solve_kernel(q, 128), solve_kernel(qt, 128)
    out = {
        "jit": USE_JIT,
        "spectrum_m20": _best(lambda: steklov_spectrum(f, 3, 0.0, 20, q=q), repeat),
        "kernel_grid128": _best(lambda: solve_kernel(q, 128), repeat),
        "build_B_grid128": _best(lambda: build_B(q, qt, kg, kgt), repeat),
    }
    print(json.dumps(out))


def main():
    if "--worker" in sys.argv:
        worker(int(os.environ.get("BENCH_REPEAT", "3")))
        return
    rows = {}
    for label, env in (("numba", {}), ("numpy", {"STEKLOV_LAB_DISABLE_JIT": "1"})):
        e = dict(os.environ, **env)
        e.setdefault("BENCH_REPEAT", "2" if env else "3")
        res = subprocess.run([sys.executable, __file__, "--worker"], env=e, capture_output=True,
                             text=True, check=True)
        rows[label] = json.loads(res.stdout.strip().splitlines()[-1])
    keys = [k for k in rows["numba"] if k != "jit"]
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for k in keys:
        a, b = rows["numba"][k], rows["numpy"][k]
        print(f"{k:<18}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
