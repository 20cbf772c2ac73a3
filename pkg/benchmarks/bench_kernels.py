"""Time the compiled and numpy kernels on the 28-patch, 8-qubit MNIST shape.

    python benchmarks/bench_kernels.py [--batch 25] [--repeat 5]
"""
import argparse
import importlib
import timeit

import numpy as np

from pqwgan import generator as G
from pqwgan import qsim


def workload(batch, seed=0):
    config = G.GeneratorConfig()
    rng = np.random.default_rng(seed)
    theta = G.init_params(config, rng)
    zs = rng.random((batch, config.n_qubits))
    rot = np.ascontiguousarray(qsim.rot_entries(theta[..., 0], theta[..., 1], theta[..., 2]))
    enc = np.ascontiguousarray(qsim.ry_entries(zs))
    dim = 2**config.n_qubits
    lam = rng.standard_normal((2, batch, config.n_patches, dim))
    return enc, rot, np.ascontiguousarray(theta[..., 2]), lam


def bench(module_name, enc, rot, omega, lam, repeat):
    k = importlib.import_module(module_name)
    re, im = k.evolve(enc, rot)
    t_fwd = min(timeit.repeat(lambda: k.evolve(enc, rot), number=1, repeat=repeat))
    t_adj = min(
        timeit.repeat(lambda: k.adjoint(re, im, lam[0], lam[1], rot, omega), number=1, repeat=repeat)
    )
    return k.NAME, t_fwd, t_adj, (re, im)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=25)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    enc, rot, omega, lam = workload(args.batch)
    rows = []
    for mod in ("pqwgan._kernels_py", "pqwgan._kernels_c"):
        try:
            rows.append(bench(mod, enc, rot, omega, lam, args.repeat))
        except ImportError:
            print(f"{mod}: not built, skipped")
    print(f"batch={args.batch}, 28 circuits x 8 layers x 8 qubits per sample")
    print(f"{'backend':<8} {'evolve ms':>10} {'adjoint ms':>11}")
    for name, f, a, _ in rows:
        print(f"{name:<8} {1e3 * f:10.2f} {1e3 * a:11.2f}")
    if len(rows) == 2:
        (_, f0, a0, s0), (_, f1, a1, s1) = rows
        same = np.array_equal(s0[0], s1[0]) and np.array_equal(s0[1], s1[1])
        print(f"speedup: evolve x{f0 / f1:.1f}, adjoint x{a0 / a1:.1f}; states identical: {same}")


if __name__ == "__main__":
    main()
