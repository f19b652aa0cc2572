"""Compare the compiled and numpy kernel backends on desk-scale inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from rcrp import kernels, model


def cases(inst, rng):
    V = inst.visibility
    bits, m, J = V.bits, V.m, V.n_slots
    slots = np.asarray(inst.initial_slots, dtype=np.int64)
    b = kernels.coverage_counts(bits, slots, m)
    r = np.ascontiguousarray(inst.thresholds.T).astype(b.dtype)
    pi = np.ascontiguousarray(inst.rewards.T)
    j_from = rng.choice(slots, 200)
    j_to = rng.integers(0, J, 200)
    lam = rng.random((V.n_targets, m))
    cost = rng.random((inst.n_sats, J))
    return {
        "coverage_counts": lambda k: k.coverage_counts(bits, slots, m),
        "move_deltas (200 moves)": lambda k: k.move_deltas(bits, b, r, pi, j_from, j_to),
        "slot_weights": lambda k: k.slot_weights(bits, lam),
        f"lsap ({inst.n_sats}x{J})": lambda k: k.lsap(cost),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    inst = model.generate_instance((10, 500, 10, 500), seed=1)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<26}" + "".join(f"{name + ' ms':>14}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases(inst, np.random.default_rng(0)).items():
        times = {}
        for bname, mod in backends.items():
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        row = f"{name:<26}" + "".join(f"{t:>14.3f}" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
