"""Compare the jit-compiled and pure-numpy kernels on representative sizes.

Run:

    python3 benchmarks/bench_backends.py [--repeats N]

Times the two hot kernels (feasibility simplex, projected gradient descent)
with each backend and prints a table with per-size speedups.  Times are the
best of ``--repeats`` runs; jit compilation happens during warm-up and is
not counted.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from onionlabel.backends import HAVE_NUMBA, pgd, phase1_simplex


def _simplex_case(p: int, rng: np.random.Generator):
    """A feasible membership query against a cloud of p columns in R^4."""
    cols = rng.uniform(0.0, 2.0, size=(4, p))
    lam = rng.dirichlet(np.ones(p))
    q = cols @ lam
    E = np.vstack([cols, np.ones(p)])
    f = np.concatenate([q, [1.0]])
    return E, f


def _pgd_case(nk: int, rng: np.random.Generator):
    """An augmented least-squares system with an in-box ground truth."""
    m = 11
    A = rng.uniform(0.0, 2.0, size=(m, nk))
    A[-1] = 1.0
    n = nk // 2
    y_star = rng.uniform(0.2, 0.8, size=nk)
    y_star *= n / y_star.sum()
    b = A @ y_star
    y0 = np.full(nk, n / nk)
    lr = 1.0 / np.linalg.norm(A, 2) ** 2
    return A, b, y0, float(n), float(lr)


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    backends = ["numpy", "numba"] if HAVE_NUMBA else ["numpy"]
    if not HAVE_NUMBA:
        print("numba is not importable; timing the numpy backend only\n")

    rng = np.random.default_rng(0)
    cases = []
    for p in (40, 200, 1000):
        E, f = _simplex_case(p, rng)
        cases.append((f"simplex p={p}", lambda be, E=E, f=f: phase1_simplex(E, f, backend=be)))
    for nk in (1_000, 10_000, 50_000):
        A, b, y0, target, lr = _pgd_case(nk, rng)
        cases.append((
            f"pgd nk={nk}",
            lambda be, A=A, b=b, y0=y0, target=target, lr=lr: pgd(
                A, b, y0, target, lr, 1e-8, 500, backend=be
            ),
        ))

    for _, fn in cases:  # warm-up: trigger jit compilation outside the timers
        for be in backends:
            fn(be)

    header = f"{'case':<16} {'numpy (ms)':>12}"
    if HAVE_NUMBA:
        header += f" {'numba (ms)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        t_numpy = _best_of(lambda: fn("numpy"), args.repeats)
        row = f"{name:<16} {1e3 * t_numpy:>12.3f}"
        if HAVE_NUMBA:
            t_numba = _best_of(lambda: fn("numba"), args.repeats)
            row += f" {1e3 * t_numba:>12.3f} {t_numpy / t_numba:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
