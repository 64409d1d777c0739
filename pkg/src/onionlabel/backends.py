"""Numeric kernels with a numba fast path and a pure-numpy fallback.

Two kernels dominate runtime: the phase-1 simplex used for convex-combination
feasibility (hull membership / vertex tests) and the box-projected gradient
descent loop of the label solver.  Both exist in two functionally identical
implementations:

* ``numpy`` -- plain-python pivot/iteration loop over vectorized numpy ops,
* ``numba`` -- the same algorithm compiled with ``@njit``.

The active default is chosen once per process from the environment variable
``ONIONLABEL_BACKEND`` (``auto`` | ``numba`` | ``numpy``, default ``auto`` =
numba when importable).  Every kernel also accepts an explicit ``backend=``
argument so tests and benchmarks can compare both paths directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_ENV_FLAG = "ONIONLABEL_BACKEND"


def active_backend() -> str:
    """Resolve the backend name from the environment: 'numba' or 'numpy'."""
    choice = os.environ.get(_ENV_FLAG, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG} must be auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError(f"{_ENV_FLAG}=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Phase-1 simplex: feasibility of  E @ lam = f,  lam >= 0.
#
# The caller builds E = [C; 1^T] and f = [q; 1] so feasibility means exactly
# "q is a convex combination of the columns of C".  Rows must already be sign
# normalized (f >= 0).  Artificial variables start basic; Bland's rule (lowest
# index enters, lowest basis index breaks ratio ties) guarantees termination.
# Returns (lam, n_pivots, status) with status 0 = optimum reached, 1 = pivot
# budget exhausted.  The caller decides feasibility from the explicit residual
# of lam, not from the phase-1 objective, so both status values are usable.
# ---------------------------------------------------------------------------


def _phase1_simplex_numpy(E, f, pivot_tol, max_pivots):
    m1, p = E.shape
    ncols = p + m1
    T = np.zeros((m1 + 1, ncols + 1))
    T[:m1, :p] = E
    T[:m1, p : p + m1] = np.eye(m1)
    T[:m1, ncols] = f
    # reduced costs for minimizing the sum of artificials
    T[m1, :p] = -E.sum(axis=0)
    T[m1, ncols] = -f.sum()

    basis = np.arange(p, p + m1, dtype=np.int64)
    pivots = 0
    while pivots < max_pivots:
        enter = -1
        for j in range(ncols):
            if T[m1, j] < -pivot_tol:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best = np.inf
        for i in range(m1):
            a = T[i, enter]
            if a > pivot_tol:
                r = T[i, ncols] / a
                if r < best or (r == best and basis[i] < basis[leave]):
                    best = r
                    leave = i
        if leave < 0:
            break  # column unbounded; cannot improve -> stop
        piv_row = T[leave] / T[leave, enter]
        col = T[:, enter].copy()
        col[leave] = 0.0
        T -= np.outer(col, piv_row)
        T[leave] = piv_row
        basis[leave] = enter
        pivots += 1

    lam = np.zeros(p)
    for i in range(m1):
        if basis[i] < p:
            lam[basis[i]] = T[i, ncols]
    status = 0 if pivots < max_pivots else 1
    return lam, pivots, status


@njit(cache=True)
def _phase1_simplex_numba(E, f, pivot_tol, max_pivots):  # pragma: no cover - jit
    m1, p = E.shape
    ncols = p + m1
    T = np.zeros((m1 + 1, ncols + 1))
    for i in range(m1):
        for j in range(p):
            T[i, j] = E[i, j]
        T[i, p + i] = 1.0
        T[i, ncols] = f[i]
    for j in range(p):
        s = 0.0
        for i in range(m1):
            s += E[i, j]
        T[m1, j] = -s
    fs = 0.0
    for i in range(m1):
        fs += f[i]
    T[m1, ncols] = -fs

    basis = np.arange(p, p + m1).astype(np.int64)
    pivots = 0
    while pivots < max_pivots:
        enter = -1
        for j in range(ncols):
            if T[m1, j] < -pivot_tol:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best = np.inf
        for i in range(m1):
            a = T[i, enter]
            if a > pivot_tol:
                r = T[i, ncols] / a
                if r < best or (r == best and basis[i] < basis[leave]):
                    best = r
                    leave = i
        if leave < 0:
            break
        piv = T[leave, enter]
        for j in range(ncols + 1):
            T[leave, j] /= piv
        for i in range(m1 + 1):
            if i == leave:
                continue
            c = T[i, enter]
            if c != 0.0:
                for j in range(ncols + 1):
                    T[i, j] -= c * T[leave, j]
        basis[leave] = enter
        pivots += 1

    lam = np.zeros(p)
    for i in range(m1):
        if basis[i] < p:
            lam[basis[i]] = T[i, ncols]
    status = 0 if pivots < max_pivots else 1
    return lam, pivots, status


def phase1_simplex(E, f, pivot_tol=1e-11, max_pivots=None, backend=None):
    """Run phase-1 simplex on ``E lam = f, lam >= 0`` (rows sign-normalized)."""
    E = np.ascontiguousarray(E, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.float64)
    if max_pivots is None:
        max_pivots = 200 + 25 * (E.shape[0] + E.shape[1])
    name = backend or active_backend()
    if name == "numba":
        return _phase1_simplex_numba(E, f, float(pivot_tol), int(max_pivots))
    return _phase1_simplex_numpy(E, f, float(pivot_tol), int(max_pivots))


# ---------------------------------------------------------------------------
# Projected gradient descent for  min ||A y - b||_2  over the capped simplex
# {y in [0, 1]^p : sum(y) = target}.  Each iterate is projected back onto the
# feasible set by a shift-and-clip: clip(z + tau) has a continuous
# nondecreasing sum in tau, so bisection finds the feasible shift.  The loop
# stops when the infinity-norm change of the iterate falls below conv_tol.
# ---------------------------------------------------------------------------

_PROJ_BISECTIONS = 64


def _project_capped_numpy(z, target):
    lo = -float(z.max())
    hi = 1.0 - float(z.min())
    for _ in range(_PROJ_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if float(np.clip(z + mid, 0.0, 1.0).sum()) < target:
            lo = mid
        else:
            hi = mid
    return np.clip(z + 0.5 * (lo + hi), 0.0, 1.0)


def _pgd_numpy(A, b, y0, target, lr, conv_tol, max_iters):
    y = _project_capped_numpy(y0, target)
    delta = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        r = A @ y - b
        z = y - lr * (A.T @ r)
        ynew = _project_capped_numpy(z, target)
        delta = float(np.max(np.abs(ynew - y)))
        y = ynew
        if delta < conv_tol:
            return y, it, delta, True
    return y, it, delta, False


@njit(cache=True)
def _project_capped_numba(z, target):  # pragma: no cover - jit
    lo = -z[0]
    hi = 1.0 - z[0]
    for e in range(z.shape[0]):
        if -z[e] < lo:
            lo = -z[e]
        if 1.0 - z[e] > hi:
            hi = 1.0 - z[e]
    for _ in range(_PROJ_BISECTIONS):
        mid = 0.5 * (lo + hi)
        s = 0.0
        for e in range(z.shape[0]):
            v = z[e] + mid
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            s += v
        if s < target:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    out = np.empty_like(z)
    for e in range(z.shape[0]):
        v = z[e] + tau
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[e] = v
    return out


@njit(cache=True)
def _pgd_numba(A, b, y0, target, lr, conv_tol, max_iters):  # pragma: no cover - jit
    y = _project_capped_numba(y0, target)
    delta = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        r = np.dot(A, y) - b
        g = np.dot(A.T, r)
        z = np.empty_like(y)
        for e in range(y.shape[0]):
            z[e] = y[e] - lr * g[e]
        ynew = _project_capped_numba(z, target)
        delta = 0.0
        for e in range(y.shape[0]):
            d = abs(ynew[e] - y[e])
            if d > delta:
                delta = d
        y = ynew
        if delta < conv_tol:
            return y, it, delta, True
    return y, it, delta, False


def project_capped_simplex(z, target, backend=None):
    """Shift-and-clip projection of z onto {y in [0,1]^p : sum(y) = target}."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    name = backend or active_backend()
    if name == "numba":
        return _project_capped_numba(z, float(target))
    return _project_capped_numpy(z, float(target))


def pgd(A, b, y0, target, lr, conv_tol, max_iters, backend=None):
    """Capped-simplex-projected gradient descent.

    Returns (y, iters, last_delta, converged).  ``target`` is the exact value
    the label sum is held at by the per-step projection.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    name = backend or active_backend()
    if name == "numba":
        y, it, delta, conv = _pgd_numba(
            A, b, y0, float(target), float(lr), float(conv_tol), int(max_iters)
        )
        return y, int(it), float(delta), bool(conv)
    return _pgd_numpy(A, b, y0, float(target), float(lr), float(conv_tol), int(max_iters))
