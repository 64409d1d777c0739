"""Kernel backends: env-flag dispatch and numba/numpy twin equivalence."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onionlabel import backends
from onionlabel.backends import (
    HAVE_NUMBA,
    active_backend,
    pgd,
    phase1_simplex,
    project_capped_simplex,
)
from onionlabel.solver import SolverConfig, solve_labels

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


# ---------------------------------------------------------------------------
# dispatch


def test_active_backend_env_dispatch(monkeypatch):
    monkeypatch.setenv("ONIONLABEL_BACKEND", "numpy")
    assert active_backend() == "numpy"
    monkeypatch.setenv("ONIONLABEL_BACKEND", "auto")
    assert active_backend() == ("numba" if HAVE_NUMBA else "numpy")
    monkeypatch.delenv("ONIONLABEL_BACKEND")
    assert active_backend() == ("numba" if HAVE_NUMBA else "numpy")
    monkeypatch.setenv("ONIONLABEL_BACKEND", "bogus")
    with pytest.raises(ValueError):
        active_backend()


def test_active_backend_numba_without_numba(monkeypatch):
    monkeypatch.setenv("ONIONLABEL_BACKEND", "numba")
    monkeypatch.setattr(backends, "HAVE_NUMBA", False)
    with pytest.raises(RuntimeError):
        active_backend()


@needs_numba
def test_active_backend_numba_requested(monkeypatch):
    monkeypatch.setenv("ONIONLABEL_BACKEND", "numba")
    assert active_backend() == "numba"


# ---------------------------------------------------------------------------
# phase-1 simplex twins


def _combination_system(rng, feasible: bool):
    d = int(rng.integers(1, 4))
    p = int(rng.integers(2, 9))
    cols = rng.uniform(0.0, 2.0, size=(d, p))
    if feasible:
        q = cols @ rng.dirichlet(np.ones(p))
    else:
        q = cols.max(axis=1) + rng.uniform(0.5, 1.0, size=d)
    E = np.vstack([cols, np.ones((1, p))])
    f = np.append(q, 1.0)
    return E, f


@pytest.mark.parametrize("feasible", [True, False])
def test_simplex_twins_agree(feasible):
    rng = np.random.default_rng(42 if feasible else 43)
    for _ in range(25):
        E, f = _combination_system(rng, feasible)
        lam_np, piv_np, st_np = phase1_simplex(E, f, backend="numpy")
        lam_nb, piv_nb, st_nb = phase1_simplex(E, f, backend="numba")
        assert st_np == st_nb
        assert piv_np == piv_nb
        np.testing.assert_allclose(lam_np, lam_nb, atol=1e-12, rtol=0)


def test_simplex_finds_known_combination():
    # q is the midpoint of two columns
    E = np.array([[0.0, 2.0], [1.0, 1.0]])
    f = np.array([1.0, 1.0])
    for backend in ("numpy", "numba"):
        lam, _, status = phase1_simplex(E, f, backend=backend)
        np.testing.assert_allclose(E @ lam, f, atol=1e-9)
        assert status == 0


# ---------------------------------------------------------------------------
# capped-simplex projection twins


@given(seed=st.integers(0, 500))
@settings(max_examples=50, deadline=None)
def test_projection_twins_agree_and_satisfy_constraints(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 30))
    target = float(rng.integers(1, p))  # feasible: 0 < target < p
    z = rng.uniform(-2.0, 3.0, size=p)
    y_np = project_capped_simplex(z, target, backend="numpy")
    y_nb = project_capped_simplex(z, target, backend="numba")
    np.testing.assert_allclose(y_np, y_nb, atol=1e-12, rtol=0)
    assert y_np.min() >= 0.0 and y_np.max() <= 1.0
    assert abs(y_np.sum() - target) <= 1e-9 * max(1.0, target)


def test_projection_is_idempotent_and_respects_feasible_points():
    y = np.array([0.25, 0.75, 0.5, 0.5])
    got = project_capped_simplex(y, 2.0)
    np.testing.assert_allclose(got, y, atol=1e-12)


def test_projection_matches_brute_force_in_2d():
    # exhaustive check of Euclidean optimality on a fine grid
    z = np.array([1.7, -0.4])
    target = 1.0
    got = project_capped_simplex(z, target)
    grid = np.linspace(0.0, 1.0, 2001)
    cand = np.stack([grid, target - grid], axis=1)
    cand = cand[(cand[:, 1] >= 0.0) & (cand[:, 1] <= 1.0)]
    best = cand[np.argmin(((cand - z) ** 2).sum(axis=1))]
    np.testing.assert_allclose(got, best, atol=1e-3)


# ---------------------------------------------------------------------------
# pgd twins


def test_pgd_twins_agree():
    rng = np.random.default_rng(7)
    for _ in range(5):
        m, p, n = 3, 12, 6
        A = np.vstack([rng.uniform(0, 2, size=(m, p)), np.ones(p)])
        b = np.concatenate([rng.uniform(0, 2 * n, size=m), [float(n)]])
        y0 = rng.uniform(0, 1, size=p)
        out_np = pgd(A, b, y0, float(n), 0.01, 1e-8, 2000, backend="numpy")
        out_nb = pgd(A, b, y0, float(n), 0.01, 1e-8, 2000, backend="numba")
        np.testing.assert_allclose(out_np[0], out_nb[0], atol=1e-12, rtol=0)
        assert out_np[1] == out_nb[1]  # iterations
        assert out_np[3] == out_nb[3]  # converged flag
        # the last-delta scalar may differ in final ulps (fma vs vector order)
        assert out_np[2] == pytest.approx(out_nb[2], rel=1e-9, abs=1e-15)


def test_pgd_iterates_stay_feasible():
    rng = np.random.default_rng(9)
    p, n = 10, 5
    A = np.vstack([rng.uniform(0, 2, size=(2, p)), np.ones(p)])
    b = np.concatenate([rng.uniform(0, 2 * n, size=2), [float(n)]])
    y, iters, delta, conv = pgd(A, b, rng.uniform(0, 1, p), float(n), 0.01, 1e-9, 500)
    assert y.min() >= 0.0 and y.max() <= 1.0
    assert abs(y.sum() - n) <= 1e-8 * n
    assert iters >= 1 and delta >= 0.0


# ---------------------------------------------------------------------------
# whole-solver backend equivalence


def test_solver_output_equivalent_across_backends(monkeypatch):
    rng = np.random.default_rng(13)
    n = 8
    A = np.vstack([rng.uniform(0, 2, size=(3, 2 * n)), np.ones(2 * n)])
    b = np.concatenate([rng.uniform(0, 2 * n, size=3), [float(n)]])
    monkeypatch.setenv("ONIONLABEL_BACKEND", "numpy")
    s_np = solve_labels(A, b, SolverConfig(seed=3))
    if HAVE_NUMBA:
        monkeypatch.setenv("ONIONLABEL_BACKEND", "numba")
        s_nb = solve_labels(A, b, SolverConfig(seed=3))
        np.testing.assert_allclose(s_np.soft, s_nb.soft, atol=1e-9)
        assert s_np.hard.tolist() == s_nb.hard.tolist()
        assert s_np.iterations == s_nb.iterations
