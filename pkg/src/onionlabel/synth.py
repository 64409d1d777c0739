"""Synthetic instances, an independent hull oracle, ablation and sweeps."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .hull import DEFAULT_TOL, ColumnCloud, SafeRegionStatus, build_A, hull_decompose, safe_region_status
from .metrics import accuracy, majority_vote, weighted_majority_vote
from .signals import LabelVector, WeakSignalMatrix, expand_pws, reduce_signals
from .solver import (
    AnnealingError,
    SolverConfig,
    SyntheticLabel,
    augment_system,
    epsilon_upper_bound,
    init_b,
    run_oua,
    solve_labels,
)

__all__ = [
    "SynthSpec",
    "AblationEntryError",
    "generate_instance",
    "brute_force_vertex_oracle",
    "run_ablation",
    "sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
]

log = logging.getLogger("onionlabel.synth")

SWEEP_COLUMNS = (
    "instance_id",
    "method",
    "metric",
    "value",
    "epsilon_used",
    "residual",
    "wall_ms",
)


class AblationEntryError(AnnealingError):
    """b/n cannot be pushed inside the inner hull."""


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a planted-truth instance."""

    n: int
    k: int
    m: int
    signal_accuracy: float
    abstain_rate: float = 0.0
    class_balance: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if not (1.0 / self.k < self.signal_accuracy <= 1.0):
            raise ValueError(
                f"signal_accuracy must lie in (1/k, 1], got {self.signal_accuracy}"
            )
        if not (0.0 <= self.abstain_rate < 1.0):
            raise ValueError(f"abstain_rate must lie in [0, 1), got {self.abstain_rate}")
        if self.class_balance is not None:
            bal = tuple(float(p) for p in self.class_balance)
            if len(bal) != self.k:
                raise ValueError(f"class_balance must have length k = {self.k}")
            if min(bal) < 0 or abs(sum(bal) - 1.0) > 1e-9:
                raise ValueError("class_balance must be nonnegative and sum to 1")
            object.__setattr__(self, "class_balance", bal)

    @property
    def balance(self) -> np.ndarray:
        if self.class_balance is None:
            return np.full(self.k, 1.0 / self.k)
        return np.asarray(self.class_balance)


def generate_votes(spec: SynthSpec) -> tuple[np.ndarray, LabelVector]:
    """Planted labels plus an (m, n) vote matrix over {0 (abstain), 1..k}.

    Each signal abstains with probability ``abstain_rate``; otherwise it votes
    the true class with probability ``signal_accuracy`` and a uniformly chosen
    wrong class with the remainder.  Fully deterministic under ``seed``.
    """
    rng = np.random.default_rng(spec.seed)
    y = rng.choice(np.arange(1, spec.k + 1), size=spec.n, p=spec.balance)
    ab = rng.random((spec.m, spec.n)) < spec.abstain_rate
    correct = rng.random((spec.m, spec.n)) < spec.signal_accuracy
    offset = rng.integers(1, spec.k, size=(spec.m, spec.n))  # 1..k-1
    wrong = (y[None, :] - 1 + offset) % spec.k + 1
    votes = np.where(correct, y[None, :], wrong)
    votes[ab] = 0
    return votes.astype(np.int64), LabelVector(hard=y, k=spec.k)


def generate_instance(spec: SynthSpec) -> tuple[WeakSignalMatrix, LabelVector]:
    """Expand the planted votes into a weak-signal matrix."""
    votes, y = generate_votes(spec)
    return expand_pws(votes, spec.k), y


def brute_force_vertex_oracle(cloud: ColumnCloud, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Hull vertices found by an independent LP route (scipy HiGHS).

    For each distinct column value, solve the feasibility program "is this a
    convex combination of the other distinct values?"; the non-representable
    ones are the vertices.  Duplicate groups report their lowest index.
    Guarded to small clouds (n*k <= 60); intended as the cross-check for
    ``extreme_points``, which uses a self-contained simplex instead.
    """
    if cloud.n_points > 60:
        raise ValueError("oracle is limited to clouds with at most 60 columns")
    uniq_rows, first_idx = np.unique(cloud.matrix.T, axis=0, return_index=True)
    distinct = uniq_rows.T
    d = distinct.shape[1]
    if d == 1:
        return np.sort(first_idx[:1])
    verts = []
    opts = {
        "primal_feasibility_tolerance": max(tol, 1e-10),
        "dual_feasibility_tolerance": max(tol, 1e-10),
    }
    keep = np.ones(d, dtype=bool)
    for t in range(d):
        keep[t] = False
        others = distinct[:, keep]
        keep[t] = True
        a_eq = np.vstack([others, np.ones((1, others.shape[1]))])
        b_eq = np.append(distinct[:, t], 1.0)
        res = linprog(
            c=np.zeros(others.shape[1]),
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=(0.0, None),
            method="highs",
            options=opts,
        )
        feasible = bool(res.success)
        if feasible:
            err = float(np.max(np.abs(others @ res.x - distinct[:, t])))
            feasible = err <= max(tol, 1e-7)
        if not feasible:
            verts.append(first_idx[t])
    return np.sort(np.asarray(verts, dtype=np.int64))


def run_ablation(w: WeakSignalMatrix, cfg: SolverConfig | None = None,
                 chunks: int = 5) -> SyntheticLabel:
    """Deliberately solve with b/n inside the inner hull.

    Mirrors the safe pipeline but anneals in the opposite direction: eps
    starts at its upper bound and would be *raised* until b/n enters the
    inner hull, except that eps is never allowed past the bound.  When b/n is
    not inside at the bound the push cannot proceed and AblationEntryError is
    raised.  The result is flagged ``mode="ablation"`` and is never SAFE.
    """
    cfg = cfg or SolverConfig()
    w_red = reduce_signals(w, chunks)
    cloud = build_A(w_red)
    decomp = hull_decompose(cloud)
    ub = epsilon_upper_bound(w.k)
    eps = ub
    steps = 0
    while True:
        tv = init_b(w_red, eps)
        status = safe_region_status(tv, w.n, decomp, cloud)
        if status is SafeRegionStatus.INSIDE_H2:
            break
        if eps >= ub - 1e-15:
            raise AblationEntryError(
                "b/n cannot enter the inner hull: eps is already at its upper bound"
            )
        if steps >= cfg.max_anneal_steps:
            raise AblationEntryError(
                f"b/n did not enter the inner hull within {cfg.max_anneal_steps} steps"
            )
        eps = min(ub, eps + cfg.alpha)
        steps += 1
    log.debug("ablation: INSIDE_H2 at eps=%.6f after %d steps", eps, steps)
    a_aug, b_aug = augment_system(cloud, tv, w.n)
    return solve_labels(a_aug, b_aug, cfg, epsilon_used=tv.epsilon, mode="ablation")


def _run_method(method: str, w: WeakSignalMatrix, truth: LabelVector,
                cfg: SolverConfig, chunks: int):
    """Returns (accuracy value, epsilon_used, residual)."""
    if method == "oua":
        lbl = run_oua(w, cfg, chunks)
    elif method == "ablation":
        lbl = run_ablation(w, cfg, chunks)
    elif method == "mv":
        pred = majority_vote(w, seed=cfg.seed)
        return accuracy(pred, truth).value, None, None
    elif method == "wmv":
        pred = weighted_majority_vote(w, seed=cfg.seed)
        return accuracy(pred, truth).value, None, None
    else:
        raise ValueError(f"unknown method {method!r}")
    pred = LabelVector(hard=lbl.hard, k=lbl.k)
    return accuracy(pred, truth).value, lbl.epsilon_used, lbl.residual


def sweep(specs: list[SynthSpec], methods: list[str],
          cfg: SolverConfig | None = None, chunks: int = 5) -> list[dict]:
    """Accuracy of each method on each planted instance, one row per cell.

    A failing cell (e.g. an annealing error) keeps its row with empty value
    fields; the sweep carries on.
    """
    cfg = cfg or SolverConfig()
    rows = []
    for i, spec in enumerate(specs):
        w, truth = generate_instance(spec)
        iid = f"i{i:03d}-n{spec.n}-k{spec.k}-m{spec.m}-s{spec.seed}"
        for method in methods:
            t0 = time.perf_counter()
            try:
                value, eps, resid = _run_method(method, w, truth, cfg, chunks)
            except AnnealingError as exc:
                log.warning("sweep cell (%s, %s) failed: %s", iid, method, exc)
                value, eps, resid = None, None, None
            wall_ms = (time.perf_counter() - t0) * 1000.0
            rows.append(
                {
                    "instance_id": iid,
                    "method": method,
                    "metric": "accuracy",
                    "value": value,
                    "epsilon_used": eps,
                    "residual": resid,
                    "wall_ms": wall_ms,
                }
            )
    return rows


def write_sweep_csv(rows: list[dict], path: str) -> None:
    """Write sweep rows with the fixed column set; empty cells for failures."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SWEEP_COLUMNS))
        writer.writeheader()
        for row in rows:
            out = {}
            for col in SWEEP_COLUMNS:
                v = row.get(col)
                if v is None:
                    out[col] = ""
                elif isinstance(v, float):
                    out[col] = f"{v:.10g}"
                else:
                    out[col] = v
            writer.writerow(out)
