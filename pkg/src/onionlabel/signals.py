"""Weak-signal matrices: ingestion, validation, reduction and error rates.

A weak-signal matrix holds m signals over n points and k classes as an
``(m, n*k)`` float matrix.  Columns are laid out class-major: the entry for
class ``c`` (1-based) and point ``j`` (0-based) sits at column
``(c - 1) * n + j``.  Abstains are materialized eagerly as ``1/k`` and
remembered in a parallel boolean mask.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WeakSignalMatrix",
    "LabelVector",
    "Violation",
    "ValidationReport",
    "col_index",
    "expand_pws",
    "load_pws_matrix",
    "validate",
    "reduce_signals",
    "expected_error_rate",
]


def col_index(cls: int, point: int, n: int) -> int:
    """Column of class ``cls`` (1-based) and point ``point`` (0-based)."""
    return (cls - 1) * n + point


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeakSignalMatrix:
    """m weak signals over n points and k classes, abstains filled with 1/k."""

    values: np.ndarray  # (m, n*k) float64
    abstain: np.ndarray  # (m, n*k) bool
    n: int
    k: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        abstain = np.asarray(self.abstain, dtype=bool)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if values.shape != abstain.shape:
            raise ValueError("values and abstain mask must have the same shape")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if values.shape[1] != self.n * self.k:
            raise ValueError(
                f"values has {values.shape[1]} columns, expected n*k = {self.n * self.k}"
            )
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "abstain", _freeze(abstain))

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LabelVector:
    """Hard labels in 1..k with the matching one-hot layout."""

    hard: np.ndarray  # (n,) int64, values in 1..k
    k: int

    def __post_init__(self):
        hard = np.asarray(self.hard, dtype=np.int64)
        if hard.ndim != 1:
            raise ValueError("hard labels must be 1-d")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if hard.size and (hard.min() < 1 or hard.max() > self.k):
            raise ValueError("hard labels must lie in 1..k")
        object.__setattr__(self, "hard", _freeze(hard))

    @property
    def n(self) -> int:
        return self.hard.shape[0]

    @property
    def onehot(self) -> np.ndarray:
        """(n*k,) one-hot vector in the class-major column layout."""
        n = self.n
        y = np.zeros(n * self.k)
        y[(self.hard - 1) * n + np.arange(n)] = 1.0
        return y

    @classmethod
    def from_onehot(cls, onehot: np.ndarray, n: int, k: int) -> "LabelVector":
        onehot = np.asarray(onehot, dtype=np.float64)
        if onehot.shape != (n * k,):
            raise ValueError(f"one-hot vector must have length n*k = {n * k}")
        grid = onehot.reshape(k, n)
        if not np.all(np.isclose(grid.sum(axis=0), 1.0)) or not np.all(
            np.isclose(grid.max(axis=0), 1.0)
        ):
            raise ValueError("vector is not one-hot per point")
        return cls(hard=grid.argmax(axis=0) + 1, k=k)


def expand_pws(votes: np.ndarray, k: int) -> WeakSignalMatrix:
    """Expand an (m, n) vote matrix over {0 (abstain), 1..k} to signal form.

    A vote for class c becomes 1 in the class-c block and 0 in all other
    blocks for that point; an abstain becomes 1/k in every block.
    """
    votes = np.asarray(votes)
    if votes.ndim != 2:
        raise ValueError("votes must be (m, n)")
    if not np.issubdtype(votes.dtype, np.integer):
        raise ValueError("votes must be integers")
    if votes.size and (votes.min() < 0 or votes.max() > k):
        raise ValueError(f"votes must lie in 0..{k}")
    m, n = votes.shape
    values = np.zeros((m, n * k))
    abstain = np.zeros((m, n * k), dtype=bool)
    ab = votes == 0
    for c in range(1, k + 1):
        block = slice((c - 1) * n, c * n)
        values[:, block] = np.where(ab, 1.0 / k, (votes == c).astype(np.float64))
        abstain[:, block] = ab
    return WeakSignalMatrix(values=values, abstain=abstain, n=n, k=k)


def _parse_pws_token(tok: str, k: int, where: str) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise ValueError(f"{where}: unparsable entry {tok!r}")
    if math.isnan(v):
        raise ValueError(f"{where}: NaN entry")
    if v != int(v):
        raise ValueError(f"{where}: entry {tok!r} outside the allowed alphabet")
    iv = int(v)
    if k == 2:
        # binary alphabet: -1 -> class 2, +1 -> class 1, 0 -> abstain
        if iv not in (-1, 0, 1):
            raise ValueError(f"{where}: entry {iv} outside binary alphabet {{-1,0,+1}}")
        return {1: 1, -1: 2, 0: 0}[iv]
    if iv < 0 or iv > k:
        raise ValueError(f"{where}: entry {iv} outside alphabet 0..{k}")
    return iv


def _load_csv(path: str, n: int, k: int) -> WeakSignalMatrix:
    rows = []
    with open(path, newline="") as fh:
        for r, line in enumerate(csv.reader(fh)):
            if not line or (len(line) == 1 and not line[0].strip()):
                continue  # permit trailing blank line
            if len(line) != n:
                raise ValueError(f"row {r}: expected {n} entries, found {len(line)}")
            rows.append([_parse_pws_token(tok.strip(), k, f"row {r}, col {c}")
                         for c, tok in enumerate(line)])
    if not rows:
        raise ValueError(f"{path}: no signal rows")
    return expand_pws(np.asarray(rows, dtype=np.int64), k)


def _load_json(path: str, n: int, k: int) -> WeakSignalMatrix:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("n", "k", "format", "rows"):
        if key not in doc:
            raise ValueError(f"{path}: missing key {key!r}")
    if int(doc["n"]) != n or int(doc["k"]) != k:
        raise ValueError(
            f"{path}: header (n={doc['n']}, k={doc['k']}) does not match "
            f"declared (n={n}, k={k})"
        )
    fmt = doc["format"]
    rows = doc["rows"]
    if not rows:
        raise ValueError(f"{path}: no signal rows")
    if fmt == "pws":
        votes = []
        for r, row in enumerate(rows):
            if len(row) != n:
                raise ValueError(f"row {r}: expected {n} entries, found {len(row)}")
            votes.append([_parse_pws_token(str(v), k, f"row {r}, col {c}")
                          for c, v in enumerate(row)])
        return expand_pws(np.asarray(votes, dtype=np.int64), k)
    if fmt == "prob":
        m = len(rows)
        values = np.zeros((m, n * k))
        abstain = np.zeros((m, n * k), dtype=bool)
        for r, row in enumerate(rows):
            if len(row) != n * k:
                raise ValueError(f"row {r}: expected {n * k} entries, found {len(row)}")
            for c, v in enumerate(row):
                if v is None:  # null marks an abstain on that entry
                    values[r, c] = 1.0 / k
                    abstain[r, c] = True
                    continue
                v = float(v)
                if math.isnan(v):
                    raise ValueError(f"row {r}, col {c}: NaN entry")
                if v < 0.0 or v > 1.0:
                    raise ValueError(f"row {r}, col {c}: entry {v} outside [0, 1]")
                values[r, c] = v
        return WeakSignalMatrix(values=values, abstain=abstain, n=n, k=k)
    raise ValueError(f"{path}: unknown format {fmt!r} (expected 'pws' or 'prob')")


def load_pws_matrix(path: str, n: int, k: int) -> WeakSignalMatrix:
    """Load weak signals from a vote CSV or a JSON document.

    CSV: one signal per line, n comma-separated votes; alphabet {-1, 0, +1}
    for k=2 (+1 is class 1, -1 class 2, 0 abstain) or {0, 1..k} otherwise.
    JSON: ``{"n", "k", "format": "pws"|"prob", "rows"}``; "prob" rows carry
    n*k probabilities in [0, 1] with ``null`` marking an abstained entry.
    NaN anywhere is a hard error.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if str(path).endswith(".json"):
        return _load_json(str(path), n, k)
    return _load_csv(str(path), n, k)


@dataclass(frozen=True)
class Violation:
    kind: str  # "nan" | "out_of_range" | "bad_abstain_fill" | "shape"
    row: int
    col: int
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    abstain_fraction: np.ndarray = field(repr=False)  # per-signal fraction

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(w: WeakSignalMatrix) -> ValidationReport:
    """Check value ranges and abstain fills; report per-signal abstain rates."""
    bad: list[Violation] = []
    vals = w.values
    nan_rows, nan_cols = np.nonzero(np.isnan(vals))
    for r, c in zip(nan_rows, nan_cols):
        bad.append(Violation("nan", int(r), int(c)))
    with np.errstate(invalid="ignore"):
        oob = (vals < 0.0) | (vals > 1.0)
    for r, c in zip(*np.nonzero(oob & ~np.isnan(vals))):
        bad.append(Violation("out_of_range", int(r), int(c), f"value={vals[r, c]!r}"))
    fill = np.isclose(vals, 1.0 / w.k, rtol=0.0, atol=1e-12)
    for r, c in zip(*np.nonzero(w.abstain & ~fill & ~np.isnan(vals))):
        bad.append(Violation("bad_abstain_fill", int(r), int(c), f"value={vals[r, c]!r}"))
    return ValidationReport(
        violations=tuple(bad), abstain_fraction=w.abstain.mean(axis=1)
    )


def reduce_signals(w: WeakSignalMatrix, chunks: int = 5) -> WeakSignalMatrix:
    """Merge m signals into at most ``chunks`` by entrywise mean.

    Signals are grouped into contiguous chunks in their given order with sizes
    differing by at most one (earlier chunks take the remainder).  Abstain
    fills take part in the means; a merged entry counts as abstained only when
    every member of its chunk abstained there.  With m <= chunks the input is
    returned unchanged.
    """
    if chunks < 1:
        raise ValueError(f"chunks must be >= 1, got {chunks}")
    if w.m <= chunks:
        return w
    groups = np.array_split(np.arange(w.m), chunks)
    values = np.stack([w.values[g].mean(axis=0) for g in groups])
    abstain = np.stack([w.abstain[g].all(axis=0) for g in groups])
    return WeakSignalMatrix(values=values, abstain=abstain, n=w.n, k=w.k)


def expected_error_rate(w: np.ndarray, y: LabelVector) -> float:
    """Expected disagreement of one signal row with labels y.

    Computed as ``(-2 w.y + w.1 + n) / (n k)``.  The all-zero row scores
    exactly 1/k, a uniform random guesser scores ``2/k - 2/k**2`` in
    expectation, and a perfect one-hot row scores 0.
    """
    w = np.asarray(w, dtype=np.float64)
    n, k = y.n, y.k
    if w.shape != (n * k,):
        raise ValueError(f"signal row must have length n*k = {n * k}")
    return float((-2.0 * w @ y.onehot + w.sum() + n) / (n * k))
