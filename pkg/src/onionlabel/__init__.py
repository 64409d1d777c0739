"""onionlabel: weak-supervision label model built on convex-hull layering."""

__version__ = "0.1.0"

from .backends import active_backend
from .hull import (
    ColumnCloud,
    HullDecomposition,
    SafeRegionStatus,
    build_A,
    extreme_points,
    hull_decompose,
    in_hull,
    safe_region_status,
)
from .metrics import (
    EvalReport,
    accuracy,
    f1,
    majority_vote,
    random_baseline_error,
    weighted_majority_vote,
)
from .signals import (
    LabelVector,
    ValidationReport,
    WeakSignalMatrix,
    expand_pws,
    expected_error_rate,
    load_pws_matrix,
    reduce_signals,
    validate,
)
from .solver import (
    AnnealingError,
    HullInconsistencyError,
    NotSafeAtZeroError,
    SolverConfig,
    SyntheticLabel,
    TargetVector,
    anneal_b,
    augment_system,
    decode_labels,
    epsilon_upper_bound,
    init_b,
    run_oua,
    solve_labels,
)
from .synth import (
    AblationEntryError,
    SynthSpec,
    brute_force_vertex_oracle,
    generate_instance,
    run_ablation,
    sweep,
)

__all__ = [
    "__version__",
    "active_backend",
    "ColumnCloud",
    "HullDecomposition",
    "SafeRegionStatus",
    "build_A",
    "extreme_points",
    "hull_decompose",
    "in_hull",
    "safe_region_status",
    "EvalReport",
    "accuracy",
    "f1",
    "majority_vote",
    "random_baseline_error",
    "weighted_majority_vote",
    "LabelVector",
    "ValidationReport",
    "WeakSignalMatrix",
    "expand_pws",
    "expected_error_rate",
    "load_pws_matrix",
    "reduce_signals",
    "validate",
    "AnnealingError",
    "HullInconsistencyError",
    "NotSafeAtZeroError",
    "SolverConfig",
    "SyntheticLabel",
    "TargetVector",
    "anneal_b",
    "augment_system",
    "decode_labels",
    "epsilon_upper_bound",
    "init_b",
    "run_oua",
    "solve_labels",
    "AblationEntryError",
    "SynthSpec",
    "brute_force_vertex_oracle",
    "generate_instance",
    "run_ablation",
    "sweep",
]
