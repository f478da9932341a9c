"""Toy GRW dynamical-collapse models in the EPR-Bell experiment and their
Parameter Independence / Outcome Independence properties."""
from .analyzer import (
    AnalysisReport,
    BeableAssignment,
    Classification,
    LambdaValue,
    TheoryView,
    analysis_matrix,
    analyze,
    build_view,
    check_factorizability,
    check_no_conspiracy,
    check_oi,
    check_pi,
    classify,
)
from .dynamics import (
    CoinFlip,
    Formulation,
    MeasurementStep,
    Outcome,
    Setting,
    cooked_weight,
    cooking_step,
    nonlinear_step,
)
from .engine import (
    BranchRecord,
    FrameOrder,
    JointDistribution,
    Scenario,
    enumerate_branches,
    joint_distribution,
    sample,
    sample_counts,
)
from .errors import (
    AllBranchesDead,
    DegenerateState,
    EmptyCommonSupport,
    GRWLocalityError,
    Unclassifiable,
    ZeroVector,
)
from .hilbert import (
    Direction,
    Projector,
    StateVector,
    Wing,
    apply_projector,
    normalize,
    singlet,
    squared_norm,
)

__version__ = "0.1.0"
