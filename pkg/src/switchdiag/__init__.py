"""Diagonal stability analysis for switched positive systems with delay."""

__version__ = "0.1.0"

from .analyzer import AnalysisReport, Conclusion, Status, TheoremOutcome, analyze_all
from .certificate import (
    build_block_matrix,
    evaluate_functional,
    synthesize_common,
    synthesize_extended,
    synthesize_switched,
    synthesize_switched_l1,
    verify_certificate,
)
from .feasibility import (
    MatrixSet,
    feasible_coupled,
    feasible_scaled,
    minimal_coupled_scaling,
    minimal_scaling,
    row_selection_report,
)
from .linalg import spectral_radius
from .system import ModelKind, SwitchedDelaySystem, paper_example

__all__ = [
    "__version__",
    "AnalysisReport",
    "Conclusion",
    "Status",
    "TheoremOutcome",
    "analyze_all",
    "build_block_matrix",
    "evaluate_functional",
    "synthesize_common",
    "synthesize_extended",
    "synthesize_switched",
    "synthesize_switched_l1",
    "verify_certificate",
    "MatrixSet",
    "feasible_coupled",
    "feasible_scaled",
    "minimal_coupled_scaling",
    "minimal_scaling",
    "row_selection_report",
    "spectral_radius",
    "ModelKind",
    "SwitchedDelaySystem",
    "paper_example",
]
