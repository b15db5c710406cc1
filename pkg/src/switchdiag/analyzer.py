"""Theorem checkers over a SwitchedDelaySystem and the aggregated report.

Each checker returns a TheoremOutcome. Checkers that need the minimal
scaling of the per-mode sums accept a precomputed ``theta_result`` so that
``analyze_all`` solves that bisection once.
"""

from dataclasses import dataclass, field
from enum import Enum

from .feasibility import (
    DEFAULT_TOL,
    ENUMERATION_CAP,
    PROP4,
    THEOREM7,
    EnumerationCapError,
    common_sets,
    feasible_scaled,
    minimal_coupled_scaling,
    minimal_scaling,
    multi_delay_sets,
    row_selection_report,
)
from .system import ModelKind


class Status(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INAPPLICABLE = "inapplicable"


class Conclusion(str, Enum):
    COMMON = "diagonally stable via common functional"
    SWITCHED = "diagonally stable via switched functional"
    BOUNDED = "ultimate boundedness only"
    UNDECIDED = "undecided"


THEOREM_ORDER = ("T2", "T3", "T4", "T5", "T6", "T7", "P4", "T9", "T10", "T11", "T12")

# strictness used for each theorem's inequality systems
STRICTNESS = {"T2": "strict", "T6": "strict", "T4": "non-strict", "T7": "non-strict", "P4": "non-strict"}


@dataclass
class TheoremOutcome:
    theorem_id: str
    status: Status
    witness: dict | None = None
    numbers: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def holds(self):
        return self.status is Status.HOLDS


@dataclass
class AnalysisReport:
    system: dict
    outcomes: list
    strongest_conclusion: Conclusion
    tol: float
    notes: list = field(default_factory=list)

    def outcome(self, theorem_id):
        for o in self.outcomes:
            if o.theorem_id == theorem_id:
                return o
        raise KeyError(theorem_id)


def _inapplicable(tid, reason):
    return TheoremOutcome(tid, Status.INAPPLICABLE, reason=reason)


def _product_status(product, tol):
    return Status.HOLDS if product < 1.0 - tol else Status.FAILS


def check_theorem2(sys):
    if not sys.is_single_delay:
        return _inapplicable("T2", "requires a single delay block per mode")
    m1, m2 = common_sets(sys)
    wd = feasible_scaled(m1, 1.0, strict=True)
    wt = feasible_scaled(m2, 1.0, strict=True)
    status = Status.HOLDS if wd is not None and wt is not None else Status.FAILS
    numbers = {
        "d_feasible": wd is not None,
        "theta_feasible": wt is not None,
    }
    witness = {"d": wd, "theta": wt} if status is Status.HOLDS else None
    return TheoremOutcome("T2", status, witness, numbers)


def check_theorem4(sys, tol=DEFAULT_TOL, theta_result=None):
    """Product test on the minimal scalings of both inequality systems."""
    if not sys.is_single_delay:
        return _inapplicable("T4", "requires a single delay block per mode")
    m1, m2 = common_sets(sys)
    mu, wd = minimal_scaling(m1, tol)
    lam, wt = theta_result if theta_result is not None else minimal_scaling(m2, tol)
    product = mu * lam
    return TheoremOutcome(
        "T4",
        _product_status(product, tol),
        {"d": wd, "theta": wt},
        {"mu": mu, "lambda": lam, "product": product},
    )


def spectral_report(sys, cap=ENUMERATION_CAP):
    """Row-selection spectral radii rho1, rho2; returns the (T3, T5) outcomes."""
    if not sys.is_single_delay:
        reason = "requires a single delay block per mode"
        return _inapplicable("T3", reason), _inapplicable("T5", reason)
    m1, m2 = common_sets(sys)
    try:
        r1 = row_selection_report(m1, cap)
        r2 = row_selection_report(m2, cap)
    except EnumerationCapError as exc:
        return _inapplicable("T3", str(exc)), _inapplicable("T5", str(exc))
    numbers = {"rho1": r1.rho_max, "rho2": r2.rho_max, "product": r1.rho_max * r2.rho_max}
    witness = {"rho1": r1, "rho2": r2}
    t3 = Status.HOLDS if r1.rho_max < 1 and r2.rho_max < 1 else Status.FAILS
    t5 = Status.HOLDS if numbers["product"] < 1 else Status.FAILS
    return (
        TheoremOutcome("T3", t3, witness, dict(numbers)),
        TheoremOutcome("T5", t5, witness, dict(numbers)),
    )


def check_theorem6(sys, tol=DEFAULT_TOL, cap=ENUMERATION_CAP):
    try:
        m1, m2 = multi_delay_sets(sys, cap)
    except EnumerationCapError as exc:
        return _inapplicable("T6", str(exc))
    mu, wd = minimal_scaling(m1, tol)
    lam, wt = minimal_scaling(m2, tol)
    product = mu * lam
    return TheoremOutcome(
        "T6",
        _product_status(product, tol),
        {"d": wd, "theta": wt},
        {"mu": mu, "lambda": lam, "product": product, "members_d": len(m1), "members_theta": len(m2)},
    )


def _check_coupled(tid, sys, variant, tol, theta_result):
    _, m2 = common_sets(sys)
    lam, wt = theta_result if theta_result is not None else minimal_scaling(m2, tol)
    mu, wd = minimal_coupled_scaling(sys, variant, tol)
    product = mu * lam
    return TheoremOutcome(
        tid,
        _product_status(product, tol),
        {"d_family": wd, "theta": wt},
        {"mu": mu, "lambda": lam, "product": product},
    )


def check_theorem7(sys, tol=DEFAULT_TOL, theta_result=None):
    if not sys.is_single_delay:
        return _inapplicable("T7", "requires a single delay block per mode")
    return _check_coupled("T7", sys, THEOREM7, tol, theta_result)


def check_prop4(sys, tol=DEFAULT_TOL, theta_result=None):
    if sys.l != 1:
        return _inapplicable("P4", f"requires delay l = 1, system has l = {sys.l}")
    return _check_coupled("P4", sys, PROP4, tol, theta_result)


def _retag(tid, base, conclusion):
    out = TheoremOutcome(tid, base.status, base.witness, dict(base.numbers), base.reason)
    out.numbers["same_hypotheses_as"] = base.theorem_id
    out.numbers["conclusion"] = conclusion
    return out


def analyze_all(sys, tol=DEFAULT_TOL, radially_unbounded=True, cap=ENUMERATION_CAP):
    """Run every applicable checker and derive the strongest conclusion.

    ``radially_unbounded`` states whether the intended nonlinearity satisfies
    f_i(x) -> +-inf as x -> +-inf, which the network-model results assume.
    """
    theta_result = None
    if sys.is_single_delay:
        theta_result = minimal_scaling(common_sets(sys)[1], tol)
    t3, t5 = spectral_report(sys, cap)
    outcomes = {
        "T2": check_theorem2(sys),
        "T3": t3,
        "T4": check_theorem4(sys, tol, theta_result),
        "T5": t5,
        "T6": check_theorem6(sys, tol, cap),
        "T7": check_theorem7(sys, tol, theta_result),
        "P4": check_prop4(sys, tol, theta_result),
    }
    notes = [
        "T9-T12 share the hypotheses of T4/T7 and are reported as re-tags with model-specific conclusions",
        "strict inequalities: " + ", ".join(f"{k}={v}" for k, v in STRICTNESS.items()),
    ]
    if not sys.is_single_delay:
        notes.append("multi-delay certificates use the extended construction")

    if sys.model is ModelKind.FILTER:
        outcomes["T9"] = _retag("T9", outcomes["T4"], "common functional on raw delayed states")
        outcomes["T10"] = _retag("T10", outcomes["T7"], "switched functional on raw delayed states")
    elif sys.model is ModelKind.NETWORK:
        if radially_unbounded:
            outcomes["T11"] = _retag("T11", outcomes["T4"], "uniform ultimate boundedness, common functional")
            outcomes["T12"] = _retag("T12", outcomes["T7"], "uniform ultimate boundedness, switched functional")
        else:
            reason = "nonlinearity is not radially unbounded"
            outcomes["T11"] = _inapplicable("T11", reason)
            outcomes["T12"] = _inapplicable("T12", reason)

    def holds(*ids):
        return any(tid in outcomes and outcomes[tid].holds for tid in ids)

    if sys.model is ModelKind.NETWORK:
        conclusion = Conclusion.BOUNDED if holds("T11", "T12") else Conclusion.UNDECIDED
    elif sys.model is ModelKind.FILTER:
        if holds("T9"):
            conclusion = Conclusion.COMMON
        elif holds("T10"):
            conclusion = Conclusion.SWITCHED
        else:
            conclusion = Conclusion.UNDECIDED
    elif holds("T2", "T3", "T4", "T5", "T6"):
        conclusion = Conclusion.COMMON
    elif holds("T7", "P4"):
        conclusion = Conclusion.SWITCHED
    else:
        conclusion = Conclusion.UNDECIDED

    ordered = [outcomes[t] for t in THEOREM_ORDER if t in outcomes]
    return AnalysisReport(sys.summary(), ordered, conclusion, tol, notes)
