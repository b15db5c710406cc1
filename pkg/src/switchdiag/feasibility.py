"""Linear-inequality feasibility for diagonal scaling vectors.

Every question here is of the form "is there a positive vector v with
A v <= lam * v for all A in a set". It is decided by one LP that maximizes
a uniform slack t over the box 1 <= v_i <= 1e6:

    maximize t   s.t.   (A v)_i - lam * v_i + t <= 0   for every member and row.

Strict feasibility (``<<``) means the optimal slack exceeds ``STRICT_SLACK``.
The row-selection enumeration is the independent spectral route to the same
answers.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .linalg import ConvergenceError, LinalgError

STRICT_SLACK = 1e-9
NONSTRICT_SLACK = -1e-9
V_LOWER = 1.0
V_UPPER = 1e6
ENUMERATION_CAP = 10**6
SIMPLEX_ITERATION_CAP = 50_000
DEFAULT_TOL = 1e-9
# relative violation of a slack-free row that marks an LP point as broken
RESIDUAL_TOL = 1e-8

THEOREM7 = "theorem7"
PROP4 = "prop4"
VARIANTS = (THEOREM7, PROP4)


class FeasibilityError(LinalgError):
    pass


class EnumerationCapError(FeasibilityError):
    def __init__(self, cap, size, description):
        super().__init__(f"{description}: {size} combinations exceeds the cap of {cap}")
        self.cap = cap
        self.size = size


@dataclass(frozen=True, eq=False)
class MatrixSet:
    """Non-empty set of nonnegative n x n matrices, stored as one (K, n, n) array."""

    members: np.ndarray

    def __post_init__(self):
        arr = np.array(self.members, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] == 0 or arr.shape[1] != arr.shape[2] or arr.shape[1] == 0:
            raise FeasibilityError(f"matrix set must have shape (K, n, n), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FeasibilityError("matrix set has non-finite entries")
        if np.any(arr < 0):
            raise FeasibilityError("matrix set members must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "members", arr)

    def __len__(self):
        return self.members.shape[0]

    @property
    def n(self):
        return self.members.shape[1]

    def scaled(self, alpha):
        return MatrixSet(self.members * alpha)

    def unique(self):
        return MatrixSet(np.unique(self.members, axis=0))


@dataclass(frozen=True)
class ScalingWitness:
    """Vector v >> 0 with A v <= lam * v - slack for every member A."""

    lam: float
    v: np.ndarray
    slack: float


@dataclass(frozen=True)
class SelectionReport:
    rho_max: float
    argmax: tuple
    count: int

    def matrix(self, M):
        """Assemble the selected matrix from the set it was computed on."""
        members = M.members if isinstance(M, MatrixSet) else np.asarray(M)
        return np.array([members[k, i] for i, k in enumerate(self.argmax)])


@dataclass(frozen=True)
class CoupledWitness:
    """Family d^(1..N) (rows of ``d_family``) solving one of the coupled systems at ``mu``."""

    mu: float
    d_family: np.ndarray
    slack: float
    variant: str


def _as_set(M):
    return M if isinstance(M, MatrixSet) else MatrixSet(M)


def _scaled_lp(C, slack_mask, lower, upper, level_free, level_slack):
    """Standard-form LP for the max-slack problem with rescaled columns.

    Bounded coordinates are measured in units of their box width; the others
    and the slack get unit width. ``level_free`` and ``level_slack`` instead
    give them the width that brings their largest coefficient level with the
    bounded columns, which can otherwise sit six decades below.
    """
    dim = C.shape[1]
    rhs = -C @ lower
    bounded = np.isfinite(upper)
    width = np.where(bounded, upper - lower, 1.0)
    width = np.where(width > 0, width, 1.0)
    col_peak = np.abs(C).max(axis=0)
    ref = float((col_peak * width)[bounded].max()) if bounded.any() else 0.0
    ref = ref if ref > 0 else 1.0
    if level_free:
        free = ~bounded & (col_peak > 0)
        width[free] = ref / col_peak[free]
    t_col = (ref if level_slack else 1.0) * slack_mask[:, None]
    rows = [np.hstack([C * width[None, :], t_col, -t_col])]
    b = [rhs]
    finite = np.flatnonzero(bounded)
    if finite.size:
        box = np.zeros((finite.size, dim + 2))
        box[np.arange(finite.size), finite] = 1.0
        rows.append(box)
        b.append((upper[finite] - lower[finite]) / width[finite])
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(b)
    # row equilibration; each inequality keeps its solution set
    peak = np.abs(A_ub).max(axis=1)
    peak = np.where(peak > 0, peak, 1.0)
    c = np.zeros(dim + 2)
    c[dim] = 1.0
    c[dim + 1] = -1.0
    return c, np.ascontiguousarray(A_ub / peak[:, None]), np.ascontiguousarray(b_ub / peak), width


def _hard_residual(C, slack_mask, z):
    """Largest violation of the rows without slack, relative to row magnitude."""
    hard = slack_mask == 0
    if not hard.any():
        return 0.0
    lhs = C[hard] @ z
    size = np.abs(C[hard]) @ np.abs(z)
    return float(np.max(lhs / np.where(size > 0, size, 1.0)))


def _solve_max_slack(C, slack_mask, lower, upper):
    """maximize t s.t. C z + mask * t <= 0 and lower <= z <= upper.

    Returns z. ``upper`` may contain inf for unbounded-above coordinates.

    The problem is always feasible and bounded, so a non-OK status from the
    simplex is numerical, and so is an OK point that breaks a row without
    slack. Unit widths usually give the most accurate optimum but now and
    then leave a column so small that phase 1 pivots on noise; the retries
    level the columns instead. If no scaling gives a clean point the least
    violating one is returned, since callers recompute the slack from z.
    """
    dim = C.shape[1]
    status = -1
    best, best_resid = None, np.inf
    for level in ((False, False), (True, False), (True, True)):
        c, A_ub, b_ub, width = _scaled_lp(C, slack_mask, lower, upper, *level)
        status, x, _ = kernels.simplex(c, A_ub, b_ub, SIMPLEX_ITERATION_CAP)
        if status != 0:
            continue
        z = lower + width * x[:dim]
        resid = _hard_residual(C, slack_mask, z)
        if resid <= RESIDUAL_TOL:
            return z
        if resid < best_resid:
            best, best_resid = z, resid
    if best is None:
        raise FeasibilityError(f"simplex failed with status {status} on a {A_ub.shape} problem")
    return best


def scaled_slack(M, lam, v):
    """min over members A and rows i of lam * v_i - (A v)_i."""
    members = _as_set(M).members
    return float(np.min(lam * v[None, :] - members @ v))


def _accepts(slack, strict):
    return slack > STRICT_SLACK if strict else slack >= NONSTRICT_SLACK


def feasible_scaled(M, lam, strict=True):
    """Maximal-slack v >> 0 with A v <= lam v for every A in M, or None.

    The returned slack is recomputed from v, not taken from the LP.
    """
    M = _as_set(M)
    if not lam > 0:
        raise FeasibilityError("scaling factor must be positive")
    K, n, _ = M.members.shape
    C = (M.members - lam * np.eye(n)[None]).reshape(K * n, n)
    v = _solve_max_slack(C, np.ones(K * n), np.full(n, V_LOWER), np.full(n, V_UPPER))
    slack = scaled_slack(M, lam, v)
    if not _accepts(slack, strict):
        return None
    return ScalingWitness(float(lam), v, slack)


def _bisect(feasible, hi, tol):
    """Smallest feasible value in [0, hi] to within tol; hi must be feasible."""
    witness = feasible(hi)
    if witness is None:
        raise FeasibilityError(f"upper bracket {hi!r} is not feasible")
    lo = 0.0
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        w = feasible(mid) if mid > 0 else None
        if w is None:
            lo = mid
        else:
            hi, witness = mid, w
    return hi, witness


def minimal_scaling(M, tol=DEFAULT_TOL):
    """Infimum of lam for which ``feasible_scaled(M, lam, strict=True)`` succeeds.

    Returns ``(lam_star, witness)`` with ``lam_star`` within ``tol`` above the
    infimum and the witness strictly feasible at ``lam_star``.
    """
    M = _as_set(M)
    if not tol > 0:
        raise FeasibilityError("tol must be positive")
    hi = 1.0 + float(M.members.sum(axis=2).max())
    return _bisect(lambda lam: feasible_scaled(M, lam, strict=True), hi, tol)


def _decode(q, K, n):
    digits = []
    for _ in range(n):
        q, r = divmod(q, K)
        digits.append(r)
    return tuple(reversed(digits))


def row_selection_report(M, cap=ENUMERATION_CAP, tol=1e-12):
    """Exhaustive maximum spectral radius over the row-selection set of M."""
    M = _as_set(M)
    K, n, _ = M.members.shape
    count = K**n
    if count > cap:
        raise EnumerationCapError(cap, count, f"row selection over {K} matrices of order {n}")
    status, rhos = kernels.row_selection_rhos(np.ascontiguousarray(M.members), tol, 100_000)
    if status != 0:
        raise ConvergenceError("spectral radius of a row selection did not converge", (np.nan, np.nan))
    rho_max = float(rhos.max())
    first = int(np.flatnonzero(rhos >= rho_max - tol)[0])
    return SelectionReport(rho_max, _decode(first, K, n), count)


# -- sets attached to a system ------------------------------------------------


def common_sets(sys):
    """(M1, M2): transposed sums (A_s + B_r)^T over all s, r and sums A_s + B_s."""
    A, B = sys.A, sys.delay_blocks
    N = sys.N
    m1 = np.array([(A[s] + B[r]).T for s in range(N) for r in range(N)])
    m2 = A + B
    return MatrixSet(m1), MatrixSet(m2)


def multi_delay_sets(sys, cap=ENUMERATION_CAP):
    """Multi-delay analogues of ``common_sets``; duplicate members are dropped."""
    N, l = sys.N, sys.l
    size = N ** (l + 1)
    if size > cap:
        raise EnumerationCapError(cap, size, f"delay combinations for N={N}, l={l}")
    m1 = []
    for s in range(N):
        for rs in itertools.product(range(N), repeat=l):
            total = sys.A[s] + sum(sys.B[m, r] for m, r in enumerate(rs))
            m1.append(total.T)
    m2 = sys.A + sys.B.sum(axis=0)
    return MatrixSet(np.array(m1)).unique(), MatrixSet(m2).unique()


def coupled_slack(sys, mu, d_family, variant):
    """Minimum over all index combinations of mu d^(s) - A_s^T d^(r) - B^T d^(j).

    theorem7 ranges the delay block over every mode m; prop4 ties it to r.
    The inner maximum over (m, j) is taken componentwise, which gives the same
    minimum as enumerating every combination.
    """
    if variant not in VARIANTS:
        raise FeasibilityError(f"unknown variant {variant!r}")
    A, B = sys.A, sys.delay_blocks
    d = np.asarray(d_family, dtype=np.float64)
    AT_d = np.einsum("spi,rp->sri", A, d)  # [s, r] = A_s^T d^(r)
    BT_d = np.einsum("mpi,jp->mji", B, d)  # [m, j] = B_m^T d^(j)
    if variant == THEOREM7:
        worst_b = BT_d.max(axis=(0, 1))[None, None, :]
    else:
        worst_b = BT_d.max(axis=1)[None, :, :]
    gap = mu * d[:, None, :] - AT_d - worst_b
    return float(gap.min())


def coupled_slack_bruteforce(sys, mu, d_family, variant):
    """Same as ``coupled_slack`` by literal enumeration; used as a cross-check."""
    A, B = sys.A, sys.delay_blocks
    d = np.asarray(d_family, dtype=np.float64)
    N = sys.N
    worst = np.inf
    if variant == THEOREM7:
        combos = ((s, r, m, j) for s, r, m, j in itertools.product(range(N), repeat=4))
    else:
        combos = ((s, r, r, j) for s, r, j in itertools.product(range(N), repeat=3))
    for s, r, m, j in combos:
        worst = min(worst, float(np.min(mu * d[s] - A[s].T @ d[r] - B[m].T @ d[j])))
    return worst


def _coupled_lp(sys, mu, variant):
    """Rows of the compact coupled LP.

    Auxiliary eta >= B^T d^(j) replaces the enumeration over the delay index,
    so the LP has O(N^2 n) rows instead of O(N^4 n).
    """
    A, B = sys.A, sys.delay_blocks
    N, n = sys.N, sys.n
    n_eta = n if variant == THEOREM7 else N * n
    dim = N * n + n_eta
    eta0 = N * n

    def eta_cols(r):
        return slice(eta0, eta0 + n) if variant == THEOREM7 else slice(eta0 + r * n, eta0 + (r + 1) * n)

    rows, mask = [], []
    for s in range(N):
        for r in range(N):
            blk = np.zeros((n, dim))
            blk[:, r * n : (r + 1) * n] += A[s].T
            blk[:, s * n : (s + 1) * n] -= mu * np.eye(n)
            blk[:, eta_cols(r)] += np.eye(n)
            rows.append(blk)
            mask.append(np.ones(n))
    for m in range(N):
        for j in range(N):
            blk = np.zeros((n, dim))
            blk[:, j * n : (j + 1) * n] += B[m].T
            blk[:, eta_cols(m)] -= np.eye(n)
            rows.append(blk)
            mask.append(np.zeros(n))
    lower = np.concatenate([np.full(N * n, V_LOWER), np.zeros(n_eta)])
    upper = np.concatenate([np.full(N * n, V_UPPER), np.full(n_eta, np.inf)])
    return np.vstack(rows), np.concatenate(mask), lower, upper


def feasible_coupled(sys, mu, variant=THEOREM7, strict=False, cap=ENUMERATION_CAP):
    """Maximal-slack d-family for the coupled switched system at ``mu``, or None."""
    if variant not in VARIANTS:
        raise FeasibilityError(f"unknown variant {variant!r}")
    if not mu > 0:
        raise FeasibilityError("scaling factor must be positive")
    if not sys.is_single_delay:
        raise FeasibilityError("coupled systems are defined for a single delay block per mode")
    size = sys.N ** (4 if variant == THEOREM7 else 3)
    if size > cap:
        raise EnumerationCapError(cap, size, f"{variant} index combinations")
    C, mask, lower, upper = _coupled_lp(sys, mu, variant)
    z = _solve_max_slack(C, mask, lower, upper)
    d = z[: sys.N * sys.n].reshape(sys.N, sys.n)
    slack = coupled_slack(sys, mu, d, variant)
    if not _accepts(slack, strict):
        return None
    return CoupledWitness(float(mu), d, slack, variant)


def minimal_coupled_scaling(sys, variant=THEOREM7, tol=DEFAULT_TOL):
    """Smallest mu (to within tol) admitting a strictly feasible coupled witness."""
    if not tol > 0:
        raise FeasibilityError("tol must be positive")
    colsums = (sys.A[:, None] + sys.delay_blocks[None, :]).sum(axis=2)
    hi = 1.0 + float(colsums.max())
    return _bisect(lambda mu: feasible_coupled(sys, mu, variant, strict=True), hi, tol)


def verify_scaling_witness(M, witness, strict=False):
    """Re-check a ScalingWitness against M; returns the recomputed slack or raises."""
    v = np.asarray(witness.v, dtype=np.float64)
    if not np.all(v > 0):
        raise FeasibilityError("witness vector is not strictly positive")
    slack = scaled_slack(M, witness.lam, v)
    if not _accepts(slack, strict):
        raise FeasibilityError(f"witness violates its inequalities (slack {slack!r})")
    return slack


__all__ = [
    "MatrixSet",
    "ScalingWitness",
    "SelectionReport",
    "CoupledWitness",
    "FeasibilityError",
    "EnumerationCapError",
    "feasible_scaled",
    "minimal_scaling",
    "row_selection_report",
    "feasible_coupled",
    "minimal_coupled_scaling",
    "common_sets",
    "multi_delay_sets",
    "coupled_slack",
    "coupled_slack_bruteforce",
    "scaled_slack",
    "verify_scaling_witness",
]
