"""Diagonal Lyapunov-Krasovskii certificates built from scaling witnesses.

A certificate stores diagonals as 1-D arrays; ``P``/``Q`` properties expand
them to matrices. Block matrices are always assembled in the shape of the
decrease inequality: the quadratic form in (f(x(k)), f(x(k-l))) (or raw
states for the filter model) that bounds the one-step change of V.
"""

from dataclasses import dataclass, field

import numpy as np

from .feasibility import (
    PROP4,
    THEOREM7,
    common_sets,
    coupled_slack,
    multi_delay_sets,
    scaled_slack,
)
from .linalg import LinalgError, is_negative_definite, metzler_negativity_witness
from .system import ModelKind

COMMON_FORMS = ("eq5", "eq18")
SWITCHED_FORMS = ("eq12", "eq19")
L1_FORM = "eq15"
# forms whose delayed terms act on raw states instead of f(x)
RAW_STATE_FORMS = ("eq18", "eq19")


class CertificateError(LinalgError):
    pass


@dataclass
class CommonDiagonalCertificate:
    """V = x'Px + sum_m g(x(k-m))' Q_m g(x(k-m)), g = f or identity.

    Standard (single delay): Q_m = Q + (l - m + 1) eps I.
    Extended (multi-delay): ``q_delays`` holds the l diagonals explicitly and
    ``epsilon`` is zero.
    """

    p: np.ndarray
    q: np.ndarray
    epsilon: float
    delta: float
    l: int
    functional_form: str
    theta: np.ndarray
    d: np.ndarray
    mu: float
    lam: float
    q_delays: np.ndarray | None = None

    @property
    def extended(self):
        return self.q_delays is not None

    @property
    def P(self):
        return np.diag(self.p)

    @property
    def Q(self):
        return np.diag(self.q)

    @property
    def q_family(self):
        """(l, n) diagonals of Q_1..Q_l."""
        if self.q_delays is not None:
            return np.asarray(self.q_delays)
        m = np.arange(1, self.l + 1)
        return self.q[None, :] + ((self.l - m + 1) * self.epsilon)[:, None]


@dataclass
class SwitchedDiagonalCertificate:
    """V = x'P^(sigma(k))x + sum_m g(x(k-m))' Q_m g(x(k-m)), Q_m = Q~ + (l-m+1) eps I."""

    p_family: np.ndarray
    q_tilde: np.ndarray
    epsilon: float
    delta: float
    l: int
    functional_form: str
    theta: np.ndarray
    d_family: np.ndarray
    mu: float
    lam: float

    @property
    def P_family(self):
        return np.array([np.diag(p) for p in self.p_family])

    @property
    def Q_tilde(self):
        return np.diag(self.q_tilde)

    @property
    def q_family(self):
        m = np.arange(1, self.l + 1)
        return self.q_tilde[None, :] + ((self.l - m + 1) * self.epsilon)[:, None]


@dataclass
class SwitchedL1Certificate:
    """V = x'P^(sigma(k))x + f(x(k-1))' Q^(sigma(k)) f(x(k-1)), unit delay only."""

    p_family: np.ndarray
    q_modes: np.ndarray
    delta: float
    theta: np.ndarray
    d_family: np.ndarray
    mu: float
    lam: float
    functional_form: str = L1_FORM
    l: int = 1

    @property
    def P_family(self):
        return np.array([np.diag(p) for p in self.p_family])

    @property
    def Q_family(self):
        return np.array([np.diag(q) for q in self.q_modes])


@dataclass
class VerificationReport:
    margins: dict
    metzler_check: dict
    alpha: float
    beta: float
    accepted: bool
    failures: list = field(default_factory=list)
    extended: bool = False


def _pos(vec, name):
    v = np.asarray(vec, dtype=np.float64)
    if not np.all(np.isfinite(v)) or not np.all(v > 0):
        raise CertificateError(f"{name} must be finite and strictly positive")
    return v


def _check_theta(sys, theta, lam, M2=None):
    theta = _pos(theta, "theta")
    if M2 is None:
        M2 = common_sets(sys)[1]
    slack = scaled_slack(M2, lam, theta)
    if slack < 0:
        raise CertificateError(f"theta violates (A_s + B_s) theta <= lambda theta (slack {slack!r})")
    return theta


def _check_product(mu, lam):
    if not (mu > 0 and lam > 0):
        raise CertificateError("mu and lambda must be positive")
    if lam * mu >= 1:
        raise CertificateError(f"lambda * mu = {lam * mu!r} is not below 1")


def _form_for(sys, raw, plain):
    return raw if sys.model is ModelKind.FILTER else plain


def _alpha(blocks):
    return min(-is_negative_definite(C)[1] for C in blocks)


def _epsilon(alpha, l, n):
    if not alpha > 0:
        raise CertificateError(f"block matrices are not negative definite (worst margin {-alpha!r})")
    return alpha / (2 * l * (1 + n))


def synthesize_common(sys, d, theta, mu, lam):
    """Common certificate on a single-delay system; see ``synthesize_extended`` otherwise."""
    if not sys.is_single_delay:
        raise CertificateError("synthesize_common needs a single delay block; use synthesize_extended")
    _check_product(mu, lam)
    d = _pos(d, "d")
    M1, M2 = common_sets(sys)
    if d.shape != (sys.n,):
        raise CertificateError(f"d must have length {sys.n}")
    slack = scaled_slack(M1, mu, d)
    if slack < 0:
        raise CertificateError(f"d violates (A_s + B_r)^T d <= mu d (slack {slack!r})")
    theta = _check_theta(sys, theta, lam, M2)

    B = sys.delay_blocks
    eta = np.einsum("rpi,p->ri", B, d).max(axis=0)
    delta = 0.5 * (1 - lam * mu) * float(d.min())
    p = d / theta
    q = (lam * eta + delta) / theta
    cert = CommonDiagonalCertificate(
        p, q, 0.0, delta, sys.l, _form_for(sys, "eq18", "eq5"), theta, d, float(mu), float(lam)
    )
    alpha = _alpha(build_block_matrix(sys, cert, s) for s in range(sys.N))
    cert.epsilon = _epsilon(alpha, sys.l, sys.n)
    return cert


def synthesize_extended(sys, d, theta, mu, lam):
    """Common certificate for a system with several delay blocks.

    Q_m theta = lam * sum_{j >= m} eta_j + (l - m + 1) delta e with
    eta_j = max_s B_js^T d, and delta = (1 - lam mu) min(d) / (2 l). The full
    (l+1)n block matrix is then Metzler with a negative (theta; ...; theta)
    image, so no epsilon is needed.
    """
    _check_product(mu, lam)
    d = _pos(d, "d")
    M1, M2 = multi_delay_sets(sys)
    slack = scaled_slack(M1, mu, d)
    if slack < 0:
        raise CertificateError(f"d violates the multi-delay inequalities at mu (slack {slack!r})")
    theta = _check_theta(sys, theta, lam, M2)

    l = sys.l
    eta = np.einsum("mspi,p->msi", sys.B, d).max(axis=1)  # (l, n)
    tail = np.cumsum(eta[::-1], axis=0)[::-1]  # tail[m-1] = sum_{j >= m} eta_j
    delta = 0.5 * (1 - lam * mu) * float(d.min()) / l
    counts = (l - np.arange(l))[:, None]
    q_delays = (lam * tail + counts * delta) / theta
    cert = CommonDiagonalCertificate(
        d / theta,
        q_delays[-1].copy(),
        0.0,
        delta,
        l,
        _form_for(sys, "eq18", "eq5"),
        theta,
        d,
        float(mu),
        float(lam),
        q_delays=q_delays,
    )
    return cert


def _check_family(sys, d_family):
    d = np.asarray(d_family, dtype=np.float64)
    if d.shape != (sys.N, sys.n):
        raise CertificateError(f"d_family must have shape ({sys.N}, {sys.n}), got {d.shape}")
    return _pos(d, "d_family")


def synthesize_switched(sys, d_family, theta, mu, lam):
    if not sys.is_single_delay:
        raise CertificateError("switched certificates are built for a single delay block per mode")
    _check_product(mu, lam)
    d = _check_family(sys, d_family)
    slack = coupled_slack(sys, mu, d, THEOREM7)
    if slack < 0:
        raise CertificateError(f"d_family violates the coupled inequalities (slack {slack!r})")
    theta = _check_theta(sys, theta, lam)

    B = sys.delay_blocks
    worst = np.einsum("spi,mp->smi", B, d).max(axis=(0, 1))
    delta = 0.5 * (1 - lam * mu) * float(d.min())
    cert = SwitchedDiagonalCertificate(
        d / theta[None, :],
        (lam * worst + delta) / theta,
        0.0,
        delta,
        sys.l,
        _form_for(sys, "eq19", "eq12"),
        theta,
        d,
        float(mu),
        float(lam),
    )
    alpha = _alpha(build_block_matrix(sys, cert, s, r) for s in range(sys.N) for r in range(sys.N))
    cert.epsilon = _epsilon(alpha, sys.l, sys.n)
    return cert


def synthesize_switched_l1(sys, d_family, theta, mu, lam):
    if sys.l != 1:
        raise CertificateError(f"mode-indexed delay weights need l = 1, system has l = {sys.l}")
    _check_product(mu, lam)
    d = _check_family(sys, d_family)
    slack = coupled_slack(sys, mu, d, PROP4)
    if slack < 0:
        raise CertificateError(f"d_family violates the coupled inequalities (slack {slack!r})")
    theta = _check_theta(sys, theta, lam)

    B = sys.delay_blocks
    worst = np.einsum("spi,mp->smi", B, d).max(axis=1)  # (N, n): max_m B_s^T d^(m)
    delta = 0.5 * (1 - lam * mu) * float(d.min())
    return SwitchedL1Certificate(
        d / theta[None, :],
        (lam * worst + delta) / theta[None, :],
        delta,
        theta,
        d,
        float(mu),
        float(lam),
    )


def _symmetric_blocks(top_left, off, bottom_right):
    n = top_left.shape[0]
    C = np.empty((2 * n, 2 * n))
    C[:n, :n] = 0.5 * (top_left + top_left.T)
    C[:n, n:] = off
    C[n:, :n] = off.T
    C[n:, n:] = 0.5 * (bottom_right + bottom_right.T)
    return C


def _check_consistent(sys, cert):
    n, N = sys.n, sys.N
    if np.asarray(cert.theta).shape != (n,):
        raise CertificateError(f"certificate dimension does not match n = {n}")
    if isinstance(cert, CommonDiagonalCertificate):
        if cert.extended:
            if cert.l != sys.l or np.asarray(cert.q_delays).shape != (sys.l, n):
                raise CertificateError("extended certificate delay structure does not match the system")
        elif not sys.is_single_delay:
            raise CertificateError("standard common certificate needs a single-delay system")
    else:
        if np.asarray(cert.p_family).shape != (N, n):
            raise CertificateError(f"certificate has a P family for a different number of modes than N = {N}")
        if not sys.is_single_delay:
            raise CertificateError("switched certificates need a single-delay system")
        if isinstance(cert, SwitchedL1Certificate) and sys.l != 1:
            raise CertificateError("mode-indexed delay weights need l = 1")
    if cert.l != sys.l:
        raise CertificateError(f"certificate delay {cert.l} does not match system delay {sys.l}")


def _check_index(idx, N, name):
    if not isinstance(idx, (int, np.integer)) or not 0 <= idx < N:
        raise CertificateError(f"mode index {name} = {idx!r} out of range 0..{N - 1}")


def _extended_block(sys, cert, s):
    l = sys.l
    G = np.concatenate([sys.A[s]] + [sys.B[m, s] for m in range(l)], axis=1)
    C = G.T @ (cert.p[:, None] * G)
    qf = cert.q_family
    diag = [qf[0] - cert.p]
    diag += [qf[m] - qf[m - 1] for m in range(1, l)]
    diag.append(-qf[l - 1])
    C[np.diag_indices_from(C)] += np.concatenate(diag)
    return 0.5 * (C + C.T)


def build_block_matrix(sys, cert, s, r=None):
    """Symmetric matrix of the one-step decrease form for mode s (next mode r).

    Mode indices are zero-based.
    """
    _check_consistent(sys, cert)
    N = sys.N
    _check_index(s, N, "s")
    A = sys.A[s]
    B = sys.delay_blocks[s]
    if isinstance(cert, CommonDiagonalCertificate):
        if cert.extended:
            return _extended_block(sys, cert, s)
        p_next = p_now = np.asarray(cert.p)
        q_add = q_sub = np.asarray(cert.q)
    else:
        if r is None:
            raise CertificateError("switched certificates need the next mode r")
        _check_index(r, N, "r")
        p_next = np.asarray(cert.p_family[r])
        p_now = np.asarray(cert.p_family[s])
        if isinstance(cert, SwitchedL1Certificate):
            q_add, q_sub = np.asarray(cert.q_modes[r]), np.asarray(cert.q_modes[s])
        else:
            q_add = q_sub = np.asarray(cert.q_tilde)
    PA = p_next[:, None] * A
    PB = p_next[:, None] * B
    top_left = A.T @ PA - np.diag(p_now) + np.diag(q_add)
    off = A.T @ PB
    bottom_right = B.T @ PB - np.diag(q_sub)
    return _symmetric_blocks(top_left, off, bottom_right)


def required_indices(sys, cert):
    if isinstance(cert, CommonDiagonalCertificate):
        return [(s,) for s in range(sys.N)]
    return [(s, r) for s in range(sys.N) for r in range(sys.N)]


def _positivity_failures(cert):
    failures = []

    def check(values, name):
        v = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(v)) or not np.all(v > 0):
            failures.append(f"{name} diagonal is not strictly positive")

    check(cert.theta, "theta")
    if isinstance(cert, CommonDiagonalCertificate):
        check(cert.p, "P")
        check(cert.q_family, "Q_m")
        if not cert.extended:
            check(cert.q, "Q")
            if not cert.epsilon > 0:
                failures.append("epsilon is not positive")
    elif isinstance(cert, SwitchedDiagonalCertificate):
        check(cert.p_family, "P^(s)")
        check(cert.q_tilde, "Q~")
        if not cert.epsilon > 0:
            failures.append("epsilon is not positive")
    else:
        check(cert.p_family, "P^(s)")
        check(cert.q_modes, "Q^(s)")
    if not cert.delta > 0:
        failures.append("delta is not positive")
    return failures


def decrease_coefficient(cert, alpha):
    """Guaranteed beta in Delta V <= -beta * sum_j |g(x(k-j))|^2."""
    if isinstance(cert, SwitchedL1Certificate) or getattr(cert, "extended", False):
        return alpha
    eps, l = cert.epsilon, cert.l
    # top-left gains l*eps, the delayed block loses eps, the middle delays lose eps
    if l == 1:
        return alpha - eps
    return min(alpha - l * eps, eps)


def _block_label(idx):
    return "C_" + ",".join(str(i + 1) for i in idx)


def verify_certificate(sys, cert):
    """Check every block matrix by eigenvalue and by Metzler witness; never raises."""
    try:
        _check_consistent(sys, cert)
    except CertificateError as exc:
        return VerificationReport({}, {}, float("nan"), float("nan"), False, [str(exc)])
    failures = _positivity_failures(cert)
    margins, metzler = {}, {}
    extended = getattr(cert, "extended", False)
    reps = sys.l + 1 if extended else 2
    w = np.tile(np.asarray(cert.theta, dtype=np.float64), reps)
    for idx in required_indices(sys, cert):
        C = build_block_matrix(sys, cert, *idx)
        name = _block_label(idx)
        if not np.all(np.isfinite(C)):
            margins[idx] = float("nan")
            metzler[idx] = False
            failures.append(f"block matrix {name} has non-finite entries")
            continue
        _, margin = is_negative_definite(C)
        margins[idx] = margin
        try:
            metzler[idx] = metzler_negativity_witness(C, w)
        except LinalgError as exc:
            metzler[idx] = False
            failures.append(f"Metzler witness for {name}: {exc}")
            continue
        if margin >= 0:
            failures.append(f"block matrix {name} is not negative definite (largest eigenvalue {margin!r})")
        if not metzler[idx]:
            failures.append(f"block matrix {name} times (theta; theta) is not entrywise negative")
    alpha = min(-m for m in margins.values()) if margins else float("nan")
    beta = decrease_coefficient(cert, alpha)
    if not beta > 0:
        failures.append(f"decrease coefficient beta = {beta!r} is not positive")
    accepted = not failures
    return VerificationReport(margins, metzler, alpha, beta, accepted, failures, extended)


def _identity(x):
    return x


def _history(cert, history):
    h = np.asarray(history, dtype=np.float64)
    n = np.asarray(cert.theta).shape[0]
    if h.ndim != 2 or h.shape != (cert.l + 1, n):
        raise CertificateError(f"history must have shape ({cert.l + 1}, {n}), got {h.shape}")
    return h


def evaluate_functional(cert, history, sigma=0, f=None):
    """V at one time step. ``history[j]`` is x(k - j); ``sigma`` is the zero-based active mode."""
    h = _history(cert, history)
    return float(functional_values(cert, h[::-1], np.array([sigma]), f)[0])


def functional_values(cert, states, modes, f=None):
    """V(k) for every k along a chronological state array.

    ``states[j]`` is x(j - l); ``modes[k]`` is the zero-based mode at step k,
    and the result has ``len(states) - l`` entries.
    """
    f = _identity if f is None else f
    X = np.asarray(states, dtype=np.float64)
    l = cert.l
    K = X.shape[0] - l
    modes = np.asarray(modes, dtype=np.int64)
    if K < 1 or modes.shape[0] < K:
        raise CertificateError("need at least l + 1 states and one mode per evaluated step")
    cur = X[l:]
    if isinstance(cert, CommonDiagonalCertificate):
        p = np.broadcast_to(cert.p, cur.shape)
    else:
        if modes.min() < 0 or modes.max() >= cert.p_family.shape[0]:
            raise CertificateError("mode index out of range")
        p = np.asarray(cert.p_family)[modes[:K]]
    V = np.einsum("ki,ki,ki->k", cur, p, cur)
    g = X if cert.functional_form in RAW_STATE_FORMS else f(X)
    if isinstance(cert, SwitchedL1Certificate):
        delayed = g[l - 1 : l - 1 + K]
        q = np.asarray(cert.q_modes)[modes[:K]]
        V = V + np.einsum("ki,ki,ki->k", delayed, q, delayed)
    else:
        qf = cert.q_family
        for m in range(1, l + 1):
            delayed = g[l - m : l - m + K]
            V = V + np.einsum("ki,i,ki->k", delayed, qf[m - 1], delayed)
    return V


__all__ = [
    "CertificateError",
    "CommonDiagonalCertificate",
    "SwitchedDiagonalCertificate",
    "SwitchedL1Certificate",
    "VerificationReport",
    "synthesize_common",
    "synthesize_extended",
    "synthesize_switched",
    "synthesize_switched_l1",
    "build_block_matrix",
    "verify_certificate",
    "evaluate_functional",
    "functional_values",
    "decrease_coefficient",
    "required_indices",
]
