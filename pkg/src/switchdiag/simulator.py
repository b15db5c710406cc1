"""Trajectories of the switched delay models and empirical checks on them.

Mode indices are zero-based in this API; CSV export and the CLI show them
one-based. A history array lists the most recent state first:
``history[j] = x(k - j)``. Trajectory states are chronological.
"""

import csv
import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._loops import (
    F_IDENTITY,
    F_RATIONAL,
    F_SATURATION,
    F_SCALED,
    F_TANH,
    MODEL_FILTER,
    MODEL_NETWORK,
    MODEL_PERSIDSKII,
)
from ._vectorized import apply_f
from .certificate import RAW_STATE_FORMS, functional_values, verify_certificate
from .system import ModelKind

DIVERGENCE_NORM = 1e12
SECTOR_SAMPLES = 100_000
SECTOR_RANGE = 1e6
TAIL_FRACTION = 0.2
SKIP_BELOW = 1e-250
RATIO_TOL = 1e-9
MAX_CORNERS = 64

_MODEL_CODES = {
    ModelKind.PERSIDSKII: MODEL_PERSIDSKII,
    ModelKind.FILTER: MODEL_FILTER,
    ModelKind.NETWORK: MODEL_NETWORK,
}
_F_CODES = {
    "identity": F_IDENTITY,
    "tanh": F_TANH,
    "saturation": F_SATURATION,
    "rational": F_RATIONAL,
    "scaled": F_SCALED,
}


class SimulationError(ValueError):
    pass


class SectorViolation(SimulationError):
    pass


@functools.lru_cache(maxsize=None)
def _sector_self_test(kind, param, samples=SECTOR_SAMPLES, seed=12345):
    rng = np.random.default_rng(seed)
    half = samples // 2
    mags = np.concatenate(
        [
            rng.uniform(0.0, SECTOR_RANGE, samples - half),
            10.0 ** rng.uniform(-300, np.log10(SECTOR_RANGE), half),
        ]
    )
    x = mags * rng.choice([-1.0, 1.0], size=samples)
    x = x[x != 0]
    y = apply_f(x, _F_CODES[kind], param)
    # sign comparison instead of x * y, which underflows for tiny x
    same_sign = (np.sign(y) == np.sign(x)) & (y != 0)
    if not np.all(same_sign):
        bad = x[~same_sign][0]
        raise SectorViolation(f"{kind}: x * f(x) > 0 fails at x = {bad!r}")
    if not np.all(np.abs(y) <= np.abs(x)):
        bad = x[~(np.abs(y) <= np.abs(x))][0]
        raise SectorViolation(f"{kind}: |f(x)| <= |x| fails at x = {bad!r}")
    return True


@dataclass(frozen=True)
class Nonlinearity:
    """Componentwise sector nonlinearity: x f(x) > 0 for x != 0 and |f(x)| <= |x|."""

    kind: str = "identity"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in _F_CODES:
            raise SimulationError(f"unknown nonlinearity {self.kind!r}")
        if self.kind == "saturation" and not self.param > 0:
            raise SimulationError("saturation limit must be positive")
        if self.kind == "scaled" and not 0 < self.param <= 1:
            raise SimulationError("scaled-linear gain must lie in (0, 1]")
        _sector_self_test(self.kind, float(self.param))

    @classmethod
    def parse(cls, text):
        """Parse ``identity``, ``tanh``, ``saturation[:L]``, ``rational`` or ``scaled:<c>``."""
        name, _, arg = text.strip().partition(":")
        try:
            if name == "scaled":
                if not arg:
                    raise SimulationError("scaled needs a gain, e.g. scaled:0.5")
                return cls("scaled", float(arg))
            if name == "saturation":
                return cls("saturation", float(arg) if arg else 1.0)
        except ValueError as exc:
            raise SimulationError(f"bad nonlinearity parameter in {text!r}") from exc
        if arg:
            raise SimulationError(f"{name} takes no parameter")
        return cls(name)

    @property
    def code(self):
        return _F_CODES[self.kind]

    @property
    def radially_unbounded(self):
        return self.kind in ("identity", "scaled")

    @property
    def label(self):
        if self.kind in ("saturation", "scaled"):
            return f"{self.kind}:{self.param!r}"
        return self.kind

    def __call__(self, x):
        return apply_f(np.asarray(x, dtype=np.float64), self.code, float(self.param))


CATALOG = (
    Nonlinearity("identity"),
    Nonlinearity("tanh"),
    Nonlinearity("saturation", 1.0),
    Nonlinearity("rational"),
    Nonlinearity("scaled", 0.5),
)

IDENTITY = CATALOG[0]


@dataclass(frozen=True)
class SwitchingSignal:
    kind: str
    mode: int = 0
    pattern: tuple = ()
    seed: int = 0

    @classmethod
    def fixed(cls, s):
        return cls("fixed", mode=int(s))

    @classmethod
    def periodic(cls, pattern):
        pattern = tuple(int(p) for p in pattern)
        if not pattern:
            raise SimulationError("periodic pattern must be non-empty")
        return cls("periodic", pattern=pattern)

    @classmethod
    def random(cls, seed=0):
        return cls("random", seed=int(seed))

    @classmethod
    def adversarial(cls):
        return cls("adversarial")

    @property
    def description(self):
        if self.kind == "fixed":
            return f"fixed mode {self.mode}"
        if self.kind == "periodic":
            return "periodic " + "-".join(str(p) for p in self.pattern)
        if self.kind == "random":
            return f"uniform random, seed {self.seed}"
        return "adversarial greedy"

    def modes(self, length, N):
        """Zero-based mode sequence of the given length."""
        if self.kind == "fixed":
            seq = np.full(length, self.mode, dtype=np.int64)
        elif self.kind == "periodic":
            seq = np.resize(np.array(self.pattern, dtype=np.int64), length)
        elif self.kind == "random":
            seq = np.random.default_rng(self.seed).integers(0, N, size=length, dtype=np.int64)
        else:
            raise SimulationError("adversarial switching is decided step by step inside simulate")
        if seq.size and (seq.min() < 0 or seq.max() >= N):
            raise SimulationError(f"switching signal uses a mode outside 0..{N - 1}")
        return seq


@dataclass(frozen=True)
class InputSignal:
    kind: str = "zero"
    value: tuple = ()
    amplitude: float = 0.0
    seed: int = 0

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, u):
        u = tuple(float(x) for x in np.atleast_1d(u))
        return cls("constant", value=u, amplitude=max(abs(x) for x in u))

    @classmethod
    def bounded_random(cls, amplitude, seed=0):
        if not amplitude >= 0:
            raise SimulationError("amplitude must be nonnegative")
        return cls("random", amplitude=float(amplitude), seed=int(seed))

    def sequence(self, length, n):
        """(length, n) input values; random inputs are uniform in [0, amplitude]."""
        if self.kind == "zero":
            return np.zeros((length, n))
        if self.kind == "constant":
            u = np.array(self.value)
            if u.size == 1:
                u = np.full(n, u[0])
            if u.shape != (n,):
                raise SimulationError(f"constant input has {u.size} entries, system has n = {n}")
            return np.tile(u, (length, 1))
        rng = np.random.default_rng(self.seed)
        return rng.uniform(0.0, self.amplitude, size=(length, n))


@dataclass
class Trajectory:
    """``states[j] = x(j - l)``; ``modes[k] = sigma(k)`` for k = 0..horizon."""

    states: np.ndarray
    modes: np.ndarray
    V_values: np.ndarray | None
    horizon: int
    l: int
    system: object = None
    f: Nonlinearity = IDENTITY

    def x(self, k):
        return self.states[self.l + k]

    @property
    def forward(self):
        """States x(0)..x(horizon)."""
        return self.states[self.l :]


@dataclass
class DecreaseReport:
    max_ratio: float
    violations: int
    violation_steps: list
    checked: int
    skipped: int
    beta: float
    certified: bool = True

    @property
    def vacuous(self):
        return self.checked == 0


@dataclass
class UltimateBoundednessReport:
    D: float
    R_emp: float
    k_tilde: int
    beta1_emp: float | None
    beta2_emp: float | None
    diverged: bool
    runs: int
    horizon: int
    warnings: list = field(default_factory=list)


def _history(sys, history):
    h = np.asarray(history, dtype=np.float64)
    if h.shape != (sys.l + 1, sys.n):
        raise SimulationError(f"history must have shape ({sys.l + 1}, {sys.n}), got {h.shape}")
    return h


def _check_mode(sys, s):
    if not isinstance(s, (int, np.integer)) or not 0 <= s < sys.N:
        raise SimulationError(f"mode {s!r} outside 0..{sys.N - 1}")


def step(sys, history, s, f=IDENTITY, u=None):
    """Next state from ``history`` (most recent first) in mode ``s``."""
    h = _history(sys, history)
    _check_mode(sys, s)
    if u is not None and sys.model is not ModelKind.NETWORK:
        raise SimulationError("inputs are only defined for the network model")
    src = h if sys.model is ModelKind.FILTER else f(h)
    z = sys.A[s] @ src[0]
    for m in range(sys.l):
        z = z + sys.B[m, s] @ src[m + 1]
    if sys.model is ModelKind.FILTER:
        return f(z)
    if u is not None:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (sys.n,):
            raise SimulationError(f"input must have length {sys.n}")
        z = z + u
    return z


def _inputs_for(sys, inp, length):
    inp = InputSignal.zero() if inp is None else inp
    if inp.kind != "zero" and sys.model is not ModelKind.NETWORK:
        raise SimulationError("inputs are only defined for the network model")
    return inp.sequence(length, sys.n)


def simulate_batch(sys, f, modes, inputs, inits):
    """Run R trajectories at once. ``modes`` (R, H), ``inputs`` (R, H, n), ``inits`` (R, l+1, n)."""
    return kernels.simulate_batch(
        np.ascontiguousarray(sys.A),
        np.ascontiguousarray(sys.B),
        _MODEL_CODES[sys.model],
        f.code,
        float(f.param),
        np.ascontiguousarray(modes, dtype=np.int64),
        np.ascontiguousarray(inputs, dtype=np.float64),
        np.ascontiguousarray(inits, dtype=np.float64),
    )


def _greedy_modes(sys, f, init, horizon, inputs, cert):
    """Pick sigma(k) maximizing the next functional value (or next-state norm)."""
    l, N = sys.l, sys.N
    states = np.empty((horizon + l + 1, sys.n))
    states[: l + 1] = init[::-1]
    modes = np.empty(horizon + 1, dtype=np.int64)
    use_u = sys.model is ModelKind.NETWORK
    for k in range(horizon + 1):
        cur = l + k
        hist = states[cur - l : cur + 1][::-1]
        u = inputs[min(k, horizon - 1)] if use_u else None
        best, best_val, best_next = 0, -np.inf, None
        for s in range(N):
            nxt = step(sys, hist, s, f, u)
            if cert is None:
                val = float(np.linalg.norm(nxt))
            else:
                window = np.vstack([states[cur - l + 1 : cur + 1], nxt[None]])
                val = max(float(functional_values(cert, window, np.array([r]), f)[0]) for r in _next_modes(cert, N))
            if val > best_val:
                best, best_val, best_next = s, val, nxt
        modes[k] = best
        if k < horizon:
            states[cur + 1] = best_next
    return states, modes


def _next_modes(cert, N):
    return range(N) if hasattr(cert, "p_family") else (0,)


def simulate(sys, f=IDENTITY, signal=None, inp=None, init=None, horizon=100, cert=None):
    """Iterate the model from ``init`` (shape (l+1, n), most recent first)."""
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise SimulationError("horizon must be a positive integer")
    signal = SwitchingSignal.fixed(0) if signal is None else signal
    init = np.zeros((sys.l + 1, sys.n)) if init is None else _history(sys, init)
    inputs = _inputs_for(sys, inp, horizon)
    if signal.kind == "adversarial":
        states, modes = _greedy_modes(sys, f, init, horizon, inputs, cert)
    else:
        modes = signal.modes(horizon + 1, sys.N)
        states = simulate_batch(sys, f, modes[None, :horizon], inputs[None], init[None])[0]
    V = functional_values(cert, states, modes, f) if cert is not None else None
    return Trajectory(states, modes, V, int(horizon), sys.l, sys, f)


def _window_sums(g, l, H):
    """sum_{j=0..l} |g(x(k-j))|^2 for k = 0..H-1.

    Summed directly rather than by differencing a running total, which
    cancels catastrophically once the state has decayed by many decades.
    """
    sq = np.einsum("ti,ti->t", g, g)
    return np.lib.stride_tricks.sliding_window_view(sq, l + 1)[:H].sum(axis=1)


def monitor_decrease(traj, cert, f=None, beta=None):
    """Ratio Delta V / sum_j |g(x(k-j))|^2 along a recorded run.

    g is f for the Persidskii-type functionals and the identity for the
    filter-model ones. A step is a violation when its ratio exceeds
    ``-beta + 1e-9``; ``beta`` defaults to the verified decrease coefficient.
    If the certificate does not verify on the trajectory's system, ``beta``
    falls back to 0 so that any step where V fails to decrease is flagged.
    """
    if traj.V_values is None:
        raise SimulationError("trajectory was recorded without a certificate")
    f = traj.f if f is None else f
    certified = True
    if beta is None:
        rep = verify_certificate(traj.system, cert)
        certified = rep.accepted
        beta = rep.beta if certified else 0.0
    X = traj.states
    l, H = traj.l, traj.horizon
    g = X if cert.functional_form in RAW_STATE_FORMS else f(X)
    S = _window_sums(g, l, H)
    dV = np.diff(traj.V_values)[:H]
    live = S >= SKIP_BELOW
    ratios = dV[live] / S[live]
    bad = np.flatnonzero(live)[ratios > -beta + RATIO_TOL]
    max_ratio = float(ratios.max()) if ratios.size else float("-inf")
    return DecreaseReport(max_ratio, int(bad.size), bad.tolist(), int(live.sum()), int((~live).sum()), float(beta), certified)


def _initial_histories(dim, D, n_random, seed):
    c = D / np.sqrt(dim)
    rng = np.random.default_rng(seed)
    if 2**dim <= MAX_CORNERS:
        corners = np.array(list(itertools.product((-c, c), repeat=dim)))
    else:
        corners = rng.choice([-c, c], size=(MAX_CORNERS, dim))
    axes = D * np.eye(dim)
    g = rng.normal(size=(n_random, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = D * rng.uniform(0, 1, size=(n_random, 1)) ** (1.0 / dim)
    return np.vstack([corners, axes, g * radii])


def probe_ultimate_bound(sys, f, inp, signal, D, horizon, cert=None, n_random=32, seed=0):
    """Empirical ultimate bound over initial histories of norm at most D.

    Start time k0 = 0 covers every k0 since the modes do not depend on time.
    """
    if not D > 0:
        raise SimulationError("D must be positive")
    if not isinstance(horizon, (int, np.integer)) or horizon < 5:
        raise SimulationError("horizon must be an integer of at least 5")
    warnings = ["initial time fixed at k0 = 0; the dynamics are time-invariant"]
    if sys.model is not ModelKind.NETWORK:
        warnings.append(f"model is {sys.model.value}, ultimate boundedness is stated for the network model")
    if not f.radially_unbounded:
        warnings.append(f"nonlinearity {f.label} is not radially unbounded; hypothesis not met")
    l, n = sys.l, sys.n
    starts = _initial_histories((l + 1) * n, float(D), n_random, seed).reshape(-1, l + 1, n)
    R = starts.shape[0]
    inputs = _inputs_for(sys, inp, horizon)
    if signal.kind == "adversarial":
        runs = [simulate(sys, f, signal, inp, h, horizon, cert) for h in starts]
        states = np.array([t.states for t in runs])
        modes = np.array([t.modes for t in runs])
    else:
        modes = np.tile(signal.modes(horizon + 1, sys.N), (R, 1))
        states = simulate_batch(sys, f, modes[:, :horizon], np.broadcast_to(inputs, (R, horizon, n)), starts)
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.linalg.norm(states[:, l:], axis=2)  # (R, H+1)
    if not np.all(np.isfinite(norms)) or norms.max() > DIVERGENCE_NORM:
        warnings.append(f"trajectory norm exceeded {DIVERGENCE_NORM:g}; run aborted as divergent")
        return UltimateBoundednessReport(float(D), float("inf"), int(horizon), None, None, True, R, int(horizon), warnings)

    tail_start = horizon - int(TAIL_FRACTION * horizon)
    R_emp = float(norms[:, tail_start:].max())
    above = norms > R_emp * (1 + 1e-9)
    last_above = np.where(above.any(axis=1), horizon - np.argmax(above[:, ::-1], axis=1), 0)
    k_tilde = int(last_above.max())

    beta1 = beta2 = None
    if cert is not None:
        dV_all, S_all = [], []
        g_is_raw = cert.functional_form in RAW_STATE_FORMS
        for r in range(R):
            V = functional_values(cert, states[r], modes[r], f)
            g = states[r] if g_is_raw else f(states[r])
            S_all.append(_window_sums(g, l, horizon))
            dV_all.append(np.diff(V))
        S = np.concatenate(S_all)
        dV = np.concatenate(dV_all)
        design = np.column_stack([-S, np.ones_like(S)])
        (beta1, beta2), *_ = np.linalg.lstsq(design, dV, rcond=None)
        beta1, beta2 = float(beta1), float(beta2)
    return UltimateBoundednessReport(float(D), R_emp, k_tilde, beta1, beta2, False, R, int(horizon), warnings)


def trajectory_rows(traj):
    n = traj.states.shape[1]
    header = ["k", "sigma"] + [f"x{i + 1}" for i in range(n)] + ["V"]
    rows = [header]
    for k in range(traj.horizon + 1):
        V = "" if traj.V_values is None else repr(float(traj.V_values[k]))
        rows.append([str(k), str(int(traj.modes[k]) + 1)] + [repr(float(v)) for v in traj.x(k)] + [V])
    return rows


def write_trajectory_csv(traj, stream):
    """CSV with columns k, sigma (one-based), x1..xn, V; LF line endings."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerows(trajectory_rows(traj))
