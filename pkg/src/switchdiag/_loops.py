"""Loop-form kernels, compiled with numba when available.

Every function here has a vectorized twin in ``_vectorized`` with the same
signature and the same status conventions. ``kernels`` picks one of them.
"""

import math

import numpy as np

from ._accel import njit

# status codes shared with _vectorized
OK = 0
NOT_CONVERGED = 1
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

# nonlinearity codes
F_IDENTITY = 0
F_TANH = 1
F_SATURATION = 2
F_RATIONAL = 3
F_SCALED = 4

# model codes
MODEL_PERSIDSKII = 0
MODEL_FILTER = 1
MODEL_NETWORK = 2


@njit
def component_labels(A):
    """Strongly connected components of the digraph of A (edge i->j iff a_ij > 0).

    Returns an int array mapping each index to the smallest index of its class.
    """
    n = A.shape[0]
    reach = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        reach[i, i] = True
        for j in range(n):
            if A[i, j] > 0.0:
                reach[i, j] = True
    for k in range(n):
        for i in range(n):
            if reach[i, k]:
                for j in range(n):
                    if reach[k, j]:
                        reach[i, j] = True
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = i
        for j in range(i):
            if reach[i, j] and reach[j, i]:
                labels[i] = labels[j]
                break
    return labels


# shifted power steps before switching to shifted inverse (Noda) iteration
WARMUP_STEPS = 30
MACHINE_EPS = 2.220446049250313e-16
TINY_NORMAL = 2.2250738585072014e-308


@njit
def converged(lo, hi, tol):
    """Bracket narrower than tol, or than the resolution of doubles at hi."""
    gap = hi - lo
    return gap < tol or gap <= 4.0 * MACHINE_EPS * abs(hi)


@njit
def _solve_shifted(sub, sigma, rhs):
    """Solve (sigma I - sub) x = rhs by Gaussian elimination with partial pivoting."""
    k = sub.shape[0]
    M = -sub.copy()
    for i in range(k):
        M[i, i] += sigma
    b = rhs.copy()
    for col in range(k):
        piv = col
        for r in range(col + 1, k):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if M[piv, col] == 0.0:
            return False, b
        if piv != col:
            for c in range(k):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, k):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for c in range(col, k):
                    M[r, c] -= f * M[col, c]
                b[r] -= f * b[col]
    for i in range(k - 1, -1, -1):
        acc = b[i]
        for c in range(i + 1, k):
            acc -= M[i, c] * b[c]
        b[i] = acc / M[i, i]
    for i in range(k):
        if not np.isfinite(b[i]):
            return False, b
    return True, b


@njit
def _irreducible_rho(A, idx, tol, max_iter):
    k = idx.shape[0]
    if k == 1:
        v = A[idx[0], idx[0]]
        return OK, v, v, v
    sub = np.empty((k, k))
    for a in range(k):
        for b in range(k):
            sub[a, b] = A[idx[a], idx[b]]
    v = np.ones(k)
    av = np.empty(k)
    # rho dominates every diagonal entry (1x1 principal submatrices); this
    # keeps the lower bound useful when Perron components leave the double range
    floor = 0.0
    for a in range(k):
        if sub[a, a] > floor:
            floor = sub[a, a]
    lo = 0.0
    hi = 0.0
    noda = True
    prev_gap = np.inf
    for it in range(max_iter):
        lo = np.inf
        hi = -np.inf
        for a in range(k):
            acc = 0.0
            for b in range(k):
                acc += sub[a, b] * v[b]
            av[a] = acc
            # a component held at the clamp is below the double range; its
            # ratio is biased low and carries no information
            if v[a] <= TINY_NORMAL:
                continue
            ratio = acc / v[a]
            if ratio < lo:
                lo = ratio
            if ratio > hi:
                hi = ratio
        if lo < floor:
            lo = floor
        if converged(lo, hi, tol):
            return OK, 0.5 * (lo + hi), lo, hi
        # the linear solve is accurate only normwise; once it stops shrinking
        # the bracket (tiny Perron components), plain power steps take over
        if noda and it > WARMUP_STEPS and hi - lo >= prev_gap:
            noda = False
        prev_gap = hi - lo
        # any shift >= rho keeps the Perron vector dominant; hi is the
        # smallest such value at hand
        w = av + hi * v
        if noda and it >= WARMUP_STEPS:
            ok, x = _solve_shifted(sub, hi, v)
            if not ok:
                ok, x = _solve_shifted(sub, hi * (1.0 + 4.0 * MACHINE_EPS) + 1e-300, v)
            if ok:
                x = np.abs(x)
                x = x / x.max()
                for a in range(k):
                    if x[a] < TINY_NORMAL:
                        x[a] = TINY_NORMAL
                # one shifted power step restores strict positivity
                w = sub @ x + hi * x
        top = w.max()
        for a in range(k):
            # clamped, not zero: any positive vector gives a valid enclosure
            v[a] = max(w[a] / top, TINY_NORMAL)
    return NOT_CONVERGED, 0.5 * (lo + hi), lo, hi


@njit
def spectral_radius(A, tol, max_iter):
    """Collatz-Wielandt enclosure of rho(A) for nonnegative A.

    Returns (status, estimate, lower, upper). The matrix is split into its
    irreducible diagonal blocks; on each block the shifted power iteration
    keeps the iterate strictly positive, so min/max of (Av)_i/v_i bracket the
    block's Perron root.
    """
    n = A.shape[0]
    labels = component_labels(A)
    status = OK
    best = 0.0
    best_lo = 0.0
    best_hi = 0.0
    for root in range(n):
        if labels[root] != root:
            continue
        count = 0
        for i in range(n):
            if labels[i] == root:
                count += 1
        idx = np.empty(count, dtype=np.int64)
        c = 0
        for i in range(n):
            if labels[i] == root:
                idx[c] = i
                c += 1
        st, val, lo, hi = _irreducible_rho(A, idx, tol, max_iter)
        if st != OK:
            status = st
        if val > best:
            best = val
        if lo > best_lo:
            best_lo = lo
        if hi > best_hi:
            best_hi = hi
    return status, best, best_lo, best_hi


@njit
def row_selection_rhos(members, tol, max_iter):
    """Spectral radius of every row selection, in lexicographic order.

    Selection index q encodes the assignment base K with row 0 as the most
    significant digit.
    """
    K = members.shape[0]
    n = members.shape[1]
    count = K**n
    rhos = np.empty(count)
    status = OK
    M = np.empty((n, n))
    for q in range(count):
        rem = q
        for i in range(n - 1, -1, -1):
            sel = rem % K
            rem //= K
            for j in range(n):
                M[i, j] = members[sel, i, j]
        st, val, lo, hi = spectral_radius(M, tol, max_iter)
        if st != OK:
            status = st
        rhos[q] = val
    return status, rhos


@njit
def jacobi_max_eigenvalue(S, max_sweeps):
    """Largest eigenvalue of symmetric S by cyclic Jacobi rotations."""
    n = S.shape[0]
    a = S.copy()
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    if total == 0.0:
        return 0.0
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off <= 1e-30 * total:
            break
        for p in range(n):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    # theta would overflow; tan of the angle is apq / diff
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    best = a[0, 0]
    for i in range(1, n):
        if a[i, i] > best:
            best = a[i, i]
    return best


# reduced-cost and pivot-element tolerance; smaller pivots amplify rounding
# until the tableau no longer describes the original constraints
LP_TOL = 1e-9
# tableau rebuilds from the original rows before an LP verdict is trusted
REFINE_ROUNDS = 4
# non-improving pivots before the leaving rule reverts to Bland's
STALL_PIVOTS = 50


@njit
def _pivot(T, basis, row, col):
    piv = T[row, col]
    ncol = T.shape[1]
    for j in range(ncol):
        T[row, j] /= piv
    for i in range(T.shape[0]):
        if i != row:
            f = T[i, col]
            if f != 0.0:
                for j in range(ncol):
                    T[i, j] -= f * T[row, j]
    basis[row] = col


@njit
def _bland(T, basis, n_allowed, max_iter, eps):
    """Minimize the objective in the last tableau row. Returns (status, pivots).

    Entering column by Bland's smallest-index rule. The leaving row comes from
    a Harris two-pass ratio test (largest pivot among near-minimal ratios)
    until the objective stalls for STALL_PIVOTS pivots; from then on ties go
    to the smallest basic index, which restores Bland's anti-cycling rule.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    stall = 0
    last = T[m, rhs]
    for it in range(max_iter):
        col = -1
        for j in range(n_allowed):
            if T[m, j] < -eps:
                col = j
                break
        if col < 0:
            return OK, it
        row = -1
        if stall < STALL_PIVOTS:
            bound = np.inf
            for i in range(m):
                if T[i, col] > eps:
                    r = (max(T[i, rhs], 0.0) + eps) / T[i, col]
                    if r < bound:
                        bound = r
            for i in range(m):
                a = T[i, col]
                if a > eps and max(T[i, rhs], 0.0) / a <= bound:
                    if row < 0 or a > T[row, col] or (a == T[row, col] and basis[i] < basis[row]):
                        row = i
        else:
            best = np.inf
            for i in range(m):
                if T[i, col] > eps:
                    # rhs entries that drifted below zero count as degenerate
                    ratio = max(T[i, rhs], 0.0) / T[i, col]
                    if row < 0:
                        best = ratio
                        row = i
                        continue
                    band = 1e-12 * max(1.0, abs(best))
                    if ratio < best - band:
                        best = ratio
                        row = i
                    elif ratio <= best + band and basis[i] < basis[row]:
                        row = i
        if row < 0:
            return UNBOUNDED, it
        _pivot(T, basis, row, col)
        if T[m, rhs] > last + eps:
            stall = 0
        else:
            stall += 1
        last = T[m, rhs]
    return ITERATION_LIMIT, max_iter


@njit
def _gauss_solve(M, R):
    """Solve M X = R by Gaussian elimination with partial pivoting."""
    k = M.shape[0]
    p = R.shape[1]
    M = M.copy()
    X = R.copy()
    for col in range(k):
        piv = col
        for r in range(col + 1, k):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if M[piv, col] == 0.0:
            return False, X
        if piv != col:
            for c in range(k):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            for c in range(p):
                tmp = X[col, c]
                X[col, c] = X[piv, c]
                X[piv, c] = tmp
        for r in range(col + 1, k):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for c in range(col, k):
                    M[r, c] -= f * M[col, c]
                for c in range(p):
                    X[r, c] -= f * X[col, c]
    for i in range(k - 1, -1, -1):
        for c in range(p):
            acc = X[i, c]
            for j in range(i + 1, k):
                acc -= M[i, j] * X[j, c]
            X[i, c] = acc / M[i, i]
    for i in range(k):
        for c in range(p):
            if not np.isfinite(X[i, c]):
                return False, X
    return True, X


@njit
def _rebuild(T, basis, T0):
    m = T0.shape[0]
    Bm = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            Bm[i, j] = T0[i, basis[j]]
    ok, X = _gauss_solve(Bm, T0)
    if ok:
        T[:m] = X
    return ok


@njit
def _objective_row(T, basis, cost):
    m = T.shape[0] - 1
    ncol = T.shape[1]
    for j in range(ncol - 1):
        T[m, j] = -cost[j]
    T[m, ncol - 1] = 0.0
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            for j in range(ncol):
                T[m, j] += cb * T[i, j]


@njit
def _solve_phase(T, basis, T0, cost, n_allowed, max_iter):
    """Bland pivoting with reinversion from the original rows after each stop."""
    m = T.shape[0] - 1
    used = 0
    st = OK
    for _ in range(REFINE_ROUNDS):
        st, it = _bland(T, basis, n_allowed, max_iter - used, LP_TOL)
        used += it
        if st == ITERATION_LIMIT or not _rebuild(T, basis, T0):
            return st
        _objective_row(T, basis, cost)
        col = -1
        for j in range(n_allowed):
            if T[m, j] < -LP_TOL:
                col = j
                break
        if col < 0:
            return OK
        if st == UNBOUNDED:
            blocked = True
            for i in range(m):
                if T[i, col] > LP_TOL:
                    blocked = False
                    break
            if blocked:
                return UNBOUNDED
    return st


@njit
def simplex(c, A, b, max_iter):
    """Dense two-phase simplex (Bland entering rule, Harris ratio test).

    maximize c @ x  subject to  A @ x <= b,  x >= 0.
    Returns (status, x, objective).
    """
    m, n = A.shape
    k = 0
    for i in range(m):
        if b[i] < 0.0:
            k += 1
    ncol = n + m + k + 1
    rhs = ncol - 1
    T = np.zeros((m + 1, ncol))
    basis = np.empty(m, dtype=np.int64)
    art = 0
    for i in range(m):
        if b[i] >= 0.0:
            for j in range(n):
                T[i, j] = A[i, j]
            T[i, n + i] = 1.0
            T[i, rhs] = b[i]
            basis[i] = n + i
        else:
            for j in range(n):
                T[i, j] = -A[i, j]
            T[i, n + i] = -1.0
            T[i, n + m + art] = 1.0
            T[i, rhs] = -b[i]
            basis[i] = n + m + art
            art += 1
    T0 = T[:m].copy()
    x = np.zeros(n)
    scale = 1.0
    for i in range(m):
        if abs(b[i]) > scale:
            scale = abs(b[i])

    cost = np.zeros(ncol - 1)
    if k > 0:
        for j in range(n + m, n + m + k):
            cost[j] = -1.0
        _objective_row(T, basis, cost)
        st = _solve_phase(T, basis, T0, cost, n + m + k, max_iter)
        if st == ITERATION_LIMIT:
            return ITERATION_LIMIT, x, 0.0
        if -T[m, rhs] > 1e-9 * scale:
            return INFEASIBLE, x, 0.0
        # drive zero-level artificials out of the basis
        for i in range(m):
            if basis[i] >= n + m:
                for j in range(n + m):
                    if abs(T[i, j]) > 1e-9:
                        _pivot(T, basis, i, j)
                        break

    for j in range(ncol - 1):
        cost[j] = 0.0
    for j in range(n):
        cost[j] = c[j]
    _objective_row(T, basis, cost)
    st = _solve_phase(T, basis, T0, cost, n + m, max_iter)
    if st != OK:
        return st, x, 0.0
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = max(T[i, rhs], 0.0)
    obj = 0.0
    for j in range(n):
        obj += c[j] * x[j]
    return OK, x, obj


@njit
def _apply_f(z, kind, param):
    if kind == F_IDENTITY:
        return z
    if kind == F_TANH:
        return math.tanh(z)
    if kind == F_SATURATION:
        if z > param:
            return param
        if z < -param:
            return -param
        return z
    if kind == F_RATIONAL:
        return z / (1.0 + abs(z))
    return param * z


@njit
def simulate_batch(A, B, model, fkind, fparam, modes, inputs, init):
    """Iterate R independent runs.

    A: (N, n, n); B: (l, N, n, n) with B[m-1, s] the block acting on x(k-m);
    modes: (R, H) zero-based; inputs: (R, H, n); init: (R, l+1, n) with
    init[:, j] = x(-j). Returns states (R, H+l+1, n) in chronological order,
    states[:, l + k] = x(k).
    """
    R = init.shape[0]
    l = B.shape[0]
    n = A.shape[1]
    H = modes.shape[1]
    out = np.empty((R, H + l + 1, n))
    fx = np.empty((H + l + 1, n))
    nxt = np.empty(n)
    for r in range(R):
        for j in range(l + 1):
            for i in range(n):
                out[r, l - j, i] = init[r, j, i]
        for t in range(l + 1):
            for i in range(n):
                fx[t, i] = _apply_f(out[r, t, i], fkind, fparam)
        for k in range(H):
            s = modes[r, k]
            cur = l + k
            src = out[r] if model == MODEL_FILTER else fx
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[s, i, j] * src[cur, j]
                for m in range(l):
                    for j in range(n):
                        acc += B[m, s, i, j] * src[cur - m - 1, j]
                nxt[i] = acc
            for i in range(n):
                if model == MODEL_FILTER:
                    out[r, cur + 1, i] = _apply_f(nxt[i], fkind, fparam)
                elif model == MODEL_NETWORK:
                    out[r, cur + 1, i] = nxt[i] + inputs[r, k, i]
                else:
                    out[r, cur + 1, i] = nxt[i]
                fx[cur + 1, i] = _apply_f(out[r, cur + 1, i], fkind, fparam)
    return out
