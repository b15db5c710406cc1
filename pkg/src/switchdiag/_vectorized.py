"""Pure-numpy twins of the loop kernels in ``_loops``.

Same signatures, same status codes. Loops over iterations remain in Python,
but each iteration works on whole rows, matrices or batches at once.
"""

import numpy as np

from ._loops import (
    F_IDENTITY,
    F_RATIONAL,
    F_SATURATION,
    F_SCALED,
    F_TANH,
    INFEASIBLE,
    ITERATION_LIMIT,
    LP_TOL,
    MACHINE_EPS,
    MODEL_FILTER,
    MODEL_NETWORK,
    NOT_CONVERGED,
    OK,
    REFINE_ROUNDS,
    STALL_PIVOTS,
    TINY_NORMAL,
    UNBOUNDED,
    WARMUP_STEPS,
)


def component_labels(A):
    n = A.shape[0]
    reach = (A > 0) | np.eye(n, dtype=bool)
    steps = 1
    while steps < n:
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        steps *= 2
    mutual = reach & reach.T
    # first True in each row is the smallest member of the class
    return np.argmax(mutual, axis=1).astype(np.int64)


def converged(lo, hi, tol):
    gap = hi - lo
    return gap < tol or gap <= 4.0 * MACHINE_EPS * abs(hi)


def _solve_shifted(sub, sigma, rhs):
    try:
        x = np.linalg.solve(sigma * np.eye(sub.shape[0]) - sub, rhs)
    except np.linalg.LinAlgError:
        return False, rhs
    return bool(np.all(np.isfinite(x))), x


def _irreducible_rho(sub, tol, max_iter):
    k = sub.shape[0]
    if k == 1:
        v = float(sub[0, 0])
        return OK, v, v, v
    v = np.ones(k)
    # rho dominates every diagonal entry; see the loop kernel
    floor = float(sub.diagonal().max())
    lo = hi = 0.0
    noda = True
    prev_gap = np.inf
    for it in range(max_iter):
        av = sub @ v
        # components held at the clamp are below the double range; skip them
        live = v > TINY_NORMAL
        ratios = av[live] / v[live]
        lo, hi = max(float(ratios.min()), floor), float(ratios.max())
        if converged(lo, hi, tol):
            return OK, 0.5 * (lo + hi), lo, hi
        if noda and it > WARMUP_STEPS and hi - lo >= prev_gap:
            noda = False
        prev_gap = hi - lo
        # shift by the current upper bound (>= rho)
        w = av + hi * v
        if noda and it >= WARMUP_STEPS:
            ok, x = _solve_shifted(sub, hi, v)
            if not ok:
                ok, x = _solve_shifted(sub, hi * (1.0 + 4.0 * MACHINE_EPS) + 1e-300, v)
            if ok:
                x = np.abs(x)
                x = np.maximum(x / x.max(), TINY_NORMAL)
                w = sub @ x + hi * x
        v = np.maximum(w / w.max(), TINY_NORMAL)
    return NOT_CONVERGED, 0.5 * (lo + hi), lo, hi


def spectral_radius(A, tol, max_iter):
    labels = component_labels(A)
    status, best, best_lo, best_hi = OK, 0.0, 0.0, 0.0
    for root in np.unique(labels):
        idx = np.flatnonzero(labels == root)
        st, val, lo, hi = _irreducible_rho(A[np.ix_(idx, idx)], tol, max_iter)
        if st != OK:
            status = st
        best = max(best, val)
        best_lo = max(best_lo, lo)
        best_hi = max(best_hi, hi)
    return status, best, best_lo, best_hi


def selection_matrices(members):
    K, n, _ = members.shape
    assign = np.stack(np.unravel_index(np.arange(K**n), (K,) * n), axis=1)
    return members[assign, np.arange(n)[None, :], :]


_BATCH_ITER = 5000


def row_selection_rhos(members, tol, max_iter):
    mats = selection_matrices(members)
    count = mats.shape[0]
    rhos = np.zeros(count)
    v = np.ones(mats.shape[:2])
    pending = np.flatnonzero(mats.sum(axis=2).max(axis=1) > 0)
    stuck = []
    for _ in range(min(max_iter, _BATCH_ITER)):
        # a zero coordinate means the iterate left the positive cone; such
        # selections are reducible and go to the fallback below
        zero = (v[pending] <= 0).any(axis=1)
        if zero.any():
            stuck.append(pending[zero])
            pending = pending[~zero]
        if pending.size == 0:
            break
        sub = mats[pending]
        vp = v[pending]
        av = np.einsum("bij,bj->bi", sub, vp)
        ratios = av / vp
        lo = ratios.min(axis=1)
        hi = ratios.max(axis=1)
        done = (hi - lo < tol) | (hi - lo <= 4.0 * MACHINE_EPS * np.abs(hi))
        rhos[pending[done]] = 0.5 * (lo[done] + hi[done])
        w = av + hi[:, None] * vp
        v[pending] = w / w.max(axis=1, keepdims=True)
        pending = pending[~done]
    # reducible or slow selections go through the block decomposition
    status = OK
    for q in np.concatenate([pending, *stuck]):
        st, val, _, _ = spectral_radius(mats[q], tol, max_iter)
        if st != OK:
            status = st
        rhos[q] = val
    return status, rhos


def jacobi_max_eigenvalue(S, max_sweeps):
    a = np.array(S, dtype=float, copy=True)
    n = a.shape[0]
    total = float(np.sum(a * a))
    if total == 0.0:
        return 0.0
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        if float(np.sum(a[iu] ** 2)) <= 1e-30 * total:
            break
        for p, q in zip(*iu):
            apq = a[p, q]
            if apq == 0.0:
                continue
            diff = a[q, q] - a[p, p]
            if abs(apq) < 1e-150 * abs(diff):
                # tan of the rotation angle is apq / diff to full precision here
                t = apq / diff
            else:
                theta = diff / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            colp = a[:, p].copy()
            colq = a[:, q].copy()
            a[:, p] = c * colp - s * colq
            a[:, q] = s * colp + c * colq
            rowp = a[p, :].copy()
            rowq = a[q, :].copy()
            a[p, :] = c * rowp - s * rowq
            a[q, :] = s * rowp + c * rowq
            a[p, q] = a[q, p] = 0.0
    return float(np.max(np.diag(a)))


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    f = T[:, col].copy()
    f[row] = 0.0
    T -= np.outer(f, T[row])
    basis[row] = col


def _bland(T, basis, n_allowed, max_iter, eps):
    m = T.shape[0] - 1
    stall = 0
    last = T[m, -1]
    for it in range(max_iter):
        neg = np.flatnonzero(T[m, :n_allowed] < -eps)
        if neg.size == 0:
            return OK, it
        col = neg[0]
        colv = T[:m, col]
        cand = np.flatnonzero(colv > eps)
        if cand.size == 0:
            return UNBOUNDED, it
        rhs = np.maximum(T[cand, -1], 0.0)
        if stall < STALL_PIVOTS:
            # Harris two-pass: relaxed bound, then the largest pivot under it
            bound = ((rhs + eps) / colv[cand]).min()
            ok = cand[rhs / colv[cand] <= bound]
            piv = T[ok, col]
            tied = ok[piv >= piv.max()]
        else:
            ratios = rhs / colv[cand]
            best = ratios.min()
            tied = cand[ratios <= best + 1e-12 * max(1.0, best)]
        row = tied[np.argmin(basis[tied])]
        _pivot(T, basis, row, col)
        stall = 0 if T[m, -1] > last + eps else stall + 1
        last = T[m, -1]
    return ITERATION_LIMIT, max_iter


def _rebuild(T, basis, T0):
    """Recompute the constraint rows from the original rows for the current basis."""
    try:
        X = np.linalg.solve(T0[:, basis], T0)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(X)):
        return False
    T[:-1] = X
    return True


def _objective_row(T, basis, cost):
    """Reduced costs of ``maximize cost @ x`` for the current basis."""
    cb = cost[basis]
    T[-1, :-1] = cb @ T[:-1, :-1] - cost
    T[-1, -1] = cb @ T[:-1, -1]


def _solve_phase(T, basis, T0, cost, n_allowed, max_iter):
    """Bland pivoting with reinversion: after each stop the tableau is rebuilt
    from the original rows, and pivoting resumes if the stop was an artefact
    of accumulated rounding."""
    used = 0
    st = OK
    for _ in range(REFINE_ROUNDS):
        st, it = _bland(T, basis, n_allowed, max_iter - used, LP_TOL)
        used += it
        if st == ITERATION_LIMIT or not _rebuild(T, basis, T0):
            return st
        _objective_row(T, basis, cost)
        neg = np.flatnonzero(T[-1, :n_allowed] < -LP_TOL)
        if neg.size == 0:
            return OK
        if st == UNBOUNDED and np.all(T[:-1, neg[0]] <= LP_TOL):
            return UNBOUNDED
    return st


def simplex(c, A, b, max_iter):
    m, n = A.shape
    neg = b < 0
    k = int(neg.sum())
    ncol = n + m + k + 1
    T = np.zeros((m + 1, ncol))
    sign = np.where(neg, -1.0, 1.0)
    T[:m, :n] = A * sign[:, None]
    T[np.arange(m), n + np.arange(m)] = sign
    T[:m, -1] = b * sign
    basis = n + np.arange(m)
    art_rows = np.flatnonzero(neg)
    T[art_rows, n + m + np.arange(k)] = 1.0
    basis[art_rows] = n + m + np.arange(k)
    T0 = T[:m].copy()
    x = np.zeros(n)
    scale = max(1.0, float(np.abs(b).max())) if m else 1.0

    if k > 0:
        cost = np.zeros(ncol - 1)
        cost[n + m :] = -1.0
        _objective_row(T, basis, cost)
        st = _solve_phase(T, basis, T0, cost, n + m + k, max_iter)
        if st == ITERATION_LIMIT:
            return ITERATION_LIMIT, x, 0.0
        if -T[m, -1] > 1e-9 * scale:
            return INFEASIBLE, x, 0.0
        for i in np.flatnonzero(basis >= n + m):
            nz = np.flatnonzero(np.abs(T[i, : n + m]) > 1e-9)
            if nz.size:
                _pivot(T, basis, i, nz[0])

    cost = np.zeros(ncol - 1)
    cost[:n] = c
    _objective_row(T, basis, cost)
    st = _solve_phase(T, basis, T0, cost, n + m, max_iter)
    if st != OK:
        return st, x, 0.0
    in_x = basis < n
    x[basis[in_x]] = np.maximum(T[:m, -1][in_x], 0.0)
    return OK, x, float(c @ x)


def apply_f(z, kind, param):
    if kind == F_IDENTITY:
        return z
    if kind == F_TANH:
        return np.tanh(z)
    if kind == F_SATURATION:
        return np.clip(z, -param, param)
    if kind == F_RATIONAL:
        return z / (1.0 + np.abs(z))
    if kind == F_SCALED:
        return param * z
    raise ValueError(f"unknown nonlinearity code {kind}")


def simulate_batch(A, B, model, fkind, fparam, modes, inputs, init):
    R = init.shape[0]
    l = B.shape[0]
    n = A.shape[1]
    H = modes.shape[1]
    out = np.empty((R, H + l + 1, n))
    out[:, : l + 1] = init[:, ::-1]
    fx = np.empty_like(out)
    fx[:, : l + 1] = apply_f(out[:, : l + 1], fkind, fparam)
    src = out if model == MODEL_FILTER else fx
    for k in range(H):
        s = modes[:, k]
        cur = l + k
        nxt = np.einsum("rij,rj->ri", A[s], src[:, cur])
        for m in range(l):
            nxt += np.einsum("rij,rj->ri", B[m, s], src[:, cur - m - 1])
        if model == MODEL_FILTER:
            nxt = apply_f(nxt, fkind, fparam)
        elif model == MODEL_NETWORK:
            nxt = nxt + inputs[:, k]
        out[:, cur + 1] = nxt
        fx[:, cur + 1] = apply_f(nxt, fkind, fparam)
    return out
