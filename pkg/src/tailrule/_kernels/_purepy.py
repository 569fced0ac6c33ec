"""Reference numpy implementation of the two hot kernels.

The compiled backend (_core.pyx) mirrors this module function for function;
tests assert the two agree. Keep algorithmic changes in sync.

Kernel 1: solve_surrogate_subproblem minimizes

    (1/n) sum_i [c1_i s1(u_i) + c2_i s2(u_i)] - gw.w - gb*b + penalty,
    u_i = y_i (z_i.w + b)

over (w, b), where s1/s2 are the convex pieces of the smooth truncated loss,
c1, c2 >= 0, and penalty is (lam/2)||w||^2, lam*||w||_1, or (lam/2) w'Qw.
Method: accelerated proximal gradient with backtracking line search and a
monotone restart guard; stops when the first-order residual falls below
grad_tol.

Kernel 2: lasso_cd runs cyclic coordinate descent on

    (1/n) ||target - Phi beta||^2 + lam * sum_{k penalized} |beta_k|.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

PENALTY_L2 = 0
PENALTY_L1 = 1
PENALTY_QUAD = 2

_BACKTRACK_MAX = 60
_STEP_GROWTH = 1.25


def _s1(u, delta):
    return np.where(u <= 0.0, np.square(np.clip(1.0 + u / delta, 0.0, None)), 1.0 + 2.0 * u / delta)


def _s2(u, delta):
    return np.where(u <= delta, np.square(np.clip(u / delta, 0.0, None)), 2.0 * u / delta - 1.0)


def _ds1(u, delta):
    return np.where(u <= 0.0, 2.0 * np.clip(1.0 + u / delta, 0.0, None) / delta, 2.0 / delta)


def _ds2(u, delta):
    return 2.0 * np.clip(u, 0.0, delta) / (delta * delta)


def _loss_value(Z, y, c1, c2, delta, w, b):
    u = y * (Z @ w + b)
    n = Z.shape[0]
    return float(c1 @ _s1(u, delta) + c2 @ _s2(u, delta)) / n


def _loss_grad(Z, y, c1, c2, delta, w, b):
    n = Z.shape[0]
    u = y * (Z @ w + b)
    kappa = (c1 * _ds1(u, delta) + c2 * _ds2(u, delta)) * y
    gw = (Z.T @ kappa) / n
    gb = float(kappa.sum()) / n
    val = float(c1 @ _s1(u, delta) + c2 @ _s2(u, delta)) / n
    return val, gw, gb


def _smooth_value(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b):
    val = _loss_value(Z, y, c1, c2, delta, w, b) - float(gw @ w) - gb * b
    if kind == PENALTY_L2:
        val += 0.5 * lam * float(w @ w)
    elif kind == PENALTY_QUAD:
        val += 0.5 * lam * float(w @ (Q @ w))
    return val


def _smooth_value_grad(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b):
    val, dw, db = _loss_grad(Z, y, c1, c2, delta, w, b)
    val -= float(gw @ w) + gb * b
    dw = dw - gw
    db = db - gb
    if kind == PENALTY_L2:
        val += 0.5 * lam * float(w @ w)
        dw += lam * w
    elif kind == PENALTY_QUAD:
        Qw = Q @ w
        val += 0.5 * lam * float(w @ Qw)
        dw += lam * Qw
    return val, dw, db


def _nonsmooth(lam, kind, w):
    if kind == PENALTY_L1:
        return lam * float(np.abs(w).sum())
    return 0.0


def _prox(lam, kind, w, step):
    if kind == PENALTY_L1:
        t = step * lam
        return np.sign(w) * np.clip(np.abs(w) - t, 0.0, None)
    return w


def _kkt_residual(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b):
    _, dw, db = _smooth_value_grad(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b)
    if kind == PENALTY_L1:
        active = np.abs(dw + lam * np.sign(w))
        inactive = np.clip(np.abs(dw) - lam, 0.0, None)
        res_w = np.where(w != 0.0, active, inactive)
        return max(float(res_w.max(initial=0.0)), abs(db))
    return max(float(np.abs(dw).max(initial=0.0)), abs(db))


def solve_surrogate_subproblem(
    Z,
    y,
    c1,
    c2,
    gw,
    gb,
    lam,
    penalty_kind,
    Q,
    delta,
    w0,
    b0,
    grad_tol,
    max_iter,
):
    """Returns (w, b, iterations, converged, residual)."""
    Z = np.ascontiguousarray(Z, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    c1 = np.ascontiguousarray(c1, dtype=float)
    c2 = np.ascontiguousarray(c2, dtype=float)
    gw = np.ascontiguousarray(gw, dtype=float)
    n, m = Z.shape
    kind = int(penalty_kind)
    if kind == PENALTY_QUAD:
        Q = np.ascontiguousarray(Q, dtype=float)

    w = np.array(w0, dtype=float, copy=True)
    b = float(b0)

    # Gradient magnitudes scale with the loss coefficients, so the stopping
    # tolerance must too; an absolute threshold sits below the roundoff
    # floor once the coefficients are large.
    row_amax = np.max(np.abs(Z), axis=1, initial=0.0) + 1.0
    gscale = (2.0 / delta) * float((c1 + c2) @ row_amax) / n
    tol = grad_tol * (1.0 + gscale)

    res = _kkt_residual(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b)
    if res <= tol:
        return w, b, 0, True, res

    # Conservative curvature bound for the first step; backtracking plus
    # step growth adapts from there.
    row_norm = np.sum(Z * Z, axis=1) + 1.0
    L = (2.0 / (delta * delta)) * float((c1 + c2) @ row_norm) / n
    if kind == PENALTY_L2:
        L += lam
    elif kind == PENALTY_QUAD:
        L += lam * float(np.max(np.sum(np.abs(Q), axis=1)))
    step = 1.0 / max(L, 1e-12)

    w_prev = w.copy()
    b_prev = b
    phi_x = _smooth_value(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b) + _nonsmooth(lam, kind, w)
    t_mom = 1.0
    converged = False
    iterations = 0

    for _ in range(int(max_iter)):
        iterations += 1
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        mom = (t_mom - 1.0) / t_next
        yw = w + mom * (w - w_prev)
        yb = b + mom * (b - b_prev)

        def backtrack(base_w, base_b):
            nonlocal step
            psi, dw, db = _smooth_value_grad(
                Z, y, c1, c2, gw, gb, lam, kind, Q, delta, base_w, base_b
            )
            for _bt in range(_BACKTRACK_MAX):
                cand_w = _prox(lam, kind, base_w - step * dw, step)
                cand_b = base_b - step * db
                dwv = cand_w - base_w
                dbv = cand_b - base_b
                quad = (
                    psi
                    + float(dw @ dwv)
                    + db * dbv
                    + (float(dwv @ dwv) + dbv * dbv) / (2.0 * step)
                )
                psi_c = _smooth_value(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, cand_w, cand_b)
                if psi_c <= quad + 1e-12 * (1.0 + abs(quad)):
                    return cand_w, cand_b, psi_c, True
                step *= 0.5
            return base_w, base_b, psi, False

        cand_w, cand_b, psi_c, ok = backtrack(yw, yb)
        phi_c = psi_c + _nonsmooth(lam, kind, cand_w)
        if not ok or phi_c > phi_x + 1e-12 * (1.0 + abs(phi_x)):
            # Momentum overshot (or the line search stalled): restart from
            # the last accepted point, where the descent lemma guarantees
            # non-increase.
            t_next = 1.0
            cand_w, cand_b, psi_c, ok = backtrack(w, b)
            phi_c = psi_c + _nonsmooth(lam, kind, cand_w)
            if not ok:
                break
        step_used = step
        w_prev, b_prev = w, b
        w, b = cand_w, cand_b
        phi_x = phi_c
        t_mom = t_next
        step = step_used * _STEP_GROWTH

        # Cheap stationarity estimate from the prox step; confirm with the
        # exact first-order residual only when it looks converged.
        gap = max(float(np.abs(w - w_prev).max(initial=0.0)), abs(b - b_prev)) / step_used
        if gap <= 4.0 * tol or gap == 0.0:
            res = _kkt_residual(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b)
            if res <= tol:
                converged = True
                break

    if not converged:
        res = _kkt_residual(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b)
        converged = res <= tol
    return w, b, iterations, converged, res


def lasso_cd(Phi, target, lam, penalized, beta0, tol, max_sweeps):
    """Returns (beta, sweeps, converged, last_max_step)."""
    Phi = np.ascontiguousarray(Phi, dtype=float)
    target = np.ascontiguousarray(target, dtype=float)
    beta = np.array(beta0, dtype=float, copy=True)
    pen = np.ascontiguousarray(penalized, dtype=np.uint8)
    n, d = Phi.shape
    col_sq = 2.0 * np.sum(Phi * Phi, axis=0) / n
    resid = target - Phi @ beta
    converged = False
    sweeps = 0
    max_step = np.inf
    for _ in range(int(max_sweeps)):
        sweeps += 1
        max_step = 0.0
        for k in range(d):
            a = col_sq[k]
            if a == 0.0:
                if pen[k] and beta[k] != 0.0:
                    resid += Phi[:, k] * beta[k]
                    beta[k] = 0.0
                continue
            b_old = beta[k]
            rho = 2.0 * float(Phi[:, k] @ resid) / n + a * b_old
            if pen[k]:
                b_new = np.sign(rho) * max(abs(rho) - lam, 0.0) / a
            else:
                b_new = rho / a
            if b_new != b_old:
                resid -= Phi[:, k] * (b_new - b_old)
                beta[k] = b_new
                step = abs(b_new - b_old)
                if step > max_step:
                    max_step = step
        if max_step <= tol:
            converged = True
            break
    return beta, sweeps, converged, float(max_step)
