# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled backend for the two hot kernels.

Mirrors _purepy.py exactly: same objective, same accelerated proximal
gradient with backtracking and monotone restart, same stopping rules, same
return shapes. Keep the two in sync; the test suite asserts their agreement.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def _carr(a, ndim=1):
    """Contiguous float64 copy-if-needed that is always writable."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if not out.flags.writeable:
        out = out.copy()
    return out

BACKEND = "compiled"

cdef enum:
    _L2 = 0
    _L1 = 1
    _QUAD = 2

PENALTY_L2 = _L2
PENALTY_L1 = _L1
PENALTY_QUAD = _QUAD

cdef enum:
    BACKTRACK_MAX = 60

cdef double STEP_GROWTH = 1.25


cdef inline double _s1(double u, double delta) noexcept nogil:
    cdef double t
    if u <= 0.0:
        t = 1.0 + u / delta
        if t < 0.0:
            t = 0.0
        return t * t
    return 1.0 + 2.0 * u / delta


cdef inline double _s2(double u, double delta) noexcept nogil:
    cdef double t = u / delta
    if u <= delta:
        if t < 0.0:
            t = 0.0
        return t * t
    return 2.0 * t - 1.0


cdef inline double _ds1(double u, double delta) noexcept nogil:
    cdef double t
    if u <= 0.0:
        t = 1.0 + u / delta
        if t < 0.0:
            t = 0.0
        return 2.0 * t / delta
    return 2.0 / delta


cdef inline double _ds2(double u, double delta) noexcept nogil:
    cdef double t = u
    if t < 0.0:
        t = 0.0
    elif t > delta:
        t = delta
    return 2.0 * t / (delta * delta)


cdef double _loss_and_margins(double[:, ::1] Z, double[::1] y, double[::1] c1, double[::1] c2,
                              double delta, double[::1] w, double b, double[::1] u) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, acc = 0.0
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += Z[i, j] * w[j]
        u[i] = y[i] * (s + b)
        acc += c1[i] * _s1(u[i], delta) + c2[i] * _s2(u[i], delta)
    return acc / n


cdef double _smooth_value(double[:, ::1] Z, double[::1] y, double[::1] c1, double[::1] c2,
                          double[::1] gw, double gb, double lam, int kind, double[:, ::1] Q,
                          double delta, double[::1] w, double b, double[::1] u) noexcept nogil:
    cdef Py_ssize_t m = Z.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, s, qs
    acc = _loss_and_margins(Z, y, c1, c2, delta, w, b, u)
    s = 0.0
    for j in range(m):
        s += gw[j] * w[j]
    acc -= s + gb * b
    if kind == _L2:
        s = 0.0
        for j in range(m):
            s += w[j] * w[j]
        acc += 0.5 * lam * s
    elif kind == _QUAD:
        s = 0.0
        for i in range(m):
            qs = 0.0
            for j in range(m):
                qs += Q[i, j] * w[j]
            s += w[i] * qs
        acc += 0.5 * lam * s
    return acc


cdef double _smooth_value_grad(double[:, ::1] Z, double[::1] y, double[::1] c1, double[::1] c2,
                               double[::1] gw, double gb, double lam, int kind, double[:, ::1] Q,
                               double delta, double[::1] w, double b, double[::1] u,
                               double[::1] dw, double* db) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, kap, acc = 0.0, dbacc = 0.0, qs
    for j in range(m):
        dw[j] = 0.0
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += Z[i, j] * w[j]
        u[i] = y[i] * (s + b)
        acc += c1[i] * _s1(u[i], delta) + c2[i] * _s2(u[i], delta)
        kap = (c1[i] * _ds1(u[i], delta) + c2[i] * _ds2(u[i], delta)) * y[i]
        dbacc += kap
        for j in range(m):
            dw[j] += Z[i, j] * kap
    acc /= n
    dbacc /= n
    s = 0.0
    for j in range(m):
        dw[j] = dw[j] / n - gw[j]
        s += gw[j] * w[j]
    acc -= s + gb * b
    dbacc -= gb
    if kind == _L2:
        s = 0.0
        for j in range(m):
            s += w[j] * w[j]
            dw[j] += lam * w[j]
        acc += 0.5 * lam * s
    elif kind == _QUAD:
        s = 0.0
        for i in range(m):
            qs = 0.0
            for j in range(m):
                qs += Q[i, j] * w[j]
            s += w[i] * qs
            dw[i] += lam * qs
        acc += 0.5 * lam * s
    db[0] = dbacc
    return acc


cdef double _nonsmooth(double lam, int kind, double[::1] w) noexcept nogil:
    cdef Py_ssize_t j, m = w.shape[0]
    cdef double s = 0.0
    if kind == _L1:
        for j in range(m):
            s += fabs(w[j])
        return lam * s
    return 0.0


cdef void _prox(double lam, int kind, double[::1] src, double step, double[::1] out) noexcept nogil:
    cdef Py_ssize_t j, m = src.shape[0]
    cdef double t, v
    if kind == _L1:
        t = step * lam
        for j in range(m):
            v = src[j]
            if v > t:
                out[j] = v - t
            elif v < -t:
                out[j] = v + t
            else:
                out[j] = 0.0
    else:
        for j in range(m):
            out[j] = src[j]


cdef double _kkt_residual(double[:, ::1] Z, double[::1] y, double[::1] c1, double[::1] c2,
                          double[::1] gw, double gb, double lam, int kind, double[:, ::1] Q,
                          double delta, double[::1] w, double b,
                          double[::1] u, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t j, m = w.shape[0]
    cdef double db = 0.0, res = 0.0, v
    _smooth_value_grad(Z, y, c1, c2, gw, gb, lam, kind, Q, delta, w, b, u, dw, &db)
    if kind == _L1:
        for j in range(m):
            if w[j] != 0.0:
                v = fabs(dw[j] + (lam if w[j] > 0.0 else -lam))
            else:
                v = fabs(dw[j]) - lam
                if v < 0.0:
                    v = 0.0
            if v > res:
                res = v
    else:
        for j in range(m):
            v = fabs(dw[j])
            if v > res:
                res = v
    if fabs(db) > res:
        res = fabs(db)
    return res


def solve_surrogate_subproblem(Z, y, c1, c2, gw, gb, lam, penalty_kind, Q, delta,
                               w0, b0, grad_tol, max_iter):
    """Returns (w, b, iterations, converged, residual)."""
    cdef double[:, ::1] Zv = _carr(Z)
    cdef double[::1] yv = _carr(y)
    cdef double[::1] c1v = _carr(c1)
    cdef double[::1] c2v = _carr(c2)
    cdef double[::1] gwv = _carr(gw)
    cdef double gbv = float(gb)
    cdef double lamv = float(lam)
    cdef int kind = int(penalty_kind)
    cdef double[:, ::1] Qv
    if kind == _QUAD:
        Qv = _carr(Q)
    else:
        Qv = np.zeros((1, 1))
    cdef double deltav = float(delta)
    cdef double tol = float(grad_tol)
    cdef int it_max = int(max_iter)

    cdef Py_ssize_t n = Zv.shape[0], m = Zv.shape[1]
    cdef Py_ssize_t i, j

    w_arr = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    cdef double b = float(b0)

    # scratch
    cdef double[::1] u = np.empty(n)
    cdef double[::1] dw = np.empty(m)
    cdef double[::1] w_prev = np.empty(m)
    cdef double[::1] yw = np.empty(m)
    cdef double[::1] cand = np.empty(m)
    cdef double[::1] trial = np.empty(m)
    cdef double[::1] accepted = np.empty(m)

    # Gradient magnitudes scale with the loss coefficients, so the stopping
    # tolerance must too; an absolute threshold sits below the roundoff
    # floor once the coefficients are large.
    cdef double gscale = 0.0, ra
    for i in range(n):
        ra = 1.0
        for j in range(m):
            if fabs(Zv[i, j]) + 1.0 > ra:
                ra = fabs(Zv[i, j]) + 1.0
        gscale += (c1v[i] + c2v[i]) * ra
    gscale *= 2.0 / deltav / n
    tol = tol * (1.0 + gscale)

    cdef double res = _kkt_residual(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, w, b, u, dw)
    if res <= tol:
        return w_arr, b, 0, True, res

    cdef double L = 0.0, rn
    for i in range(n):
        rn = 1.0
        for j in range(m):
            rn += Zv[i, j] * Zv[i, j]
        L += (c1v[i] + c2v[i]) * rn
    L *= 2.0 / (deltav * deltav) / n
    cdef double rowsum, rowmax
    if kind == _L2:
        L += lamv
    elif kind == _QUAD:
        rowmax = 0.0
        for i in range(m):
            rowsum = 0.0
            for j in range(m):
                rowsum += fabs(Qv[i, j])
            if rowsum > rowmax:
                rowmax = rowsum
        L += lamv * rowmax
    cdef double step = 1.0 / (L if L > 1e-12 else 1e-12)

    for j in range(m):
        w_prev[j] = w[j]
    cdef double b_prev = b
    cdef double phi_x = _smooth_value(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, w, b, u) \
        + _nonsmooth(lamv, kind, w)
    cdef double t_mom = 1.0
    cdef bint converged = False
    cdef int iterations = 0

    cdef double t_next, mom, yb, psi, db, cand_b, quad, psi_c, phi_c
    cdef double dwv_j, dot, nrm, dbv, step_used, gap, v
    cdef bint ok, accepted_flag
    cdef int bt

    while iterations < it_max:
        iterations += 1
        t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_mom * t_mom))
        mom = (t_mom - 1.0) / t_next
        for j in range(m):
            yw[j] = w[j] + mom * (w[j] - w_prev[j])
        yb = b + mom * (b - b_prev)

        # backtracking from the extrapolated point
        psi = _smooth_value_grad(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, yw, yb, u, dw, &db)
        ok = False
        for bt in range(BACKTRACK_MAX):
            for j in range(m):
                trial[j] = yw[j] - step * dw[j]
            _prox(lamv, kind, trial, step, cand)
            cand_b = yb - step * db
            dot = 0.0
            nrm = 0.0
            for j in range(m):
                dwv_j = cand[j] - yw[j]
                dot += dw[j] * dwv_j
                nrm += dwv_j * dwv_j
            dbv = cand_b - yb
            quad = psi + dot + db * dbv + (nrm + dbv * dbv) / (2.0 * step)
            psi_c = _smooth_value(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, cand, cand_b, u)
            if psi_c <= quad + 1e-12 * (1.0 + fabs(quad)):
                ok = True
                break
            step *= 0.5
        phi_c = psi_c + _nonsmooth(lamv, kind, cand)

        if (not ok) or phi_c > phi_x + 1e-12 * (1.0 + fabs(phi_x)):
            # restart from the last accepted point
            t_next = 1.0
            psi = _smooth_value_grad(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, w, b, u, dw, &db)
            ok = False
            for bt in range(BACKTRACK_MAX):
                for j in range(m):
                    trial[j] = w[j] - step * dw[j]
                _prox(lamv, kind, trial, step, cand)
                cand_b = b - step * db
                dot = 0.0
                nrm = 0.0
                for j in range(m):
                    dwv_j = cand[j] - w[j]
                    dot += dw[j] * dwv_j
                    nrm += dwv_j * dwv_j
                dbv = cand_b - b
                quad = psi + dot + db * dbv + (nrm + dbv * dbv) / (2.0 * step)
                psi_c = _smooth_value(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, cand, cand_b, u)
                if psi_c <= quad + 1e-12 * (1.0 + fabs(quad)):
                    ok = True
                    break
                step *= 0.5
            phi_c = psi_c + _nonsmooth(lamv, kind, cand)
            if not ok:
                break

        step_used = step
        gap = 0.0
        for j in range(m):
            v = fabs(cand[j] - w[j])
            if v > gap:
                gap = v
            w_prev[j] = w[j]
            w[j] = cand[j]
        if fabs(cand_b - b) > gap:
            gap = fabs(cand_b - b)
        b_prev = b
        b = cand_b
        phi_x = phi_c
        t_mom = t_next
        step = step_used * STEP_GROWTH
        gap /= step_used

        if gap <= 4.0 * tol or gap == 0.0:
            res = _kkt_residual(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, w, b, u, dw)
            if res <= tol:
                converged = True
                break

    if not converged:
        res = _kkt_residual(Zv, yv, c1v, c2v, gwv, gbv, lamv, kind, Qv, deltav, w, b, u, dw)
        converged = res <= tol
    return w_arr, b, iterations, bool(converged), res


def lasso_cd(Phi, target, lam, penalized, beta0, tol, max_sweeps):
    """Returns (beta, sweeps, converged, last_max_step)."""
    cdef double[:, ::1] X = _carr(Phi)
    cdef double[::1] yv = _carr(target)
    beta_arr = np.array(beta0, dtype=np.float64, copy=True)
    cdef double[::1] beta = beta_arr
    pen_arr = np.ascontiguousarray(penalized, dtype=np.uint8)
    if not pen_arr.flags.writeable:
        pen_arr = pen_arr.copy()
    cdef unsigned char[::1] pen = pen_arr
    cdef double lamv = float(lam)
    cdef double tolv = float(tol)
    cdef int sweeps_max = int(max_sweeps)

    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, k
    cdef double[::1] col_sq = np.empty(d)
    cdef double[::1] resid = np.empty(n)
    cdef double s, a, b_old, rho, b_new, stepv, max_step
    cdef int sweeps = 0
    cdef bint converged = False

    for k in range(d):
        s = 0.0
        for i in range(n):
            s += X[i, k] * X[i, k]
        col_sq[k] = 2.0 * s / n
    for i in range(n):
        s = 0.0
        for k in range(d):
            s += X[i, k] * beta[k]
        resid[i] = yv[i] - s

    max_step = np.inf
    while sweeps < sweeps_max:
        sweeps += 1
        max_step = 0.0
        for k in range(d):
            a = col_sq[k]
            if a == 0.0:
                if pen[k] and beta[k] != 0.0:
                    for i in range(n):
                        resid[i] += X[i, k] * beta[k]
                    beta[k] = 0.0
                continue
            b_old = beta[k]
            s = 0.0
            for i in range(n):
                s += X[i, k] * resid[i]
            rho = 2.0 * s / n + a * b_old
            if pen[k]:
                if rho > lamv:
                    b_new = (rho - lamv) / a
                elif rho < -lamv:
                    b_new = (rho + lamv) / a
                else:
                    b_new = 0.0
            else:
                b_new = rho / a
            if b_new != b_old:
                for i in range(n):
                    resid[i] -= X[i, k] * (b_new - b_old)
                beta[k] = b_new
                stepv = fabs(b_new - b_old)
                if stepv > max_step:
                    max_step = stepv
        if max_step <= tolv:
            converged = True
            break
    return beta_arr, sweeps, bool(converged), float(max_step)
