# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled integration/adjoint kernels (Lobatto IIIC, two stages).

Operation-for-operation mirror of ``_pyfallback.py``; see that module for
the state conventions and the derivation of the Jacobians.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

from wolbactrl.errors import NewtonDivergence, PopulationCollapse

cnp.import_array()

DEF COLLAPSE_FLOOR = 1e-12


cdef inline int solve_n(double* a, double* b, int n) nogil:
    """In-place Gaussian elimination with partial pivoting, n <= 4."""
    cdef int i, j, k, piv
    cdef double best, factor, tmp
    for k in range(n):
        piv = k
        best = fabs(a[k * n + k])
        for i in range(k + 1, n):
            if fabs(a[i * n + k]) > best:
                best = fabs(a[i * n + k])
                piv = i
        if best == 0.0:
            return 1
        if piv != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[piv * n + j]
                a[piv * n + j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            factor = a[i * n + k] / a[k * n + k]
            for j in range(k, n):
                a[i * n + j] -= factor * a[k * n + j]
            b[i] -= factor * b[k]
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp -= a[i * n + j] * b[j]
        b[i] = tmp / a[i * n + i]
    return 0


# ---------------------------------------------------------------------------
# right-hand sides and Jacobians

cdef inline void full_rhs(double n1, double n2, double u,
                          double b1, double b2, double d1, double d2,
                          double sh, double K, double* out) nogil:
    cdef double total = n1 + n2
    cdef double p = n2 / total if total != 0.0 else 0.0
    cdef double crowd = 1.0 - total / K
    out[0] = b1 * n1 * (1.0 - sh * p) * crowd - d1 * n1
    out[1] = b2 * n2 * crowd - d2 * n2 + u


cdef inline void full_jac(double n1, double n2,
                          double b1, double b2, double d1, double d2,
                          double sh, double K, double* out) nogil:
    cdef double total = n1 + n2
    cdef double p = n2 / total if total != 0.0 else 0.0
    cdef double N = total / K
    out[0] = b1 * ((1 - sh * p) * (1 - (2 - p) * N)
                   + sh * p * (1 - p) * (1 - N)) - d1
    out[1] = -b1 * (1 - p) * (sh * (1 - p) + N * (1 - sh))
    out[2] = -b2 * p * N
    out[3] = b2 * (1 - (1 + p) * N) - d2


cdef inline int sf_rhs(double n, double p, double u,
                       double b10, double b20, double d1, double d2,
                       double sh, double K, double eps, double* out) nogil:
    cdef double pop = 1.0 - eps * n
    if pop <= COLLAPSE_FLOOR:
        return 1
    cdef double a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    cdef double zn = d1 * (1.0 - p) + d2 * p
    out[0] = (pop * (zn - a * n) - u / K) / eps
    out[1] = p * (1.0 - p) * (n * (b20 - b10 * (1.0 - sh * p)) + d1 - d2) \
        + u * (1.0 - p) / (K * pop)
    return 0


cdef inline void sf_jac(double n, double p, double u,
                        double b10, double b20, double d1, double d2,
                        double sh, double K, double eps, double* out) nogil:
    cdef double pop = 1.0 - eps * n
    cdef double a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    cdef double ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    cdef double zn = d1 * (1.0 - p) + d2 * p
    cdef double znp = d2 - d1
    out[0] = -(zn - a * n) - pop * a / eps
    out[1] = pop * (znp - ap * n) / eps
    out[2] = p * (1.0 - p) * (b20 - b10 * (1.0 - sh * p)) \
        + u * (1.0 - p) * eps / (K * pop * pop)
    out[3] = (1.0 - 2.0 * p) * (n * (b20 - b10 * (1.0 - sh * p)) + d1 - d2) \
        + p * (1.0 - p) * n * b10 * sh - u / (K * pop)


cdef inline double reduced_rhs(double p, double u,
                               double b10, double b20, double d1, double d2,
                               double sh, double K) nogil:
    cdef double a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    cdef double num_f = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p))
    cdef double q_g = b10 * (1.0 - p) * (1.0 - sh * p)
    return (num_f + (u / K) * q_g) / a


cdef inline double reduced_jac(double p, double u,
                               double b10, double b20, double d1, double d2,
                               double sh, double K) nogil:
    cdef double a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    cdef double ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    cdef double num = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p)) \
        + (u / K) * b10 * (1.0 - p) * (1.0 - sh * p)
    cdef double nump = (1.0 - 2.0 * p) * (d1 * b20 - d2 * b10 + d2 * b10 * sh * p) \
        + p * (1.0 - p) * d2 * b10 * sh \
        + (u / K) * b10 * (2.0 * sh * p - 1.0 - sh)
    return (nump * a - num * ap) / (a * a)


cdef inline void reduced_fg_prime_c(double p,
                                    double b10, double b20, double d1,
                                    double d2, double sh, double K,
                                    double* out) nogil:
    cdef double a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    cdef double ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    cdef double num_f = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p))
    cdef double num_fp = (1.0 - 2.0 * p) * (d1 * b20 - d2 * b10 + d2 * b10 * sh * p) \
        + p * (1.0 - p) * d2 * b10 * sh
    cdef double num_g = b10 * (1.0 - p) * (1.0 - sh * p) / K
    cdef double num_gp = b10 * (2.0 * sh * p - 1.0 - sh) / K
    out[0] = (num_fp * a - num_f * ap) / (a * a)
    out[1] = (num_gp * a - num_g * ap) / (a * a)


def reduced_fg_prime(double p, double b10, double b20, double d1, double d2,
                     double sh, double K):
    cdef double out[2]
    reduced_fg_prime_c(p, b10, b20, d1, d2, sh, K, out)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# forward drivers

ctypedef enum SystemKind:
    SYS_FULL = 0
    SYS_SLOWFAST = 1


cdef int step_2d(SystemKind kind, double* x, double u, double dt,
                 double b1, double b2, double d1, double d2, double sh,
                 double K, double eps, double tol, int max_iter,
                 double* residual_out) nogil:
    """Returns 0 on success, 1 on Newton divergence, 2 on collapse."""
    cdef double k[4]
    cdef double res[4]
    cdef double f1[2]
    cdef double f2[2]
    cdef double j1[4]
    cdef double j2[4]
    cdef double mat[16]
    cdef double y1[2]
    cdef double y2[2]
    cdef double residual, scale, h
    cdef int it, i

    if kind == SYS_FULL:
        full_rhs(x[0], x[1], u, b1, b2, d1, d2, sh, K, f1)
    else:
        if sf_rhs(x[0], x[1], u, b1, b2, d1, d2, sh, K, eps, f1):
            return 2
    k[0] = f1[0]; k[1] = f1[1]; k[2] = f1[0]; k[3] = f1[1]

    for it in range(max_iter):
        y1[0] = x[0] + dt * 0.5 * (k[0] - k[2])
        y1[1] = x[1] + dt * 0.5 * (k[1] - k[3])
        y2[0] = x[0] + dt * 0.5 * (k[0] + k[2])
        y2[1] = x[1] + dt * 0.5 * (k[1] + k[3])
        if kind == SYS_FULL:
            full_rhs(y1[0], y1[1], u, b1, b2, d1, d2, sh, K, f1)
            full_rhs(y2[0], y2[1], u, b1, b2, d1, d2, sh, K, f2)
        else:
            if sf_rhs(y1[0], y1[1], u, b1, b2, d1, d2, sh, K, eps, f1):
                return 2
            if sf_rhs(y2[0], y2[1], u, b1, b2, d1, d2, sh, K, eps, f2):
                return 2
        res[0] = k[0] - f1[0]; res[1] = k[1] - f1[1]
        res[2] = k[2] - f2[0]; res[3] = k[3] - f2[1]
        residual = 0.0
        scale = 0.0
        for i in range(4):
            if fabs(res[i]) > residual:
                residual = fabs(res[i])
            if fabs(k[i]) > scale:
                scale = fabs(k[i])
        residual_out[0] = residual
        if residual < tol * (1.0 + scale):
            x[0] = y2[0]
            x[1] = y2[1]
            return 0
        if kind == SYS_FULL:
            full_jac(y1[0], y1[1], b1, b2, d1, d2, sh, K, j1)
            full_jac(y2[0], y2[1], b1, b2, d1, d2, sh, K, j2)
        else:
            sf_jac(y1[0], y1[1], u, b1, b2, d1, d2, sh, K, eps, j1)
            sf_jac(y2[0], y2[1], u, b1, b2, d1, d2, sh, K, eps, j2)
        h = 0.5 * dt
        mat[0] = 1.0 - h * j1[0]; mat[1] = -h * j1[1]
        mat[2] = h * j1[0];       mat[3] = h * j1[1]
        mat[4] = -h * j1[2];      mat[5] = 1.0 - h * j1[3]
        mat[6] = h * j1[2];       mat[7] = h * j1[3]
        mat[8] = -h * j2[0];      mat[9] = -h * j2[1]
        mat[10] = 1.0 - h * j2[0]; mat[11] = -h * j2[1]
        mat[12] = -h * j2[2];     mat[13] = -h * j2[3]
        mat[14] = -h * j2[2];     mat[15] = 1.0 - h * j2[3]
        if solve_n(mat, res, 4):
            return 1
        for i in range(4):
            k[i] -= res[i]
    return 1


cdef _drive_2d(SystemKind kind, x0, u_values, double dt,
               double b1, double b2, double d1, double d2, double sh,
               double K, double eps, double tol, int max_iter):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = \
        np.ascontiguousarray(u_values, dtype=np.float64)
    cdef int n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] states = np.empty((n + 1, 2))
    cdef double x[2]
    cdef double residual = 0.0
    cdef int k, status
    x[0] = x0[0]
    x[1] = x0[1]
    states[0, 0] = x[0]
    states[0, 1] = x[1]
    for k in range(n):
        status = step_2d(kind, x, u[k], dt, b1, b2, d1, d2, sh, K, eps,
                         tol, max_iter, &residual)
        if status == 1:
            raise NewtonDivergence(step_index=k, residual=residual)
        if status == 2:
            raise PopulationCollapse(step_index=k)
        states[k + 1, 0] = x[0]
        states[k + 1, 1] = x[1]
    return states


def integrate_full(x0, u_values, double dt, double b1, double b2, double d1,
                   double d2, double sh, double K,
                   double tol=1e-12, int max_iter=50):
    return _drive_2d(SYS_FULL, x0, u_values, dt, b1, b2, d1, d2, sh, K,
                     0.0, tol, max_iter)


def integrate_slowfast(x0, u_values, double dt, double b10, double b20,
                       double d1, double d2, double sh, double K, double eps,
                       double tol=1e-12, int max_iter=50):
    return _drive_2d(SYS_SLOWFAST, x0, u_values, dt, b10, b20, d1, d2, sh, K,
                     eps, tol, max_iter)


def integrate_reduced(double p0, u_values, double dt, double b10, double b20,
                      double d1, double d2, double sh, double K,
                      double tol=1e-12, int max_iter=50):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = \
        np.ascontiguousarray(u_values, dtype=np.float64)
    cdef int n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] states = np.empty(n + 1)
    cdef double p = p0, uk, k1, k2, y1, y2, r1, r2, residual, scale
    cdef double j1, j2, a11, a12, a21, a22, det, h
    cdef int k, it, ok
    states[0] = p
    for k in range(n):
        uk = u[k]
        k1 = reduced_rhs(p, uk, b10, b20, d1, d2, sh, K)
        k2 = k1
        ok = 0
        residual = 0.0
        for it in range(max_iter):
            y1 = p + dt * 0.5 * (k1 - k2)
            y2 = p + dt * 0.5 * (k1 + k2)
            r1 = k1 - reduced_rhs(y1, uk, b10, b20, d1, d2, sh, K)
            r2 = k2 - reduced_rhs(y2, uk, b10, b20, d1, d2, sh, K)
            residual = max(fabs(r1), fabs(r2))
            scale = max(fabs(k1), fabs(k2))
            if residual < tol * (1.0 + scale):
                ok = 1
                p = y2
                break
            j1 = reduced_jac(y1, uk, b10, b20, d1, d2, sh, K)
            j2 = reduced_jac(y2, uk, b10, b20, d1, d2, sh, K)
            h = 0.5 * dt
            a11 = 1.0 - h * j1
            a12 = h * j1
            a21 = -h * j2
            a22 = 1.0 - h * j2
            det = a11 * a22 - a12 * a21
            k1 -= (a22 * r1 - a12 * r2) / det
            k2 -= (a11 * r2 - a21 * r1) / det
        if not ok:
            raise NewtonDivergence(step_index=k, residual=residual)
        states[k + 1] = p
    return states


# ---------------------------------------------------------------------------
# backward (adjoint) sweeps

def adjoint_reduced(p_states, u_values, double dt, double b10, double b20,
                    double d1, double d2, double sh, double K, double qT):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ps = \
        np.ascontiguousarray(p_states, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = \
        np.ascontiguousarray(u_values, dtype=np.float64)
    cdef int n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q = np.empty(n + 1)
    cdef double cur = qT, b1c, b2c, h, a11, a12, a21, a22, det, r1, r2, k1, k2
    cdef double fg1[2]
    cdef double fg0[2]
    cdef int j
    q[n] = cur
    for j in range(n - 1, -1, -1):
        reduced_fg_prime_c(ps[j + 1], b10, b20, d1, d2, sh, K, fg1)
        reduced_fg_prime_c(ps[j], b10, b20, d1, d2, sh, K, fg0)
        b1c = fg1[0] + u[j] * fg1[1]
        b2c = fg0[0] + u[j] * fg0[1]
        h = 0.5 * dt
        a11 = 1.0 - h * b1c
        a12 = h * b1c
        a21 = -h * b2c
        a22 = 1.0 - h * b2c
        det = a11 * a22 - a12 * a21
        r1 = b1c * cur
        r2 = b2c * cur
        k1 = (a22 * r1 - a12 * r2) / det
        k2 = (a11 * r2 - a21 * r1) / det
        cur = cur + dt * 0.5 * (k1 + k2)
        q[j] = cur
    return q


cdef _adjoint_sweep_2d(cnp.ndarray[cnp.float64_t, ndim=2] bmats, qT,
                       int n, double dt):
    """bmats has shape (n, 8): transposed Jacobian at node j+1 (entries 0..3)
    and node j (entries 4..7) for each cell j, rows flattened row-major."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.empty((n + 1, 2))
    cdef double cur0 = qT[0], cur1 = qT[1]
    cdef double mat[16]
    cdef double rhs[4]
    cdef double b1[4]
    cdef double b2[4]
    cdef double h
    cdef int j, i
    q[n, 0] = cur0
    q[n, 1] = cur1
    for j in range(n - 1, -1, -1):
        # bmats is (n, 8): first 4 entries stage-1 B, last 4 stage-2 B
        for i in range(4):
            b1[i] = bmats[j, i]
            b2[i] = bmats[j, 4 + i]
        h = 0.5 * dt
        mat[0] = 1.0 - h * b1[0]; mat[1] = -h * b1[1]
        mat[2] = h * b1[0];       mat[3] = h * b1[1]
        mat[4] = -h * b1[2];      mat[5] = 1.0 - h * b1[3]
        mat[6] = h * b1[2];       mat[7] = h * b1[3]
        mat[8] = -h * b2[0];      mat[9] = -h * b2[1]
        mat[10] = 1.0 - h * b2[0]; mat[11] = -h * b2[1]
        mat[12] = -h * b2[2];     mat[13] = -h * b2[3]
        mat[14] = -h * b2[2];     mat[15] = 1.0 - h * b2[3]
        rhs[0] = b1[0] * cur0 + b1[1] * cur1
        rhs[1] = b1[2] * cur0 + b1[3] * cur1
        rhs[2] = b2[0] * cur0 + b2[1] * cur1
        rhs[3] = b2[2] * cur0 + b2[3] * cur1
        solve_n(mat, rhs, 4)
        cur0 = cur0 + dt * 0.5 * (rhs[0] + rhs[2])
        cur1 = cur1 + dt * 0.5 * (rhs[1] + rhs[3])
        q[j, 0] = cur0
        q[j, 1] = cur1
    return q


def adjoint_full(states, u_values, double dt, double b1, double b2, double d1,
                 double d2, double sh, double K, qT):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] st = \
        np.ascontiguousarray(states, dtype=np.float64)
    cdef int n = st.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmats = np.empty((n, 8))
    cdef double jm[4]
    cdef int j
    for j in range(n):
        full_jac(st[j + 1, 0], st[j + 1, 1], b1, b2, d1, d2, sh, K, jm)
        bmats[j, 0] = jm[0]; bmats[j, 1] = jm[2]
        bmats[j, 2] = jm[1]; bmats[j, 3] = jm[3]
        full_jac(st[j, 0], st[j, 1], b1, b2, d1, d2, sh, K, jm)
        bmats[j, 4] = jm[0]; bmats[j, 5] = jm[2]
        bmats[j, 6] = jm[1]; bmats[j, 7] = jm[3]
    return _adjoint_sweep_2d(bmats, np.asarray(qT, dtype=np.float64), n, dt)


def adjoint_slowfast(states, u_values, double dt, double b10, double b20,
                     double d1, double d2, double sh, double K, double eps,
                     qT):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] st = \
        np.ascontiguousarray(states, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = \
        np.ascontiguousarray(u_values, dtype=np.float64)
    cdef int n = st.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmats = np.empty((n, 8))
    cdef double jm[4]
    cdef int j
    for j in range(n):
        sf_jac(st[j + 1, 0], st[j + 1, 1], u[j], b10, b20, d1, d2, sh, K,
               eps, jm)
        bmats[j, 0] = jm[0]; bmats[j, 1] = jm[2]
        bmats[j, 2] = jm[1]; bmats[j, 3] = jm[3]
        sf_jac(st[j, 0], st[j, 1], u[j], b10, b20, d1, d2, sh, K, eps, jm)
        bmats[j, 4] = jm[0]; bmats[j, 5] = jm[2]
        bmats[j, 6] = jm[1]; bmats[j, 7] = jm[3]
    return _adjoint_sweep_2d(bmats, np.asarray(qT, dtype=np.float64), n, dt)
