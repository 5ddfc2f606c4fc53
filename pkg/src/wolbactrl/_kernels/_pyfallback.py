"""Pure-Python implementation of the integration/adjoint kernels.

Mirrors ``_fast.pyx`` operation by operation so both backends agree to
floating-point roundoff; used when the compiled extension is unavailable
(or forced via WOLBACTRL_PURE_PYTHON=1).

State conventions:
  full:      (n1, n2) densities
  slowfast:  (n, p) scaled deficit / infected frequency
  reduced:   p only
"""

from __future__ import annotations

import numpy as np

from ..errors import NewtonDivergence, PopulationCollapse

COLLAPSE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# right-hand sides and Jacobians

def _full_rhs(n1, n2, u, b1, b2, d1, d2, sh, K):
    total = n1 + n2
    p = n2 / total if total != 0.0 else 0.0
    crowd = 1.0 - total / K
    f1 = b1 * n1 * (1.0 - sh * p) * crowd - d1 * n1
    f2 = b2 * n2 * crowd - d2 * n2 + u
    return f1, f2


def _full_jac(n1, n2, b1, b2, d1, d2, sh, K):
    total = n1 + n2
    p = n2 / total if total != 0.0 else 0.0
    N = total / K
    j11 = b1 * ((1 - sh * p) * (1 - (2 - p) * N) + sh * p * (1 - p) * (1 - N)) - d1
    j12 = -b1 * (1 - p) * (sh * (1 - p) + N * (1 - sh))
    j21 = -b2 * p * N
    j22 = b2 * (1 - (1 + p) * N) - d2
    return j11, j12, j21, j22


def _sf_rhs(n, p, u, b10, b20, d1, d2, sh, K, eps):
    pop = 1.0 - eps * n
    if pop <= COLLAPSE_FLOOR:
        raise PopulationCollapse(step_index=-1)
    a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    zn = d1 * (1.0 - p) + d2 * p
    fn = (pop * (zn - a * n) - u / K) / eps
    fp = p * (1.0 - p) * (n * (b20 - b10 * (1.0 - sh * p)) + d1 - d2) \
        + u * (1.0 - p) / (K * pop)
    return fn, fp


def _sf_jac(n, p, u, b10, b20, d1, d2, sh, K, eps):
    pop = 1.0 - eps * n
    a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    zn = d1 * (1.0 - p) + d2 * p
    znp = d2 - d1
    j11 = -(zn - a * n) - pop * a / eps
    j12 = pop * (znp - ap * n) / eps
    j21 = p * (1.0 - p) * (b20 - b10 * (1.0 - sh * p)) \
        + u * (1.0 - p) * eps / (K * pop * pop)
    j22 = (1.0 - 2.0 * p) * (n * (b20 - b10 * (1.0 - sh * p)) + d1 - d2) \
        + p * (1.0 - p) * n * b10 * sh - u / (K * pop)
    return j11, j12, j21, j22


def _reduced_rhs(p, u, b10, b20, d1, d2, sh, K):
    a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    num_f = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p))
    q_g = b10 * (1.0 - p) * (1.0 - sh * p)
    return (num_f + (u / K) * q_g) / a


def _reduced_jac(p, u, b10, b20, d1, d2, sh, K):
    a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    num = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p)) \
        + (u / K) * b10 * (1.0 - p) * (1.0 - sh * p)
    nump = (1.0 - 2.0 * p) * (d1 * b20 - d2 * b10 + d2 * b10 * sh * p) \
        + p * (1.0 - p) * d2 * b10 * sh \
        + (u / K) * b10 * (2.0 * sh * p - 1.0 - sh)
    return (nump * a - num * ap) / (a * a)


def reduced_fg_prime(p, b10, b20, d1, d2, sh, K):
    """Exact (f'(p), g'(p)) by the quotient rule, used by the adjoint."""
    a = b10 * (1.0 - p) * (1.0 - sh * p) + b20 * p
    ap = b10 * (2.0 * sh * p - 1.0 - sh) + b20
    num_f = p * (1.0 - p) * (d1 * b20 - d2 * b10 * (1.0 - sh * p))
    num_fp = (1.0 - 2.0 * p) * (d1 * b20 - d2 * b10 + d2 * b10 * sh * p) \
        + p * (1.0 - p) * d2 * b10 * sh
    num_g = b10 * (1.0 - p) * (1.0 - sh * p) / K
    num_gp = b10 * (2.0 * sh * p - 1.0 - sh) / K
    fprime = (num_fp * a - num_f * ap) / (a * a)
    gprime = (num_gp * a - num_g * ap) / (a * a)
    return fprime, gprime


# ---------------------------------------------------------------------------
# forward Lobatto IIIC Newton loops

def _newton_step_2d(rhs, jac, x, u, dt, tol, max_iter):
    """One Lobatto IIIC step for a 2-dimensional autonomous system."""
    f0 = rhs(x[0], x[1], u)
    k = np.array([f0[0], f0[1], f0[0], f0[1]])
    for _ in range(max_iter):
        y1 = (x[0] + dt * 0.5 * (k[0] - k[2]), x[1] + dt * 0.5 * (k[1] - k[3]))
        y2 = (x[0] + dt * 0.5 * (k[0] + k[2]), x[1] + dt * 0.5 * (k[1] + k[3]))
        f1 = rhs(y1[0], y1[1], u)
        f2 = rhs(y2[0], y2[1], u)
        res = np.array([k[0] - f1[0], k[1] - f1[1], k[2] - f2[0], k[3] - f2[1]])
        residual = float(np.max(np.abs(res)))
        if residual < tol * (1.0 + float(np.max(np.abs(k)))):
            return np.array([y2[0], y2[1]])
        j1 = jac(y1[0], y1[1], u)
        j2 = jac(y2[0], y2[1], u)
        h = 0.5 * dt
        mat = np.array([
            [1.0 - h * j1[0], -h * j1[1], h * j1[0], h * j1[1]],
            [-h * j1[2], 1.0 - h * j1[3], h * j1[2], h * j1[3]],
            [-h * j2[0], -h * j2[1], 1.0 - h * j2[0], -h * j2[1]],
            [-h * j2[2], -h * j2[3], -h * j2[2], 1.0 - h * j2[3]],
        ])
        k = k - np.linalg.solve(mat, res)
    raise NewtonDivergence(step_index=-1, residual=residual)


def _newton_step_1d(rhs, jac, x, u, dt, tol, max_iter):
    f0 = rhs(x, u)
    k1 = k2 = f0
    for _ in range(max_iter):
        y1 = x + dt * 0.5 * (k1 - k2)
        y2 = x + dt * 0.5 * (k1 + k2)
        r1 = k1 - rhs(y1, u)
        r2 = k2 - rhs(y2, u)
        residual = max(abs(r1), abs(r2))
        if residual < tol * (1.0 + max(abs(k1), abs(k2))):
            return y2
        j1 = jac(y1, u)
        j2 = jac(y2, u)
        h = 0.5 * dt
        a11, a12 = 1.0 - h * j1, h * j1
        a21, a22 = -h * j2, 1.0 - h * j2
        det = a11 * a22 - a12 * a21
        dk1 = (a22 * r1 - a12 * r2) / det
        dk2 = (a11 * r2 - a21 * r1) / det
        k1, k2 = k1 - dk1, k2 - dk2
    raise NewtonDivergence(step_index=-1, residual=residual)


def _drive_2d(rhs, jac, x0, u_values, dt, tol, max_iter):
    n = len(u_values)
    states = np.empty((n + 1, 2))
    states[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(n):
        try:
            x = _newton_step_2d(rhs, jac, x, u_values[k], dt, tol, max_iter)
        except NewtonDivergence as err:
            raise NewtonDivergence(step_index=k, residual=err.residual) from None
        except PopulationCollapse:
            raise PopulationCollapse(step_index=k) from None
        states[k + 1] = x
    return states


def integrate_full(x0, u_values, dt, b1, b2, d1, d2, sh, K,
                   tol=1e-12, max_iter=50):
    rhs = lambda n1, n2, u: _full_rhs(n1, n2, u, b1, b2, d1, d2, sh, K)
    jac = lambda n1, n2, u: _full_jac(n1, n2, b1, b2, d1, d2, sh, K)
    return _drive_2d(rhs, jac, x0, np.asarray(u_values, dtype=float), dt,
                     tol, max_iter)


def integrate_slowfast(x0, u_values, dt, b10, b20, d1, d2, sh, K, eps,
                       tol=1e-12, max_iter=50):
    rhs = lambda n, p, u: _sf_rhs(n, p, u, b10, b20, d1, d2, sh, K, eps)
    jac = lambda n, p, u: _sf_jac(n, p, u, b10, b20, d1, d2, sh, K, eps)
    return _drive_2d(rhs, jac, x0, np.asarray(u_values, dtype=float), dt,
                     tol, max_iter)


def integrate_reduced(p0, u_values, dt, b10, b20, d1, d2, sh, K,
                      tol=1e-12, max_iter=50):
    rhs = lambda p, u: _reduced_rhs(p, u, b10, b20, d1, d2, sh, K)
    jac = lambda p, u: _reduced_jac(p, u, b10, b20, d1, d2, sh, K)
    u_values = np.asarray(u_values, dtype=float)
    n = len(u_values)
    states = np.empty(n + 1)
    states[0] = p0
    p = float(p0)
    for k in range(n):
        try:
            p = _newton_step_1d(rhs, jac, p, u_values[k], dt, tol, max_iter)
        except NewtonDivergence as err:
            raise NewtonDivergence(step_index=k, residual=err.residual) from None
        states[k + 1] = p
    return states


# ---------------------------------------------------------------------------
# backward (adjoint) sweeps: linear ODE -q' = B(t) q, one exact linear
# solve per step of the same Lobatto IIIC scheme on reversed time. The
# coefficient B uses the active cell's control value at both stages.

def adjoint_reduced(p_states, u_values, dt, b10, b20, d1, d2, sh, K, qT):
    p_states = np.asarray(p_states, dtype=float)
    u_values = np.asarray(u_values, dtype=float)
    n = len(u_values)
    q = np.empty(n + 1)
    q[n] = qT
    cur = float(qT)
    for j in range(n - 1, -1, -1):
        u = u_values[j]
        fp1, gp1 = reduced_fg_prime(p_states[j + 1], b10, b20, d1, d2, sh, K)
        fp0, gp0 = reduced_fg_prime(p_states[j], b10, b20, d1, d2, sh, K)
        b1 = fp1 + u * gp1
        b2 = fp0 + u * gp0
        h = 0.5 * dt
        a11, a12 = 1.0 - h * b1, h * b1
        a21, a22 = -h * b2, 1.0 - h * b2
        det = a11 * a22 - a12 * a21
        r1, r2 = b1 * cur, b2 * cur
        k1 = (a22 * r1 - a12 * r2) / det
        k2 = (a11 * r2 - a21 * r1) / det
        cur = cur + dt * 0.5 * (k1 + k2)
        q[j] = cur
    return q


def _adjoint_sweep_2d(bmat_cell, qT, n_steps, dt):
    """bmat_cell(j, node_index) -> 2x2 coefficient B = A(t)^T for cell j."""
    q = np.empty((n_steps + 1, 2))
    q[n_steps] = qT
    eye = np.eye(4)
    cur = np.asarray(qT, dtype=float)
    for j in range(n_steps - 1, -1, -1):
        b1 = bmat_cell(j, j + 1)
        b2 = bmat_cell(j, j)
        h = 0.5 * dt
        mat = eye.copy()
        mat[:2, :2] -= h * b1
        mat[:2, 2:] += h * b1
        mat[2:, :2] -= h * b2
        mat[2:, 2:] -= h * b2
        rhs = np.concatenate([b1 @ cur, b2 @ cur])
        k = np.linalg.solve(mat, rhs)
        cur = cur + dt * 0.5 * (k[:2] + k[2:])
        q[j] = cur
    return q


def adjoint_full(states, u_values, dt, b1, b2, d1, d2, sh, K, qT):
    states = np.asarray(states, dtype=float)

    def bmat(j, i):
        j11, j12, j21, j22 = _full_jac(states[i, 0], states[i, 1],
                                       b1, b2, d1, d2, sh, K)
        return np.array([[j11, j21], [j12, j22]])  # transpose

    return _adjoint_sweep_2d(bmat, qT, len(u_values), dt)


def adjoint_slowfast(states, u_values, dt, b10, b20, d1, d2, sh, K, eps, qT):
    states = np.asarray(states, dtype=float)
    u_values = np.asarray(u_values, dtype=float)

    def bmat(j, i):
        j11, j12, j21, j22 = _sf_jac(states[i, 0], states[i, 1], u_values[j],
                                     b10, b20, d1, d2, sh, K, eps)
        return np.array([[j11, j21], [j12, j22]])

    return _adjoint_sweep_2d(bmat, qT, len(u_values), dt)
