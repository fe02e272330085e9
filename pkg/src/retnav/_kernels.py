"""Numba-compiled inner loops of the trajectory optimizer.

States are packed as length-18 vectors [p, R (row-major), v, w] and controls
as length-6 vectors [u_v, u_w]. The math mirrors the public kinematics and
cost modules exactly; those remain the readable reference implementations and
the unit tests assert agreement between the two. Compiled artifacts are
cached on disk, so the compile cost is paid once per source revision.
"""

from __future__ import annotations

import numba
import numpy as np

_NJIT = dict(cache=True)


@numba.njit(**_NJIT)
def _skew(v):
    K = np.zeros((3, 3))
    K[0, 1] = -v[2]
    K[0, 2] = v[1]
    K[1, 0] = v[2]
    K[1, 2] = -v[0]
    K[2, 0] = -v[1]
    K[2, 1] = v[0]
    return K


@numba.njit(**_NJIT)
def _so3_exp(phi):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    K = _skew(phi)
    if angle < 1e-8:
        return np.eye(3) + K + 0.5 * (K @ K)
    s = np.sin(angle) / angle
    c = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + s * K + c * (K @ K)


@numba.njit(**_NJIT)
def _so3_log(R):
    trace = R[0, 0] + R[1, 1] + R[2, 2]
    cos_angle = 0.5 * (trace - 1.0)
    if cos_angle > 1.0:
        cos_angle = 1.0
    elif cos_angle < -1.0:
        cos_angle = -1.0
    angle = np.arccos(cos_angle)
    raw = np.empty(3)
    raw[0] = R[2, 1] - R[1, 2]
    raw[1] = R[0, 2] - R[2, 0]
    raw[2] = R[1, 0] - R[0, 1]
    if angle < 1e-8:
        return 0.5 * raw
    if np.pi - angle < 1e-6:
        diag = np.empty(3)
        diag[0] = R[0, 0]
        diag[1] = R[1, 1]
        diag[2] = R[2, 2]
        k = int(np.argmax(diag))
        axis = np.zeros(3)
        val = (diag[k] + 1.0) * 0.5
        if val < 0.0:
            val = 0.0
        axis[k] = np.sqrt(val)
        for j in range(3):
            if j != k:
                axis[j] = (R[k, j] + R[j, k]) / (4.0 * axis[k])
        if raw[k] < 0.0:
            axis = -axis
        return angle * axis
    return (angle / (2.0 * np.sin(angle))) * raw


@numba.njit(**_NJIT)
def _right_jacobian(phi):
    angle = np.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    K = _skew(phi)
    if angle < 1e-8:
        return np.eye(3) - 0.5 * K + (K @ K) / 6.0
    a2 = angle * angle
    c1 = (1.0 - np.cos(angle)) / a2
    c2 = (angle - np.sin(angle)) / (a2 * angle)
    return np.eye(3) - c1 * K + c2 * (K @ K)


@numba.njit(**_NJIT)
def _orthonormalize(R):
    return R @ (1.5 * np.eye(3) - 0.5 * (R.T @ R))


@numba.njit(**_NJIT)
def _step(x, u, dt, mass, inertia, inertia_inv):
    p = x[0:3]
    R = np.ascontiguousarray(x[3:12]).reshape(3, 3)
    v = x[12:15]
    w = x[15:18]
    u_v = u[0:3]
    u_w = u[3:6]
    v_next = v + (dt / mass) * (R @ u_v)
    p_next = p + dt * v_next
    gyro = np.cross(w, inertia @ w)
    w_next = w + dt * (inertia_inv @ (u_w - gyro))
    R_next = _orthonormalize(R @ _so3_exp(dt * w_next))
    out = np.empty(18)
    out[0:3] = p_next
    out[3:12] = R_next.reshape(9)
    out[12:15] = v_next
    out[15:18] = w_next
    return out


@numba.njit(**_NJIT)
def _state_diff(x, ref):
    d = np.empty(12)
    d[0:3] = x[0:3] - ref[0:3]
    R = np.ascontiguousarray(x[3:12]).reshape(3, 3)
    Rr = np.ascontiguousarray(ref[3:12]).reshape(3, 3)
    d[3:6] = _so3_log(Rr.T @ R)
    d[6:9] = x[12:15] - ref[12:15]
    d[9:12] = x[15:18] - ref[15:18]
    return d


@numba.njit(**_NJIT)
def _stage_cost(x, u, R_u, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_t, wp_w):
    cost = 0.5 * (u @ (R_u @ u))
    if has_s and w_s > 0.0:
        R = np.ascontiguousarray(x[3:12]).reshape(3, 3)
        a = R[:, 0]
        s = p_s - x[0:3]
        t = a[0] * s[0] + a[1] * s[1] + a[2] * s[2]
        cost += w_s * (s @ s + sig * t * t)
    if has_e and w_e > 0.0:
        d = x[0:3] - e_c
        rho = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if rho < 1e-12:
            return np.nan
        if rho > e_r - eps:
            cost += w_e * (rho - e_r) ** 2
    if wp_w > 0.0:
        diff = x[0:3] - wp_t
        cost += wp_w * (diff @ diff)
    return cost


@numba.njit(**_NJIT)
def _terminal_cost(x, P_f, goal):
    e = np.empty(9)
    e[0:3] = x[0:3] - goal
    e[3:6] = x[12:15]
    e[6:9] = x[15:18]
    return 0.5 * (e @ (P_f @ e))


@numba.njit(**_NJIT)
def _total_cost(X, U, R_u, P_f, goal, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t):
    n = U.shape[0]
    costs = np.empty(n)
    total = 0.0
    for i in range(n):
        c = _stage_cost(X[i], U[i], R_u, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_t[i], wp_w[i])
        costs[i] = c
        total += c
    total += _terminal_cost(X[n], P_f, goal)
    return costs, total


@numba.njit(**_NJIT)
def _stage_expansion(x, u, R_u, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_t, wp_w):
    gx = np.zeros(12)
    Hxx = np.zeros((12, 12))
    gu = R_u @ u
    if has_s and w_s > 0.0:
        R = np.ascontiguousarray(x[3:12]).reshape(3, 3)
        a = np.ascontiguousarray(R[:, 0])
        s = p_s - x[0:3]
        w_vec = R.T @ s
        t = a[0] * s[0] + a[1] * s[1] + a[2] * s[2]
        g_t = np.empty(3)  # -(w x e_x)
        g_t[0] = 0.0
        g_t[1] = -w_vec[2]
        g_t[2] = w_vec[1]
        grad_p = -2.0 * w_s * (s + sig * t * a)
        grad_phi = 2.0 * w_s * sig * t * g_t
        ex = np.zeros(3)
        ex[0] = 1.0
        RKex = R @ _skew(ex)
        H_pp = 2.0 * w_s * (np.eye(3) + sig * np.outer(a, a))
        H_pphi = -2.0 * w_s * sig * (np.outer(a, g_t) - t * RKex)
        H_t = 0.5 * (np.outer(ex, w_vec) + np.outer(w_vec, ex)) - w_vec[0] * np.eye(3)
        H_phiphi = 2.0 * w_s * sig * (np.outer(g_t, g_t) + t * H_t)
        gx[0:3] += grad_p
        gx[3:6] += grad_phi
        Hxx[0:3, 0:3] += H_pp
        Hxx[0:3, 3:6] += H_pphi
        Hxx[3:6, 0:3] += H_pphi.T
        Hxx[3:6, 3:6] += H_phiphi
    if has_e and w_e > 0.0:
        d = x[0:3] - e_c
        rho = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if rho > e_r - eps and rho >= 1e-12:
            nrm = d / rho
            gx[0:3] += 2.0 * w_e * (rho - e_r) * nrm
            P_t = np.eye(3) - np.outer(nrm, nrm)
            Hxx[0:3, 0:3] += 2.0 * w_e * (np.outer(nrm, nrm) + ((rho - e_r) / rho) * P_t)
    if wp_w > 0.0:
        diff = x[0:3] - wp_t
        gx[0:3] += 2.0 * wp_w * diff
        Hxx[0:3, 0:3] += 2.0 * wp_w * np.eye(3)
    return gx, gu, Hxx


@numba.njit(**_NJIT)
def _linearize(x, u, dt, mass, inertia, inertia_inv):
    R = np.ascontiguousarray(x[3:12]).reshape(3, 3)
    w = x[15:18]
    u_v = u[0:3]
    u_w = u[3:6]
    w_next = w + dt * (inertia_inv @ (u_w - np.cross(w, inertia @ w)))
    W = np.eye(3) + dt * (inertia_inv @ (_skew(inertia @ w) - _skew(w) @ inertia))
    U_blk = dt * inertia_inv
    Dvphi = -(dt / mass) * (R @ _skew(u_v))
    Dvu = (dt / mass) * R
    E = _so3_exp(dt * w_next).T
    Jr = _right_jacobian(dt * w_next)
    A = np.zeros((12, 12))
    B = np.zeros((12, 6))
    for i in range(3):
        A[i, i] = 1.0
        A[6 + i, 6 + i] = 1.0
        A[i, 6 + i] = dt
    A[0:3, 3:6] = dt * Dvphi
    A[3:6, 3:6] = E
    A[3:6, 9:12] = dt * (Jr @ W)
    A[6:9, 3:6] = Dvphi
    A[9:12, 9:12] = W
    B[0:3, 0:3] = dt * Dvu
    B[3:6, 3:6] = dt * (Jr @ U_blk)
    B[6:9, 0:3] = Dvu
    B[9:12, 3:6] = U_blk
    return A, B


@numba.njit(**_NJIT)
def _terminal_expansion(x, P_f, goal):
    e = np.empty(9)
    e[0:3] = x[0:3] - goal
    e[3:6] = x[12:15]
    e[6:9] = x[15:18]
    Pe = P_f @ e
    gx = np.zeros(12)
    gx[0:3] = Pe[0:3]
    gx[6:9] = Pe[3:6]
    gx[9:12] = Pe[6:9]
    Hxx = np.zeros((12, 12))
    Hxx[0:3, 0:3] = P_f[0:3, 0:3]
    Hxx[0:3, 6:9] = P_f[0:3, 3:6]
    Hxx[0:3, 9:12] = P_f[0:3, 6:9]
    Hxx[6:9, 0:3] = P_f[3:6, 0:3]
    Hxx[6:9, 6:9] = P_f[3:6, 3:6]
    Hxx[6:9, 9:12] = P_f[3:6, 6:9]
    Hxx[9:12, 0:3] = P_f[6:9, 0:3]
    Hxx[9:12, 6:9] = P_f[6:9, 3:6]
    Hxx[9:12, 9:12] = P_f[6:9, 6:9]
    return gx, Hxx


@numba.njit(**_NJIT)
def _chol6(A):
    """Cholesky of a 6x6 matrix; ok=False when not positive definite."""
    L = np.zeros((6, 6))
    for i in range(6):
        for j in range(i + 1):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if acc <= 0.0:
                    return L, False
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return L, True


@numba.njit(**_NJIT)
def _chol_solve(L, rhs):
    """Solve (L L^T) X = rhs for a lower-triangular 6x6 factor."""
    m = rhs.shape[1]
    X = np.empty((6, m))
    for c in range(m):
        for i in range(6):
            acc = rhs[i, c]
            for k in range(i):
                acc -= L[i, k] * X[k, c]
            X[i, c] = acc / L[i, i]
        for i in range(5, -1, -1):
            acc = X[i, c]
            for k in range(i + 1, 6):
                acc -= L[k, i] * X[k, c]
            X[i, c] = acc / L[i, i]
    return X


@numba.njit(**_NJIT)
def _backward(
    X, U, dt, mass, inertia, inertia_inv, R_u, P_f, goal,
    w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t, reg,
):
    n = U.shape[0]
    ks = np.empty((n, 6))
    Ks = np.empty((n, 6, 12))
    Vx, Vxx = _terminal_expansion(X[n], P_f, goal)
    dV = 0.0
    for i in range(n - 1, -1, -1):
        gx, gu, Hxx = _stage_expansion(
            X[i], U[i], R_u, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_t[i], wp_w[i]
        )
        A, B = _linearize(X[i], U[i], dt, mass, inertia, inertia_inv)
        Qx = gx + A.T @ Vx
        Qu = gu + B.T @ Vx
        VxxA = Vxx @ A
        Qxx = Hxx + A.T @ VxxA
        Qux = B.T @ VxxA
        Quu = R_u + B.T @ (Vxx @ B)
        Quu_reg = Quu.copy()
        for j in range(6):
            Quu_reg[j, j] += reg
        L, ok = _chol6(Quu_reg)
        if not ok:
            return ks, Ks, 0.0, False
        rhs = np.empty((6, 13))
        rhs[:, 0] = Qu
        rhs[:, 1:] = Qux
        sol = _chol_solve(L, rhs)
        k = -sol[:, 0]
        K = -np.ascontiguousarray(sol[:, 1:])
        ks[i] = k
        Ks[i] = K
        dV += k @ Qu + 0.5 * (k @ (Quu @ k))
        Vx = Qx + K.T @ (Quu @ k) + K.T @ Qu + Qux.T @ k
        Vxx = Qxx + K.T @ (Quu @ K) + K.T @ Qux + Qux.T @ K
        Vxx = 0.5 * (Vxx + Vxx.T)
    return ks, Ks, dV, True


@numba.njit(**_NJIT)
def _forward(X, U, ks, Ks, alpha, dt, mass, inertia, inertia_inv):
    n = U.shape[0]
    Xn = np.empty_like(X)
    Un = np.empty_like(U)
    Xn[0] = X[0]
    for i in range(n):
        dx = _state_diff(Xn[i], X[i])
        du = alpha * ks[i] + Ks[i] @ dx
        Un[i] = U[i] + du
        Xn[i + 1] = _step(Xn[i], Un[i], dt, mass, inertia, inertia_inv)
        for j in range(18):
            if not np.isfinite(Xn[i + 1, j]):
                return Xn, Un, False
    return Xn, Un, True


@numba.njit(**_NJIT)
def _solve(
    x0, U0, dt, mass, inertia, inertia_inv, R_u, P_f, goal,
    w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t,
    max_iters, tol, reg_min, reg_max, alphas,
):
    """Full iLQR loop; returns (X, U, stage_costs, J, iters, converged, reg, hist, hist_len, status).

    status: 0 ok, 1 non-finite initial rollout, 2 regularization ceiling.
    """
    n = U0.shape[0]
    X = np.empty((n + 1, 18))
    U = U0.copy()
    X[0] = x0
    for i in range(n):
        X[i + 1] = _step(X[i], U[i], dt, mass, inertia, inertia_inv)
    costs, J = _total_cost(X, U, R_u, P_f, goal, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t)
    hist = np.empty(max_iters + 1)
    hist[0] = J
    hist_len = 1
    if not np.isfinite(J):
        return X, U, costs, J, 0, False, 0.0, hist, hist_len, 1

    reg = 0.0
    converged = False
    iters = 0
    for it in range(1, max_iters + 1):
        iters = it
        while True:
            ks, Ks, dV, ok = _backward(
                X, U, dt, mass, inertia, inertia_inv, R_u, P_f, goal,
                w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t, reg,
            )
            if ok:
                break
            reg = max(reg_min, reg * 10.0)
            if reg > reg_max:
                return X, U, costs, J, iters, False, reg, hist, hist_len, 2

        if abs(dV) <= tol * max(1.0, abs(J)):
            converged = True
            break

        accepted = False
        J_prev = J
        for a_idx in range(alphas.shape[0]):
            alpha = alphas[a_idx]
            Xn, Un, ok = _forward(X, U, ks, Ks, alpha, dt, mass, inertia, inertia_inv)
            if not ok:
                continue
            costs_n, J_new = _total_cost(
                Xn, Un, R_u, P_f, goal, w_s, p_s, has_s, sig, w_e, e_c, e_r, eps, has_e, wp_w, wp_t
            )
            if np.isfinite(J_new) and J_new < J:
                X = Xn
                U = Un
                costs = costs_n
                J = J_new
                hist[hist_len] = J
                hist_len += 1
                if reg <= reg_min:
                    reg = 0.0
                else:
                    reg = reg / 10.0
                accepted = True
                break
        if accepted:
            if J_prev - J <= tol * max(1e-12, abs(J_prev)):
                converged = True
                break
        else:
            reg = max(reg_min, reg * 10.0)
            if reg > reg_max:
                break
    return X, U, costs, J, iters, converged, reg, hist, hist_len, 0
