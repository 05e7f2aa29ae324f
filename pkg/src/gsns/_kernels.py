"""Compiled inner loops for the truncated system.

Triad arrays are passed flat: positions ``ip, jp, kp`` into the mode list,
``kind`` (0 sum, 1 diff) and the raw coefficient ``c``. Prefactors 1/2 (sum)
and -1 (diff) are applied here.
"""
import numpy as np
from numba import njit

EULER_MARUYAMA = 0
HEUN_DETERMINISTIC = 1
RK4 = 2


@njit(cache=True)
def quadratic(q, ip, jp, kp, kind, c, out):
    out[:] = 0.0
    for n in range(c.shape[0]):
        a = 2 * ip[n]
        b = 2 * jp[n]
        k = 2 * kp[n]
        qi1 = q[a]
        qi2 = q[a + 1]
        qj1 = q[b]
        qj2 = q[b + 1]
        if kind[n] == 0:
            w = 0.5 * c[n]
            out[k] += w * (qi1 * qj1 - qi2 * qj2)
            out[k + 1] += w * (qi1 * qj2 + qi2 * qj1)
        else:
            w = c[n]
            out[k] -= w * (qi1 * qj1 + qi2 * qj2)
            out[k + 1] -= w * (qi2 * qj1 - qi1 * qj2)


@njit(cache=True)
def drift(q, ip, jp, kp, kind, c, diss, out):
    """``out = B(q, q) - diss * q`` with ``diss = epsilon |k|^2`` per component."""
    quadratic(q, ip, jp, kp, kind, c, out)
    for m in range(q.shape[0]):
        out[m] -= diss[m] * q[m]


@njit(cache=True)
def jacobian_apply(q, v, ip, jp, kp, kind, c, diss, out):
    out[:] = 0.0
    for n in range(c.shape[0]):
        a = 2 * ip[n]
        b = 2 * jp[n]
        k = 2 * kp[n]
        qi1 = q[a]
        qi2 = q[a + 1]
        qj1 = q[b]
        qj2 = q[b + 1]
        vi1 = v[a]
        vi2 = v[a + 1]
        vj1 = v[b]
        vj2 = v[b + 1]
        if kind[n] == 0:
            w = 0.5 * c[n]
            out[k] += w * (qi1 * vj1 + vi1 * qj1 - qi2 * vj2 - vi2 * qj2)
            out[k + 1] += w * (qi1 * vj2 + vi1 * qj2 + qi2 * vj1 + vi2 * qj1)
        else:
            w = c[n]
            out[k] -= w * (qi1 * vj1 + vi1 * qj1 + qi2 * vj2 + vi2 * qj2)
            out[k + 1] -= w * (qi2 * vj1 + vi2 * qj1 - qi1 * vj2 - vi1 * qj2)
    for m in range(q.shape[0]):
        out[m] -= diss[m] * v[m]


@njit(cache=True)
def jacobian_matrix(q, ip, jp, kp, kind, c, diss, J):
    """Dense Jacobian of the drift at ``q``."""
    J[:, :] = 0.0
    for n in range(c.shape[0]):
        a = 2 * ip[n]
        b = 2 * jp[n]
        k = 2 * kp[n]
        qi1 = q[a]
        qi2 = q[a + 1]
        qj1 = q[b]
        qj2 = q[b + 1]
        if kind[n] == 0:
            w = 0.5 * c[n]
            # row k: w (qi1 qj1 - qi2 qj2)
            J[k, a] += w * qj1
            J[k, b] += w * qi1
            J[k, a + 1] -= w * qj2
            J[k, b + 1] -= w * qi2
            # row k+1: w (qi1 qj2 + qi2 qj1)
            J[k + 1, a] += w * qj2
            J[k + 1, b + 1] += w * qi1
            J[k + 1, a + 1] += w * qj1
            J[k + 1, b] += w * qi2
        else:
            w = c[n]
            # row k: -w (qi1 qj1 + qi2 qj2)
            J[k, a] -= w * qj1
            J[k, b] -= w * qi1
            J[k, a + 1] -= w * qj2
            J[k, b + 1] -= w * qi2
            # row k+1: -w (qi2 qj1 - qi1 qj2)
            J[k + 1, a + 1] -= w * qj1
            J[k + 1, b] -= w * qi2
            J[k + 1, a] += w * qj2
            J[k + 1, b + 1] += w * qi1
    for m in range(q.shape[0]):
        J[m, m] -= diss[m]


@njit(cache=True)
def _add_noise(x, dw, cols, amps, frac):
    for r in range(cols.shape[0]):
        x[cols[r]] += frac * amps[r] * dw[r]


@njit(cache=True)
def rk4_stages(q, dw, cols, amps, dt, ip, jp, kp, kind, c, diss, S, F):
    """Stage points ``S[s]`` and drifts ``F[s]`` of the stochastic RK4 step.

    The increment is spread linearly over the step (half at the midpoint
    stages, all of it at the last), which is consistent for additive noise.
    """
    d = q.shape[0]
    S[0, :] = q
    drift(S[0], ip, jp, kp, kind, c, diss, F[0])
    for m in range(d):
        S[1, m] = q[m] + 0.5 * dt * F[0, m]
    _add_noise(S[1], dw, cols, amps, 0.5)
    drift(S[1], ip, jp, kp, kind, c, diss, F[1])
    for m in range(d):
        S[2, m] = q[m] + 0.5 * dt * F[1, m]
    _add_noise(S[2], dw, cols, amps, 0.5)
    drift(S[2], ip, jp, kp, kind, c, diss, F[2])
    for m in range(d):
        S[3, m] = q[m] + dt * F[2, m]
    _add_noise(S[3], dw, cols, amps, 1.0)
    drift(S[3], ip, jp, kp, kind, c, diss, F[3])


@njit(cache=True)
def step(q, dw, cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, out, S, F):
    """One step; ``dw`` is the increment row, ignored by the deterministic Heun scheme.

    ``S`` and ``F`` are (4, d) scratch arrays.
    """
    d = q.shape[0]
    if scheme == RK4:
        rk4_stages(q, dw, cols, amps, dt, ip, jp, kp, kind, c, diss, S, F)
        for m in range(d):
            out[m] = q[m] + dt / 6.0 * (F[0, m] + 2.0 * F[1, m] + 2.0 * F[2, m] + F[3, m])
        _add_noise(out, dw, cols, amps, 1.0)
        return
    drift(q, ip, jp, kp, kind, c, diss, F[0])
    for m in range(d):
        out[m] = q[m] + dt * F[0, m]
    if scheme == EULER_MARUYAMA:
        _add_noise(out, dw, cols, amps, 1.0)
        return
    drift(out, ip, jp, kp, kind, c, diss, F[1])
    for m in range(d):
        out[m] = q[m] + 0.5 * dt * (F[0, m] + F[1, m])


@njit(cache=True)
def integrate(q0, incr, row0, n_steps, record_every, cols, amps, dt, scheme,
              ip, jp, kp, kind, c, diss):
    """Run ``n_steps`` from increment row ``row0``, recording every ``record_every`` >= 1 steps.

    Returns ``(states, n_done)``. ``states[0]`` is ``q0``; integration stops
    early, with ``n_done < n_steps``, if the state stops being finite.
    """
    d = q0.shape[0]
    n_rec = n_steps // record_every
    states = np.empty((n_rec + 1, d))
    states[0] = q0
    q = q0.copy()
    nxt = np.empty(d)
    S = np.empty((4, d))
    F = np.empty((4, d))
    rec = 1
    for s in range(n_steps):
        step(q, incr[row0 + s], cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, nxt, S, F)
        finite = True
        for m in range(d):
            if not np.isfinite(nxt[m]):
                finite = False
                break
        if not finite:
            return states[:rec], s
        q, nxt = nxt, q
        if (s + 1) % record_every == 0:
            states[rec] = q
            rec += 1
    return states, n_steps


@njit(cache=True)
def tangent_step(q, V, dw, cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, J, S, F):
    """Derivative of the step map at ``q`` applied to the frame ``V`` (d x p).

    This is the exact linearization of :func:`step`, so it agrees with finite
    differences of the step map to rounding.
    """
    jacobian_matrix(q, ip, jp, kp, kind, c, diss, J)
    K1 = J @ V
    if scheme == EULER_MARUYAMA:
        return V + dt * K1
    if scheme == HEUN_DETERMINISTIC:
        drift(q, ip, jp, kp, kind, c, diss, F[0])
        for m in range(q.shape[0]):
            S[1, m] = q[m] + dt * F[0, m]
        jacobian_matrix(S[1], ip, jp, kp, kind, c, diss, J)
        K2 = J @ (V + dt * K1)
        return V + 0.5 * dt * (K1 + K2)
    rk4_stages(q, dw, cols, amps, dt, ip, jp, kp, kind, c, diss, S, F)
    jacobian_matrix(S[1], ip, jp, kp, kind, c, diss, J)
    K2 = J @ (V + 0.5 * dt * K1)
    jacobian_matrix(S[2], ip, jp, kp, kind, c, diss, J)
    K3 = J @ (V + 0.5 * dt * K2)
    jacobian_matrix(S[3], ip, jp, kp, kind, c, diss, J)
    K4 = J @ (V + dt * K3)
    return V + dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


@njit(cache=True)
def benettin(q0, V0, incr, row0, n_steps, reorth_every, cols, amps, dt, scheme,
             ip, jp, kp, kind, c, diss):
    """Co-evolve state and frame with QR every ``reorth_every`` steps.

    Returns ``(logs, q, V, status)`` where ``logs[r]`` holds ``log R_ii`` at the
    r-th re-orthonormalization, and ``status`` is -1 on success or the step
    index at which the frame collapsed or the state blew up.
    """
    d = q0.shape[0]
    p = V0.shape[1]
    n_reorth = n_steps // reorth_every
    logs = np.zeros((n_reorth, p))
    q = q0.copy()
    nxt = np.empty(d)
    S = np.empty((4, d))
    F = np.empty((4, d))
    J = np.empty((d, d))
    V = V0.copy()
    r = 0
    for s in range(n_steps):
        V = tangent_step(q, V, incr[row0 + s], cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, J, S, F)
        step(q, incr[row0 + s], cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, nxt, S, F)
        q, nxt = nxt, q
        if (s + 1) % reorth_every == 0:
            Q, R = np.linalg.qr(V)
            for i in range(p):
                rii = R[i, i]
                if not np.isfinite(rii) or abs(rii) < 1e-300:
                    return logs[:r], q, V, s
                if rii < 0.0:
                    for m in range(d):
                        Q[m, i] = -Q[m, i]
                    rii = -rii
                logs[r, i] = np.log(rii)
            V = np.ascontiguousarray(Q)
            r += 1
            for m in range(d):
                if not np.isfinite(q[m]):
                    return logs[:r], q, V, s
    return logs, q, V, -1


@njit(cache=True)
def jacobian_transpose_apply(q, u, ip, jp, kp, kind, c, diss, out):
    """``out = J(q)^T u`` for the drift Jacobian ``J``."""
    out[:] = 0.0
    for n in range(c.shape[0]):
        a = 2 * ip[n]
        b = 2 * jp[n]
        k = 2 * kp[n]
        qi1 = q[a]
        qi2 = q[a + 1]
        qj1 = q[b]
        qj2 = q[b + 1]
        u1 = u[k]
        u2 = u[k + 1]
        if kind[n] == 0:
            w = 0.5 * c[n]
            out[a] += w * (qj1 * u1 + qj2 * u2)
            out[b] += w * (qi1 * u1 + qi2 * u2)
            out[a + 1] += w * (qj1 * u2 - qj2 * u1)
            out[b + 1] += w * (qi1 * u2 - qi2 * u1)
        else:
            w = c[n]
            out[a] += w * (qj2 * u2 - qj1 * u1)
            out[b] -= w * (qi1 * u1 + qi2 * u2)
            out[a + 1] -= w * (qj2 * u1 + qj1 * u2)
            out[b + 1] += w * (qi1 * u2 - qi2 * u1)
    for m in range(q.shape[0]):
        out[m] -= diss[m] * u[m]


@njit(cache=True)
def step_adjoint(q, dw, lam, cols, amps, dt, scheme, ip, jp, kp, kind, c, diss, out, S, F, G):
    """``out = (d step / d q)^T lam``; ``G`` is (5, d) scratch."""
    d = q.shape[0]
    if scheme == EULER_MARUYAMA:
        jacobian_transpose_apply(q, lam, ip, jp, kp, kind, c, diss, out)
        for m in range(d):
            out[m] = lam[m] + dt * out[m]
        return
    if scheme == HEUN_DETERMINISTIC:
        drift(q, ip, jp, kp, kind, c, diss, F[0])
        for m in range(d):
            S[1, m] = q[m] + dt * F[0, m]
            G[0, m] = 0.5 * dt * lam[m]
        jacobian_transpose_apply(S[1], G[0], ip, jp, kp, kind, c, diss, G[1])
        for m in range(d):
            G[2, m] = 0.5 * dt * lam[m] + dt * G[1, m]
        jacobian_transpose_apply(q, G[2], ip, jp, kp, kind, c, diss, out)
        for m in range(d):
            out[m] += lam[m] + G[1, m]
        return
    rk4_stages(q, dw, cols, amps, dt, ip, jp, kp, kind, c, diss, S, F)
    # G[0] carries the stage-force adjoint, G[1..4] the stage-point adjoints
    for m in range(d):
        G[0, m] = dt / 6.0 * lam[m]
    jacobian_transpose_apply(S[3], G[0], ip, jp, kp, kind, c, diss, G[4])
    for m in range(d):
        G[0, m] = dt / 3.0 * lam[m] + dt * G[4, m]
    jacobian_transpose_apply(S[2], G[0], ip, jp, kp, kind, c, diss, G[3])
    for m in range(d):
        G[0, m] = dt / 3.0 * lam[m] + 0.5 * dt * G[3, m]
    jacobian_transpose_apply(S[1], G[0], ip, jp, kp, kind, c, diss, G[2])
    for m in range(d):
        G[0, m] = dt / 6.0 * lam[m] + 0.5 * dt * G[2, m]
    jacobian_transpose_apply(S[0], G[0], ip, jp, kp, kind, c, diss, G[1])
    for m in range(d):
        out[m] = lam[m] + G[1, m] + G[2, m] + G[3, m] + G[4, m]


@njit(cache=True)
def hinge_residual_grad(q0, incr, row0, hit_steps, centers, rho, cols, amps, dt, scheme,
                        ip, jp, kp, kind, c, diss):
    """``sum_i max(0, |q(n_i) - centers[i]| - rho)^2`` and its gradient in ``q0``.

    Forward pass stores the trajectory; the gradient comes from one reverse
    sweep of :func:`step_adjoint`. ``hit_steps`` must be non-decreasing.
    Returns ``(value, grad, ok)``; ``ok`` is False if the state blew up.
    """
    d = q0.shape[0]
    n_hits = hit_steps.shape[0]
    n_total = hit_steps[n_hits - 1] if n_hits > 0 else 0
    traj = np.empty((n_total + 1, d))
    traj[0] = q0
    S = np.empty((4, d))
    F = np.empty((4, d))
    G = np.empty((5, d))
    for s in range(n_total):
        step(traj[s], incr[row0 + s], cols, amps, dt, scheme, ip, jp, kp, kind, c, diss,
             traj[s + 1], S, F)
        for m in range(d):
            if not np.isfinite(traj[s + 1, m]):
                return np.inf, np.zeros(d), False
    seeds = np.zeros((n_total + 1, d))
    value = 0.0
    for i in range(n_hits):
        n = hit_steps[i]
        dist = 0.0
        for m in range(d):
            dist += (traj[n, m] - centers[i, m]) ** 2
        dist = np.sqrt(dist)
        h = dist - rho
        if h > 0.0:
            value += h * h
            for m in range(d):
                seeds[n, m] += 2.0 * h * (traj[n, m] - centers[i, m]) / dist
    lam = seeds[n_total].copy()
    nxt = np.empty(d)
    for s in range(n_total - 1, -1, -1):
        step_adjoint(traj[s], incr[row0 + s], lam, cols, amps, dt, scheme, ip, jp, kp, kind,
                     c, diss, nxt, S, F, G)
        for m in range(d):
            lam[m] = nxt[m] + seeds[s, m]
    return value, lam, True
