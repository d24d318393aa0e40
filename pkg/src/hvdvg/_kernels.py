"""Compiled right-hand sides and the Runge-Kutta-Fehlberg 7(8) stepper.

Everything here works on flat float64 arrays so it can run under numba's
nopython mode with the GIL released. The public modules wrap these kernels
in dataclasses.

State layout shared by all kernels::

    y[0:6]   C, Cv, Cd, Cdv, V, D
    y[6:9]   running integrals of Cv, Cdv and C*(V+D)
    y[9:15]  parameter sensitivities           (KIND_PARAM)
    y[9:45]  initial-condition matrix, row-major (KIND_IC)
"""

import numpy as np
from numba import njit

# parameter vector layout
P_B, P_BETA, P_DELTA, P_IOTA, P_ALPHA, P_GAMMA, P_ETA, P_KAPPA, P_WHICH = range(9)
NPAR = 9

NSTATE = 6
NCELL = 4
NACC = 3
NCORE = NSTATE + NACC

KIND_MODEL = 0
KIND_PARAM = 1
KIND_IC = 2

# sensitivity subject codes for KIND_PARAM
W_B, W_BETA, W_DELTA, W_IOTA, W_ALPHA, W_GAMMA = range(6)

STATUS_EQUILIBRIUM = 0
STATUS_HORIZON = 1
STATUS_UNDERFLOW = 2
STATUS_MAX_STEPS = 3
STATUS_NONFINITE = 4

# Fehlberg 7(8): 13 stages, 8th-order solution propagated.
_C = np.array([0.0, 2 / 27, 1 / 9, 1 / 6, 5 / 12, 1 / 2, 5 / 6, 1 / 6, 2 / 3, 1 / 3, 1.0, 0.0, 1.0])
_A = np.zeros((13, 13))
_A[1, 0] = 2 / 27
_A[2, :2] = [1 / 36, 1 / 12]
_A[3, :3] = [1 / 24, 0, 1 / 8]
_A[4, :4] = [5 / 12, 0, -25 / 16, 25 / 16]
_A[5, :5] = [1 / 20, 0, 0, 1 / 4, 1 / 5]
_A[6, :6] = [-25 / 108, 0, 0, 125 / 108, -65 / 27, 125 / 54]
_A[7, :7] = [31 / 300, 0, 0, 0, 61 / 225, -2 / 9, 13 / 900]
_A[8, :8] = [2, 0, 0, -53 / 6, 704 / 45, -107 / 9, 67 / 90, 3]
_A[9, :9] = [-91 / 108, 0, 0, 23 / 108, -976 / 135, 311 / 54, -19 / 60, 17 / 6, -1 / 12]
_A[10, :10] = [2383 / 4100, 0, 0, -341 / 164, 4496 / 1025, -301 / 82, 2133 / 4100,
               45 / 82, 45 / 164, 18 / 41]
_A[11, :11] = [3 / 205, 0, 0, 0, 0, -6 / 41, -3 / 205, -3 / 41, 3 / 41, 6 / 41, 0]
_A[12, :12] = [-1777 / 4100, 0, 0, -341 / 164, 4496 / 1025, -289 / 82, 2193 / 4100,
               51 / 82, 33 / 164, 12 / 41, 0, 1]
_B8 = np.array([0, 0, 0, 0, 0, 34 / 105, 9 / 35, 9 / 35, 9 / 280, 9 / 280, 0, 41 / 840, 41 / 840])
_B7 = np.array([41 / 840, 0, 0, 0, 0, 34 / 105, 9 / 35, 9 / 35, 9 / 280, 9 / 280, 41 / 840, 0, 0])
# b7 - b8: only stages 0, 10, 11, 12 differ
_E = _B7 - _B8


def kind_dim(kind):
    if kind == KIND_MODEL:
        return NCORE
    if kind == KIND_PARAM:
        return NCORE + NSTATE
    if kind == KIND_IC:
        return NCORE + NSTATE * NSTATE
    raise ValueError(f"unknown kernel kind {kind}")


@njit(cache=True, nogil=True)
def model_field(y, par, alive, dy):
    """Eqs. for the six compartments plus the three quadrature integrands."""
    C, Cv, Cd, Cdv, V, D = y[0], y[1], y[2], y[3], y[4], y[5]
    beta = par[P_BETA]
    delta = par[P_DELTA]
    iota = par[P_IOTA]
    alpha = par[P_ALPHA]
    gamma = par[P_GAMMA]
    eta = par[P_ETA]
    kappa = par[P_KAPPA]

    release = alpha * eta * (Cv + Cdv / kappa)
    dy[0] = -iota * C * (V + D)
    dy[1] = iota * C * V - Cv * (iota * D + alpha)
    dy[2] = iota * (C * D - Cd * V)
    dy[3] = iota * (Cd * V + Cv * D) - alpha * Cdv
    dy[4] = release - iota * V * (C + Cd)
    dy[5] = beta * release + alpha * delta * eta * Cdv / kappa - iota * D * (C + Cv)
    if gamma != 0.0:
        for i in range(NSTATE):
            dy[i] -= gamma * y[i]
    for j in range(NCELL):
        if not alive[j]:
            dy[j] = 0.0
    dy[6] = Cv
    dy[7] = Cdv
    dy[8] = C * (V + D)


@njit(cache=True, nogil=True)
def jacobian(y, par, J):
    """Analytic Jacobian of the six-compartment field (degradation included)."""
    C, Cv, Cd, Cdv, V, D = y[0], y[1], y[2], y[3], y[4], y[5]
    beta = par[P_BETA]
    delta = par[P_DELTA]
    iota = par[P_IOTA]
    alpha = par[P_ALPHA]
    gamma = par[P_GAMMA]
    eta = par[P_ETA]
    kappa = par[P_KAPPA]
    for i in range(NSTATE):
        for j in range(NSTATE):
            J[i, j] = 0.0

    J[0, 0] = -iota * (V + D)
    J[0, 4] = -iota * C
    J[0, 5] = -iota * C

    J[1, 0] = iota * V
    J[1, 1] = -(iota * D + alpha)
    J[1, 4] = iota * C
    J[1, 5] = -iota * Cv

    J[2, 0] = iota * D
    J[2, 2] = -iota * V
    J[2, 4] = -iota * Cd
    J[2, 5] = iota * C

    J[3, 1] = iota * D
    J[3, 2] = iota * V
    J[3, 3] = -alpha
    J[3, 4] = iota * Cd
    J[3, 5] = iota * Cv

    J[4, 0] = -iota * V
    J[4, 1] = alpha * eta
    J[4, 2] = -iota * V
    J[4, 3] = alpha * eta / kappa
    J[4, 4] = -iota * (C + Cd)

    J[5, 0] = -iota * D
    J[5, 1] = alpha * beta * eta - iota * D
    J[5, 3] = alpha * eta * (beta + delta) / kappa
    J[5, 5] = -iota * (C + Cv)

    for i in range(NSTATE):
        J[i, i] -= gamma


@njit(cache=True, nogil=True)
def param_partial(y, par, which, g):
    """Explicit partial derivative of the field with respect to one parameter."""
    C, Cv, Cd, Cdv, V, D = y[0], y[1], y[2], y[3], y[4], y[5]
    B = par[P_B]
    beta = par[P_BETA]
    delta = par[P_DELTA]
    alpha = par[P_ALPHA]
    eta = par[P_ETA]
    kappa = par[P_KAPPA]
    for i in range(NSTATE):
        g[i] = 0.0
    release_per_alpha = eta * (Cv + Cdv / kappa)

    if which == W_IOTA:
        g[0] = -C * (V + D)
        g[1] = C * V - Cv * D
        g[2] = C * D - Cd * V
        g[3] = Cd * V + Cv * D
        g[4] = -V * (C + Cd)
        g[5] = -D * (C + Cv)
    elif which == W_ALPHA:
        g[1] = -Cv
        g[3] = -Cdv
        g[4] = release_per_alpha
        g[5] = beta * release_per_alpha + delta * eta * Cdv / kappa
    elif which == W_GAMMA:
        for i in range(NSTATE):
            g[i] = -y[i]
    else:
        opb = 1.0 + beta
        d_eta = 0.0
        d_kappa = 0.0
        d_beta = 0.0
        d_delta = 0.0
        if which == W_B:
            d_eta = 1.0 / opb
        elif which == W_BETA:
            d_eta = -B / (opb * opb)
            d_kappa = -delta / (opb * opb)
            d_beta = 1.0
        else:
            d_kappa = 1.0 / opb
            d_delta = 1.0
        P = Cv + Cdv / kappa
        dP = -Cdv * d_kappa / (kappa * kappa)
        g[4] = alpha * (d_eta * P + eta * dP)
        g[5] = (alpha * (d_beta * eta + beta * d_eta) * P + alpha * beta * eta * dP
                + alpha * (d_delta * eta + delta * d_eta) * Cdv / kappa
                + alpha * delta * eta * Cdv * (-d_kappa / (kappa * kappa)))
        # B, beta and delta do not enter the cell equations


@njit(cache=True, nogil=True)
def full_field(kind, y, par, alive, dy, J, g):
    model_field(y, par, alive, dy)
    if kind == KIND_MODEL:
        return
    jacobian(y, par, J)
    if kind == KIND_PARAM:
        param_partial(y, par, int(par[P_WHICH]), g)
        for i in range(NSTATE):
            acc = g[i]
            for j in range(NSTATE):
                acc += J[i, j] * y[NCORE + j]
            dy[NCORE + i] = acc
        for i in range(NCELL):
            if not alive[i]:
                dy[NCORE + i] = 0.0
    else:
        for i in range(NSTATE):
            for k in range(NSTATE):
                acc = 0.0
                for j in range(NSTATE):
                    acc += J[i, j] * y[NCORE + j * NSTATE + k]
                dy[NCORE + i * NSTATE + k] = acc
        for i in range(NCELL):
            if not alive[i]:
                for k in range(NSTATE):
                    dy[NCORE + i * NSTATE + k] = 0.0


@njit(cache=True, nogil=True)
def rk_step(kind, y, h, par, alive, K, ytmp, ynew, err, J, g):
    """One Fehlberg 7(8) step. K[0] must already hold f(y)."""
    n = y.shape[0]
    for s in range(1, 13):
        for i in range(n):
            acc = 0.0
            for r in range(s):
                a = _A[s, r]
                if a != 0.0:
                    acc += a * K[r, i]
            ytmp[i] = y[i] + h * acc
        full_field(kind, ytmp, par, alive, K[s], J, g)
    for i in range(n):
        acc = 0.0
        e = 0.0
        for s in range(13):
            acc += _B8[s] * K[s, i]
            e += _E[s] * K[s, i]
        ynew[i] = y[i] + h * acc
        err[i] = h * e


@njit(cache=True, nogil=True)
def _state_norm(dy):
    acc = 0.0
    for i in range(NSTATE):
        acc += dy[i] * dy[i]
    return np.sqrt(acc)


@njit(cache=True, nogil=True)
def _initial_step(kind, y, f0, par, alive, rtol, atol, span, ytmp, f1, J, g):
    # Hairer-Norsett-Wanner starting step heuristic, order 8
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 = max(d0, abs(y[i]) / sc)
        d1 = max(d1, abs(f0[i]) / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    for i in range(n):
        ytmp[i] = y[i] + h0 * f0[i]
    full_field(kind, ytmp, par, alive, f1, J, g)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d2 = max(d2, abs(f1[i] - f0[i]) / sc)
    d2 /= h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, span)


@njit(cache=True, nogil=True)
def integrate_kernel(kind, y0, par, t_end, out_t, out_y, rtol, atol, thr, eq_norm,
                     max_steps, stop_at_equilibrium, alive, seen, t_ext):
    """Adaptive integration from t=0 to ``t_end``.

    Steps land exactly on every time in ``out_t`` (sorted, > 0) and the state
    there is copied into ``out_y``. Cell compartments are clamped to zero
    (permanently) once they fall below ``thr`` without regrowing. ``alive``,
    ``seen`` and ``t_ext`` are updated in place.

    Returns (status, t, y, n_out, n_steps, n_rejected).
    """
    n = y0.shape[0]
    y = y0.copy()
    K = np.empty((13, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    fnew = np.empty(n)
    J = np.empty((NSTATE, NSTATE))
    g = np.empty(NSTATE)
    t_cross = np.full(NCELL, -1.0)

    t = 0.0
    n_out = 0
    n_out_total = out_t.shape[0]
    n_steps = 0
    n_rej = 0

    for j in range(NCELL):
        if abs(y[j]) >= thr:
            seen[j] = True

    full_field(kind, y, par, alive, K[0], J, g)
    if stop_at_equilibrium and _state_norm(K[0]) < eq_norm:
        return STATUS_EQUILIBRIUM, t, y, n_out, n_steps, n_rej

    h = _initial_step(kind, y, K[0], par, alive, rtol, atol, t_end, ytmp, fnew, J, g)
    status = STATUS_HORIZON
    while True:
        if t >= t_end:
            status = STATUS_HORIZON
            break
        if n_steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        target = t_end
        if n_out < n_out_total and out_t[n_out] < target:
            target = out_t[n_out]
        landing = False
        h_try = h
        if t + h >= target * (1.0 - 1e-15):
            h = target - t
            landing = True
        hmin = 1e-14 * max(1.0, abs(t))
        if h < hmin:
            status = STATUS_UNDERFLOW
            break

        rk_step(kind, y, h, par, alive, K, ytmp, ynew, err, J, g)
        enorm = 0.0
        finite = True
        for i in range(n):
            if not np.isfinite(ynew[i]):
                finite = False
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            enorm = max(enorm, abs(err[i]) / sc)
        if not finite:
            enorm = 1e10

        if enorm > 1.0:
            n_rej += 1
            h *= max(0.1, 0.9 * enorm ** (-1.0 / 8.0))
            continue

        t_new = target if landing else t + h
        # extinction bookkeeping before the state is overwritten
        for j in range(NCELL):
            if alive[j]:
                a_old = abs(y[j])
                a_new = abs(ynew[j])
                if a_old >= thr and a_new < thr:
                    t_cross[j] = t + (t_new - t) * (a_old - thr) / (a_old - a_new)
        for i in range(n):
            y[i] = ynew[i]
        t = t_new
        n_steps += 1

        full_field(kind, y, par, alive, fnew, J, g)
        clamped = False
        for j in range(NCELL):
            if not alive[j]:
                continue
            v = y[j]
            if abs(v) >= thr:
                seen[j] = True
                continue
            if not (seen[j] or v < 0.0):
                continue
            if v >= 0.0 and fnew[j] > 0.0:
                continue
            y[j] = 0.0
            alive[j] = False
            t_ext[j] = t_cross[j] if t_cross[j] >= 0.0 else t
            clamped = True
        if clamped:
            full_field(kind, y, par, alive, fnew, J, g)
        for i in range(n):
            K[0, i] = fnew[i]

        if landing and n_out < n_out_total and t == out_t[n_out]:
            for i in range(n):
                out_y[n_out, i] = y[i]
            n_out += 1

        if stop_at_equilibrium and _state_norm(fnew) < eq_norm:
            status = STATUS_EQUILIBRIUM
            break

        fac = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** (-1.0 / 8.0)))
        h *= fac
        if landing:
            h = max(h, h_try)
        if not np.isfinite(h):
            status = STATUS_NONFINITE
            break

    return status, t, y, n_out, n_steps, n_rej
