"""Compiled cost evaluation for a whole GA population.

Each candidate is integrated independently inside a ``prange`` loop, so the
result for a candidate never depends on how the loop is split over threads.
"""

import numba
import numpy as np
from numba import njit, prange

# the installed TBB is too old for numba; workqueue is always available
numba.config.THREADING_LAYER = "workqueue"

from . import _kernels as K

# gene layout
G_B, G_BETA, G_DELTA, G_ALPHA, G_IOTA, G_GAMMA, G_V0, G_D0 = range(8)
NGENE = 8


@njit(cache=True, nogil=True)
def sigmoid(x, k, x_star, p):
    return p / (1.0 + np.exp(-k * (x - x_star)))


@njit(cache=True, nogil=True)
def candidate_cost(genes, scale, C0, t_data, logv_data, out_t, i_check, k, x_star, p_pen,
                   rtol, atol, thr, max_steps, floor):
    """Cost of one gene vector; +inf when the simulation fails or V <= 0.

    ``out_t`` holds the positive data times and the penalty time (sorted,
    unique); ``i_check`` is the index of the penalty time in it. Data at
    t = 0 are compared with the initial state.
    """
    B = genes[G_B]
    beta = genes[G_BETA]
    delta = genes[G_DELTA]
    par = np.empty(K.NPAR)
    par[K.P_B] = B
    par[K.P_BETA] = beta
    par[K.P_DELTA] = delta
    par[K.P_IOTA] = genes[G_IOTA]
    par[K.P_ALPHA] = genes[G_ALPHA]
    par[K.P_GAMMA] = genes[G_GAMMA]
    par[K.P_ETA] = B / (1.0 + beta)
    par[K.P_KAPPA] = 1.0 + delta / (1.0 + beta)
    par[K.P_WHICH] = 0.0

    y0 = np.zeros(K.NCORE)
    y0[0] = C0
    y0[4] = genes[G_V0] / scale
    y0[5] = genes[G_D0] / scale
    n_out = out_t.shape[0]
    out_y = np.empty((n_out, K.NCORE))
    alive = np.ones(K.NCELL, dtype=np.bool_)
    seen = np.zeros(K.NCELL, dtype=np.bool_)
    t_ext = np.full(K.NCELL, np.nan)
    status, t, y, got, n_steps, n_rej = K.integrate_kernel(
        K.KIND_MODEL, y0, par, out_t[n_out - 1], out_t, out_y, rtol, atol, thr, 1e-300,
        max_steps, False, alive, seen, t_ext)
    if got < n_out:
        return np.inf

    s = 0.0
    j = 0
    for i in range(t_data.shape[0]):
        if t_data[i] == 0.0:
            v = y0[4]
        else:
            while out_t[j] != t_data[i]:
                j += 1
            v = out_y[j, 4]
        if not v > 0.0:
            return np.inf
        r = logv_data[i] - np.log(v * scale)
        s += r * r
    cells = out_y[i_check, 0] + out_y[i_check, 1] + out_y[i_check, 2] + out_y[i_check, 3]
    cells = max(cells, floor)
    total = max(s + sigmoid(np.log(cells), k, x_star, p_pen), floor)
    return np.log(total)


@njit(cache=True, parallel=True)
def population_cost(genes, todo, scale, C0, t_data, logv_data, out_t, i_check, k, x_star, p_pen,
                    rtol, atol, thr, max_steps, floor, out):
    """Fill ``out[i]`` for every row ``i`` with ``todo[i]`` set."""
    for i in prange(genes.shape[0]):
        if todo[i]:
            out[i] = candidate_cost(genes[i], scale, C0, t_data, logv_data, out_t, i_check,
                                    k, x_star, p_pen, rtol, atol, thr, max_steps, floor)
