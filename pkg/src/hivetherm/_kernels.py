"""Compiled inner loops for integration and fitting.

All temperatures passed in here are absolute degrees C with NaN marking a
missing tick. ``adj`` must already carry the ext fallback for treated hives.
"""

import math

import numpy as np
from numba import njit

EXACT = 0
EULER = 1

STATUS_OK = 0
STATUS_OVERFLOW = 1

OVERFLOW_LIMIT = 1.0e6


@njit(cache=True, nogil=True)
def gain(theta_ext, s_c, s_h, literal):
    if theta_ext >= 0.0:
        return 2.0 + s_c
    if literal:
        return 2.0 - s_h
    return 2.0 + s_h


@njit(cache=True, nogil=True)
def advance(theta, forcing, k, dt, integrator, substeps):
    """Advance d(theta)/dt = forcing - k*theta by ``dt`` with forcing held constant."""
    if integrator == EXACT:
        if k == 0.0:
            return theta + forcing * dt
        decay = math.exp(-k * dt)
        return theta * decay + (forcing / k) * (1.0 - decay)
    h = dt / substeps
    for _ in range(substeps):
        theta += h * (forcing - k * theta)
    return theta


@njit(cache=True, nogil=True)
def integrate(ext, adj, core, theta_ideal, s_c, s_h, literal, integrator,
              substeps, gap, out):
    """Fill ``out`` with the reconstructed absolute core temperature.

    The state is seeded from the first present core value. Forcing gaps
    shorter than ``gap`` ticks are bridged by holding the last forcing; a run
    of ``gap`` or more missing forcing ticks drops the state (and blanks the
    ticks that relied on held forcing) until the next present core value.
    """
    n = ext.shape[0]
    have = False
    held = False
    run = 0
    theta = 0.0
    last_e = 0.0
    last_a = 0.0
    for i in range(n):
        e = ext[i]
        fe = not math.isnan(e)
        if not have and not math.isnan(core[i]) and (fe or held):
            theta = core[i] - theta_ideal
            have = True
        out[i] = theta + theta_ideal if have else np.nan
        if fe:
            run = 0
            last_e = e
            a = adj[i]
            last_a = e if math.isnan(a) else a
            held = True
        else:
            run += 1
            if run >= gap:
                if have:
                    for j in range(i - run + 2, i + 1):
                        out[j] = np.nan
                have = False
                held = False
        if have:
            if not held:
                have = False
                continue
            te = last_e - theta_ideal
            ta = last_a - theta_ideal
            k = gain(te, s_c, s_h, literal)
            theta = advance(theta, te + ta, k, 1.0, integrator, substeps)
            if not abs(theta) <= OVERFLOW_LIMIT:
                return STATUS_OVERFLOW
    return STATUS_OK


@njit(cache=True, nogil=True)
def residuals(ext, adj, core, x, literal, integrator, substeps, gap, out, r):
    """Residuals (reconstruction - core) into ``r``; zero where undefined.

    Returns (sum of squares, count, status).
    """
    status = integrate(ext, adj, core, x[2], x[0], x[1], literal, integrator,
                       substeps, gap, out)
    if status != STATUS_OK:
        return np.inf, 0, status
    ss = 0.0
    count = 0
    for i in range(core.shape[0]):
        if math.isnan(core[i]) or math.isnan(out[i]):
            r[i] = 0.0
        else:
            d = out[i] - core[i]
            r[i] = d
            ss += d * d
            count += 1
    return ss, count, STATUS_OK


@njit(cache=True, nogil=True)
def _clip(x, lo, hi):
    y = x.copy()
    for j in range(y.shape[0]):
        if y[j] < lo[j]:
            y[j] = lo[j]
        elif y[j] > hi[j]:
            y[j] = hi[j]
    return y


@njit(cache=True, nogil=True)
def damped_least_squares(ext, adj, core, x0, lo, hi, literal, integrator,
                         substeps, gap, max_iter, rtol, fd_step):
    """Box-clamped Levenberg-Marquardt on the reconstruction residuals.

    Jacobian columns are central differences with step ``fd_step`` (shrunk to
    one side at a bound). Stops when the relative RMSE improvement of an
    accepted step drops below ``rtol``, after ``max_iter`` iterations, or when
    the damping saturates.

    Returns (x, sum of squares, count, iterations).
    """
    n = core.shape[0]
    p = x0.shape[0]
    out = np.empty(n)
    r = np.empty(n)
    rp = np.empty(n)
    rm = np.empty(n)
    rn = np.empty(n)
    jac = np.empty((n, p))
    x = _clip(x0, lo, hi)
    cost, count, status = residuals(ext, adj, core, x, literal, integrator,
                                    substeps, gap, out, r)
    if count == 0 or status != STATUS_OK:
        return x, cost, count, 0
    lam = 1.0e-3
    it = 0
    while it < max_iter:
        it += 1
        if cost <= 0.0:
            break
        for j in range(p):
            xp = x.copy()
            xm = x.copy()
            xp[j] = min(x[j] + fd_step, hi[j])
            xm[j] = max(x[j] - fd_step, lo[j])
            cp, _, sp = residuals(ext, adj, core, xp, literal, integrator,
                                  substeps, gap, out, rp)
            cm, _, sm = residuals(ext, adj, core, xm, literal, integrator,
                                  substeps, gap, out, rm)
            width = xp[j] - xm[j]
            if sp != STATUS_OK or sm != STATUS_OK or width <= 0.0:
                for i in range(n):
                    jac[i, j] = 0.0
            else:
                for i in range(n):
                    jac[i, j] = (rp[i] - rm[i]) / width
        a = jac.T @ jac
        g = jac.T @ r
        dmax = 0.0
        for j in range(p):
            dmax = max(dmax, a[j, j])
        if dmax <= 0.0:
            break
        accepted = False
        new_cost = cost
        xn = x
        while lam < 1.0e12:
            m = a.copy()
            for j in range(p):
                m[j, j] += lam * max(a[j, j], 1.0e-9 * dmax)
            delta = np.linalg.solve(m, -g)
            xn = _clip(x + delta, lo, hi)
            new_cost, _, st = residuals(ext, adj, core, xn, literal,
                                        integrator, substeps, gap, out, rn)
            if st == STATUS_OK and new_cost < cost:
                accepted = True
                lam = max(lam * 0.1, 1.0e-12)
                break
            lam *= 10.0
        if not accepted:
            break
        old_rmse = math.sqrt(cost / count)
        new_rmse = math.sqrt(new_cost / count)
        x = xn
        cost = new_cost
        for i in range(n):
            r[i] = rn[i]
        if old_rmse - new_rmse < rtol * old_rmse:
            break
    return x, cost, count, it


@njit(cache=True, nogil=True)
def day_grid_rss(ext, adj, core, bounds, grid, literal, integrator, substeps,
                 gap):
    """Per-day sum of squared residuals for every parameter row of ``grid``.

    Each day is reconstructed on its own (seeded from its first present core
    value). ``bounds`` holds day start ticks followed by the end tick.
    Returns (rss[g, d], counts[d]).
    """
    n_days = bounds.shape[0] - 1
    n_grid = grid.shape[0]
    rss = np.zeros((n_grid, n_days))
    counts = np.zeros(n_days, dtype=np.int64)
    for d in range(n_days):
        a = bounds[d]
        b = bounds[d + 1]
        e = ext[a:b]
        j = adj[a:b]
        c = core[a:b]
        out = np.empty(b - a)
        r = np.empty(b - a)
        for g in range(n_grid):
            ss, cnt, st = residuals(e, j, c, grid[g], literal, integrator,
                                    substeps, gap, out, r)
            rss[g, d] = ss if st == STATUS_OK else np.inf
            counts[d] = cnt
    return rss, counts


@njit(cache=True, nogil=True)
def euler_reference(ext, adj, theta0, theta_ideal, s_c, s_h, literal,
                    substeps, out):
    """Free-running fine-step Euler trajectory from ``theta0`` (absolute)."""
    theta = theta0 - theta_ideal
    for i in range(ext.shape[0]):
        out[i] = theta + theta_ideal
        te = ext[i] - theta_ideal
        ta = adj[i] - theta_ideal
        k = gain(te, s_c, s_h, literal)
        theta = advance(theta, te + ta, k, 1.0, EULER, substeps)
