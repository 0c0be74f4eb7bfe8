"""Compiled Dormand-Prince 5(4) core for the SIWS vector field.

Kept free of package imports so numba can cache the compiled kernels.
Status codes returned by `integrate_dopri5`: 0 = reached the end,
1 = step size underflow / step budget exhausted, 2 = clamp budget
exceeded after a domain projection.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_CLAMP = 2

_MAX_ATTEMPTS = 50_000_000


@njit(cache=True)
def field(bf, d, n, z):
    """Vector field (-d_f + (I - X(z)) b_f) z with d_f = diag(d)."""
    u = np.dot(bf, z)
    out = u - d * z
    for i in range(n):
        out[i] -= z[i] * u[i]
    return out


@njit(cache=True)
def _inf_norm(v):
    mx = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > mx:
            mx = a
    return mx


@njit(cache=True)
def integrate_dopri5(bf, d, n, z0, ts, rtol, atol, hmax, clamp_tol,
                     ss_tol, ss_runs):
    """Adaptive embedded RK 5(4) with per-step domain projection.

    Integrates from ts[0] and lands exactly on every sample instant in
    `ts`.  After each accepted step the state is clamped onto
    [0,1]^n x [0,inf)^m and the clamp magnitude recorded.  Early exit:
    once the field inf-norm stays below `ss_tol` for `ss_runs`
    consecutive accepted steps, the remaining samples repeat the
    current state.

    Returns:
        (zs, max_clamp, accepted, rejected, status, t_reached)
    """
    dim = z0.shape[0]
    nt = ts.shape[0]
    zs = np.zeros((nt, dim))
    zs[0] = z0

    t = ts[0]
    t_end = ts[nt - 1]
    z = z0.copy()
    max_clamp = 0.0
    acc = 0
    rej = 0
    status = STATUS_OK
    idx = 1

    hmin = 1e-14 * max(1.0, abs(t_end))
    h = min(hmax, 1e-3 * max(t_end - t, 1.0))

    k1 = field(bf, d, n, z)
    ss_count = 1 if _inf_norm(k1) < ss_tol else 0
    attempts = 0

    while idx < nt:
        if ss_count >= ss_runs:
            for r in range(idx, nt):
                zs[r] = z
            idx = nt
            break
        if h < hmin or attempts > _MAX_ATTEMPTS:
            status = STATUS_UNDERFLOW
            break
        attempts += 1

        ht = ts[idx] - t
        hit = h >= ht
        hh = ht if hit else h

        k2 = field(bf, d, n, z + hh * (0.2 * k1))
        k3 = field(bf, d, n, z + hh * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2))
        k4 = field(bf, d, n, z + hh * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2
                                       + 32.0 / 9.0 * k3))
        k5 = field(bf, d, n, z + hh * (19372.0 / 6561.0 * k1
                                       - 25360.0 / 2187.0 * k2
                                       + 64448.0 / 6561.0 * k3
                                       - 212.0 / 729.0 * k4))
        k6 = field(bf, d, n, z + hh * (9017.0 / 3168.0 * k1
                                       - 355.0 / 33.0 * k2
                                       + 46732.0 / 5247.0 * k3
                                       + 49.0 / 176.0 * k4
                                       - 5103.0 / 18656.0 * k5))
        znew = z + hh * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3
                         + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
                         + 11.0 / 84.0 * k6)
        k7 = field(bf, d, n, znew)
        errv = hh * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3
                     + 71.0 / 1920.0 * k4 - 17253.0 / 339200.0 * k5
                     + 22.0 / 525.0 * k6 - 1.0 / 40.0 * k7)

        errnorm = 0.0
        for i in range(dim):
            sc = atol + rtol * max(abs(z[i]), abs(znew[i]))
            q = errv[i] / sc
            errnorm += q * q
        errnorm = np.sqrt(errnorm / dim)

        if errnorm <= 1.0:
            t = ts[idx] if hit else t + hh
            z = znew
            clamp = 0.0
            for i in range(n):
                v = z[i]
                if v < 0.0:
                    if -v > clamp:
                        clamp = -v
                    z[i] = 0.0
                elif v > 1.0:
                    if v - 1.0 > clamp:
                        clamp = v - 1.0
                    z[i] = 1.0
            for i in range(n, dim):
                v = z[i]
                if v < 0.0:
                    if -v > clamp:
                        clamp = -v
                    z[i] = 0.0
            if clamp > max_clamp:
                max_clamp = clamp
            acc += 1
            if clamp > clamp_tol:
                status = STATUS_CLAMP
                break
            if hit:
                zs[idx] = z
                idx += 1
            k1 = field(bf, d, n, z)
            if _inf_norm(k1) < ss_tol:
                ss_count += 1
            else:
                ss_count = 0
            if errnorm == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * errnorm ** -0.2
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            # a step truncated to land on a sample must not shrink the
            # controller's preferred step
            grown = hh * fac
            if hit and h > grown:
                grown = h
            h = grown if grown < hmax else hmax
        else:
            rej += 1
            fac = 0.9 * errnorm ** -0.2
            if fac < 0.2:
                fac = 0.2
            h = hh * fac

    return zs, max_clamp, acc, rej, status, t
