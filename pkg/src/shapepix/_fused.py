"""Fused loops for the inner primal-dual iteration.

These compute exactly ``project_ball(zeta + sigma * gradient(Ibar), g)`` and
``I + tau * divergence(zeta)`` without temporaries.
"""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _ball(z1, z2, r):
    n2 = z1 * z1 + z2 * z2
    if n2 > r * r:
        s = r / np.sqrt(n2)
        return z1 * s, z2 * s
    return z1, z2


@njit(cache=True, fastmath=True)
def dual_update(zeta, Ibar, sigma, g, edges):
    n0, n1 = Ibar.shape
    for i in range(n0 - 1):
        for j in range(n1 - 1):
            z1 = (zeta[i, j, 0] + sigma * (Ibar[i + 1, j] - Ibar[i, j])) * edges[i, j, 0]
            z2 = (zeta[i, j, 1] + sigma * (Ibar[i, j + 1] - Ibar[i, j])) * edges[i, j, 1]
            zeta[i, j, 0], zeta[i, j, 1] = _ball(z1, z2, g[i, j])
        j = n1 - 1
        z1 = (zeta[i, j, 0] + sigma * (Ibar[i + 1, j] - Ibar[i, j])) * edges[i, j, 0]
        z2 = zeta[i, j, 1] * edges[i, j, 1]
        zeta[i, j, 0], zeta[i, j, 1] = _ball(z1, z2, g[i, j])
    i = n0 - 1
    for j in range(n1):
        z1 = zeta[i, j, 0] * edges[i, j, 0]
        z2 = zeta[i, j, 1]
        if j < n1 - 1:
            z2 += sigma * (Ibar[i, j + 1] - Ibar[i, j])
        z2 *= edges[i, j, 1]
        zeta[i, j, 0], zeta[i, j, 1] = _ball(z1, z2, g[i, j])


@njit(cache=True, fastmath=True)
def primal_update(I, zeta, tau, out):
    n0, n1 = I.shape
    for i in range(n0):
        for j in range(n1):
            d = 0.0
            if i == 0:
                d += zeta[i, j, 0]
            elif i == n0 - 1:
                d -= zeta[i - 1, j, 0]
            else:
                d += zeta[i, j, 0] - zeta[i - 1, j, 0]
            if j == 0:
                d += zeta[i, j, 1]
            elif j == n1 - 1:
                d -= zeta[i, j - 1, 1]
            else:
                d += zeta[i, j, 1] - zeta[i, j - 1, 1]
            out[i, j] = I[i, j] + tau * d


@njit(cache=True)
def extrapolate(I_new, I_old, theta, out):
    n0, n1 = I_new.shape
    for i in range(n0):
        for j in range(n1):
            out[i, j] = I_new[i, j] + theta * (I_new[i, j] - I_old[i, j])


@njit(cache=True)
def tv_value(I, g, edges):
    n0, n1 = I.shape
    total = 0.0
    for i in range(n0):
        row = 0.0
        for j in range(n1):
            a = 0.0
            b = 0.0
            if i < n0 - 1:
                a = (I[i + 1, j] - I[i, j]) * edges[i, j, 0]
            if j < n1 - 1:
                b = (I[i, j + 1] - I[i, j]) * edges[i, j, 1]
            row += g[i, j] * np.sqrt(a * a + b * b)
        total += row
    return total


@njit(cache=True)
def simplex_phi(x, f, mu):
    val = 0.0
    slope = 0.0
    n0, n1 = x.shape
    for i in range(n0):
        for j in range(n1):
            fk = f[i, j]
            if fk > 0.0:
                t = x[i, j] + mu * fk
                if t > 0.0:
                    val += fk * t
                    slope += fk * fk
    return val, slope


@njit(cache=True)
def simplex_newton(x, f, mu, max_steps):
    """Root of ``sum(f * max(x + mu f, 0)) = 1`` by Newton from ``mu``.

    Returns ``(mu, steps)``; ``steps == -1`` signals a flat start (no active entries).
    """
    val, slope = simplex_phi(x, f, mu)
    err = abs(val - 1.0)
    for it in range(max_steps):
        if slope == 0.0:
            return mu, -1
        if err <= 1e-13:
            return mu, it
        trial = mu - (val - 1.0) / slope
        tval, tslope = simplex_phi(x, f, trial)
        terr = abs(tval - 1.0)
        if terr >= err and it > 0:
            # rounding floor reached
            return mu, it
        mu, val, slope, err = trial, tval, tslope, terr
    return mu, max_steps


@njit(cache=True)
def simplex_apply(x, f, mask, mu, out):
    n0, n1 = x.shape
    for i in range(n0):
        for j in range(n1):
            if mask[i, j]:
                t = x[i, j] + mu * f[i, j]
                out[i, j] = t if t > 0.0 else 0.0
            else:
                out[i, j] = 0.0


@njit(cache=True)
def cheeger_iterations(I, zeta, Ibar, f, mask, g, edges, tau, sigma, mu, n_iter, accel):
    """``n_iter`` primal-dual steps for the single-constraint problem, in place.

    Returns ``(tau, sigma, mu, change)`` where ``change`` is the Frobenius
    norm of the last primal update.
    """
    moved = np.empty_like(I)
    change = 0.0
    for _ in range(n_iter):
        dual_update(zeta, Ibar, sigma, g, edges)
        primal_update(I, zeta, tau, moved)
        mu, steps = simplex_newton(moved, f, mu, 200)
        if steps < 0:
            hi = -1e300
            ff = 0.0
            n0, n1 = f.shape
            for i in range(n0):
                for j in range(n1):
                    if f[i, j] > 0.0:
                        b = -moved[i, j] / f[i, j]
                        if b > hi:
                            hi = b
                        ff += f[i, j] * f[i, j]
            mu, steps = simplex_newton(moved, f, hi + 1.0 / ff, 200)
        simplex_apply(moved, f, mask, mu, moved)
        theta = 1.0
        if accel:
            theta = 1.0 / np.sqrt(1.0 + 4.0 * tau)
        change = 0.0
        n0, n1 = I.shape
        for i in range(n0):
            for j in range(n1):
                dlt = moved[i, j] - I[i, j]
                change += dlt * dlt
                Ibar[i, j] = moved[i, j] + theta * dlt
                I[i, j] = moved[i, j]
        if accel:
            tau = theta * tau
            sigma = sigma / theta
    return tau, sigma, mu, np.sqrt(change)
