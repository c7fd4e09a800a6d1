"""Reference computations that deliberately avoid the package's fast paths."""

import itertools
import math

import numpy as np


def moments_direct(lams, weights, n, z):
    """Posterior mean/variance/third central moment by plain summation (no log domain)."""
    w = np.array([p * (l ** n) * math.exp(-l * z) for l, p in zip(lams, weights)])
    w = w / w.sum()
    lams = np.asarray(lams, dtype=float)
    m = float(w @ lams)
    v = float(w @ (lams - m) ** 2)
    k3 = float(w @ (lams - m) ** 3)
    return m, v, k3


def brute_force_dp(model, prior_psi, prior_xi, grid):
    """Backward recursion over every node and every control, one transition weight at a time.

    Mirrors the explicit scheme's transition weights, including the gradient
    extrapolation at the box edges, but evaluates each control separately.
    """
    y, z = grid.y, grid.z
    N = grid.n_max + 1
    V = np.zeros((grid.ny, grid.nz, N))
    for i, j, n in itertools.product(range(grid.ny), range(grid.nz), range(N)):
        V[i, j, n] = grid.kappa * prior_psi(n, z[j])
    dt, dy, dz = grid.dt, grid.dy, grid.dz
    for _ in range(grid.nt):
        W = np.empty_like(V)
        for i, j, n in itertools.product(range(grid.ny), range(grid.nz), range(N)):
            b = float(model.b(y[i]))
            g = float(model.g(y[i]))
            th = prior_xi(n, z[j]) * g
            best = math.inf
            for gam in grid.gammas:
                a = b + gam
                w = {}

                def add(key, p):
                    w[key] = w.get(key, 0.0) + p

                py = dt * abs(a) / dy
                if a > 0:
                    if i < grid.ny - 1:
                        add((i + 1, j, n), py); add((i, j, n), -py)
                    else:
                        add((i, j, n), py); add((i - 1, j, n), -py)
                elif a < 0:
                    if i > 0:
                        add((i - 1, j, n), py); add((i, j, n), -py)
                    else:
                        add((i, j, n), py); add((i + 1, j, n), -py)
                pz = dt * g / dz
                if j < grid.nz - 1:
                    add((i, j + 1, n), pz); add((i, j, n), -pz)
                else:
                    add((i, j, n), pz); add((i, j - 1, n), -pz)
                add((grid.i_zero, j, min(n + 1, grid.n_max)), dt * th)
                add((i, j, n), 1.0 - dt * th)
                val = dt * 0.5 * gam ** 2 + sum(p * V[key] for key, p in w.items())
                best = min(best, val)
            W[i, j, n] = best
        V = W
    return V


def two_point_zero_policy_cost(z, tau, kappa=1.0):
    """Expected terminal cost for prior (delta_0 + delta_1)/2, unit g, zero control.

    Any spike pins the posterior on lambda = 1 (variance 0), so only the
    no-spike branch contributes: P(no spike) * Var(posterior at z + tau).
    """
    a0, a1 = 0.5, 0.5 * math.exp(-z)
    p_none = (a0 + a1 * math.exp(-tau)) / (a0 + a1)
    r = math.exp(-(z + tau))
    q = r / (1.0 + r)
    return kappa * p_none * q * (1.0 - q)
