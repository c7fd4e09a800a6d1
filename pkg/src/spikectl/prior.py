"""Prior measures on the intensity parameter and the reduced posterior family.

A prior is a finite list of weighted nodes on ``[0, lambda_max]``.  Observing
``n`` spikes while the intensity shape accumulates ``z = int g(Y_u) du``
turns the prior into the tilted measure

    m(n, z)(dl) = l**n exp(-l z) prior(dl) / Phi(n, z),

so the whole posterior is a function of the pair ``(n, z)``.  Everything here
works on the log scale: ``l**n exp(-l z)`` underflows quickly for large ``n``.

All functions broadcast over array-valued ``n`` and ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DegeneratePosteriorError",
    "Prior",
    "make_atomic_prior",
    "make_quadrature_prior",
    "uniform_prior",
    "log_phi",
    "phi",
    "xi",
    "psi",
    "dz_psi",
    "posterior_weights",
    "posterior_moments",
]


class DegeneratePosteriorError(ValueError):
    """Raised when Phi(n, z) = 0, i.e. all prior mass sits at lambda = 0 but n >= 1."""


@dataclass(frozen=True, eq=False)
class Prior:
    """Weighted node list; ``lambdas`` strictly increasing, ``weights`` sum to one."""

    lambdas: np.ndarray
    weights: np.ndarray
    lambda_max: float
    kind: str = "atomic"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if lam.ndim != 1 or lam.shape != w.shape or lam.size == 0:
            raise ValueError("lambdas and weights must be non-empty 1-d arrays of equal length")
        if np.any(lam < 0) or np.any(lam > self.lambda_max):
            raise ValueError("nodes must lie in [0, lambda_max]")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        lam.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lambda_max", float(self.lambda_max))

    @property
    def nodes(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    @property
    def mean(self) -> float:
        return float(xi(self, 0, 0.0))

    @property
    def variance(self) -> float:
        return float(psi(self, 0, 0.0))

    def __repr__(self):
        return f"Prior(kind={self.kind!r}, K={self.lambdas.size}, lambda_max={self.lambda_max:g})"


def make_atomic_prior(atoms: Iterable[Sequence[float]]) -> Prior:
    """Build a normalized prior from ``(lambda, weight)`` pairs.

    Duplicate atoms are merged by adding their weights.

    >>> p = make_atomic_prior([(0, 1), (0.25, 2), (0.5, 4), (0.75, 2), (1, 1)])
    >>> p.weights.tolist()
    [0.1, 0.2, 0.4, 0.2, 0.1]
    """
    atoms = [tuple(a) for a in atoms]
    if not atoms:
        raise ValueError("atom list is empty")
    lam = np.array([float(a[0]) for a in atoms])
    w = np.array([float(a[1]) for a in atoms])
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(w))):
        raise ValueError("atoms must be finite")
    if np.any(lam < 0):
        raise ValueError("atom locations must be nonnegative")
    if np.any(w <= 0):
        raise ValueError("atom weights must be positive")
    uniq, inv = np.unique(lam, return_inverse=True)
    merged = np.bincount(inv, weights=w)
    return Prior(uniq, merged / merged.sum(), lambda_max=float(uniq[-1]), kind="atomic")


def make_quadrature_prior(
    density: Callable[[np.ndarray], np.ndarray],
    support: tuple[float, float],
    K: int = 64,
) -> Prior:
    """Discretize a density on ``[a, b]`` with a K-point Gauss-Legendre rule."""
    a, b = map(float, support)
    if not (0 <= a < b):
        raise ValueError("support must satisfy 0 <= a < b")
    if K < 2:
        raise ValueError("need at least 2 quadrature nodes")
    x, wq = np.polynomial.legendre.leggauss(K)
    lam = 0.5 * (b - a) * x + 0.5 * (a + b)
    dens = np.asarray(density(lam), dtype=float) * np.ones_like(lam)
    if np.any(dens < 0) or not np.all(np.isfinite(dens)):
        raise ValueError("density must be finite and nonnegative on the support")
    w = wq * dens
    if w.sum() <= 0:
        raise ValueError("density integrates to zero on the support")
    keep = w > 0
    w = w[keep] / w[keep].sum()
    return Prior(lam[keep], w, lambda_max=b, kind="quadrature")


def uniform_prior(a: float, b: float, K: int = 64) -> Prior:
    return make_quadrature_prior(lambda lam: np.ones_like(lam), (a, b), K)


def _log_terms(prior: Prior, n, z) -> np.ndarray:
    """log(w_i l_i^n e^{-l_i z}) with shape broadcast(n, z) + (K,)."""
    n = np.asarray(n)
    z = np.asarray(z, dtype=float)
    if np.any(n < 0):
        raise ValueError("n must be nonnegative")
    lam = prior.lambdas
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    n_ = n[..., None]
    # 0 * log(0) must read as log(0**0) = 0
    pow_term = np.where(n_ == 0, 0.0, n_ * np.where(lam > 0, log_lam, 0.0))
    pow_term = np.where((n_ > 0) & (lam == 0), -np.inf, pow_term)
    return np.log(prior.weights) + pow_term - lam * z[..., None]


def _squeeze(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def log_phi(prior: Prior, n, z):
    """log Phi(n, z) = log sum_i w_i l_i^n exp(-l_i z); ``-inf`` when degenerate."""
    t = _log_terms(prior, n, z)
    with np.errstate(divide="ignore"):
        out = logsumexp(t, axis=-1)
    # the weights are normalized, so pin the rounding at the origin
    out = np.where((np.asarray(n) == 0) & (np.asarray(z) == 0), 0.0, out)
    return _squeeze(out)


def phi(prior: Prior, n, z):
    return _squeeze(np.exp(log_phi(prior, n, z)))


def _normalized(prior: Prior, n, z) -> np.ndarray:
    t = _log_terms(prior, n, z)
    m = np.max(t, axis=-1, keepdims=True)
    if np.any(np.isneginf(m)):
        raise DegeneratePosteriorError("Phi(n, z) = 0: all prior mass at lambda = 0 with n >= 1")
    p = np.exp(t - m)
    return p / p.sum(axis=-1, keepdims=True)


def posterior_weights(prior: Prior, n, z) -> np.ndarray:
    """Weights of m(n, z) on ``prior.lambdas`` (last axis).

    The lambda = 0 node keeps its slot and gets weight exactly 0 once n >= 1.
    """
    return _normalized(prior, n, z)


def posterior_moments(prior: Prior, n, z) -> tuple:
    """Return ``(mean, variance)`` of m(n, z); the variance is a central moment."""
    p = _normalized(prior, n, z)
    lam = prior.lambdas
    mean = p @ lam
    var = np.einsum("...k,...k->...", p, (lam - mean[..., None]) ** 2)
    return _squeeze(mean), _squeeze(var)


def xi(prior: Prior, n, z):
    """Posterior mean Phi(n+1, z) / Phi(n, z)."""
    return posterior_moments(prior, n, z)[0]


def psi(prior: Prior, n, z):
    """Posterior variance of m(n, z)."""
    return posterior_moments(prior, n, z)[1]


def dz_psi(prior: Prior, n, z):
    """z-derivative of the posterior variance.

    Uses d/dz psi(n) = xi(n) [psi(n) - psi(n+1) - (psi(n)/xi(n))**2], with the
    value 0 where the posterior mean is 0 (the variance is then identically 0).
    """
    n = np.asarray(n)
    m0, v0 = posterior_moments(prior, n, z)
    m0, v0 = np.asarray(m0), np.asarray(v0)
    out = np.zeros(np.broadcast(n, np.asarray(z)).shape)
    pos = m0 > 0
    if np.any(pos):
        nb, zb = np.broadcast_arrays(n, np.asarray(z, dtype=float))
        _, v1 = posterior_moments(prior, nb[pos] + 1, zb[pos])
        m, v = np.broadcast_to(m0, out.shape)[pos], np.broadcast_to(v0, out.shape)[pos]
        out[pos] = m * (v - v1 - (v / m) ** 2)
    return _squeeze(out)
