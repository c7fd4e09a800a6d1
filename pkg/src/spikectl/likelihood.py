"""Change-of-measure weights for spike paths.

Under the reference measure the spike train is a unit-rate Poisson process.
The density of the model with intensity ``lambda * g(Y_{t-})`` against it, on
``[t0, t1]``, is

    L(lambda) = prod_i lambda g(Y_{tau_i-}) * exp((t1 - t0) - lambda * int g(Y_u) du).

It only depends on the path through the g-values at spikes and the integral
of g, which is what :class:`PathRecord` stores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .prior import Prior

__all__ = ["PathRecord", "log_weight", "log_weights", "posterior_from_path"]


@dataclass(frozen=True)
class PathRecord:
    t0: float
    t1: float
    jump_times: tuple = field(default=())
    g_at_jumps: tuple = field(default=())
    integral_g: float = 0.0

    def __post_init__(self):
        jt = tuple(float(t) for t in self.jump_times)
        ga = tuple(float(g) for g in self.g_at_jumps)
        if len(jt) != len(ga):
            raise ValueError("jump_times and g_at_jumps must have equal length")
        if self.t1 < self.t0:
            raise ValueError("t1 must not precede t0")
        if any(b <= a for a, b in zip(jt, jt[1:])):
            raise ValueError("jump times must be strictly increasing")
        if jt and (jt[0] <= self.t0 or jt[-1] > self.t1):
            raise ValueError("jump times must lie in (t0, t1]")
        if any(g < 0 for g in ga):
            raise ValueError("g values must be nonnegative")
        if self.integral_g < 0:
            raise ValueError("integral_g must be nonnegative")
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "g_at_jumps", ga)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def split(self, s: float, integral_g_before: float) -> tuple["PathRecord", "PathRecord"]:
        """Cut the record at time ``s`` given the integral of g over ``[t0, s]``."""
        k = int(np.searchsorted(self.jump_times, s, side="right"))
        left = PathRecord(self.t0, s, self.jump_times[:k], self.g_at_jumps[:k], integral_g_before)
        right = PathRecord(s, self.t1, self.jump_times[k:], self.g_at_jumps[k:],
                           self.integral_g - integral_g_before)
        return left, right


def _log_sum_g(path: PathRecord) -> float:
    g = np.asarray(path.g_at_jumps)
    if np.any(g == 0):
        return -np.inf
    return float(np.sum(np.log(g)))


def log_weights(path: PathRecord, lambdas) -> np.ndarray:
    """Vectorized :func:`log_weight` over an array of lambda values."""
    lam = np.asarray(lambdas, dtype=float)
    k = path.n_jumps
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    jump_part = np.where(lam > 0, k * log_lam, -np.inf) if k else np.zeros_like(lam)
    if k:
        jump_part = jump_part + _log_sum_g(path)
    return jump_part + (path.t1 - path.t0) - lam * path.integral_g


def log_weight(path: PathRecord, lam: float) -> float:
    """log L(lam) for the recorded path; ``-inf`` encodes a zero likelihood."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return float(log_weights(path, np.array([lam]))[0])


def posterior_from_path(prior: Prior, path: PathRecord) -> np.ndarray:
    """Posterior weights on ``prior.lambdas``: prior weights reweighted by L, normalized."""
    lw = log_weights(path, prior.lambdas) + np.log(prior.weights)
    if np.all(np.isneginf(lw)):
        raise ValueError("every prior node has zero likelihood for this path")
    return np.exp(lw - logsumexp(lw))
