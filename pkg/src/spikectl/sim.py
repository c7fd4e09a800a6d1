"""Controlled spike-train simulation with posterior tracking.

Paths are advanced in lockstep with numpy.  Each path owns a counter-based
random stream keyed by ``(seed, path index)``, so a path's trajectory does
not depend on which batch it was simulated in.

Spike times are exact: candidates come from an exponential clock at a
dominating rate and are accepted with probability ``lambda g(Y_t-) / (lambda
g_max)`` (thinning).  Between candidates the flow is integrated with RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import prior as _prior
from .model import Model, rk4_step
from .prior import Prior
from .rng import PathStreams

__all__ = [
    "Policy",
    "zero_policy",
    "PathBatch",
    "Trajectory",
    "run_paths",
    "simulate_batch",
    "simulate",
    "posterior_trace",
    "sample_lambda",
]

Policy = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_CLOCK, _ACCEPT, _LAMBDA = 0, 1, 2


def zero_policy(t, y, z, n):
    return np.zeros(np.shape(y))


@dataclass
class PathBatch:
    """Raw output of :func:`run_paths` for a batch of paths."""

    path_ids: np.ndarray
    lam: np.ndarray | None
    y: np.ndarray
    z: np.ndarray
    n: np.ndarray
    control_cost: np.ndarray
    log_g_jumps: np.ndarray
    jumps: list
    record_times: np.ndarray | None = None
    rec_y: np.ndarray | None = None
    rec_z: np.ndarray | None = None
    rec_n: np.ndarray | None = None
    rec_gamma: np.ndarray | None = None

    @property
    def n_jumps(self) -> np.ndarray:
        return np.array([len(j) for j in self.jumps])


def sample_lambda(prior: Prior, streams: PathStreams, path_ids) -> np.ndarray:
    """Draw Lambda from the prior node list by inverse CDF, one draw per path."""
    u = streams.uniform(path_ids, np.zeros(np.shape(path_ids), dtype=np.uint64), _LAMBDA)
    cdf = np.cumsum(prior.weights)
    k = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)
    return prior.lambdas[k]


def run_paths(
    model: Model,
    policy: Policy,
    *,
    t0: float,
    T: float,
    y0,
    z0,
    n0,
    seed: int,
    path_ids,
    lam=None,
    dt_flow: float = 1e-3,
    dt_policy: float | None = None,
    record_times=None,
) -> PathBatch:
    """Advance a batch of controlled paths from ``t0`` to ``T``.

    With ``lam=None`` the spike train is a unit-rate Poisson process (the
    reference measure); otherwise ``lam`` holds one intensity parameter per
    path and spikes occur at rate ``lam * g(Y_t-)``.  The control is
    re-evaluated every ``dt_policy`` (default ``dt_flow``) and after every
    spike, and held constant in between.
    """
    ids = np.asarray(path_ids, dtype=np.uint64)
    m = ids.size
    streams = PathStreams(seed)
    dt_policy = dt_flow if dt_policy is None else dt_policy
    if not (dt_flow > 0 and dt_policy > 0):
        raise ValueError("time steps must be positive")

    t = np.full(m, float(t0))
    y = np.broadcast_to(np.asarray(y0, dtype=float), (m,)).copy()
    z = np.broadcast_to(np.asarray(z0, dtype=float), (m,)).copy()
    n = np.broadcast_to(np.asarray(n0, dtype=np.int64), (m,)).copy()
    cost = np.zeros(m)
    log_g = np.zeros(m)
    ctr = np.zeros(m, dtype=np.uint64)
    jumps = [[] for _ in range(m)]

    if lam is None:
        rate = np.ones(m)
    else:
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (m,)).copy()
        rate = lam * model.g_max
    with np.errstate(divide="ignore"):
        next_event = np.where(rate > 0, t + streams.exponential(ids, ctr, _CLOCK) / rate, np.inf)
    ctr += np.uint64(1)

    if record_times is not None:
        rt = np.asarray(record_times, dtype=float)
        nr = rt.size
        rec = {k: np.full((m, nr), np.nan) for k in ("y", "z", "n", "gamma")}
        rec_k = np.zeros(m, dtype=np.int64)
        _record(rec, rec_k, np.arange(m), rt, t, y, z, n, policy, atol=0.0)
    gamma = np.zeros(m)
    hold_until = t.copy()
    eps = 1e-12 * max(1.0, abs(T))
    # controls are refreshed on a common grid t0 + k * dt_policy, and after spikes
    n_holds = max(1, int(np.ceil((T - t0) / dt_policy - 1e-9)))
    hold_grid = np.append(t0 + dt_policy * np.arange(1, n_holds), T)

    while True:
        active = t < T - eps
        if not np.any(active):
            break
        need = active & (t >= hold_until - eps)
        if np.any(need):
            i = np.nonzero(need)[0]
            gi = np.asarray(policy(t[i], y[i], z[i], n[i]), dtype=float)
            if not np.all(np.isfinite(gi)):
                raise FloatingPointError("policy returned a non-finite control")
            gamma[i] = gi
            k = np.searchsorted(hold_grid, t[i] + eps, side="right")
            hold_until[i] = hold_grid[np.minimum(k, n_holds - 1)]
        stop = np.minimum(next_event, hold_until)
        if record_times is not None:
            stop = np.where(rec_k < nr, np.minimum(stop, rt[np.minimum(rec_k, nr - 1)]), stop)
        stop = np.where(active, np.clip(stop, t, T), t)
        span = stop - t
        steps = np.ceil(span / dt_flow - 1e-9).astype(np.int64)
        h = np.where(steps > 0, span / np.maximum(steps, 1), 0.0)
        for s in range(int(steps.max())):
            hs = h if s == 0 else np.where(s < steps, h, 0.0)
            y, z = rk4_step(model, y, z, gamma, hs)
        cost += 0.5 * gamma ** 2 * span
        t = stop

        fired = active & (next_event <= t + eps)
        if np.any(fired):
            i = np.nonzero(fired)[0]
            gy = model.g(y[i])
            if lam is None:
                accept = np.ones(i.size, dtype=bool)
            else:
                u = streams.uniform(ids[i], ctr[i], _ACCEPT)
                accept = u * model.g_max < gy
            e = streams.exponential(ids[i], ctr[i], _CLOCK)
            ctr[i] += np.uint64(1)
            next_event[i] = t[i] + e / rate[i]
            for k in np.nonzero(accept)[0]:
                j = i[k]
                jumps[j].append((float(t[j]), float(gy[k]), float(z[j])))
            acc = i[accept]
            with np.errstate(divide="ignore"):
                log_g[acc] += np.log(gy[accept])
            y[acc] = 0.0
            n[acc] += 1
            hold_until[acc] = t[acc]

        if record_times is not None:
            due = np.nonzero(active & (rec_k < nr))[0]
            if due.size:
                _record(rec, rec_k, due, rt, t, y, z, n, policy, atol=eps)

    batch = PathBatch(ids, lam, y, z, n, cost, log_g, jumps)
    if record_times is not None:
        batch.record_times = rt
        batch.rec_y, batch.rec_z, batch.rec_gamma = rec["y"], rec["z"], rec["gamma"]
        batch.rec_n = rec["n"].astype(np.int64)
    return batch


def _record(rec, rec_k, idx, rt, t, y, z, n, policy, atol):
    nr = rt.size
    while idx.size:
        k = rec_k[idx]
        hit = (k < nr) & (t[idx] >= rt[np.minimum(k, nr - 1)] - atol)
        idx = idx[hit]
        if not idx.size:
            return
        k = rec_k[idx]
        rec["y"][idx, k] = y[idx]
        rec["z"][idx, k] = z[idx]
        rec["n"][idx, k] = n[idx]
        rec["gamma"][idx, k] = policy(t[idx], y[idx], z[idx], n[idx])
        rec_k[idx] += 1


@dataclass
class Trajectory:
    times: np.ndarray
    y_path: np.ndarray
    gamma_path: np.ndarray
    n_path: np.ndarray
    z_path: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray
    jump_times: np.ndarray
    g_at_jumps: np.ndarray
    z_at_jumps: np.ndarray
    lambda_true: float
    seed: int
    path_index: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)


def _record_grid(t0: float, T: float, dt_record: float) -> np.ndarray:
    if not dt_record > 0:
        raise ValueError("dt_record must be positive")
    k = int(np.floor((T - t0) / dt_record + 1e-9))
    rt = t0 + dt_record * np.arange(k + 1)
    if T - rt[-1] > 1e-9 * max(1.0, T):
        rt = np.append(rt, T)
    return rt


def simulate_batch(
    model: Model,
    prior: Prior,
    policy: Policy,
    lam,
    T: float,
    dt_record: float,
    seed: int,
    paths,
    *,
    dt_flow: float = 1e-3,
    dt_policy: float | None = None,
    t0: float = 0.0,
    y0: float = 0.0,
    z0: float = 0.0,
    n0: int = 0,
) -> list[Trajectory]:
    """Simulate several paths under the true measure; see :func:`simulate`."""
    ids = np.arange(paths) if np.isscalar(paths) else np.asarray(paths)
    streams = PathStreams(seed)
    if isinstance(lam, str):
        if lam != "prior":
            raise ValueError("lam must be a number or 'prior'")
        lam_arr = sample_lambda(prior, streams, ids)
    else:
        lam_arr = np.broadcast_to(np.asarray(lam, dtype=float), ids.shape).copy()
        if np.any(lam_arr < 0) or np.any(lam_arr > prior.lambda_max + 1e-12):
            raise ValueError("lambda must lie in [0, lambda_max]")
    rt = _record_grid(t0, T, dt_record)
    b = run_paths(model, policy, t0=t0, T=T, y0=y0, z0=z0, n0=n0, seed=seed, path_ids=ids,
                  lam=lam_arr, dt_flow=dt_flow, dt_policy=dt_policy, record_times=rt)
    mean, var = _prior.posterior_moments(prior, b.rec_n, b.rec_z)
    out = []
    for p in range(ids.size):
        jt = np.array([j[0] for j in b.jumps[p]])
        out.append(Trajectory(
            times=rt, y_path=b.rec_y[p], gamma_path=b.rec_gamma[p], n_path=b.rec_n[p],
            z_path=b.rec_z[p], post_mean=np.atleast_1d(mean)[p], post_var=np.atleast_1d(var)[p],
            jump_times=jt,
            g_at_jumps=np.array([j[1] for j in b.jumps[p]]),
            z_at_jumps=np.array([j[2] for j in b.jumps[p]]),
            lambda_true=float(lam_arr[p]), seed=int(seed), path_index=int(ids[p]),
            meta={"n0": int(n0), "z0": float(z0), "t0": float(t0), "y0": float(y0)},
        ))
    return out


def simulate(model, prior, policy, lam, T, dt_record, seed, *, path_index: int = 0, **kw) -> Trajectory:
    """Simulate one controlled path under the true measure.

    ``lam`` is either a fixed intensity parameter in ``[0, lambda_max]`` or
    the string ``"prior"`` to draw it from the prior.  Posterior mean and
    variance are recorded every ``dt_record``.
    """
    return simulate_batch(model, prior, policy, lam, T, dt_record, seed, [path_index], **kw)[0]


def posterior_trace(traj: Trajectory, prior: Prior) -> np.ndarray:
    """Rows ``(t, mean, variance)`` recomputed from the recorded ``(n, z)``."""
    mean, var = _prior.posterior_moments(prior, traj.n_path, traj.z_path)
    return np.column_stack([traj.times, mean, var])
