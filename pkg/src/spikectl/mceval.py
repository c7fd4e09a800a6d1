"""Monte Carlo evaluation of a feedback policy under the reference measure.

Paths are drawn with a unit-rate Poisson spike train (no thinning, no
knowledge of the intensity) and reweighted by the averaged likelihood

    <L> = sum_i w_i(n, z) L(lambda_i),

where ``w(n, z)`` are the posterior weights at the starting state.  The
weighted cost ``<L> * (int gamma**2/2 + kappa * psi(n + dN, z_T))`` is an
unbiased estimate of the policy's expected cost under the true dynamics.
This estimator shares no code with the PDE solver beyond the model and the
posterior moments, which is what makes it useful as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import prior as _prior
from .hjb import GridSpec, ValueGrid, eval_policy, eval_value
from .model import Model
from .prior import Prior
from .sim import Policy, run_paths, zero_policy

__all__ = ["EvalReport", "evaluate", "weighted_costs", "PointComparison", "compare_to_pde"]


@dataclass
class EvalReport:
    estimate: float
    std_error: float
    paths: int
    cost_split: tuple[float, float]
    weight_mean: float = float("nan")
    weight_std_error: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "paths": self.paths,
            "control_cost_part": self.cost_split[0],
            "variance_part": self.cost_split[1],
            "weight_mean": self.weight_mean,
            "weight_std_error": self.weight_std_error,
        }


def weighted_costs(model, prior, policy, t, y, z, n, T, kappa, paths, seed, *,
                   dt_flow=1e-3, dt_policy=None, first_path: int = 0):
    """Per-path ``(weight, control_cost, terminal_cost)`` arrays under the reference measure."""
    if paths < 2:
        raise ValueError("need at least two paths for a standard error")
    ids = np.arange(first_path, first_path + paths)
    batch = run_paths(model, policy, t0=t, T=T, y0=y, z0=z, n0=n, seed=seed, path_ids=ids,
                      lam=None, dt_flow=dt_flow, dt_policy=dt_policy)
    w0 = _prior.posterior_weights(prior, n, z)
    lam = prior.lambdas
    dn = batch.n - n
    integral_g = batch.z - z
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.where(lam > 0, np.log(np.where(lam > 0, lam, 1.0)), -np.inf)
        jump_part = np.where(dn[:, None] > 0, dn[:, None] * log_lam[None, :], 0.0)
        log_l = (np.log(w0)[None, :] + jump_part + batch.log_g_jumps[:, None]
                 + (T - t) - lam[None, :] * integral_g[:, None])
        weight = np.exp(logsumexp(log_l, axis=1))
    weight = np.where(np.isfinite(weight), weight, 0.0)
    terminal = np.zeros(paths)
    live = weight > 0
    if np.any(live):
        terminal[live] = kappa * np.asarray(_prior.psi(prior, batch.n[live], batch.z[live]))
    return weight, batch.control_cost, terminal


def evaluate(model: Model, prior: Prior, policy: Policy, t: float, y: float, z: float, n: int,
             T: float, paths: int, seed: int, *, kappa: float = 1.0, dt_flow: float = 1e-3,
             dt_policy: float | None = None) -> EvalReport:
    """Estimate the expected cost of ``policy`` started from ``(t, y, z, n)``.

    The policy is closed-loop: it is called with each path's own ``(t, y, z, n)``.
    Reusing ``seed`` across policies gives common random numbers.
    """
    w, c1, c2 = weighted_costs(model, prior, policy, t, y, z, n, T, kappa, paths, seed,
                               dt_flow=dt_flow, dt_policy=dt_policy)
    total = w * (c1 + c2)
    se = float(total.std(ddof=1) / np.sqrt(paths))
    return EvalReport(
        estimate=float(total.mean()),
        std_error=se,
        paths=int(paths),
        cost_split=(float(np.mean(w * c1)), float(np.mean(w * c2))),
        weight_mean=float(w.mean()),
        weight_std_error=float(w.std(ddof=1) / np.sqrt(paths)),
    )


@dataclass
class PointComparison:
    point: tuple
    v_pde: float
    mc_pde_policy: EvalReport
    mc_zero_policy: EvalReport | None
    tolerance: float
    gap: float
    passed: bool
    dominance_gap: float = float("nan")
    dominance_ok: bool = True
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        t, y, z, n = self.point
        out = {"t": t, "y": y, "z": z, "n": n, "v_pde": self.v_pde,
               "j_mc": self.mc_pde_policy.estimate, "std_error": self.mc_pde_policy.std_error,
               "gap": self.gap, "tolerance": self.tolerance, "pass": int(self.passed)}
        if self.mc_zero_policy is not None:
            out["j_mc_zero"] = self.mc_zero_policy.estimate
            out["std_error_zero"] = self.mc_zero_policy.std_error
            out["dominance_ok"] = int(self.dominance_ok)
        return out


def compare_to_pde(vgrid: ValueGrid, model: Model, prior: Prior, points, paths: int, seed: int,
                   *, scheme_tolerance: float = 0.02, with_zero_policy: bool = True,
                   dt_flow: float | None = None, dt_policy: float | None = None) -> list[PointComparison]:
    """Check the PDE value against Monte Carlo estimates of its own feedback policy.

    A point passes when ``|v_pde - J_mc| <= 3 * std_error + scheme_tolerance``.
    With ``with_zero_policy`` the zero control is evaluated on the same random
    numbers and must not beat the PDE policy by more than three combined
    standard errors.
    """
    grid: GridSpec = vgrid.grid
    dt_flow = grid.dt / 4 if dt_flow is None else dt_flow
    dt_policy = grid.dt if dt_policy is None else dt_policy

    def pde_policy(t, y, z, n):
        return eval_policy(vgrid, t, y, z, n)

    out = []
    for point in points:
        t, y, z, n = point
        v = eval_value(vgrid, t, y, z, n)
        kw = dict(kappa=grid.kappa, dt_flow=dt_flow, dt_policy=dt_policy)
        rep = evaluate(model, prior, pde_policy, t, y, z, int(n), grid.T, paths, seed, **kw)
        tol = 3 * rep.std_error + scheme_tolerance
        gap = abs(v - rep.estimate)
        zero = None
        dom_gap, dom_ok = float("nan"), True
        if with_zero_policy:
            zero = evaluate(model, prior, zero_policy, t, y, z, int(n), grid.T, paths, seed, **kw)
            dom_gap = zero.estimate - rep.estimate
            dom_ok = dom_gap >= -3 * np.hypot(zero.std_error, rep.std_error)
        out.append(PointComparison(tuple(point), float(v), rep, zero, tol, gap, gap <= tol,
                                   dom_gap, bool(dom_ok)))
    return out
