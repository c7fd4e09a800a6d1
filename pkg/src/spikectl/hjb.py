"""Explicit monotone scheme for the reduced HJB equation.

The value ``v(t, y, z, n)`` solves, backward from ``v(T) = kappa * psi(n, z)``,

    dv/dt + min_gamma { gamma**2/2 + (b(y) + gamma) dv/dy } + g(y) dv/dz
          + theta_n(y, z) [v(t, 0, z, n+1) - v(t, y, z, n)] = 0,

with ``theta_n = xi(n, z) g(y)`` the posterior-mean spike rate.  The scheme
upwinds ``dv/dy`` along ``b + gamma`` separately for every control in a
uniform odd-sized set, so each update is a convex combination of the
previous slice plus running cost whenever the CFL number is at most one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.stats import poisson

from . import prior as _prior
from .model import Model
from .prior import Prior

__all__ = [
    "GridError",
    "CFLError",
    "GridSpec",
    "ValueGrid",
    "default_n_max",
    "hamiltonian",
    "theta",
    "solve",
    "eval_value",
    "eval_policy",
]


class GridError(ValueError):
    """Grid parameters violate a structural requirement."""


class CFLError(GridError):
    """Time step too large for the explicit scheme to be monotone."""


@dataclass(frozen=True)
class GridSpec:
    T: float
    nt: int
    y_min: float = -1.0
    y_max: float = 3.0
    ny: int = 81
    z_max: float = 1.0
    nz: int = 41
    n_max: int = 8
    gamma_max: float = 4.0
    kappa: float = 1.0
    n_controls: int = 81
    save_every: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise GridError("T must be positive")
        if self.nt < 1:
            raise GridError("nt must be at least 1")
        if self.ny < 3:
            raise GridError("ny must be at least 3")
        if self.nz < 2:
            raise GridError("nz must be at least 2")
        if self.n_max < 0:
            raise GridError("n_max must be nonnegative")
        if not self.y_min < 0 < self.y_max:
            raise GridError("need y_min < 0 < y_max so the reset point is interior")
        if not self.z_max > 0:
            raise GridError("z_max must be positive")
        if not self.gamma_max > 0:
            raise GridError("gamma_max must be positive")
        if not self.kappa > 0:
            raise GridError("kappa must be positive")
        if self.n_controls < 1 or self.n_controls % 2 == 0:
            raise GridError("n_controls must be a positive odd number")
        if self.save_every < 1:
            raise GridError("save_every must be at least 1")
        r = -self.y_min / self.dy
        if abs(r - round(r)) > 1e-9 * max(1.0, abs(r)):
            raise GridError("y = 0 must be a grid line: -y_min must be a multiple of dy")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def dz(self) -> float:
        return self.z_max / (self.nz - 1)

    @property
    def i_zero(self) -> int:
        return int(round(-self.y_min / self.dy))

    @property
    def y(self) -> np.ndarray:
        y = self.y_min + self.dy * np.arange(self.ny)
        y[self.i_zero] = 0.0
        return y

    @property
    def z(self) -> np.ndarray:
        return self.dz * np.arange(self.nz)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def gammas(self) -> np.ndarray:
        if self.n_controls == 1:
            return np.zeros(1)
        return np.linspace(-self.gamma_max, self.gamma_max, self.n_controls)

    @property
    def saved_steps(self) -> np.ndarray:
        k = np.arange(0, self.nt + 1, self.save_every)
        if k[-1] != self.nt:
            k = np.append(k, self.nt)
        return k

    def cfl(self, model: Model, prior: Prior) -> dict:
        """CFL diagnostics; ``total`` must not exceed one."""
        bmax = model.max_abs_drift(self.y_min, self.y_max)
        parts = {
            "cfl_y": self.dt * (bmax + self.gamma_max) / self.dy,
            "cfl_z": self.dt * model.g_max / self.dz,
            "cfl_jump": self.dt * prior.lambda_max * model.g_max,
        }
        parts["cfl_total"] = sum(parts.values())
        return parts

    def validate(self, model: Model, prior: Prior) -> dict:
        if self.z_max < self.T * model.g_max * (1 - 1e-12):
            raise GridError(f"z_max={self.z_max:g} below T*g_max={self.T * model.g_max:g}")
        diag = self.cfl(model, prior)
        if diag["cfl_total"] > 1 + 1e-12:
            raise CFLError(f"CFL number {diag['cfl_total']:.4f} exceeds 1; increase nt")
        return diag

    def to_dict(self) -> dict:
        return asdict(self)


def default_n_max(prior: Prior, model: Model, T: float, tail: float = 1e-6) -> int:
    """Smallest n with P(Poisson(lambda_max * g_max * T) > n) < tail."""
    mu = prior.lambda_max * model.g_max * T
    if mu == 0:
        return 0
    n = int(poisson.isf(tail, mu))
    while poisson.sf(n, mu) >= tail:
        n += 1
    return n


def hamiltonian(model: Model, y, z, p, gamma_max: float):
    """Return ``(H, gamma_star)`` for the control-constrained Hamiltonian.

    ``H = -min_{|gamma| <= gamma_max} {gamma**2/2 + (b + gamma) p1 + g p2}``,
    which equals ``p1**2/2 - b p1 - g p2`` when ``|p1| <= gamma_max``.
    """
    p1, p2 = (np.asarray(q, dtype=float) for q in p)
    c = np.clip(p1, -gamma_max, gamma_max)
    gamma = -c
    h = c * p1 - 0.5 * c ** 2 - model.b(y) * p1 - model.g(y) * p2
    if np.ndim(h) == 0:
        return float(h), float(gamma)
    return h, gamma


def theta(prior: Prior, model: Model, y, z, n):
    """Posterior-mean spike rate ``xi(n, z) * g(y)``."""
    out = np.asarray(_prior.xi(prior, n, z)) * model.g(y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(eq=False)
class ValueGrid:
    grid: GridSpec
    times: np.ndarray
    values: np.ndarray
    policy: np.ndarray
    model_name: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return self.values.shape[-1]

    def value(self, t, y, z, n):
        return eval_value(self, t, y, z, n)

    def control(self, t, y, z, n):
        return eval_policy(self, t, y, z, n)

    def save(self, path) -> None:
        np.savez_compressed(path, times=self.times, values=self.values, policy=self.policy,
                            grid=np.array(repr(self.grid.to_dict())),
                            model_name=np.array(self.model_name))

    @classmethod
    def load(cls, path) -> "ValueGrid":
        import ast

        with np.load(path) as f:
            grid = GridSpec(**ast.literal_eval(str(f["grid"])))
            return cls(grid, f["times"], f["values"], f["policy"], str(f["model_name"]))


class _Stepper:
    """Holds the per-node coefficients shared by all backward steps."""

    def __init__(self, model: Model, prior: Prior, grid: GridSpec):
        self.grid = grid
        y, z = grid.y, grid.z
        n = np.arange(grid.n_max + 1)
        self.b = model.b(y)[:, None, None]
        self.g = model.g(y)[:, None, None]
        try:
            mean = np.asarray(_prior.xi(prior, n[None, :], z[:, None]))
        except _prior.DegeneratePosteriorError as exc:
            raise _prior.DegeneratePosteriorError(f"degenerate posterior on the grid: {exc}") from None
        self.theta = self.g * mean[None, :, :]
        self.jump_to = np.minimum(n + 1, grid.n_max)
        self.gammas = grid.gammas
        m = len(self.gammas)
        self.step = (self.gammas[1] - self.gammas[0]) if m > 1 else 1.0
        # index ranges of controls with b + gamma >= 0 (piece A) and <= 0 (piece B)
        s = (-self.b + grid.gamma_max) / self.step
        self.a_lo = np.clip(np.ceil(s - 1e-9), 0, m).astype(np.int64)
        self.b_hi = np.clip(np.floor(s + 1e-9), -1, m - 1).astype(np.int64)

    def _candidates(self, target, lo, hi):
        m = len(self.gammas)
        k = np.floor((target + self.grid.gamma_max) / self.step)
        k = np.clip(k, -1, m).astype(np.int64)
        return np.clip(k, lo, hi), np.clip(k + 1, lo, hi)

    def hamiltonian_min(self, v: np.ndarray):
        """min over the control set of gamma**2/2 + (b+gamma) * upwind dv/dy, and its argmin."""
        grid = self.grid
        m = len(self.gammas)
        fwd = np.empty_like(v)
        fwd[:-1] = (v[1:] - v[:-1]) / grid.dy
        fwd[-1] = fwd[-2]
        bwd = np.empty_like(v)
        bwd[1:] = fwd[:-1]
        bwd[0] = fwd[0]

        best = np.full(v.shape, np.inf)
        arg = np.zeros(v.shape)
        b = np.broadcast_to(self.b, v.shape)
        pieces = (
            (-fwd, np.broadcast_to(self.a_lo, v.shape), m - 1),
            (-bwd, 0, np.broadcast_to(self.b_hi, v.shape)),
        )
        for target, lo, hi in pieces:
            valid = np.broadcast_to(np.asarray(lo) <= np.asarray(hi), v.shape)
            if not np.any(valid):
                continue
            for k in self._candidates(target, lo, np.maximum(hi, 0)):
                gam = self.gammas[np.clip(k, 0, m - 1)]
                a = b + gam
                q = 0.5 * gam ** 2 + a * np.where(a > 0, fwd, bwd)
                better = valid & (q < best)
                best = np.where(better, q, best)
                arg = np.where(better, gam, arg)
        return best, arg

    def rhs(self, v: np.ndarray):
        grid = self.grid
        ham, arg = self.hamiltonian_min(v)
        dz = np.empty_like(v)
        dz[:, :-1] = (v[:, 1:] - v[:, :-1]) / grid.dz
        dz[:, -1] = dz[:, -2]
        target = v[grid.i_zero][:, self.jump_to]
        return ham + self.g * dz + self.theta * (target[None] - v), arg


def solve(model: Model, prior: Prior, grid: GridSpec) -> ValueGrid:
    """Backward explicit sweep; stores the slices listed in ``grid.saved_steps``."""
    diag = grid.validate(model, prior)
    stepper = _Stepper(model, prior, grid)
    z = grid.z
    n = np.arange(grid.n_max + 1)
    terminal = grid.kappa * np.asarray(_prior.psi(prior, n[None, :], z[:, None]))
    v = np.broadcast_to(terminal, (grid.ny, grid.nz, grid.n_max + 1)).copy()

    saved = grid.saved_steps
    slot = {int(k): s for s, k in enumerate(saved)}
    values = np.empty((len(saved),) + v.shape)
    policy = np.empty_like(values)
    _, arg = stepper.hamiltonian_min(v)
    values[-1], policy[-1] = v, arg
    for k in range(grid.nt - 1, -1, -1):
        incr, arg = stepper.rhs(v)
        v = v + grid.dt * incr
        if k in slot:
            values[slot[k]] = v
            policy[slot[k]] = arg
    diag = dict(diag, v_max=float(values.max()), v_min=float(values.min()))
    return ValueGrid(grid, grid.t[saved], values, policy, model.name, diag)


@njit(cache=True)
def _interp_kernel(arr, times, y0, dy, dz, t, y, z, n, out):
    nk, ny, nz, nn = arr.shape
    for p in range(t.size):
        tc = min(max(t[p], times[0]), times[-1])
        kt = 0
        lo, hi = 0, nk - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if times[mid] <= tc:
                lo = mid
            else:
                hi = mid
        kt = lo
        wt = (tc - times[kt]) / (times[kt + 1] - times[kt])
        sy = min(max((y[p] - y0) / dy, 0.0), ny - 1.0)
        iy = min(int(np.floor(sy)), ny - 2)
        wy = sy - iy
        sz = min(max(z[p] / dz, 0.0), nz - 1.0)
        jz = min(int(np.floor(sz)), nz - 2)
        wz = sz - jz
        m = min(max(int(n[p]), 0), nn - 1)
        acc = 0.0
        for dk in range(2):
            ck = wt if dk else 1.0 - wt
            for di in range(2):
                ci = wy if di else 1.0 - wy
                for dj in range(2):
                    cj = wz if dj else 1.0 - wz
                    acc += ck * ci * cj * arr[kt + dk, iy + di, jz + dj, m]
        out[p] = acc


def _interp(vg: ValueGrid, arr: np.ndarray, t, y, z, n):
    grid = vg.grid
    t, y, z, n = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, y, z, n)))
    shape = t.shape
    out = np.empty(t.size)
    _interp_kernel(arr, np.asarray(vg.times, dtype=float), float(grid.y_min), float(grid.dy),
                   float(grid.dz), t.ravel(), y.ravel(), z.ravel(), n.ravel(), out)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def eval_value(vg: ValueGrid, t, y, z, n):
    """Multilinear interpolation of the value in (t, y, z); n clamped to n_max."""
    return _interp(vg, vg.values, t, y, z, n)


def eval_policy(vg: ValueGrid, t, y, z, n):
    return _interp(vg, vg.policy, t, y, z, n)
