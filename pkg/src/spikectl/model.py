"""Neuron models: drift ``b``, intensity shape ``g`` and the flow between spikes.

Between spikes the potential follows ``dy/dt = b(y) + gamma`` while the
sufficient statistic ``z`` accumulates ``dz/dt = g(y)``.  A spike resets the
potential to zero and leaves ``z`` alone.  The intensity of the spike train is
``lambda * g(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import expit

__all__ = [
    "Model",
    "FlowState",
    "BUILTIN_MODELS",
    "builtin_model",
    "piecewise_linear_model",
    "flow_step",
    "flow",
    "rk4_step",
    "reset",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Model:
    name: str
    b: ArrayFn
    g: ArrayFn
    b_prime_bound: float
    g_max: float
    g_log_deriv_bound: float
    intensity_cap: float

    def intensity(self, lam, y):
        return lam * self.g(y)

    def max_abs_drift(self, y_min: float, y_max: float, samples: int = 2001) -> float:
        ys = np.linspace(y_min, y_max, samples)
        return float(np.max(np.abs(self.b(ys))))


@dataclass(frozen=True)
class FlowState:
    t: float
    y: float
    z: float


def _ou_drift(y):
    return -np.asarray(y, dtype=float)


def _zero_drift(y):
    return np.zeros_like(np.asarray(y, dtype=float))


def _ou_exp(cap: float) -> Model:
    log_cap = math.log(cap)

    def g(y):
        # min(exp(2(y-1)), cap) without overflow for large y
        return np.exp(np.minimum(2.0 * (np.asarray(y, dtype=float) - 1.0), log_cap))

    return Model("ou_exp", _ou_drift, g, b_prime_bound=1.0, g_max=cap,
                 g_log_deriv_bound=2.0, intensity_cap=cap)


def _ou_sigmoid(cap: float) -> Model:
    def g(y):
        return np.minimum(expit(100.0 * (np.asarray(y, dtype=float) - 1.0)), cap)

    return Model("ou_sigmoid", _ou_drift, g, b_prime_bound=1.0, g_max=min(1.0, cap),
                 g_log_deriv_bound=100.0, intensity_cap=cap)


def _const_unit(cap: float) -> Model:
    def g(y):
        return np.ones_like(np.asarray(y, dtype=float))

    return Model("const_unit", _zero_drift, g, b_prime_bound=0.0, g_max=1.0,
                 g_log_deriv_bound=0.0, intensity_cap=max(cap, 1.0))


BUILTIN_MODELS = {
    "ou_exp": (_ou_exp, math.e ** 2),
    "ou_sigmoid": (_ou_sigmoid, 1.0),
    "const_unit": (_const_unit, 1.0),
}


def builtin_model(name: str, intensity_cap: float | None = None) -> Model:
    """Return one of ``ou_exp``, ``ou_sigmoid``, ``const_unit``.

    ``intensity_cap`` bounds ``g``; for ``ou_exp`` it defaults to e**2, the
    value of ``exp(2(y-1))`` at ``y = 2``.
    """
    try:
        factory, default_cap = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(BUILTIN_MODELS)}") from None
    cap = default_cap if intensity_cap is None else float(intensity_cap)
    if not cap > 0:
        raise ValueError("intensity_cap must be positive")
    return factory(cap)


def piecewise_linear_model(table, drift: str = "ou", name: str = "table") -> Model:
    """Model with ``g`` interpolated from ``[[y, g], ...]``, held constant outside the table."""
    tab = np.asarray(table, dtype=float)
    if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
        raise ValueError("g table must be a list of at least two [y, g] pairs")
    ys, gs = tab[:, 0], tab[:, 1]
    if np.any(np.diff(ys) <= 0):
        raise ValueError("g table abscissae must be strictly increasing")
    if np.any(gs < 0) or not np.any(gs > 0):
        raise ValueError("g table values must be nonnegative and not all zero")
    if drift not in ("ou", "none"):
        raise ValueError("drift must be 'ou' or 'none'")

    def g(y):
        return np.interp(y, ys, gs)

    slopes = np.abs(np.diff(gs) / np.diff(ys))
    if np.all(gs > 0):
        log_bound = float(np.max(slopes / np.minimum(gs[:-1], gs[1:])))
    else:
        log_bound = math.inf
    b = _ou_drift if drift == "ou" else _zero_drift
    return Model(name, b, g, b_prime_bound=1.0 if drift == "ou" else 0.0,
                 g_max=float(gs.max()), g_log_deriv_bound=log_bound,
                 intensity_cap=float(gs.max()))


def rk4_step(model: Model, y, z, gamma, dt):
    """One RK4 step of (y, z) with the control held at ``gamma``; broadcasts."""
    b, g = model.b, model.g
    k1 = b(y) + gamma
    l1 = g(y)
    y2 = y + 0.5 * dt * k1
    k2 = b(y2) + gamma
    l2 = g(y2)
    y3 = y + 0.5 * dt * k2
    k3 = b(y3) + gamma
    l3 = g(y3)
    y4 = y + dt * k3
    k4 = b(y4) + gamma
    l4 = g(y4)
    y_new = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    z_new = z + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
    return y_new, z_new


def flow_step(model: Model, state: FlowState, gamma: float, dt: float) -> FlowState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not all(math.isfinite(v) for v in (state.t, state.y, state.z, gamma, dt)):
        raise ValueError("flow_step inputs must be finite")
    y, z = rk4_step(model, state.y, state.z, gamma, dt)
    return FlowState(state.t + dt, float(y), float(z))


def flow(model: Model, state: FlowState, gamma: float, duration: float, dt: float) -> FlowState:
    """Integrate over ``duration`` with substeps of at most ``dt``."""
    steps = max(1, math.ceil(duration / dt - 1e-12))
    h = duration / steps
    for _ in range(steps):
        state = flow_step(model, state, gamma, h)
    return state


def reset(state: FlowState) -> FlowState:
    return replace(state, y=0.0)
