"""Run configuration: a flat TOML file plus command-line overrides.

Example::

    model = "ou_exp"
    atoms = [[0, 1], [0.25, 2], [0.5, 4], [0.75, 2], [1, 1]]
    T = 5.0
    kappa = 300.0
    ny = 81
    nz = 81

Grid fields left out (``nt``, ``z_max``, ``n_max``) are filled in from the
model and prior; :func:`dump_config` writes the fully resolved values so that
the metadata file reloads into the same run.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .hjb import GridSpec, default_n_max
from .model import Model, builtin_model, piecewise_linear_model
from .prior import Prior, make_atomic_prior, uniform_prior

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "dump_config"]

DENSITIES = ("uniform",)
CFL_SAFETY = 0.9


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "ou_exp"
    intensity_cap: float | None = None
    g_table: list | None = None
    drift: str = "ou"

    atoms: list | None = None
    density: str | None = None
    support: list | None = None
    quadrature_nodes: int = 64

    T: float = 1.0
    kappa: float = 1.0
    nt: int | None = None
    y_min: float = -1.0
    y_max: float = 3.0
    ny: int = 81
    z_max: float | None = None
    nz: int = 41
    n_max: int | None = None
    gamma_max: float = 4.0
    n_controls: int = 81
    save_every: int = 1

    seed: int = 0
    paths: int = 1
    lambda_true: float | str = "prior"
    dt_record: float | None = None
    dt_flow: float | None = None
    policy: str = "pde"
    y0: float = 0.0
    z0: float = 0.0
    n0: int = 0

    eval_paths: int = 100_000
    eval_points: list | None = None
    scheme_tolerance: float = 0.02

    out_dir: str = "out"
    extra: dict = field(default_factory=dict, repr=False)

    def build_model(self) -> Model:
        if self.model == "table":
            if self.g_table is None:
                raise ConfigError("model = 'table' requires g_table")
            return piecewise_linear_model(self.g_table, drift=self.drift)
        if self.g_table is not None:
            raise ConfigError("g_table is only allowed with model = 'table'")
        return builtin_model(self.model, self.intensity_cap)

    def build_prior(self) -> Prior:
        if self.atoms is not None:
            return make_atomic_prior(self.atoms)
        if self.density == "uniform":
            a, b = self.support
            return uniform_prior(a, b, self.quadrature_nodes)
        raise ConfigError(f"unsupported density {self.density!r}")

    def resolve(self) -> "RunConfig":
        """Fill in derived grid fields; returns ``self``."""
        model, prior = self.build_model(), self.build_prior()
        if self.z_max is None:
            self.z_max = self.T * model.g_max
        if self.n_max is None:
            self.n_max = default_n_max(prior, model, self.T)
        if self.nt is None:
            probe = self._grid(nt=1)
            self.nt = max(1, math.ceil(probe.cfl(model, prior)["cfl_total"] / CFL_SAFETY))
        return self

    def _grid(self, nt: int) -> GridSpec:
        return GridSpec(T=self.T, nt=nt, y_min=self.y_min, y_max=self.y_max, ny=self.ny,
                        z_max=self.z_max, nz=self.nz, n_max=self.n_max, gamma_max=self.gamma_max,
                        kappa=self.kappa, n_controls=self.n_controls, save_every=self.save_every)

    def grid(self) -> GridSpec:
        self.resolve()
        return self._grid(self.nt)

    @property
    def flow_step(self) -> float:
        return self.dt_flow if self.dt_flow is not None else self.grid().dt / 4

    @property
    def record_step(self) -> float:
        return self.dt_record if self.dt_record is not None else self.T / 500

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "extra":
                continue
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = v
        if self.atoms is not None:
            out.pop("quadrature_nodes", None)
        return out


_KNOWN = {f.name for f in fields(RunConfig)} - {"extra"}
_IGNORED_TABLES = ("diagnostics",)


def parse_config(data: dict) -> RunConfig:
    data = dict(data)
    extra = {k: data.pop(k) for k in _IGNORED_TABLES if k in data}
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    has_atoms = "atoms" in data
    has_density = "density" in data
    if has_atoms == has_density:
        raise ConfigError("give exactly one prior: either 'atoms' or 'density' with 'support'")
    if has_density:
        if data["density"] not in DENSITIES:
            raise ConfigError(f"density must be one of {DENSITIES}")
        if "support" not in data or len(data["support"]) != 2:
            raise ConfigError("density prior needs support = [a, b]")
    elif "support" in data or "quadrature_nodes" in data:
        raise ConfigError("support/quadrature_nodes only apply to density priors")
    cfg = RunConfig(**data, extra=extra)
    if isinstance(cfg.lambda_true, str) and cfg.lambda_true != "prior":
        raise ConfigError("lambda_true must be a number or 'prior'")
    if cfg.policy not in ("pde", "zero"):
        raise ConfigError("policy must be 'pde' or 'zero'")
    if cfg.paths < 1:
        raise ConfigError("paths must be at least 1")
    if cfg.eval_paths < 2:
        raise ConfigError("eval_paths must be at least 2 (standard error undefined otherwise)")
    if cfg.scheme_tolerance < 0:
        raise ConfigError("scheme_tolerance must be nonnegative")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        model, prior, grid = cfg.build_model(), cfg.build_prior(), cfg.grid()
        if grid.z_max < grid.T * model.g_max * (1 - 1e-12):
            raise ConfigError(f"z_max={grid.z_max:g} is below T*g_max={grid.T * model.g_max:g}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    grid.validate(model, prior)  # CFLError propagates: a numerical, not a syntax, problem
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_config(data)


def dump_config(cfg: RunConfig, path, diagnostics: dict | None = None) -> None:
    """Write the resolved config; the ``[diagnostics]`` table is ignored on reload."""
    data = cfg.resolve().to_dict()
    if diagnostics:
        data["diagnostics"] = {k: v for k, v in diagnostics.items() if v is not None}
    Path(path).write_text(tomli_w.dumps(data))
