"""Command-line entry point: ``spikectl {solve,simulate,evaluate,export-policy}``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure (CFL
violation, degenerate posterior, non-finite control), 3 failed cross-check in
``evaluate``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import export
from .config import ConfigError, RunConfig, dump_config, load_config
from .hjb import CFLError, ValueGrid, eval_policy, eval_value, solve
from .mceval import compare_to_pde
from .prior import DegeneratePosteriorError
from .sim import simulate_batch, zero_policy

log = logging.getLogger("spikectl")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3
GRID_FILE = "value_grid.npz"
VALUE_CSV = "value_grid.csv"
META_FILE = "run_meta.toml"


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_grid(cfg: RunConfig) -> ValueGrid:
    path = Path(cfg.out_dir) / GRID_FILE
    if not path.exists():
        raise ConfigError(f"no solved value grid at {path}; run 'solve' first or use --policy zero")
    vg = ValueGrid.load(path)
    if vg.grid != cfg.grid():
        raise ConfigError(f"value grid in {path} was solved with a different grid")
    return vg


def cmd_solve(cfg: RunConfig) -> int:
    model, prior, grid = cfg.build_model(), cfg.build_prior(), cfg.grid()
    log.info("solving %s on %d x %d x %d x %d nodes, nt=%d",
             model.name, grid.ny, grid.nz, grid.n_max + 1, grid.nt + 1, grid.nt)
    vg = solve(model, prior, grid)
    out = _out_dir(cfg)
    vg.save(out / GRID_FILE)
    export.write_value_csv(vg, out / VALUE_CSV)
    v0 = eval_value(vg, 0.0, cfg.y0, cfg.z0, 0)
    diag = dict(vg.diagnostics, v0=v0, model_name=model.name, prior_kind=prior.kind,
                prior_lambda_max=prior.lambda_max)
    dump_config(cfg, out / META_FILE, diag)
    for k in ("cfl_y", "cfl_z", "cfl_jump", "cfl_total"):
        print(f"{k} = {diag[k]:.6f}")
    print(f"v(0, {cfg.y0:g}, {cfg.z0:g}, 0) = {v0:.17g}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    model, prior, grid = cfg.build_model(), cfg.build_prior(), cfg.grid()
    if cfg.policy == "pde":
        vg = _load_grid(cfg)

        def policy(t, y, z, n):
            return eval_policy(vg, t, y, z, n)
    else:
        policy = zero_policy
    trajs = simulate_batch(model, prior, policy, cfg.lambda_true, cfg.T, cfg.record_step, cfg.seed,
                           cfg.paths, dt_flow=cfg.flow_step, dt_policy=grid.dt,
                           y0=cfg.y0, z0=cfg.z0, n0=cfg.n0)
    out = _out_dir(cfg)
    for tr in trajs:
        export.write_trajectory_csv(tr, out / f"trajectory_{tr.path_index:04d}.csv")
        export.write_jumps_csv(tr, out / f"jumps_{tr.path_index:04d}.csv")
        print(f"path {tr.path_index}: lambda={tr.lambda_true:g} jumps={tr.n_jumps} "
              f"mean_T={tr.post_mean[-1]:.6f} var_T={tr.post_var[-1]:.6f}")
    return EXIT_OK


def _eval_points(cfg: RunConfig):
    if cfg.eval_points is None:
        T = cfg.T
        return [(0.0, 0.0, 0.0, 0), (0.25 * T, 0.5, 0.1 * T, 0), (0.5 * T, 1.0, 0.25 * T, 0),
                (0.5 * T, 0.0, 0.5 * T, 1), (0.75 * T, 0.5, 0.5 * T, 0)]
    pts = []
    for p in cfg.eval_points:
        if len(p) != 4:
            raise ConfigError("eval_points entries must be [t, y, z, n]")
        t, y, z, n = p
        if not 0 <= t < cfg.T:
            raise ConfigError("eval point time must lie in [0, T)")
        pts.append((float(t), float(y), float(z), int(n)))
    return pts


def cmd_evaluate(cfg: RunConfig) -> int:
    model, prior = cfg.build_model(), cfg.build_prior()
    vg = _load_grid(cfg)
    points = _eval_points(cfg)
    res = compare_to_pde(vg, model, prior, points, cfg.eval_paths, cfg.seed,
                         scheme_tolerance=cfg.scheme_tolerance, dt_flow=cfg.flow_step)
    out = _out_dir(cfg)
    export.write_rows_csv([r.row() for r in res], out / "evaluate_points.csv")
    ok = all(r.passed and r.dominance_ok for r in res)
    report = {"paths": cfg.eval_paths, "seed": cfg.seed, "points": len(res),
              "passed": sum(r.passed for r in res), "dominance_ok": sum(r.dominance_ok for r in res),
              "max_gap": max(r.gap for r in res), "status": "pass" if ok else "fail"}
    export.write_report(report, out / "evaluate_report.txt")
    for r in res:
        print(f"{r.point}: v_pde={r.v_pde:.6f} J_mc={r.mc_pde_policy.estimate:.6f} "
              f"+- {r.mc_pde_policy.std_error:.6f} gap={r.gap:.2e} tol={r.tolerance:.2e} "
              f"{'PASS' if r.passed and r.dominance_ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_export_policy(cfg: RunConfig, every: int = 1) -> int:
    vg = _load_grid(cfg)
    out = _out_dir(cfg)
    export.write_value_csv(vg, out / VALUE_CSV, every=every)
    print(f"wrote {out / VALUE_CSV}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spikectl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "simulate", "evaluate", "export-policy"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--seed", type=int, metavar="U64")
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--paths", type=int, metavar="N")
        s.add_argument("--lambda-true", metavar="X")
        s.add_argument("--policy", choices=("pde", "zero"))
        if name == "export-policy":
            s.add_argument("--every", type=int, default=1, help="keep every k-th stored time slice")
    return p


def _overrides(args, command: str) -> dict:
    lam = args.lambda_true
    if lam is not None and lam != "prior":
        try:
            lam = float(lam)
        except ValueError:
            raise ConfigError("--lambda-true must be a number or 'prior'") from None
    over = {"seed": args.seed, "out_dir": args.out, "lambda_true": lam, "policy": args.policy}
    over["eval_paths" if command == "evaluate" else "paths"] = args.paths
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args, args.command))
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        return cmd_export_policy(cfg, args.every)
    except (CFLError, DegeneratePosteriorError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
