"""Command-line surface: runs, sweeps, and analysis reports.

Subcommands:
  run               march one problem, write norms/snapshots/manifest
  sweep             fan out over (mass, theta, reg_n) on a process pool
  regime            admissibility classification as JSON
  diagnose          re-check a stored run directory against the estimates
  contraction-test  paired run plus the positive-part gap ledger
  fixedpoint        frozen-drift Picard iteration with a smallness verdict
  constants         exponent tables, thresholds, slicing plans as JSON

Exit codes: 0 success, 1 invalid configuration or arguments, 2 solver
failure (or blow-up when --fail-on-blowup is set), 3 a check failed.

Every file is written atomically (temp + rename) and every run directory
carries a manifest with a hash of the fully resolved configuration, so a
rerun from the same manifest reproduces the numbers bit for bit.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .comparison import contraction_gap, paired_run
from .estimates import (
    ConstantsConfig,
    blowup_time,
    classify_regime,
    exponent_table,
    run_diagnostics,
    slicing_plan,
    smallness_check,
)
from .fields import (
    Field,
    SpaceTimeSeries,
    lp_norm,
    read_field_csv,
    read_field_raw,
    write_field_csv,
    write_field_raw,
)
from .fixedpoint import picard_iterate
from .model import (
    PRESETS,
    ProblemSpec,
    _gaussian_bump,
    build_problem,
    load_problem_config,
)
from .solver import (
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    STATUS_FAILURE,
    NormSeries,
    SolverConfig,
    Trajectory,
    run,
)

__all__ = ["main"]


# ---------------------------------------------------------------------------
# small plumbing: atomic writes, config hashing, number parsing


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_write_with(path: Path, write_fn) -> None:
    """Run ``write_fn(tmp_path)`` then rename over the target."""
    tmp = path.with_name(path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _num(raw: Optional[str]):
    """Parse a CLI number: int, float, 'inf', or an exact fraction 'p/q'."""
    if raw is None:
        return None
    s = str(raw).strip()
    low = s.lower()
    if low in ("inf", "infinity"):
        return math.inf
    if "/" in s:
        return Fraction(s)
    try:
        return int(s)
    except ValueError:
        return float(s)


def _float_list(raw: str) -> list[float]:
    vals = [float(v) for v in raw.split(",") if v.strip() != ""]
    if not vals:
        raise ValueError(f"empty list {raw!r}")
    return vals


def _pool_width(n_cases: int) -> int:
    env = os.environ.get("SUPERDRIFT_THREADS")
    if env is not None:
        cap = int(env)
        if cap < 1:
            raise ValueError(f"SUPERDRIFT_THREADS must be >= 1, got {env!r}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_cases))


# ---------------------------------------------------------------------------
# flag groups shared across subcommands


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--config", help="TOML or JSON problem config; flags override its keys")
    g.add_argument("--preset", choices=list(PRESETS))
    g.add_argument("--dim", type=int)
    g.add_argument("--cells", help="comma-separated cells per axis, e.g. 32,32,32")
    g.add_argument("--extents", help="comma-separated box side lengths")
    g.add_argument("--theta", type=float, help="drift growth exponent")
    g.add_argument("--reg-n", dest="reg_n", help="regularization level; 'inf' disables")
    g.add_argument("--alpha", type=float, help="lower ellipticity bound")
    g.add_argument("--beta", type=float, help="upper ellipticity bound")
    g.add_argument("--mass", type=float, help="initial bump mass")
    g.add_argument("--sigma", type=float, help="initial bump width")
    g.add_argument("--horizon", type=float)
    g.add_argument("--drift-scale", dest="drift_scale", type=float)
    g.add_argument("--E-form", dest="E_form", help="zero | radial | constant:v[,v2,..]")
    g.add_argument("--E-scale", dest="E_scale", type=float)
    g.add_argument("--f-form", dest="f_form", help="zero | constant:v")


_PROBLEM_KEYS = (
    "preset",
    "dim",
    "theta",
    "reg_n",
    "alpha",
    "beta",
    "mass",
    "sigma",
    "horizon",
    "drift_scale",
    "E_form",
    "E_scale",
    "f_form",
)


def _resolve_problem_cfg(args) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        cfg.update(load_problem_config(args.config))
    for key in _PROBLEM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "cells", None):
        cfg["cells"] = [int(v) for v in str(args.cells).split(",")]
    if getattr(args, "extents", None):
        cfg["extents"] = [float(v) for v in str(args.extents).split(",")]
    return cfg


def _add_solver_flags(p: argparse.ArgumentParser, io: bool = False) -> None:
    g = p.add_argument_group("stepping")
    g.add_argument("--dt", type=float, help="fixed step; omit for CFL-adaptive")
    g.add_argument("--dt-max", dest="dt_max", type=float)
    g.add_argument("--dt-min", dest="dt_min", type=float)
    g.add_argument("--safety", type=float)
    g.add_argument("--lin-tol", dest="lin_tol", type=float)
    g.add_argument("--cap-linf", dest="cap_linf", type=float)
    g.add_argument("--norm-m", dest="norm_m", type=float)
    g.add_argument("--max-lin-iters", dest="max_lin_iters", type=int)
    if io:
        g.add_argument("--snapshot-stride", dest="snapshot_stride", type=int)
        g.add_argument(
            "--snapshot-format",
            dest="snapshot_format",
            choices=("csv", "raw"),
            default="csv",
        )


_SOLVER_KEYS = (
    "dt",
    "dt_max",
    "dt_min",
    "safety",
    "lin_tol",
    "cap_linf",
    "norm_m",
    "snapshot_stride",
    "max_lin_iters",
)


def _resolve_solver_config(args) -> SolverConfig:
    kwargs = {}
    for key in _SOLVER_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            kwargs[key] = val
    return SolverConfig(**kwargs)


# ---------------------------------------------------------------------------
# run outputs


def _write_run_outputs(
    out_dir: Path,
    problem_cfg: dict,
    config: SolverConfig,
    traj: Trajectory,
    wall_s: float,
    command: str,
    snapshot_format: str,
) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    solver_dict = dataclasses.asdict(config)

    outputs = ["norms.csv", "snapshots.csv", "problem_config.json", "manifest.json"]
    _atomic_write_with(out_dir / "norms.csv", traj.norms.write_csv)
    _atomic_write_text(out_dir / "problem_config.json", _dump_json(problem_cfg))

    index_lines = ["i,t,file,blown_up"]
    ext = "f64" if snapshot_format == "raw" else "csv"
    writer = write_field_raw if snapshot_format == "raw" else write_field_csv
    for i, (t, field) in enumerate(zip(traj.series.times, traj.series.fields)):
        fname = f"snap_{i:06d}.{ext}"
        _atomic_write_with(out_dir / fname, lambda p, f=field: writer(f, p))
        index_lines.append(f"{i},{float(t)!r},{fname},{int(field.blown_up)}")
        outputs.append(fname)
    _atomic_write_text(out_dir / "snapshots.csv", "\n".join(index_lines) + "\n")

    manifest = {
        "command": command,
        "config_hash": _config_hash({"problem": problem_cfg, "solver": solver_dict}),
        "status": traj.status,
        "outputs": sorted(outputs),
        "wall_time_s": wall_s,
        "n_steps": int(len(traj.norms.times) - 1),
        "lin_tol_budget": float(traj.lin_tol_budget),
        "snapshot_format": snapshot_format,
        "problem": problem_cfg,
        "solver": solver_dict,
    }
    _atomic_write_text(out_dir / "manifest.json", _dump_json(manifest))
    return manifest


def _load_run_dir(run_dir: Path) -> tuple[Trajectory, dict]:
    """Rebuild a Trajectory from the files `run` wrote.

    Norms, snapshots, status, and the linear-solve budget come from disk; the
    cumulative source tally is recomputed from the stored problem the same
    way the stepper accumulated it (truncated source, left-endpoint rule).
    """
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    problem_cfg = json.loads((run_dir / "problem_config.json").read_text())
    problem = build_problem(problem_cfg)
    config = SolverConfig(**manifest["solver"])
    norms = NormSeries.read_csv(run_dir / "norms.csv", m=config.norm_m)

    index_raw = (run_dir / "snapshots.csv").read_text().strip().splitlines()
    if not index_raw or index_raw[0] != "i,t,file,blown_up":
        raise ValueError(f"{run_dir}: snapshots.csv has an unexpected header")
    snap_times, fields = [], []
    for line in index_raw[1:]:
        _i, t_s, fname, blown_s = line.split(",")
        blown = bool(int(blown_s))
        path = run_dir / fname
        if fname.endswith(".f64"):
            fields.append(read_field_raw(problem.grid, path, blown_up=blown))
        else:
            fields.append(read_field_csv(problem.grid, path, blown_up=blown))
        snap_times.append(float(t_s))
    series = SpaceTimeSeries(problem.grid, np.asarray(snap_times), fields)

    vol = problem.grid.cell_volume
    n_reg = problem.nonlinearity.reg_n
    src_cum = np.zeros(len(norms.times))
    if problem.source is not None:
        for k in range(1, len(norms.times)):
            f_vals = problem.source.cell_values(problem.grid, float(norms.times[k - 1]))
            if n_reg is not None:
                f_vals = np.clip(f_vals, -n_reg, n_reg)
            step = float(np.sum(np.abs(f_vals))) * vol * float(norms.dts[k])
            src_cum[k] = src_cum[k - 1] + step

    traj = Trajectory(
        problem=problem,
        config=config,
        status=manifest["status"],
        series=series,
        norms=norms,
        reports=[],
        lin_tol_budget=float(manifest["lin_tol_budget"]),
        source_l1_cumulative=src_cum,
    )
    return traj, manifest


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_run(args) -> int:
    problem_cfg = _resolve_problem_cfg(args)
    problem = build_problem(problem_cfg)
    config = _resolve_solver_config(args)
    out_dir = Path(args.out)

    t0 = time.perf_counter()
    traj = run(problem, config)
    wall = time.perf_counter() - t0
    manifest = _write_run_outputs(
        out_dir, problem_cfg, config, traj, wall, "run", args.snapshot_format
    )
    print(
        f"status={traj.status} steps={manifest['n_steps']} "
        f"final_L1={traj.norms.l1[-1]:.6g} final_Linf={traj.norms.linf[-1]:.6g} "
        f"out={out_dir}"
    )
    if traj.status == STATUS_FAILURE:
        return 2
    if traj.status == STATUS_BLOWUP and args.fail_on_blowup:
        return 2
    return 0


def _sweep_case(case: tuple) -> dict:
    """One sweep cell; module-level so the process pool can pickle it."""
    problem_cfg, solver_dict, out_dir, fmt = case
    problem = build_problem(problem_cfg)
    config = SolverConfig(**solver_dict)
    t0 = time.perf_counter()
    traj = run(problem, config)
    wall = time.perf_counter() - t0
    _write_run_outputs(Path(out_dir), problem_cfg, config, traj, wall, "sweep", fmt)
    return {
        "dir": out_dir,
        "status": traj.status,
        "steps": int(len(traj.norms.times) - 1),
        "wall_s": wall,
        "final_l1": float(traj.norms.l1[-1]),
        "final_linf": float(traj.norms.linf[-1]),
    }


def _cmd_sweep(args) -> int:
    base_cfg = _resolve_problem_cfg(args)
    masses = _float_list(args.masses) if args.masses else [float(base_cfg.get("mass", 1.0))]
    thetas = _float_list(args.thetas) if args.thetas else [float(base_cfg.get("theta", 1.0))]
    reg_ns = (
        [v.strip() for v in args.reg_ns.split(",")]
        if args.reg_ns
        else [str(base_cfg.get("reg_n", 1e6))]
    )
    config = _resolve_solver_config(args)
    solver_dict = dataclasses.asdict(config)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    cases, labels = [], []
    for mass, theta, reg_n in itertools.product(masses, thetas, reg_ns):
        cfg = dict(base_cfg)
        cfg["mass"] = mass
        cfg["theta"] = theta
        cfg["reg_n"] = reg_n
        name = f"mass{mass:g}_theta{theta:g}_n{reg_n}"
        cases.append((cfg, solver_dict, str(out_root / name), args.snapshot_format))
        labels.append((name, mass, theta, reg_n))

    width = _pool_width(len(cases))
    if width == 1:
        results = [_sweep_case(c) for c in cases]
    else:
        with ProcessPoolExecutor(max_workers=width) as pool:
            results = list(pool.map(_sweep_case, cases))

    lines = ["case,mass,theta,reg_n,status,steps,final_L1,final_Linf,wall_s"]
    for (name, mass, theta, reg_n), res in zip(labels, results):
        lines.append(
            f"{name},{mass!r},{theta!r},{reg_n},{res['status']},{res['steps']},"
            f"{res['final_l1']!r},{res['final_linf']!r},{res['wall_s']:.3f}"
        )
        print(f"{name}: {res['status']} ({res['steps']} steps)")
    _atomic_write_text(out_root / "summary.csv", "\n".join(lines) + "\n")

    statuses = {res["status"] for res in results}
    if STATUS_FAILURE in statuses:
        return 2
    if STATUS_BLOWUP in statuses and args.fail_on_blowup:
        return 2
    return 0


def _cmd_regime(args) -> int:
    n_dim = args.N
    theta = _num(args.theta)
    r = _num(args.r)
    mu = _num(args.mu)
    q = _num(args.q)
    report = classify_regime(n_dim, theta, r=r, mu=mu, q=q)

    np2 = n_dim + 2
    exps = {"q_star": None, "q_star_star": None, "gamma": None}
    if q is not None:
        tab = exponent_table(n_dim, q, r=r, theta=theta, mu=mu)
        floats = tab.as_floats()
        exps = {k: floats[k] for k in ("q_star", "q_star_star", "gamma")}
    exps["sigma"] = 2.0 * np2 / n_dim
    exps["b"] = None
    exps["T_star"] = None
    if mu is not None:
        try:
            b, t_star = blowup_time(
                float(mu), float(r), n_dim, float(theta), args.C_mu, args.norm_u0
            )
            exps["b"], exps["T_star"] = b, t_star
        except ValueError:
            pass

    out = {
        "regime": report.regime,
        "binding_condition": report.binding_condition,
        "slack": None if report.slack is None else float(report.slack),
        "exponents": exps,
    }
    text = _dump_json(out)
    sys.stdout.write(text)
    if args.out:
        _atomic_write_text(Path(args.out), text)
    return 0


def _cmd_constants(args) -> int:
    n_dim = args.N
    theta = _num(args.theta)
    q = _num(args.q)
    r = _num(args.r)
    mu = _num(args.mu)

    out: dict = {}
    if q is not None:
        tab = exponent_table(n_dim, q, r=r, theta=theta or 0, mu=mu, m=_num(args.m))
        out["exponents"] = tab.as_floats()
    if theta is not None and float(theta) > 0:
        small = smallness_check(
            float(theta), None if q is None else float(q),
            args.norm_e, args.norm_f, args.norm_u0, c_const=args.C,
        )
        out["smallness"] = small.as_dict()
        width, count = slicing_plan(
            float(theta), args.norm_e, args.M0, args.A, args.horizon
        )
        out["slicing"] = {"width": width, "count": count, "horizon": args.horizon}
    out["blowup"] = None
    if mu is not None and theta is not None:
        try:
            b, t_star = blowup_time(
                float(mu), float(r), n_dim, float(theta), args.C_mu, args.norm_u0
            )
            out["blowup"] = {"b": b, "T_star": t_star}
        except ValueError as exc:
            out["blowup"] = {"error": str(exc)}
    out["note"] = "thresholds relative to assumed constants"
    sys.stdout.write(_dump_json(out))
    return 0


def _cmd_diagnose(args) -> int:
    run_dir = Path(args.run_dir)
    traj, _manifest = _load_run_dir(run_dir)
    constants = ConstantsConfig(
        sobolev=args.sobolev,
        c_gn=args.c_gn,
        c_alpha_q=args.c_alpha_q,
        a_const=args.a_const,
    )
    m_values = tuple(_float_list(args.m_values))
    window = tuple(args.decay_window) if args.decay_window else None
    report = run_diagnostics(
        traj,
        constants=constants,
        m_values=m_values,
        decay_m=args.decay_m,
        decay_mu=args.decay_mu,
        decay_window=window,
    )
    text = _dump_json(report.as_dict())
    _atomic_write_text(run_dir / "diagnostics.json", text)
    _atomic_write_with(run_dir / "slacks.csv", report.write_slack_csv)
    sys.stdout.write(text)
    return 0 if report.all_ok else 3


def _add_bump(problem: ProblemSpec, mass: float, sigma_flag: Optional[float]) -> None:
    grid = problem.grid
    sigma = sigma_flag if sigma_flag else min(grid.extents) / 10.0
    bump = _gaussian_bump(grid, mass, sigma)
    problem.coefficients.u0 = Field(grid, problem.coefficients.u0.values + bump.values)


def _cmd_contraction(args) -> int:
    cfg_v = _resolve_problem_cfg(args)
    problem_v = build_problem(cfg_v)

    cfg_w = dict(cfg_v)
    if args.w_source_shift:
        base = 0.0
        form = str(cfg_v.get("f_form", "zero"))
        if form.startswith("constant:"):
            base = float(form.split(":", 1)[1])
        cfg_w["f_form"] = f"constant:{base + args.w_source_shift!r}"
    problem_w = build_problem(cfg_w)
    if args.v_extra_mass:
        _add_bump(problem_v, args.v_extra_mass, args.sigma)
    if args.w_extra_mass:
        _add_bump(problem_w, args.w_extra_mass, args.sigma)

    config = _resolve_solver_config(args)
    traj_v, traj_w = paired_run(problem_v, problem_w, config)
    report = contraction_gap(traj_v, traj_w)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_with(out_dir / "gap.csv", report.write_csv)
    verdict = {
        "passed": report.passed,
        "max_gap": float(report.max_gap),
        "tolerance": float(report.tolerance),
        "ordered_ok": bool(report.ordered_ok),
        "min_difference": float(report.min_difference),
        "steps": int(len(report.times) - 1),
    }
    text = _dump_json(verdict)
    _atomic_write_text(out_dir / "verdict.json", text)
    sys.stdout.write(text)
    return 0 if report.passed else 3


def _cmd_fixedpoint(args) -> int:
    problem_cfg = _resolve_problem_cfg(args)
    problem = build_problem(problem_cfg)
    config = _resolve_solver_config(args)
    if config.dt is None:
        raise ValueError("fixedpoint needs a fixed step: pass --dt")

    _v, report = picard_iterate(
        problem, config, tol=args.tol, max_iter=args.max_iter, q=args.q
    )

    grid = problem.grid
    norm_e = (
        0.0
        if problem.drift is None
        else float(np.max(problem.drift.magnitude(grid, 0.0)))
    )
    if problem.source is None:
        norm_f = 0.0
    else:
        f_vals = problem.source.cell_values(grid, 0.0)
        n_reg = problem.nonlinearity.reg_n
        if n_reg is not None:
            f_vals = np.clip(f_vals, -n_reg, n_reg)
        norm_f = float(np.max(np.abs(f_vals)))
    norm_u0 = lp_norm(problem.u0, 2.0)
    theta = problem.nonlinearity.theta
    smallness = None
    if theta > 0:
        smallness = smallness_check(theta, report.q, norm_e, norm_f, norm_u0).as_dict()
        smallness["norms"] = {"E_sup": norm_e, "f_sup": norm_f, "u0_L2": norm_u0}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_with(out_dir / "picard.csv", report.write_csv)
    verdict = {
        "converged": report.converged,
        "iterations": report.iterations,
        "final_norm": report.iterates[-1] if report.iterates else 0.0,
        "q": report.q,
        "q_star_star": report.q_star_star,
        "tol": report.tol,
        "smallness": smallness,
    }
    text = _dump_json(verdict)
    _atomic_write_text(out_dir / "verdict.json", text)
    sys.stdout.write(text)
    return 0 if report.converged else 3


# ---------------------------------------------------------------------------
# parser assembly


class _Parser(argparse.ArgumentParser):
    """Argparse that exits 1 on bad usage, matching the exit-code contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superdrift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("run", help="march one problem and store the trajectory")
    _add_problem_flags(p)
    _add_solver_flags(p, io=True)
    p.add_argument("--out", default="out/run", help="output directory")
    p.add_argument("--fail-on-blowup", action="store_true")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="grid of runs over mass, theta, reg_n")
    _add_problem_flags(p)
    _add_solver_flags(p, io=True)
    p.add_argument("--masses", help="comma-separated masses")
    p.add_argument("--thetas", help="comma-separated growth exponents")
    p.add_argument("--reg-ns", dest="reg_ns", help="comma-separated levels, 'inf' allowed")
    p.add_argument("--out", default="out/sweep")
    p.add_argument("--fail-on-blowup", action="store_true")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("regime", help="which a-priori-bound regime applies")
    p.add_argument("--N", type=int, required=True, help="space dimension")
    p.add_argument("--theta", required=True, help="number or fraction p/q")
    p.add_argument("--r", default="inf", help="drift integrability; 'inf' allowed")
    p.add_argument("--mu", help="norm exponent for the local regime")
    p.add_argument("--q", help="integrability parameter for the exponent table")
    p.add_argument("--C-mu", dest="C_mu", type=float, default=1.0)
    p.add_argument("--norm-u0", dest="norm_u0", type=float, default=1.0)
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(handler=_cmd_regime)

    p = sub.add_parser("constants", help="exponent tables, thresholds, slicing plans")
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--theta")
    p.add_argument("--q")
    p.add_argument("--r", default="inf")
    p.add_argument("--mu")
    p.add_argument("--m")
    p.add_argument("--C", type=float, default=1.0, help="assumed estimate constant")
    p.add_argument("--C-mu", dest="C_mu", type=float, default=1.0)
    p.add_argument("--norm-e", dest="norm_e", type=float, default=1.0)
    p.add_argument("--norm-f", dest="norm_f", type=float, default=1.0)
    p.add_argument("--norm-u0", dest="norm_u0", type=float, default=1.0)
    p.add_argument("--A", type=float, default=1.0, help="slicing drift constant")
    p.add_argument("--M0", type=float, default=1.0, help="initial mass for slicing")
    p.add_argument("--horizon", type=float, default=1.0)
    p.set_defaults(handler=_cmd_constants)

    p = sub.add_parser("diagnose", help="re-check a stored run directory")
    p.add_argument("run_dir", help="directory a `run` produced")
    p.add_argument("--m-values", dest="m_values", default="2")
    p.add_argument("--decay-m", dest="decay_m", type=float, default=2.0)
    p.add_argument("--decay-mu", dest="decay_mu", type=float, default=1.0)
    p.add_argument(
        "--decay-window", dest="decay_window", nargs=2, type=float, metavar=("LO", "HI")
    )
    p.add_argument("--sobolev", type=float, default=1.0)
    p.add_argument("--c-gn", dest="c_gn", type=float, default=None)
    p.add_argument("--c-alpha-q", dest="c_alpha_q", type=float, default=1.0)
    p.add_argument("--a-const", dest="a_const", type=float, default=1.0)
    p.set_defaults(handler=_cmd_diagnose)

    p = sub.add_parser(
        "contraction-test", help="paired run and the positive-part gap ledger"
    )
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument(
        "--v-extra-mass",
        dest="v_extra_mass",
        type=float,
        default=0.0,
        help="extra bump mass added to the first run's initial data",
    )
    p.add_argument(
        "--w-extra-mass",
        dest="w_extra_mass",
        type=float,
        default=0.0,
        help="extra bump mass added to the comparison run's initial data",
    )
    p.add_argument(
        "--w-source-shift",
        dest="w_source_shift",
        type=float,
        default=0.0,
        help="constant added to the comparison run's source",
    )
    p.add_argument("--out", default="out/contraction")
    p.set_defaults(handler=_cmd_contraction)

    p = sub.add_parser("fixedpoint", help="frozen-drift Picard iteration")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=20)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--out", default="out/fixedpoint")
    p.set_defaults(handler=_cmd_fixedpoint)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
