"""Paired lockstep runs and the discrete order/contraction ledger.

Two problems sharing grid, diffusivity, drift, growth law, and horizon are
advanced with one shared step sequence (the minimum of the two CFL bounds),
so their states live on identical time grids and the positive-part gap

    int (v - w)_+ (t)  -  int (v0 - w0)_+  -  sum_j dt_j int (f - g) chi_j

can be evaluated without any interpolation. The indicator chi_j is sampled
cell-wise on the snapshot closing step j, so a source-driven crossing inside
the step is charged to that step; ties contribute zero. For a monotone
scheme the gap stays below the accumulated linear-solve budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .fields import Field, SpaceTimeSeries
from .model import ProblemSpec, Source
from .solver import (
    STATUS_COMPLETED,
    NormSeries,
    SolverConfig,
    StepReport,
    Trajectory,
    _cell_norms,
    _SolveFailure,
    _StepperContext,
)

__all__ = ["paired_run", "contraction_gap", "PairedRunReport"]


def _check_pairable(pv: ProblemSpec, pw: ProblemSpec) -> None:
    if pv.grid != pw.grid:
        raise ValueError("paired runs need identical grids")
    if not np.array_equal(pv.coefficients.diffusivity, pw.coefficients.diffusivity):
        raise ValueError("paired runs need identical diffusivity fields")
    if pv.nonlinearity != pw.nonlinearity:
        raise ValueError("paired runs need identical growth laws")
    if pv.horizon != pw.horizon:
        raise ValueError("paired runs need identical horizons")
    dv, dw = pv.drift, pw.drift
    if (dv is None) != (dw is None):
        raise ValueError("paired runs need identical drift fields")
    if dv is None or dv is dw:
        return
    if not (dv.static and dw.static):
        raise ValueError(
            "paired runs with time-dependent drift must share one drift object"
        )
    for d in range(pv.grid.dim):
        if not np.array_equal(
            dv.face_speed(pv.grid, d, 0.0), dw.face_speed(pw.grid, d, 0.0)
        ):
            raise ValueError("paired runs need identical drift fields")


def paired_run(
    problem_v: ProblemSpec,
    problem_w: ProblemSpec,
    config: Optional[SolverConfig] = None,
) -> tuple[Trajectory, Trajectory]:
    """Advance both problems with one shared step sequence.

    Sources and initial data may differ; everything the comparison argument
    fixes must match. Snapshots are taken every step regardless of the
    configured stride (the gap ledger needs all of them). A blow-up or
    solver failure in either run aborts the pair.
    """
    cfg = config or SolverConfig()
    _check_pairable(problem_v, problem_w)
    grid = problem_v.grid
    vol = grid.cell_volume
    horizon = problem_v.horizon
    ctxs = [
        _StepperContext(problem_v, cfg),
        _StepperContext(problem_w, cfg),
    ]
    states = []
    for prob in (problem_v, problem_w):
        u = prob.u0.values.copy()
        n_reg = prob.nonlinearity.reg_n
        if n_reg is not None:
            u = np.clip(u, -n_reg, n_reg)
        states.append(u)

    dt_max_eff = cfg.dt_max if cfg.dt_max is not None else horizon / 100.0
    dt_min_eff = cfg.dt_min if cfg.dt_min is not None else 1e-5 * horizon

    hist = [
        {
            "times": [0.0],
            "dts": [0.0],
            "iters": [0],
            "norms": [_cell_norms(states[i], vol, cfg.norm_m)],
            "snaps": [Field(grid, states[i].copy())],
            "src_cum": [0.0],
            "reports": [],
            "budget": 0.0,
        }
        for i in range(2)
    ]

    t = 0.0
    while t < horizon * (1.0 - 1e-12):
        cfls = [ctxs[i].cfl(states[i], t) for i in range(2)]
        if cfg.dt is not None:
            dt_nom = cfg.dt
        else:
            dt_nom = min(dt_max_eff, cfls[0], cfls[1])
            if dt_nom < dt_min_eff:
                raise RuntimeError(
                    f"paired run aborted at t={t}: shared step collapsed "
                    f"below {dt_min_eff} (blow-up suspected)"
                )
        dt = min(dt_nom, horizon - t)
        new_states = []
        for i in range(2):
            f_now = ctxs[i].source_values(t)
            try:
                u_new, iters, rhs_l1 = ctxs[i].advance(states[i], dt, t)
            except _SolveFailure as exc:
                raise RuntimeError(f"paired run aborted at t={t}: {exc}") from exc
            h = hist[i]
            h["budget"] += cfg.lin_tol * rhs_l1
            src = 0.0 if f_now is None else float(np.sum(np.abs(f_now))) * vol * dt
            h["src_cum"].append(h["src_cum"][-1] + src)
            h["iters"].append(iters)
            h["reports"].append(
                StepReport(t=t + dt, dt=dt, cfl=cfls[i], lin_iters=iters, rhs_l1=rhs_l1)
            )
            new_states.append(u_new)
        t += dt
        for i in range(2):
            u_new = new_states[i]
            nrm = _cell_norms(u_new, vol, cfg.norm_m)
            if nrm[3] > cfg.cap_linf:
                raise RuntimeError(
                    f"paired run aborted at t={t}: amplitude cap exceeded"
                )
            h = hist[i]
            h["times"].append(t)
            h["dts"].append(dt)
            h["norms"].append(nrm)
            h["snaps"].append(Field(grid, u_new.copy()))
            states[i] = u_new

    trajs = []
    for i, prob in enumerate((problem_v, problem_w)):
        h = hist[i]
        times = np.asarray(h["times"])
        nrm = np.asarray(h["norms"])
        norms = NormSeries(
            m=cfg.norm_m,
            times=times,
            dts=np.asarray(h["dts"]),
            l1=nrm[:, 0],
            l2=nrm[:, 1],
            lm=nrm[:, 2],
            linf=nrm[:, 3],
            lin_iters=np.asarray(h["iters"], dtype=int),
        )
        trajs.append(
            Trajectory(
                problem=prob,
                config=cfg,
                status=STATUS_COMPLETED,
                series=SpaceTimeSeries(grid, times.copy(), h["snaps"]),
                norms=norms,
                reports=h["reports"],
                lin_tol_budget=h["budget"],
                source_l1_cumulative=np.asarray(h["src_cum"]),
            )
        )
    return trajs[0], trajs[1]


@dataclass
class PairedRunReport:
    """Gap ledger of a paired run.

    gap[k] = lhs[k] - rhs[k] with lhs the positive-part difference at time k
    and rhs the initial positive part plus the signed source difference
    accumulated over {v > w}. The pair passes when max_gap stays within the
    tolerance budget; ordered_ok additionally reports cell-wise ordering
    (meaningful when the data are ordered).
    """

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    gap: np.ndarray
    max_gap: float
    tolerance: float
    lin_budget: float
    ordered_ok: bool
    min_difference: float

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tolerance

    def write_csv(self, path: Union[str, Path]) -> None:
        lines = ["t,lhs,rhs,gap"]
        for k in range(len(self.times)):
            lines.append(
                f"{float(self.times[k])!r},{float(self.lhs[k])!r},"
                f"{float(self.rhs[k])!r},{float(self.gap[k])!r}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


def _truncated_source(problem: ProblemSpec, source: Optional[Source], t: float):
    if source is None:
        return None
    vals = source.cell_values(problem.grid, t)
    n_cap = problem.nonlinearity.reg_n
    if n_cap is not None:
        vals = np.clip(vals, -n_cap, n_cap)
    return vals


def contraction_gap(
    traj_v: Trajectory,
    traj_w: Trajectory,
    f_source: Optional[Source] = None,
    g_source: Optional[Source] = None,
) -> PairedRunReport:
    """Evaluate the positive-part gap ledger on aligned trajectories.

    Sources default to the ones embedded in each problem (truncated exactly
    as the stepper truncates them). Requires snapshots at every step.
    """
    tv, tw = traj_v.series.times, traj_w.series.times
    if not np.array_equal(tv, tw):
        raise ValueError("trajectories are not on a shared time grid")
    if not np.array_equal(traj_v.norms.times, tv):
        raise ValueError(
            "snapshots must be recorded every step for the gap ledger "
            "(rerun with snapshot_stride=1)"
        )
    if traj_v.problem.grid != traj_w.problem.grid:
        raise ValueError("trajectories live on different grids")
    grid = traj_v.problem.grid
    vol = grid.cell_volume
    f_src = f_source if f_source is not None else traj_v.problem.source
    g_src = g_source if g_source is not None else traj_w.problem.source

    n = len(tv)
    lhs = np.zeros(n)
    rhs = np.zeros(n)
    diff0 = traj_v.series.fields[0].values - traj_w.series.fields[0].values
    init_pos = float(np.sum(np.maximum(diff0, 0.0))) * vol
    lhs[0] = init_pos
    rhs[0] = init_pos
    acc = 0.0
    min_diff = float(diff0.min())
    for k in range(1, n):
        dv = traj_v.series.fields[k].values - traj_w.series.fields[k].values
        min_diff = min(min_diff, float(dv.min()))
        lhs[k] = float(np.sum(np.maximum(dv, 0.0))) * vol
        t_prev = float(tv[k - 1])
        dt = float(tv[k] - tv[k - 1])
        fv = _truncated_source(traj_v.problem, f_src, t_prev)
        gv = _truncated_source(traj_w.problem, g_src, t_prev)
        if fv is not None or gv is not None:
            delta = (fv if fv is not None else 0.0) - (gv if gv is not None else 0.0)
            chi = dv > 0.0
            acc += dt * float(np.sum(np.where(chi, delta, 0.0))) * vol
        rhs[k] = init_pos + acc
    gap = lhs - rhs
    budget = traj_v.lin_tol_budget + traj_w.lin_tol_budget
    scale = float(traj_v.norms.l1[0] + traj_w.norms.l1[0])
    tolerance = 1e-8 * scale + budget
    order_tol = budget / vol + 1e-12 * (
        float(traj_v.norms.linf[0]) + float(traj_w.norms.linf[0]) + 1.0
    )
    return PairedRunReport(
        times=tv.copy(),
        lhs=lhs,
        rhs=rhs,
        gap=gap,
        max_gap=float(gap.max()),
        tolerance=tolerance,
        lin_budget=budget,
        ordered_ok=bool(min_diff >= -order_tol),
        min_difference=min_diff,
    )
