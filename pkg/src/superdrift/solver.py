"""Finite-volume IMEX stepping for drift-diffusion with superlinear drift.

Space: two-point flux finite volumes on a uniform box grid. Diffusive face
transmissibility uses the harmonic mean of the adjacent diagonal entries;
zero Dirichlet data sits half a spacing outside boundary faces, which makes
the stiffness matrix a symmetric M-matrix (discrete sine modes are exact
eigenvectors). Drift: first-order donor-cell upwinding of the advective flux
``Phi = -E g(u)`` (the sign the divergence-form equation induces), so mass
moves against E and the scheme is monotone under the CFL step bound. Time:
backward Euler on diffusion, explicit upwinding on drift,

    (vol I + dt L) u_next = vol (u + dt (-drift_divergence(u) + f_trunc)),

solved by conjugate gradients with Jacobi scaling to a relative residual.

Monotone + conservative buys the discrete structure everything downstream
checks: positivity, mass bounds, comparison, and L1 contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .fields import Field, Grid, SpaceTimeSeries, boundary_mask
from .model import Drift, Nonlinearity, ProblemSpec, Source

__all__ = [
    "SolverConfig",
    "DiffusionOperator",
    "assemble_diffusion",
    "drift_divergence",
    "cfl_dt",
    "step",
    "run",
    "StepReport",
    "NormSeries",
    "Trajectory",
    "TestFunction",
    "weak_residual",
    "gradient_energy",
    "STATUS_COMPLETED",
    "STATUS_BLOWUP",
    "STATUS_FAILURE",
]

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blow-up-suspected"
STATUS_FAILURE = "solver-failure"


@dataclass
class SolverConfig:
    """Stepping policy and tolerances.

    ``dt`` fixes the step; leaving it None selects CFL-adaptive stepping with
    ``safety`` applied, capped by ``dt_max`` (default horizon/100) and aborted
    as blow-up once the CFL step would sink below ``dt_min`` (default
    1e-5 x horizon). ``cap_linf`` flags blow-up on amplitude alone.
    """

    dt: Optional[float] = None
    dt_max: Optional[float] = None
    dt_min: Optional[float] = None
    safety: float = 0.9
    lin_tol: float = 1e-8
    cap_linf: float = 1e8
    norm_m: float = 2.0
    snapshot_stride: int = 1
    max_lin_iters: int = 2000

    def __post_init__(self) -> None:
        if not (0 < self.safety <= 1):
            raise ValueError(f"safety must be in (0, 1], got {self.safety}")
        if not (0 < self.lin_tol <= 1e-6):
            raise ValueError(f"lin_tol must be in (0, 1e-6], got {self.lin_tol}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError(f"fixed dt must be positive, got {self.dt}")
        if self.cap_linf <= 0:
            raise ValueError("cap_linf must be positive")
        if self.norm_m < 1:
            raise ValueError(f"norm_m must be >= 1, got {self.norm_m}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


class DiffusionOperator:
    """Symmetric flux-form stiffness matrix L for -div(M grad .).

    ``matrix[i, j]`` carries transmissibilities (units area/length), so the
    per-volume operator is L/vol and the quadratic form u.L.u approximates
    the Dirichlet energy integral of M |grad u|^2.
    """

    def __init__(self, grid: Grid, matrix: sp.csr_matrix):
        self.grid = grid
        self.matrix = matrix
        self.volume = grid.cell_volume
        self._diag = matrix.diagonal()
        self._identity = sp.identity(grid.n_cells, format="csr")

    def apply(self, flat: np.ndarray) -> np.ndarray:
        return self.matrix @ flat

    def energy(self, values: np.ndarray) -> float:
        flat = values.ravel()
        return float(flat @ (self.matrix @ flat))

    def system_matrix(self, dt: float) -> tuple[sp.csr_matrix, np.ndarray]:
        """(vol I + dt L) and its diagonal, for one implicit solve."""
        s = self.matrix * dt + self._identity * self.volume
        return s, self._diag * dt + self.volume


def _axis_index(ndim: int, axis: int, sl) -> tuple:
    idx: list = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def assemble_diffusion(grid: Grid, diffusivity: np.ndarray) -> DiffusionOperator:
    """Assemble the two-point-flux stiffness matrix with harmonic-mean faces."""
    diffusivity = np.asarray(diffusivity, dtype=float)
    if diffusivity.shape != (grid.dim,) + grid.shape:
        raise ValueError(
            f"diffusivity shape {diffusivity.shape}, expected {(grid.dim,) + grid.shape}"
        )
    if np.any(diffusivity <= 0):
        raise ValueError("diffusivity entries must be strictly positive")
    n = grid.n_cells
    idx = np.arange(n).reshape(grid.shape)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for d in range(grid.dim):
        dx = grid.spacing[d]
        area = grid.face_area(d)
        nd = grid.cells[d]
        md = diffusivity[d]
        left = idx[_axis_index(grid.dim, d, slice(0, nd - 1))].ravel()
        right = idx[_axis_index(grid.dim, d, slice(1, nd))].ravel()
        m_l = md[_axis_index(grid.dim, d, slice(0, nd - 1))].ravel()
        m_r = md[_axis_index(grid.dim, d, slice(1, nd))].ravel()
        tau = (2.0 * m_l * m_r / (m_l + m_r)) * area / dx
        rows += [left, right, left, right]
        cols += [left, right, right, left]
        vals += [tau, tau, -tau, -tau]
        # Dirichlet faces: value 0 at half a spacing outside
        for cell_sl in (0, nd - 1):
            b = idx[_axis_index(grid.dim, d, cell_sl)].ravel()
            m_b = md[_axis_index(grid.dim, d, cell_sl)].ravel()
            tau_b = m_b * area / (0.5 * dx)
            rows.append(b)
            cols.append(b)
            vals.append(tau_b)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return DiffusionOperator(grid, mat)


@lru_cache(maxsize=16)
def _unit_operator(grid: Grid) -> DiffusionOperator:
    ones = np.ones((grid.dim,) + grid.shape)
    return assemble_diffusion(grid, ones)


def gradient_energy(field_or_values, grid: Optional[Grid] = None) -> float:
    """Discrete Dirichlet energy (integral of |grad u|^2, zero boundary data)."""
    if isinstance(field_or_values, Field):
        grid = field_or_values.grid
        values = field_or_values.values
    else:
        if grid is None:
            raise ValueError("grid required when passing raw values")
        values = np.asarray(field_or_values, dtype=float)
    return _unit_operator(grid).energy(values)


def _face_speeds(drift: Drift, grid: Grid, t: float) -> list[np.ndarray]:
    return [drift.face_speed(grid, d, t) for d in range(grid.dim)]


def _divergence_from_faces(
    grid: Grid, face_speeds: Sequence[np.ndarray], g_values: np.ndarray
) -> np.ndarray:
    """div of the advective flux Phi = -E g(u), donor cell against E.

    The transport velocity of the divergence-form drift term is -E, so the
    donor sits on the +E side of each face: E.n > 0 takes the right cell,
    E.n < 0 the left cell, and an exactly vanishing normal speed averages the
    two (the flux is zero there regardless). Outside the box g = 0.
    """
    div = np.zeros(grid.shape)
    ndim = grid.dim
    for d in range(ndim):
        a = face_speeds[d]
        slab_shape = list(grid.shape)
        slab_shape[d] = 1
        slab = np.zeros(slab_shape)
        g_left = np.concatenate([slab, g_values], axis=d)
        g_right = np.concatenate([g_values, slab], axis=d)
        g_up = np.where(a > 0, g_right, np.where(a < 0, g_left, 0.5 * (g_left + g_right)))
        flux = -a * g_up
        hi = flux[_axis_index(ndim, d, slice(1, None))]
        lo = flux[_axis_index(ndim, d, slice(0, -1))]
        div += (hi - lo) / grid.spacing[d]
    return div


def drift_divergence(
    grid: Grid,
    drift: Optional[Drift],
    values: np.ndarray,
    nonlinearity: Nonlinearity,
    t: float = 0.0,
) -> np.ndarray:
    """Upwind divergence of the drift flux; zero array when there is no drift."""
    if drift is None:
        return np.zeros(grid.shape)
    values = np.asarray(values, dtype=float)
    g = nonlinearity.g(values)
    return _divergence_from_faces(grid, _face_speeds(drift, grid, t), g)


def cfl_dt(
    grid: Grid,
    drift: Optional[Drift],
    values: np.ndarray,
    nonlinearity: Nonlinearity,
    safety: float = 0.9,
    t: float = 0.0,
    face_speeds: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Monotonicity step bound for the explicit upwind drift.

    dt = safety / sum_d ( max_faces |E.e_d| * L_g / dx_d ), with L_g an upper
    bound for |g'| on the current amplitude range. The per-axis sum keeps the
    update monotone when several faces of one cell flow outward; in 1D it
    reduces to safety * dx / (max|E.n| * L_g). Returns +inf when there is no
    drift, no amplitude, or no face speed.
    """
    if drift is None:
        return math.inf
    umax = float(np.max(np.abs(values))) if np.asarray(values).size else 0.0
    if umax == 0.0:
        return math.inf
    lip = nonlinearity.lipschitz_bound(umax)
    if lip == 0.0:
        return math.inf
    if face_speeds is None:
        face_speeds = _face_speeds(drift, grid, t)
    denom = 0.0
    for d in range(grid.dim):
        denom += float(np.max(np.abs(face_speeds[d]))) * lip / grid.spacing[d]
    if denom == 0.0:
        return math.inf
    return safety / denom


@dataclass
class StepReport:
    t: float
    dt: float
    cfl: float
    lin_iters: int
    rhs_l1: float


@dataclass
class NormSeries:
    """Per-step norm history; written as CSV t,dt,L1,L2,Lm,Linf,lin_iters."""

    m: float
    times: np.ndarray
    dts: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    lm: np.ndarray
    linf: np.ndarray
    lin_iters: np.ndarray

    def write_csv(self, path: Union[str, Path]) -> None:
        lines = ["t,dt,L1,L2,Lm,Linf,lin_iters"]
        for k in range(len(self.times)):
            lines.append(
                f"{float(self.times[k])!r},{float(self.dts[k])!r},"
                f"{float(self.l1[k])!r},{float(self.l2[k])!r},"
                f"{float(self.lm[k])!r},{float(self.linf[k])!r},"
                f"{int(self.lin_iters[k])}"
            )
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_csv(cls, path: Union[str, Path], m: float = 2.0) -> "NormSeries":
        raw = Path(path).read_text().strip().splitlines()
        if not raw or raw[0] != "t,dt,L1,L2,Lm,Linf,lin_iters":
            raise ValueError(f"{path}: unexpected norms CSV header")
        data = np.array(
            [[float(v) for v in line.split(",")] for line in raw[1:]], dtype=float
        )
        return cls(
            m=m,
            times=data[:, 0],
            dts=data[:, 1],
            l1=data[:, 2],
            l2=data[:, 3],
            lm=data[:, 4],
            linf=data[:, 5],
            lin_iters=data[:, 6].astype(int),
        )


@dataclass
class Trajectory:
    """Everything one run produced: snapshots, norms, status, accounting."""

    problem: ProblemSpec
    config: SolverConfig
    status: str
    series: SpaceTimeSeries
    norms: NormSeries
    reports: list[StepReport]
    lin_tol_budget: float
    source_l1_cumulative: np.ndarray  # aligned with norms.times


def _cell_norms(values: np.ndarray, vol: float, m: float):
    a = np.abs(values)
    l1 = float(np.sum(a)) * vol
    l2 = math.sqrt(float(np.sum(a * a)) * vol)
    lm = (float(np.sum(a**m)) * vol) ** (1.0 / m)
    linf = float(np.max(a))
    return l1, l2, lm, linf


class _SolveFailure(Exception):
    pass


class _StepperContext:
    """Assembled operators plus cached static coefficient samples for one run."""

    def __init__(self, problem: ProblemSpec, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.grid = problem.grid
        self.op = assemble_diffusion(problem.grid, problem.coefficients.diffusivity)
        self.nonlinearity = problem.nonlinearity
        self.drift = problem.drift
        self.source = problem.source
        self._static_faces: Optional[list[np.ndarray]] = None
        self._static_source: Optional[np.ndarray] = None
        if self.drift is not None and self.drift.static:
            self._static_faces = _face_speeds(self.drift, self.grid, 0.0)
        if self.source is not None and self.source.static:
            self._static_source = self._truncate_source(
                self.source.cell_values(self.grid, 0.0)
            )

    def _truncate_source(self, raw: np.ndarray) -> np.ndarray:
        n = self.nonlinearity.reg_n
        if n is None:
            return raw
        return np.clip(raw, -n, n)

    def faces(self, t: float) -> Optional[list[np.ndarray]]:
        if self.drift is None:
            return None
        if self._static_faces is not None:
            return self._static_faces
        return _face_speeds(self.drift, self.grid, t)

    def source_values(self, t: float) -> Optional[np.ndarray]:
        if self.source is None:
            return None
        if self._static_source is not None:
            return self._static_source
        return self._truncate_source(self.source.cell_values(self.grid, t))

    def cfl(self, values: np.ndarray, t: float) -> float:
        return cfl_dt(
            self.grid,
            self.drift,
            values,
            self.nonlinearity,
            safety=self.config.safety,
            t=t,
            face_speeds=self.faces(t),
        )

    def explicit_rhs(self, values: np.ndarray, t: float) -> np.ndarray:
        """-drift_divergence(u) + truncated source, in per-volume units."""
        rhs = np.zeros(self.grid.shape)
        faces = self.faces(t)
        if faces is not None:
            g = self.nonlinearity.g(values)
            rhs -= _divergence_from_faces(self.grid, faces, g)
        f = self.source_values(t)
        if f is not None:
            rhs = rhs + f
        return rhs

    def advance(
        self,
        values: np.ndarray,
        dt: float,
        t: float,
        explicit: Optional[np.ndarray] = None,
    ):
        """One IMEX step; returns (new values, lin iterations, |rhs|_L1).

        ``explicit`` overrides the drift-plus-source term (per-volume units),
        which lets a caller freeze the drift at some other state.
        """
        if explicit is None:
            explicit = self.explicit_rhs(values, t)
        cells = values + dt * explicit
        b = self.op.volume * cells.ravel()
        s_mat, s_diag = self.op.system_matrix(dt)
        inv_diag = 1.0 / s_diag
        precond = LinearOperator(s_mat.shape, matvec=lambda x: x * inv_diag)
        iters = 0

        def _count(_xk):
            nonlocal iters
            iters += 1

        x, info = cg(
            s_mat,
            b,
            x0=values.ravel().copy(),
            rtol=self.config.lin_tol,
            atol=0.0,
            maxiter=self.config.max_lin_iters,
            M=precond,
            callback=_count,
        )
        if info != 0:
            raise _SolveFailure(f"conjugate gradients failed (info={info}) at t={t}")
        rhs_l1 = float(np.sum(np.abs(cells))) * self.op.volume
        return x.reshape(self.grid.shape), iters, rhs_l1


def step(
    field: Field,
    dt: float,
    problem: ProblemSpec,
    config: Optional[SolverConfig] = None,
    t: float = 0.0,
) -> tuple[Field, StepReport]:
    """One IMEX step from a field; assembles operators on the fly."""
    cfg = config or SolverConfig()
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ctx = _StepperContext(problem, cfg)
    values, iters, rhs_l1 = ctx.advance(field.values, dt, t)
    linf = float(np.max(np.abs(values)))
    report = StepReport(
        t=t + dt, dt=dt, cfl=ctx.cfl(field.values, t), lin_iters=iters, rhs_l1=rhs_l1
    )
    return Field(problem.grid, values, blown_up=linf > cfg.cap_linf), report


def run(problem: ProblemSpec, config: Optional[SolverConfig] = None) -> Trajectory:
    """March from t=0 to the horizon; deterministic for a fixed problem/config.

    Status is ``completed`` when the horizon is reached, ``blow-up-suspected``
    when the amplitude cap is exceeded or the adaptive CFL step collapses
    below dt_min, ``solver-failure`` when the inner solve does not converge.
    """
    cfg = config or SolverConfig()
    ctx = _StepperContext(problem, cfg)
    grid = problem.grid
    vol = grid.cell_volume
    horizon = problem.horizon
    n_reg = problem.nonlinearity.reg_n

    u = problem.u0.values.copy()
    if n_reg is not None:
        u = np.clip(u, -n_reg, n_reg)

    dt_max_eff = cfg.dt_max if cfg.dt_max is not None else horizon / 100.0
    dt_min_eff = cfg.dt_min if cfg.dt_min is not None else 1e-5 * horizon

    times = [0.0]
    dts = [0.0]
    iters_hist = [0]
    l1s, l2s, lms, linfs = [], [], [], []
    n0 = _cell_norms(u, vol, cfg.norm_m)
    l1s.append(n0[0]); l2s.append(n0[1]); lms.append(n0[2]); linfs.append(n0[3])
    src_cum = [0.0]
    snap_times = [0.0]
    snap_fields = [Field(grid, u.copy())]
    reports: list[StepReport] = []
    budget = 0.0
    status = STATUS_COMPLETED
    t = 0.0
    step_idx = 0
    final_blown = False

    while t < horizon * (1.0 - 1e-12):
        dt_cfl = ctx.cfl(u, t)
        if cfg.dt is not None:
            dt_nom = cfg.dt
        else:
            dt_nom = min(dt_max_eff, dt_cfl)
            if dt_nom < dt_min_eff:
                status = STATUS_BLOWUP
                break
        dt = min(dt_nom, horizon - t)
        f_now = ctx.source_values(t)
        try:
            u_new, lin_iters, rhs_l1 = ctx.advance(u, dt, t)
        except _SolveFailure:
            status = STATUS_FAILURE
            break
        budget += cfg.lin_tol * rhs_l1
        src_step = 0.0 if f_now is None else float(np.sum(np.abs(f_now))) * vol * dt
        t += dt
        step_idx += 1
        u = u_new
        nrm = _cell_norms(u, vol, cfg.norm_m)
        times.append(t)
        dts.append(dt)
        iters_hist.append(lin_iters)
        l1s.append(nrm[0]); l2s.append(nrm[1]); lms.append(nrm[2]); linfs.append(nrm[3])
        src_cum.append(src_cum[-1] + src_step)
        reports.append(
            StepReport(t=t, dt=dt, cfl=dt_cfl, lin_iters=lin_iters, rhs_l1=rhs_l1)
        )
        blown = nrm[3] > cfg.cap_linf
        at_end = t >= horizon * (1.0 - 1e-12)
        if blown or at_end or step_idx % cfg.snapshot_stride == 0:
            snap_times.append(t)
            snap_fields.append(Field(grid, u.copy(), blown_up=blown))
        if blown:
            status = STATUS_BLOWUP
            final_blown = True
            break

    # a dt-collapse abort still records the last state for post-mortems
    if status != STATUS_COMPLETED and not final_blown and snap_times[-1] < t:
        snap_times.append(t)
        snap_fields.append(Field(grid, u.copy()))

    series = SpaceTimeSeries(grid, np.asarray(snap_times), snap_fields)
    norms = NormSeries(
        m=cfg.norm_m,
        times=np.asarray(times),
        dts=np.asarray(dts),
        l1=np.asarray(l1s),
        l2=np.asarray(l2s),
        lm=np.asarray(lms),
        linf=np.asarray(linfs),
        lin_iters=np.asarray(iters_hist, dtype=int),
    )
    return Trajectory(
        problem=problem,
        config=cfg,
        status=status,
        series=series,
        norms=norms,
        reports=reports,
        lin_tol_budget=budget,
        source_l1_cumulative=np.asarray(src_cum),
    )


@dataclass
class TestFunction:
    """Smooth test function phi(t, x) sampled at cell centers.

    ``fn(t, coords)`` returns values on the coordinate arrays; the spatial
    support must stay clear of boundary-adjacent cells at all sampled times.
    """

    fn: Callable[[float, tuple], np.ndarray]
    name: str = "testfn"

    def sample(self, grid: Grid, t: float) -> np.ndarray:
        vals = np.asarray(self.fn(t, grid.centers()), dtype=float)
        return np.broadcast_to(vals, grid.shape)


def weak_residual(
    trajectory: Union["Trajectory", SpaceTimeSeries],
    testfn: TestFunction,
    problem: Optional[ProblemSpec] = None,
    start: int = 0,
    end: Optional[int] = None,
) -> float:
    """Defect of the discrete weak identity over [times[start], times[end]].

    Assembles, with the scheme's own face gradients and upwind drift flux,

        [u phi]_{t1}^{t2} - int u dphi/dt + int (M grad u + E g(u)).grad phi
            - int f phi,

    using midpoint-in-time samples of phi for the flux and source terms and
    interval averages of u. For an exact solution sampled on the grid this
    measures the first-order truncation error O(dx + dt); for phi == 0 it is
    exactly zero. Raises if the support of phi touches boundary cells.

    Accepts either a Trajectory (problem taken from it) or a bare
    SpaceTimeSeries together with an explicit problem.
    """
    if isinstance(trajectory, Trajectory):
        series = trajectory.series
        if problem is None:
            problem = trajectory.problem
    else:
        series = trajectory
        if problem is None:
            raise ValueError("problem required when passing a bare series")
    grid = series.grid
    if end is None:
        end = len(series) - 1
    if not (0 <= start < end <= len(series) - 1):
        raise ValueError(f"bad window [{start}, {end}] for series of length {len(series)}")
    bmask = boundary_mask(grid)
    vol = grid.cell_volume
    ctx = _StepperContext(problem, SolverConfig())
    times = series.times

    def phi_checked(t: float) -> np.ndarray:
        vals = testfn.sample(grid, t)
        if np.any(vals[bmask] != 0.0):
            raise ValueError(
                "test function support touches boundary-adjacent cells; "
                "shrink its support"
            )
        return vals

    phis = [phi_checked(float(tk)) for tk in times[start : end + 1]]
    total = 0.0
    # endpoint pairing
    total += vol * float(np.sum(series.fields[end].values * phis[-1]))
    total -= vol * float(np.sum(series.fields[start].values * phis[0]))
    for k in range(start, end):
        u_k = series.fields[k].values
        u_k1 = series.fields[k + 1].values
        dt_k = float(times[k + 1] - times[k])
        t_mid = 0.5 * (float(times[k]) + float(times[k + 1]))
        phi_mid = phi_checked(t_mid)
        phi_k = phis[k - start]
        phi_k1 = phis[k - start + 1]
        # - int u dphi/dt with interval-average u and the discrete phi increment
        total -= vol * float(np.sum(0.5 * (u_k + u_k1) * (phi_k1 - phi_k)))
        # diffusion term through the stiffness bilinear form (implicit sample)
        total += dt_k * float(phi_mid.ravel() @ ctx.op.apply(u_k1.ravel()))
        # drift term: int E g(u) . grad phi = int div(Phi) phi (explicit sample)
        faces = ctx.faces(float(times[k]))
        if faces is not None:
            g = ctx.nonlinearity.g(u_k)
            div = _divergence_from_faces(grid, faces, g)
            total += dt_k * vol * float(np.sum(div * phi_mid))
        f_k = ctx.source_values(float(times[k]))
        if f_k is not None:
            total -= dt_k * vol * float(np.sum(f_k * phi_mid))
    return abs(total)
