"""Frozen-drift linear solves, Picard iteration, and the invariant-ball
arithmetic behind the small-data existence argument.

The map F sends a space-time state v to the solution of the LINEAR problem
obtained by freezing the drift flux at v (coefficient |v|^theta v, the raw
power law with no saturation), stepped with exactly the same upwind stencil
and implicit diffusion as the nonlinear scheme on a fixed-dt grid. A fixed
point of F is then a fixed point of the unregularized nonlinear scheme, so
Picard iteration from v = 0 is a computable stand-in for the existence proof:
under the smallness gate it contracts geometrically; without it divergence is
reported, not hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .fields import Field, SpaceTimeSeries, space_time_lp
from .model import ProblemSpec
from .solver import SolverConfig, _divergence_from_faces, _StepperContext

__all__ = [
    "BallParams",
    "ball_params",
    "ball_check",
    "apply_F",
    "PicardReport",
    "picard_iterate",
]


@dataclass(frozen=True)
class BallParams:
    """Invariant-ball radii for the quadratic-ish smallness argument.

    radius R = (delta (theta+1))^{-1/theta} and k_delta = R theta/(theta+1)
    satisfy delta R^{theta+1} + k_delta = R exactly: any forcing K <= k_delta
    keeps s -> delta s^{theta+1} + K inside [0, R].
    """

    delta: float
    theta: float
    radius: float
    k_delta: float

    @property
    def identity_residual(self) -> float:
        return abs(self.delta * self.radius ** (self.theta + 1.0) + self.k_delta - self.radius)


def ball_params(delta: float, theta: float) -> BallParams:
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    radius = (delta * (theta + 1.0)) ** (-1.0 / theta)
    k_delta = radius * theta / (theta + 1.0)
    return BallParams(delta=delta, theta=theta, radius=radius, k_delta=k_delta)


def ball_check(delta: float, k_term: float, theta: float, s: float) -> bool:
    """Does delta s^{theta+1} + K stay within the ball radius?"""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    if k_term < 0:
        raise ValueError(f"K must be >= 0, got {k_term}")
    params = ball_params(delta, theta)
    return delta * s ** (theta + 1.0) + k_term <= params.radius


def _fixed_time_grid(problem: ProblemSpec, config: SolverConfig) -> np.ndarray:
    """The time grid a fixed-dt run produces (same float accumulation)."""
    if config.dt is None:
        raise ValueError("frozen-drift solves need a fixed dt (config.dt)")
    times = [0.0]
    t = 0.0
    horizon = problem.horizon
    while t < horizon * (1.0 - 1e-12):
        dt = min(config.dt, horizon - t)
        t += dt
        times.append(t)
    return np.asarray(times)


def apply_F(
    v: SpaceTimeSeries,
    problem: ProblemSpec,
    config: SolverConfig,
) -> SpaceTimeSeries:
    """One frozen-drift solve: linear parabolic step with drift flux at v.

    v must live on the fixed-dt grid the config induces. Each step freezes
    the advective flux at v's snapshot for that step's start time, with the
    raw power coefficient |v|^theta v, and keeps the implicit diffusion and
    truncated source of the nonlinear scheme. Returns the solution on the
    same grid; a blow-up past the amplitude cap truncates the series with
    the final snapshot flagged.
    """
    expected = _fixed_time_grid(problem, config)
    if len(v) != len(expected) or not np.allclose(
        v.times, expected, rtol=0.0, atol=1e-9 * max(1.0, problem.horizon)
    ):
        raise ValueError(
            "input series does not match the fixed-dt time grid "
            f"({len(v)} samples vs {len(expected)} expected)"
        )
    if v.grid != problem.grid:
        raise ValueError("input series lives on a different grid")
    ctx = _StepperContext(problem, config)
    grid = problem.grid
    theta = problem.nonlinearity.theta
    n_reg = problem.nonlinearity.reg_n
    u = problem.u0.values.copy()
    if n_reg is not None:
        u = np.clip(u, -n_reg, n_reg)
    fields = [Field(grid, u.copy())]
    times = [0.0]
    for k in range(len(expected) - 1):
        t_k = float(expected[k])
        # recompute dt with the stepper's own arithmetic (not as a difference
        # of grid times, which can be off by an ulp): a fixed point of F then
        # satisfies the nonlinear scheme bitwise, not just approximately
        dt = min(config.dt, problem.horizon - t_k)
        explicit = np.zeros(grid.shape)
        faces = ctx.faces(t_k)
        if faces is not None:
            vk = v.fields[k].values
            frozen = np.abs(vk) ** theta * vk
            explicit -= _divergence_from_faces(grid, faces, frozen)
        f_now = ctx.source_values(t_k)
        if f_now is not None:
            explicit += f_now
        u, _iters, _rhs = ctx.advance(u, dt, t_k, explicit=explicit)
        t_next = float(expected[k + 1])
        finite = bool(np.all(np.isfinite(u)))
        blown = (not finite) or float(np.max(np.abs(u))) > config.cap_linf
        times.append(t_next)
        fields.append(Field(grid, u.copy(), blown_up=blown))
        if blown:
            break
    return SpaceTimeSeries(grid, np.asarray(times), fields)


@dataclass
class PicardReport:
    """Iteration record: norms of the iterates and of consecutive diffs."""

    iterates: list[float]
    diffs: list[float]
    converged: bool
    iterations: int
    q: float
    q_star_star: float
    tol: float

    def write_csv(self, path: Union[str, Path]) -> None:
        lines = ["k,norm_qss,diff"]
        for k, norm in enumerate(self.iterates, start=1):
            # a diverging final iterate carries no diff entry
            idx = k - 2
            diff = self.diffs[idx] if 0 <= idx < len(self.diffs) else math.nan
            lines.append(f"{k},{norm!r},{diff!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _series_norm(series: SpaceTimeSeries, p: float) -> float:
    return float(space_time_lp(series, p))


def _series_diff(a: SpaceTimeSeries, b: SpaceTimeSeries) -> SpaceTimeSeries:
    fields = [
        Field(a.grid, fa.values - fb.values)
        for fa, fb in zip(a.fields, b.fields)
    ]
    return SpaceTimeSeries(a.grid, a.times.copy(), fields)


def picard_iterate(
    problem: ProblemSpec,
    config: SolverConfig,
    tol: float = 1e-8,
    max_iter: int = 20,
    q: Optional[float] = None,
    divergence_cap: float = 1e8,
) -> tuple[SpaceTimeSeries, PicardReport]:
    """Iterate v <- F(v) from v = 0 until the space-time norm settles.

    Norms are taken in L^{q**} with q** derived from q (default: the lower
    endpoint 2(N+2)/(N+4) of the admissible band, which makes q** equal to
    the energy exponent 2(N+2)/N). Stops when the consecutive diff falls
    below tol relative to the current iterate, or reports divergence when a
    norm passes the cap or an iterate blows up.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 2:
        raise ValueError(f"max_iter must be >= 2, got {max_iter}")
    n = problem.grid.dim
    if q is None:
        q = 2.0 * (n + 2) / (n + 4)
    if not (1.0 <= q < (n + 2) / 2.0):
        raise ValueError(f"q must lie in [1, (N+2)/2), got {q}")
    q_ss = (n + 2) * q / (n + 2 - 2 * q)
    grid_times = _fixed_time_grid(problem, config)
    zero_fields = [Field(problem.grid, np.zeros(problem.grid.shape)) for _ in grid_times]
    v = SpaceTimeSeries(problem.grid, grid_times, zero_fields)

    iterates: list[float] = []
    diffs: list[float] = []
    converged = False
    prev: Optional[SpaceTimeSeries] = None
    for _k in range(max_iter):
        u_series = apply_F(v, problem, config)
        if len(u_series) != len(grid_times) or any(f.blown_up for f in u_series.fields):
            iterates.append(math.inf)
            break
        norm_k = _series_norm(u_series, q_ss)
        iterates.append(norm_k)
        if prev is not None:
            diff = _series_norm(_series_diff(u_series, prev), q_ss)
            diffs.append(diff)
            if diff <= tol * max(norm_k, 1e-300):
                converged = True
                v = u_series
                break
        if norm_k > divergence_cap:
            break
        prev = u_series
        v = u_series
    report = PicardReport(
        iterates=iterates,
        diffs=diffs,
        converged=converged,
        iterations=len(iterates),
        q=float(q),
        q_star_star=float(q_ss),
        tol=tol,
    )
    return v, report
