"""Solver tests: stencil oracles, exact eigen-decay, upwind orientation,
CFL bounds, run statuses, and the weak-form residual on a manufactured
solution."""

import math

import numpy as np
import pytest

from superdrift import (
    CoefficientSet,
    Field,
    NormSeries,
    ProblemSpec,
    SolverConfig,
    SpaceTimeSeries,
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    STATUS_FAILURE,
    assemble_diffusion,
    cfl_dt,
    constant_drift,
    constant_source,
    drift_divergence,
    gradient_energy,
    make_grid,
    make_problem,
    power_nonlinearity,
    radial_drift,
    run,
    step,
    weak_residual,
)
from superdrift.model import ClosedFormSource
from superdrift.solver import TestFunction as WeakTestFn


def unit_diffusivity(grid):
    return np.ones((grid.dim,) + grid.shape)


def heat_problem(grid, u0_values, horizon, drift=None, source=None, theta=0.0, reg_n=None):
    coeffs = CoefficientSet(
        diffusivity=unit_diffusivity(grid),
        alpha=1.0,
        beta=1.0,
        u0=Field(grid, u0_values),
        drift=drift,
        source=source,
    )
    return ProblemSpec(
        grid=grid,
        coefficients=coeffs,
        nonlinearity=power_nonlinearity(theta, reg_n),
        horizon=horizon,
    )


# ---------------------------------------------------------------- stencil


def test_diffusion_stencil_unit_coefficients():
    # 1D, 4 cells on [0,1]: h = 1/4, transmissibility 1/h interior, 2/h at
    # the wall, so rows of L are h * [3, -1, ...] / h^2
    g = make_grid(1, (1.0,), (4,))
    op = assemble_diffusion(g, unit_diffusivity(g))
    h = 0.25
    mat = op.matrix.toarray()
    expect = np.array(
        [
            [3.0, -1.0, 0.0, 0.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.0, 0.0, -1.0, 3.0],
        ]
    ) / h
    np.testing.assert_allclose(mat, expect, rtol=0, atol=1e-14)


def test_diffusion_stencil_harmonic_face():
    # M = (1, 3, 1): interior face coefficients are the harmonic mean 1.5
    g = make_grid(1, (1.0,), (3,))
    md = np.array([[1.0, 3.0, 1.0]])
    op = assemble_diffusion(g, md)
    mat = op.matrix.toarray()
    h = 1.0 / 3.0
    assert mat[0, 1] == pytest.approx(-1.5 / h)
    assert mat[1, 2] == pytest.approx(-1.5 / h)
    np.testing.assert_allclose(mat, mat.T, rtol=0, atol=1e-13)
    # diagonals add the Dirichlet face at 2 M / h where a wall is present
    assert mat[0, 0] == pytest.approx(1.5 / h + 2.0 * 1.0 / h)
    assert mat[1, 1] == pytest.approx(2 * 1.5 / h)
    assert mat[2, 2] == pytest.approx(1.5 / h + 2.0 * 1.0 / h)


def test_diffusion_matrix_is_symmetric_m_matrix():
    g = make_grid(2, (1.0, 2.0), (6, 5))
    rng = np.random.default_rng(3)
    md = rng.uniform(0.5, 2.0, size=(2,) + g.shape)
    op = assemble_diffusion(g, md)
    mat = op.matrix.toarray()
    np.testing.assert_allclose(mat, mat.T, rtol=0, atol=1e-13)
    off = mat - np.diag(np.diag(mat))
    assert np.all(off <= 1e-14)
    assert np.all(np.diag(mat) > 0)
    # rows sum to the boundary transmissibilities, hence >= 0 (weak diagonal dominance)
    assert np.all(mat.sum(axis=1) >= -1e-13)


def test_assemble_diffusion_validates():
    g = make_grid(1, (1.0,), (4,))
    with pytest.raises(ValueError, match="shape"):
        assemble_diffusion(g, np.ones((1, 5)))
    bad = np.ones((1, 4))
    bad[0, 2] = 0.0
    with pytest.raises(ValueError, match="strictly positive"):
        assemble_diffusion(g, bad)


def test_gradient_energy_sine_mode():
    # sin(pi x) is an exact eigenvector of the half-cell Dirichlet stencil,
    # so its energy equals lambda_h / 2 exactly and ~ pi^2/2 physically
    n = 128
    g = make_grid(1, (1.0,), (n,))
    h = 1.0 / n
    x = g.axis_centers(0)
    u = np.sin(math.pi * x)
    lam = 2.0 * (1.0 - math.cos(math.pi * h)) / h**2
    e = gradient_energy(Field(g, u))
    assert e == pytest.approx(lam / 2.0, rel=1e-12)
    assert e == pytest.approx(math.pi**2 / 2.0, rel=1e-3)


def test_implicit_step_decays_sine_mode_exactly():
    # backward Euler on the sine eigenmode: u_{k+1} = u_k / (1 + dt lambda_h)
    n = 64
    g = make_grid(1, (1.0,), (n,))
    h = 1.0 / n
    x = g.axis_centers(0)
    u0 = np.sin(math.pi * x)
    lam = 2.0 * (1.0 - math.cos(math.pi * h)) / h**2
    dt = 2e-3
    steps = 10
    problem = heat_problem(g, u0, horizon=dt * steps)
    cfg = SolverConfig(dt=dt, lin_tol=1e-12, snapshot_stride=steps)
    traj = run(problem, cfg)
    assert traj.status == STATUS_COMPLETED
    predicted = u0 / (1.0 + dt * lam) ** steps
    got = traj.series.fields[-1].values
    assert np.max(np.abs(got - predicted)) <= 1e-10


# ---------------------------------------------------------------- drift


def test_drift_divergence_moves_mass_against_e():
    # spike in cell 1, E = +1: the donor is the right cell at each face and
    # the flux is -E g(u), so the spike feeds its LEFT neighbour
    g = make_grid(1, (1.0,), (4,))
    u = np.array([0.0, 1.0, 0.0, 0.0])
    nl = power_nonlinearity(0.0, None)  # g(s) = s
    div = drift_divergence(g, constant_drift((1.0,)), u, nl)
    np.testing.assert_array_equal(div, np.array([-4.0, 4.0, 0.0, 0.0]))
    # mirrored field: E = -1 feeds the right neighbour
    div_m = drift_divergence(g, constant_drift((-1.0,)), u, nl)
    np.testing.assert_array_equal(div_m, np.array([0.0, 4.0, -4.0, 0.0]))


def test_drift_divergence_conserves_interior_mass():
    g = make_grid(2, (1.0, 1.0), (16, 16))
    rng = np.random.default_rng(11)
    u = np.zeros(g.shape)
    u[4:12, 4:12] = rng.uniform(0.0, 2.0, (8, 8))
    nl = power_nonlinearity(0.5, 10.0)
    drift = radial_drift((0.5, 0.5), scale=1.3)
    div = drift_divergence(g, drift, u, nl)
    # conservative flux form: interior-supported data telescopes to zero
    assert abs(float(np.sum(div)) * g.cell_volume) <= 1e-13


def test_drift_divergence_zero_without_drift():
    g = make_grid(1, (1.0,), (8,))
    div = drift_divergence(g, None, np.ones(8), power_nonlinearity(1.0, 5.0))
    np.testing.assert_array_equal(div, np.zeros(8))


# ---------------------------------------------------------------- CFL


def test_cfl_dt_linear_oracle():
    g = make_grid(1, (1.0,), (10,))
    nl = power_nonlinearity(0.0, None)  # lipschitz bound 1
    dt = cfl_dt(g, constant_drift((2.0,)), np.ones(10), nl, safety=0.9)
    assert dt == pytest.approx(0.9 * 0.1 / 2.0)  # 0.045


def test_cfl_dt_superlinear_oracle():
    g = make_grid(1, (1.0,), (10,))
    nl = power_nonlinearity(1.0, None)  # |g'| <= 2 smax
    u = np.full(10, 2.0)
    dt = cfl_dt(g, constant_drift((1.5,)), u, nl, safety=1.0)
    assert dt == pytest.approx(1.0 / (1.5 * 4.0 / 0.1))  # 1/60


def test_cfl_dt_sums_over_axes():
    g = make_grid(2, (1.0, 1.0), (10, 20))
    nl = power_nonlinearity(0.0, None)
    dt = cfl_dt(g, constant_drift((1.0, 2.0)), np.ones(g.shape), nl, safety=0.9)
    assert dt == pytest.approx(0.9 / (1.0 / 0.1 + 2.0 / 0.05))


def test_cfl_dt_unbounded_cases():
    g = make_grid(1, (1.0,), (10,))
    nl = power_nonlinearity(1.0, None)
    assert cfl_dt(g, None, np.ones(10), nl) == math.inf
    assert cfl_dt(g, constant_drift((1.0,)), np.zeros(10), nl) == math.inf
    assert cfl_dt(g, constant_drift((0.0,)), np.ones(10), nl) == math.inf


# ---------------------------------------------------------------- stepping


def test_step_matches_run_single_step():
    problem = make_problem("power-drift", dim=1, cells=(32,), theta=0.5, horizon=0.01)
    cfg = SolverConfig(dt=0.01, lin_tol=1e-10)
    new_field, report = step(problem.u0, 0.01, problem, cfg)
    traj = run(problem, cfg)
    np.testing.assert_array_equal(new_field.values, traj.series.fields[-1].values)
    assert report.dt == 0.01
    assert report.lin_iters >= 1


def test_step_rejects_nonpositive_dt():
    problem = make_problem("heat", dim=1, cells=(8,), horizon=1.0)
    with pytest.raises(ValueError, match="dt must be positive"):
        step(problem.u0, 0.0, problem)


def test_run_heat_decays_and_conserves_sign():
    problem = make_problem("heat", dim=1, cells=(64,), sigma=0.05, horizon=0.01)
    traj = run(problem, SolverConfig(lin_tol=1e-10))
    assert traj.status == STATUS_COMPLETED
    assert traj.norms.times[-1] == pytest.approx(0.01)
    # zero boundary data drains mass; the implicit step keeps it positive
    assert np.all(np.diff(traj.norms.l1) <= 1e-12)
    slack = traj.lin_tol_budget / problem.grid.cell_volume + 1e-14
    assert float(traj.series.fields[-1].values.min()) >= -slack


def test_run_positivity_with_drift():
    rng = np.random.default_rng(7)
    g = make_grid(1, (1.0,), (64,))
    u0 = rng.uniform(0.0, 1.0, 64)
    u0[:2] = 0.0
    u0[-2:] = 0.0
    problem = heat_problem(
        g, u0, horizon=0.05, drift=radial_drift((0.5,), 1.0), theta=0.5, reg_n=10.0
    )
    traj = run(problem, SolverConfig(lin_tol=1e-10))
    assert traj.status == STATUS_COMPLETED
    slack = traj.lin_tol_budget / g.cell_volume + 1e-12
    for f in traj.series.fields:
        assert float(f.values.min()) >= -slack


def test_run_norm_history_is_consistent():
    problem = make_problem("power-drift", dim=2, cells=(16, 16), theta=1.0, horizon=0.02)
    cfg = SolverConfig(lin_tol=1e-9, norm_m=3.0, snapshot_stride=4)
    traj = run(problem, cfg)
    ns = traj.norms
    k = len(ns.times)
    assert ns.dts.shape == ns.l1.shape == ns.linf.shape == (k,)
    assert len(traj.source_l1_cumulative) == k
    assert ns.times[0] == 0.0 and ns.dts[0] == 0.0
    np.testing.assert_allclose(np.diff(ns.times), ns.dts[1:], rtol=1e-12)
    # norm ordering L1 >= L2 >= Lm >= ... no; check interlacing with volume 1 box:
    # |u|_1 <= |u|_2 <= |u|_3 <= |u|_inf fails in general, but Linf dominates Lm
    assert np.all(ns.lm <= ns.linf * problem.grid.volume ** (1.0 / 3.0) + 1e-12)
    # snapshots: stride 4 plus the initial state and the final partial step
    assert traj.series.times[0] == 0.0
    assert traj.series.times[-1] == pytest.approx(ns.times[-1])


def test_run_flags_amplitude_blowup():
    problem = make_problem("heat", dim=1, cells=(32,), mass=1.0, sigma=0.1, horizon=1.0)
    traj = run(problem, SolverConfig(cap_linf=1e-3))
    assert traj.status == STATUS_BLOWUP
    assert traj.series.fields[-1].blown_up
    assert traj.norms.times[-1] < 1.0


def test_run_flags_cfl_collapse():
    # dt_min above the CFL bound forces the adaptive loop to give up at t=0
    problem = make_problem("power-drift", dim=1, cells=(32,), theta=1.0, mass=5.0, horizon=1.0)
    traj = run(problem, SolverConfig(dt_min=1.0))
    assert traj.status == STATUS_BLOWUP
    assert len(traj.norms.times) == 1


def test_run_reports_linear_solver_failure():
    problem = make_problem("heat", dim=2, cells=(32, 32), sigma=0.1, horizon=10.0)
    traj = run(problem, SolverConfig(dt=10.0, lin_tol=1e-12, max_lin_iters=1))
    assert traj.status == STATUS_FAILURE


def test_run_deterministic():
    problem = make_problem("kq", dim=2, mass=2.0, horizon=0.05)
    a = run(problem, SolverConfig(lin_tol=1e-9))
    b = run(problem, SolverConfig(lin_tol=1e-9))
    np.testing.assert_array_equal(a.series.fields[-1].values, b.series.fields[-1].values)
    np.testing.assert_array_equal(a.norms.l1, b.norms.l1)


# ---------------------------------------------------------------- weak form


def _bump(z):
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def _manufactured_series(n_cells):
    """Exact solution u = e^{-t} sin(pi x) of u_t - u_xx - (E u)_x = f with
    E = 1, g(u) = u, f = (pi^2 - 1) u - pi e^{-t} cos(pi x)."""
    g = make_grid(1, (1.0,), (n_cells,))
    x = g.axis_centers(0)
    horizon = 0.2
    dt = 0.8 / n_cells
    n_steps = int(round(horizon / dt))
    times = np.linspace(0.0, horizon, n_steps + 1)

    def exact(t):
        return math.exp(-t) * np.sin(math.pi * x)

    def source_fn(coords, t):
        xc = coords[0]
        return (math.pi**2 - 1.0) * math.exp(-t) * np.sin(math.pi * xc) - (
            math.pi * math.exp(-t) * np.cos(math.pi * xc)
        )

    fields = [Field(g, exact(float(t))) for t in times]
    series = SpaceTimeSeries(g, times, fields)
    problem = heat_problem(
        g,
        exact(0.0),
        horizon=horizon,
        drift=constant_drift((1.0,)),
        source=ClosedFormSource(source_fn),
        theta=0.0,
        reg_n=None,
    )
    return series, problem


def test_weak_residual_shrinks_under_refinement():
    testfn = WeakTestFn(
        lambda t, coords: (1.0 + 0.5 * t) * _bump((coords[0] - 0.5) / 0.2),
        name="interior-bump",
    )
    residuals = []
    for n in (32, 64, 128):
        series, problem = _manufactured_series(n)
        residuals.append(weak_residual(series, testfn, problem=problem))
    assert residuals[0] > residuals[1] > residuals[2] > 0
    # first-order scheme: halving (dx, dt) roughly halves the defect
    for coarse, fine in zip(residuals, residuals[1:]):
        assert 1.5 <= coarse / fine <= 3.0


def test_weak_residual_zero_testfn_is_exact():
    series, problem = _manufactured_series(32)
    zero = WeakTestFn(lambda t, coords: np.zeros_like(coords[0]))
    assert weak_residual(series, zero, problem=problem) == 0.0


def test_weak_residual_rejects_boundary_support():
    series, problem = _manufactured_series(32)
    wide = WeakTestFn(lambda t, coords: np.cos(0.5 * math.pi * coords[0]))
    with pytest.raises(ValueError, match="support"):
        weak_residual(series, wide, problem=problem)


def test_weak_residual_window_validation():
    series, problem = _manufactured_series(32)
    testfn = WeakTestFn(lambda t, coords: _bump((coords[0] - 0.5) / 0.2))
    with pytest.raises(ValueError, match="bad window"):
        weak_residual(series, testfn, problem=problem, start=5, end=2)


# ---------------------------------------------------------------- config/io


def test_solver_config_validation():
    with pytest.raises(ValueError, match="safety"):
        SolverConfig(safety=0.0)
    with pytest.raises(ValueError, match="lin_tol"):
        SolverConfig(lin_tol=1e-3)
    with pytest.raises(ValueError, match="dt must be positive"):
        SolverConfig(dt=-0.1)
    with pytest.raises(ValueError, match="norm_m"):
        SolverConfig(norm_m=0.5)
    with pytest.raises(ValueError, match="snapshot_stride"):
        SolverConfig(snapshot_stride=0)


def test_norm_series_roundtrip(tmp_path):
    problem = make_problem("heat", dim=1, cells=(16,), horizon=0.01)
    traj = run(problem, SolverConfig(lin_tol=1e-9))
    path = tmp_path / "norms.csv"
    traj.norms.write_csv(path)
    back = NormSeries.read_csv(path, m=traj.config.norm_m)
    np.testing.assert_array_equal(back.times, traj.norms.times)
    np.testing.assert_array_equal(back.l1, traj.norms.l1)
    np.testing.assert_array_equal(back.lm, traj.norms.lm)
    np.testing.assert_array_equal(back.lin_iters, traj.norms.lin_iters)
    with pytest.raises(ValueError, match="header"):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        NormSeries.read_csv(bad)
