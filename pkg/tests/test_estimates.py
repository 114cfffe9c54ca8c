"""Estimates tests: exponent algebra (exact over rationals), regime
classification, the comparison-ODE machinery, slicing and smallness gates,
decay fitting, the interpolation-ratio probe, and trajectory diagnostics."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superdrift import (
    ConstantsConfig,
    Field,
    NormSeries,
    REGIME_ORDER,
    SolverConfig,
    SpaceTimeSeries,
    Trajectory,
    blowup_time,
    boundary_activation_time,
    classify_regime,
    estimate_gn_constant,
    exponent_table,
    fit_decay_exponent,
    fit_norm_decay,
    gn_ratio,
    make_grid,
    make_problem,
    ode_bound,
    ode_integrate,
    random_band_limited,
    run,
    run_diagnostics,
    slicing_plan,
    smallness_check,
)

# ---------------------------------------------------------------- exponents


def test_exponent_table_oracles():
    t = exponent_table(3, 1)
    assert t.q_star == Fraction(5, 4)
    assert t.q_star_star == Fraction(5, 3)
    assert t.gamma == Fraction(-1, 2)
    assert t.sigma == Fraction(10, 3)
    assert t.sigma_prime == Fraction(10, 7)

    t = exponent_table(3, Fraction(10, 7))
    assert t.q_star == Fraction(2)
    assert t.q_star_star == Fraction(10, 3)
    assert t.gamma == 0

    t = exponent_table(3, 2)
    assert t.q_star == Fraction(10, 3)
    assert t.q_star_star == Fraction(10)
    assert t.gamma == Fraction(2)


def test_exponent_table_at_sigma_prime_closes():
    # the lower endpoint of the admissible q-range has q* = 2 and gamma = 0
    for n in (1, 2, 3):
        base = exponent_table(n, 1)
        t = exponent_table(n, base.sigma_prime)
        assert t.q_star == 2
        assert t.gamma == 0


def test_exponent_table_decay_exponent():
    t = exponent_table(3, 1, mu=1, m=2)
    assert t.decay_exponent == Fraction(3, 4)
    t = exponent_table(2, 1, mu=2, m=2)
    assert t.decay_exponent == 0
    assert exponent_table(3, 1).decay_exponent is None


def test_exponent_table_validation():
    with pytest.raises(ValueError, match="dimension"):
        exponent_table(4, 1)
    with pytest.raises(ValueError, match="q must lie"):
        exponent_table(3, Fraction(5, 2))
    with pytest.raises(ValueError, match="q must lie"):
        exponent_table(3, 0.9)
    with pytest.raises(ValueError, match="mu"):
        exponent_table(3, 1, mu=3, m=2)


@given(
    n_dim=st.integers(1, 3),
    tick=st.integers(0, 10000),
)
@settings(max_examples=500, deadline=None)
def test_exponent_identities_exact(n_dim, tick):
    # q sweeps [1, (N+2)/2) exactly; both structural identities hold as
    # rational-number equalities, not just to rounding
    q = 1 + Fraction(tick, 10001) * (Fraction(n_dim + 2, 2) - 1)
    t = exponent_table(n_dim, q)
    np2 = n_dim + 2
    assert 2 * t.gamma + 2 == t.q_star_star * n_dim / np2
    if q > 1:
        q_conj = q / (q - 1)
        assert q_conj * (2 * t.gamma + 1) == t.q_star_star


# ---------------------------------------------------------------- regimes


def test_regime_global_small_theta_boundary():
    rep = classify_regime(3, Fraction(1, 3))
    assert rep.regime == "GlobalSmallTheta"
    assert rep.slack == 0  # equality counts as inside
    rep = classify_regime(3, Fraction(1, 3) + Fraction(1, 1000))
    assert rep.regime != "GlobalSmallTheta"


def test_regime_local_large_theta():
    rep = classify_regime(3, 1, mu=4)
    assert rep.regime == "LocalLargeTheta"
    assert rep.slack == Fraction(1, 12)
    # strictness: slack exactly 0 does not qualify
    rep = classify_regime(3, 1, mu=3)
    assert rep.regime == "None"


def test_regime_finite_r_example():
    rep = classify_regime(3, 1, r=4, mu=2)
    assert rep.regime == "None"
    assert rep.slack is None
    assert all(not c.holds for c in rep.conditions)


def test_regime_parabolic_large_data():
    rep = classify_regime(3, 1, q=2)
    assert rep.regime == "ParabolicLargeData"
    assert rep.slack == Fraction(1, 10)


def test_regime_order_and_condition_entries():
    assert REGIME_ORDER == (
        "GlobalSmallTheta",
        "ParabolicSmallTheta",
        "ParabolicLargeData",
        "LocalLargeTheta",
    )
    rep = classify_regime(3, Fraction(1, 10), mu=2, q=2)
    names = [c.regime for c in rep.conditions]
    assert names == list(REGIME_ORDER)
    # small theta satisfies both parabolic-small and global conditions
    assert rep.regime == "GlobalSmallTheta"
    assert rep.conditions[1].holds


def test_regime_validation():
    with pytest.raises(ValueError, match="exceed N"):
        classify_regime(3, 0.5, r=3)
    with pytest.raises(ValueError, match="theta"):
        classify_regime(3, -0.1)
    with pytest.raises(ValueError, match="mu"):
        classify_regime(3, 0.5, mu=0.5)


# ---------------------------------------------------------------- ODE tools


def test_ode_bound_value_and_validation():
    # a=1, K=1, C=0: bound is 1/t
    assert ode_bound(1.0, 1.0, 0.0, 2.0) == pytest.approx(0.5)
    assert ode_bound(0.5, 2.0, 1.0, 1.0) == pytest.approx(math.exp(1.0) * 1.0)
    with pytest.raises(ValueError):
        ode_bound(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ode_bound(1.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        ode_bound(1.0, 1.0, 1.0, 0.0)


def test_ode_integrate_pure_decay_oracle():
    # y' = -y^2 from y0=10: y(t) = 10/(1+10 t), so y(1) = 10/11
    sol = ode_integrate(K=1.0, C=0.0, a=1.0, d=0.0, C_m=0.0, y0=10.0, t_end=1.0)
    assert not sol.blew_up
    assert sol.at(1.0) == pytest.approx(10.0 / 11.0, rel=1e-8)


def test_ode_integrate_logistic_oracle():
    # y' = y - y^2: y(t) = y0 e^t / (1 + y0 (e^t - 1))
    y0 = 0.1

    def exact(t):
        e = math.exp(t)
        return y0 * e / (1 + y0 * (e - 1))

    sol = ode_integrate(K=1.0, C=1.0, a=1.0, d=0.0, C_m=0.0, y0=y0, t_end=2.0)
    # the stored samples carry the integrator accuracy ...
    for idx in (len(sol.times) // 2, len(sol.times) - 1):
        t = float(sol.times[idx])
        assert sol.values[idx] == pytest.approx(exact(t), rel=1e-8)
    # ... while at() interpolates linearly between them
    for t in (0.5, 1.0, 2.0):
        assert sol.at(t) == pytest.approx(exact(t), rel=1e-3)


def test_ode_bound_dominates_integrator():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        a = float(rng.uniform(0.3, 3.0))
        K = float(rng.uniform(0.2, 5.0))
        C = float(rng.uniform(0.0, 3.0))
        y0 = float(10.0 ** rng.uniform(-3, 3))
        t_end = float(rng.uniform(0.1, 2.0))
        sol = ode_integrate(K=K, C=C, a=a, d=0.0, C_m=0.0, y0=y0, t_end=t_end)
        assert not sol.blew_up
        for t in np.geomspace(t_end / 50.0, t_end, 8):
            y = sol.at(float(t))
            bound = ode_bound(a, K, C, float(t))
            if bound > 0:
                worst = max(worst, (y - bound) / bound)
    assert worst <= 1e-6


def test_blowup_time_oracles():
    b, t_star = blowup_time(2.0, math.inf, 3, 0.5, 1.0, 1.0)
    assert b == pytest.approx(2.0)
    assert t_star == pytest.approx(0.5)
    # finite r by hand: denom = 2*12 - 2*3 - 3*12/4 = 9, b = 6/9
    b, t_star = blowup_time(2.0, 12.0, 3, 0.25, 1.0, 1.0)
    assert b == pytest.approx(2.0 / 3.0)
    assert t_star == pytest.approx(1.5)
    with pytest.raises(ValueError, match="denominator"):
        blowup_time(2.0, math.inf, 3, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError, match="theta"):
        blowup_time(2.0, math.inf, 3, 0.0, 1.0, 1.0)


def test_blowup_time_matches_ode_hitting_time():
    # y' = C_mu y^{1+b} hits Y at T* (1 - (y0/Y)^b).  A threshold of
    # y0 * 10^{6/b} parks the crossing at T* (1 - 1e-6): far enough from the
    # singularity to be representable in float time for every b, close enough
    # that the hit is the predicted time to well within 1%.
    rng = np.random.default_rng(5)
    for _ in range(50):
        n_dim = int(rng.integers(1, 4))
        mu = float(rng.uniform(2.0, 4.0))
        b_target = float(rng.uniform(0.25, 4.0))
        theta = b_target * mu / (2.0 + b_target * n_dim)
        c_mu = float(rng.uniform(0.5, 2.0))
        norm_u0 = float(rng.uniform(0.7, 2.0))
        b, t_star = blowup_time(mu, math.inf, n_dim, theta, c_mu, norm_u0)
        assert b == pytest.approx(b_target, rel=1e-12)
        y0 = norm_u0**mu
        threshold = y0 * 10.0 ** (6.0 / b)
        sol = ode_integrate(
            K=0.0, C=0.0, a=0.0, d=b, C_m=c_mu, y0=y0,
            t_end=1.2 * t_star, threshold=threshold,
        )
        assert sol.blew_up
        assert sol.hit_time == pytest.approx(t_star, rel=0.01)


# ---------------------------------------------------------------- gates


def test_slicing_plan_oracle():
    h, count = slicing_plan(theta=0.5, norm_e=1.0, m0=1.0, a_const=1.0, horizon=1.0)
    assert h == pytest.approx(0.25)
    assert count == 4
    h, count = slicing_plan(theta=0.5, norm_e=0.0, m0=1.0, a_const=1.0, horizon=1.0)
    assert h == math.inf and count == 1
    with pytest.raises(ValueError, match="theta"):
        slicing_plan(0.0, 1.0, 1.0, 1.0, 1.0)


def test_smallness_threshold_oracle():
    res = smallness_check(theta=1.0, q=2.0, norm_e=1.0, norm_f=0.0, norm_u0=0.25)
    assert res.threshold == pytest.approx(0.25)
    assert res.lhs == pytest.approx(0.25)
    assert res.satisfied  # boundary counts
    res = smallness_check(theta=1.0, q=2.0, norm_e=1.0, norm_f=0.1, norm_u0=0.2)
    assert not res.satisfied
    with pytest.raises(ValueError, match="C must be positive"):
        smallness_check(1.0, None, 1.0, 0.0, 0.1, c_const=0.0)


# ---------------------------------------------------------------- decay fit


def test_fit_decay_exact_power_law():
    t = np.linspace(0.01, 2.0, 200)
    v = 3.7 * t**-0.6
    fit = fit_decay_exponent(t, v, predicted=-0.6)
    assert fit.slope == pytest.approx(-0.6, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.7), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.relative_deviation <= 1e-9
    assert fit.n_samples == 200


def test_fit_decay_constant_series_has_zero_slope():
    t = np.linspace(0.1, 1.0, 50)
    fit = fit_decay_exponent(t, np.full(50, 2.5))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_decay_window_and_validation():
    t = np.linspace(0.01, 1.0, 100)
    v = t**-1.0
    fit = fit_decay_exponent(t, v, window=(0.5, 1.0))
    assert fit.n_samples == int(np.count_nonzero((t >= 0.5) & (t <= 1.0)))
    with pytest.raises(ValueError, match="at least"):
        fit_decay_exponent(t, v, window=(0.99, 1.0))
    with pytest.raises(ValueError, match="empty window"):
        fit_decay_exponent(t, v, window=(1.0, 0.5))
    with pytest.raises(ValueError, match="non-positive"):
        fit_decay_exponent(t, 0.0 * v)


def test_fit_norm_decay_column_selection(tmp_path):
    problem = make_problem("heat", dim=1, cells=(32,), sigma=0.05, horizon=0.02)
    traj = run(problem, SolverConfig(lin_tol=1e-9, norm_m=4.0))
    fit1 = fit_norm_decay(traj.norms, 1.0)
    fit4 = fit_norm_decay(traj.norms, 4.0)
    fitinf = fit_norm_decay(traj.norms, math.inf)
    # higher norms decay at least as fast for spreading bumps
    assert fitinf.slope <= fit4.slope + 1e-6 <= fit1.slope + 2e-6
    with pytest.raises(ValueError, match="not recorded"):
        fit_norm_decay(traj.norms, 3.0)


# ---------------------------------------------------------------- gn ratio


def test_gn_ratio_sine_oracle():
    # u = sin(pi x) in 1D: int u^6 = 5/16, (int u^2)^2 = 1/4, int u'^2 = pi^2/2
    g = make_grid(1, (1.0,), (64,))
    x = g.axis_centers(0)
    f = Field(g, np.sin(math.pi * x))
    assert gn_ratio(f) == pytest.approx(5.0 / (2.0 * math.pi**2), rel=1e-2)
    assert gn_ratio(Field(g, np.zeros(64))) == 0.0


def test_gn_ratio_series_matches_static_field():
    g = make_grid(1, (1.0,), (32,))
    x = g.axis_centers(0)
    f = Field(g, np.sin(math.pi * x))
    series = SpaceTimeSeries(g, np.array([0.0, 1.0]), [f, f])
    assert gn_ratio(series) == pytest.approx(gn_ratio(f), rel=1e-12)


def test_estimate_gn_constant_deterministic():
    g = make_grid(1, (1.0,), (32,))
    a = estimate_gn_constant(g, n_fields=10, seed=0)
    b = estimate_gn_constant(g, n_fields=10, seed=0)
    assert a == b > 0.0
    rng = np.random.default_rng(0)
    f = random_band_limited(g, rng, max_mode=4)
    assert f.values.shape == g.shape
    assert np.all(np.isfinite(f.values))


# ---------------------------------------------------------------- misc


def test_boundary_activation_time_detects_wall_contact():
    g = make_grid(1, (1.0,), (10,))
    interior = np.zeros(10)
    interior[5] = 1.0
    touched = interior.copy()
    touched[0] = 0.5
    series = SpaceTimeSeries(
        g,
        np.array([0.0, 0.5, 1.0]),
        [Field(g, interior), Field(g, interior), Field(g, touched)],
    )
    assert boundary_activation_time(series) == 1.0
    quiet = SpaceTimeSeries(g, np.array([0.0, 1.0]), [Field(g, interior)] * 2)
    assert boundary_activation_time(quiet) == math.inf
    with pytest.raises(ValueError, match="fraction"):
        boundary_activation_time(series, fraction=1.5)


def test_constants_config_validation():
    ConstantsConfig(alpha=None, c_gn=None)  # optional entries may be absent
    with pytest.raises(ValueError, match="sobolev"):
        ConstantsConfig(sobolev=0.0)
    with pytest.raises(ValueError, match="a_const"):
        ConstantsConfig(a_const=-1.0)


# ---------------------------------------------------------------- diagnostics


def _craft_trajectory(fields, times, l1_history):
    """Hand-built trajectory for negative-control tests; norm history and
    snapshots are taken at face value by the checker."""
    grid = fields[0].grid
    problem = make_problem("heat", dim=1, cells=grid.cells, horizon=float(times[-1]))
    problem = type(problem)(
        grid=grid,
        coefficients=type(problem.coefficients)(
            diffusivity=np.ones((1,) + grid.shape),
            alpha=1.0,
            beta=1.0,
            u0=fields[0],
        ),
        nonlinearity=problem.nonlinearity,
        horizon=float(times[-1]),
    )
    times = np.asarray(times, dtype=float)
    k = len(times)
    zeros = np.zeros(k)
    norms = NormSeries(
        m=2.0,
        times=times,
        dts=np.concatenate([[0.0], np.diff(times)]),
        l1=np.asarray(l1_history, dtype=float),
        l2=np.ones(k),
        lm=np.ones(k),
        linf=np.array([float(np.max(np.abs(f.values))) for f in fields]),
        lin_iters=np.zeros(k, dtype=int),
    )
    series = SpaceTimeSeries(grid, times, fields)
    return Trajectory(
        problem=problem,
        config=SolverConfig(),
        status="completed",
        series=series,
        norms=norms,
        reports=[],
        lin_tol_budget=0.0,
        source_l1_cumulative=zeros,
    )


def test_diagnostics_pass_on_heat_run():
    problem = make_problem("heat", dim=1, cells=(64,), sigma=0.05, horizon=0.01)
    traj = run(problem, SolverConfig(lin_tol=1e-10))
    report = run_diagnostics(traj, m_values=(2.0, 3.0))
    assert report.mass_bound_ok
    assert report.superlevel_ok
    assert report.diff_ineq_ok
    assert report.gn_ok
    assert report.all_ok
    assert report.m0 == pytest.approx(traj.norms.l1[0])
    assert report.decay_fit is not None
    assert report.decay_fit.predicted == pytest.approx(-0.25)
    d = report.as_dict()
    assert d["all_ok"] is True
    assert "2.0" in d["diff_ineq_by_m"]


def test_diagnostics_gn_constant_covers_smooth_bumps():
    # the auto-estimated interpolation constant must dominate concentrated
    # profiles, not just band-limited noise; a plain 2d heat run is the
    # canonical smooth bump and has to come out clean
    problem = make_problem("heat", dim=2, cells=(48, 48), sigma=0.05, horizon=0.015)
    traj = run(problem, SolverConfig(dt=5e-4, lin_tol=1e-10))
    report = run_diagnostics(traj)
    assert report.gn_ok
    assert report.gn_ratio <= report.gn_constant_used
    assert report.all_ok


def test_diagnostics_flag_mass_growth():
    g = make_grid(1, (1.0,), (8,))
    u = Field(g, np.full(8, 2.0))
    traj = _craft_trajectory([u, u, u], [0.0, 0.5, 1.0], [2.0, 2.5, 3.0])
    report = run_diagnostics(traj)
    assert not report.mass_bound_ok
    assert report.mass_worst_slack < 0
    assert not report.all_ok
    assert report.diff_ineq_ok  # constant snapshots keep the inequality


def test_diagnostics_flag_norm_jump():
    g = make_grid(1, (1.0,), (8,))
    u = Field(g, np.full(8, 2.0))
    grown = Field(g, np.full(8, 10.0))
    traj = _craft_trajectory([u, u, grown], [0.0, 0.5, 1.0], [2.0, 2.0, 2.0])
    report = run_diagnostics(traj)
    assert report.mass_bound_ok  # the (lying) norm history itself is flat
    assert not report.diff_ineq_ok
    assert report.diff_ineq_worst_slack < 0


def test_diagnostics_flag_superlevel_violation():
    g = make_grid(1, (1.0,), (8,))
    spike_vals = np.zeros(8)
    spike_vals[3] = 100.0
    spike = Field(g, spike_vals)
    traj = _craft_trajectory([spike, spike], [0.0, 1.0], [0.001, 0.001])
    report = run_diagnostics(traj)
    assert report.mass_bound_ok
    assert not report.superlevel_ok
    assert not report.all_ok


def test_diagnostics_slack_csv(tmp_path):
    problem = make_problem("heat", dim=1, cells=(32,), sigma=0.05, horizon=0.01)
    traj = run(problem, SolverConfig(lin_tol=1e-9))
    report = run_diagnostics(traj, m_values=(2.0,))
    path = tmp_path / "slacks.csv"
    report.write_slack_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,mass_slack,diffineq_slack_m2"
    assert len(lines) == 1 + len(report.mass_times)
    # endpoints carry no centered-difference slack
    assert lines[1].endswith(",")
