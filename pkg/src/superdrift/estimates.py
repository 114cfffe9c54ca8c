"""Closed-form thresholds and exponents, ODE comparison machinery, and
post-hoc diagnostics that grade recorded trajectories.

Everything here is pure arithmetic on configuration numbers or on the CSV-
level data a run leaves behind. Exponent algebra runs in exact rational
arithmetic whenever the inputs are rational, so the structural identities can
be asserted exactly instead of to a float tolerance. Checks that involve an
unnamed multiplicative constant are labeled as relative to assumed constants;
they grade shape, not absolute size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .fields import (
    Field,
    Grid,
    SpaceTimeSeries,
    boundary_mask,
    integrate_power,
    superlevel_measure,
)
from .model import ProblemSpec
from .solver import NormSeries, Trajectory, gradient_energy

__all__ = [
    "ExponentTable",
    "exponent_table",
    "RegimeCondition",
    "RegimeReport",
    "classify_regime",
    "REGIME_ORDER",
    "ode_bound",
    "OdeSolution",
    "ode_integrate",
    "blowup_time",
    "slicing_plan",
    "SmallnessResult",
    "smallness_check",
    "DecayFit",
    "fit_decay_exponent",
    "fit_norm_decay",
    "boundary_activation_time",
    "default_fit_window",
    "gn_ratio",
    "random_band_limited",
    "estimate_gn_constant",
    "ConstantsConfig",
    "DiagnosticsReport",
    "run_diagnostics",
]

Number = Union[int, float, Fraction]


def _rational(*xs) -> bool:
    return all(x is None or isinstance(x, Rational) for x in xs)


def _half(exact: bool):
    return Fraction(1, 2) if exact else 0.5


@dataclass(frozen=True)
class ExponentTable:
    """Derived integrability exponents for dimension N and base exponent q.

    q_star and q_star_star are the first- and second-order parabolic Sobolev
    conjugates of q, gamma the interpolation exponent pairing them, sigma the
    space-time exponent bounded by the energy norms (sigma_prime its value of
    q with q_star = 2). decay_exponent is the smoothing rate (N/2)(1/mu-1/m)
    when mu and m are supplied. Fields are Fractions when the inputs were.
    """

    n_dim: int
    q: Number
    r: Number
    theta: Number
    mu: Optional[Number]
    m: Optional[Number]
    q_star: Number
    q_star_star: Number
    gamma: Number
    sigma: Number
    sigma_prime: Number
    decay_exponent: Optional[Number]

    def as_floats(self) -> dict:
        out = {}
        for key in (
            "q_star",
            "q_star_star",
            "gamma",
            "sigma",
            "sigma_prime",
            "decay_exponent",
        ):
            v = getattr(self, key)
            out[key] = None if v is None else float(v)
        return out


def exponent_table(
    n_dim: int,
    q: Number,
    r: Number = math.inf,
    theta: Number = 0,
    mu: Optional[Number] = None,
    m: Optional[Number] = None,
) -> ExponentTable:
    """Evaluate the exponent family at (N, q), exactly for rational inputs."""
    if n_dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2, or 3, got {n_dim}")
    np2 = n_dim + 2
    if not (1 <= q < np2 / 2):
        raise ValueError(f"q must lie in [1, (N+2)/2) = [1, {np2 / 2}), got {q}")
    exact = _rational(q, mu, m)
    one = Fraction(1) if exact else 1.0
    qv = Fraction(q) if exact else float(q)
    q_star = (np2 * qv) / (np2 - qv)
    q_star_star = (np2 * qv) / (np2 - 2 * qv)
    gamma = (qv * n_dim - 2 * n_dim - 4 + 4 * qv) / (2 * (np2 - 2 * qv))
    sigma = 2 * np2 * one / n_dim
    sigma_prime = 2 * np2 * one / (n_dim + 4)
    decay = None
    if mu is not None and m is not None:
        if not (1 <= mu <= m):
            raise ValueError(f"need 1 <= mu <= m, got mu={mu}, m={m}")
        muv = Fraction(mu) if exact else float(mu)
        mv = Fraction(m) if exact else float(m)
        decay = (n_dim * _half(exact)) * (1 / muv - 1 / mv)
    # structural identities, asserted at construction
    lhs = 2 * gamma + 2
    rhs = q_star_star * n_dim / np2
    if abs(lhs - rhs) > 1e-12 * max(1.0, abs(float(rhs))):
        raise AssertionError(f"exponent identity violated: 2g+2={lhs} vs {rhs}")
    if qv > 1:
        q_conj = qv / (qv - 1)
        lhs2 = q_conj * (2 * gamma + 1)
        if abs(lhs2 - q_star_star) > 1e-12 * max(1.0, abs(float(q_star_star))):
            raise AssertionError(
                f"exponent identity violated: q'(2g+1)={lhs2} vs {q_star_star}"
            )
    return ExponentTable(
        n_dim=n_dim,
        q=qv,
        r=r,
        theta=theta,
        mu=mu,
        m=m,
        q_star=q_star,
        q_star_star=q_star_star,
        gamma=gamma,
        sigma=sigma,
        sigma_prime=sigma_prime,
        decay_exponent=decay,
    )


@dataclass(frozen=True)
class RegimeCondition:
    regime: str
    condition: str
    slack: Number
    holds: bool


@dataclass
class RegimeReport:
    """Which well-posedness regime the parameters land in.

    ``regime`` is the strongest satisfied entry of REGIME_ORDER (or "None");
    slack is the signed distance to the binding threshold, positive inside.
    """

    regime: str
    binding_condition: str
    slack: Optional[Number]
    conditions: list[RegimeCondition]
    n_dim: int
    theta: Number
    r: Number
    mu: Optional[Number]
    q: Optional[Number]


REGIME_ORDER = (
    "GlobalSmallTheta",
    "ParabolicSmallTheta",
    "ParabolicLargeData",
    "LocalLargeTheta",
)


def classify_regime(
    n_dim: int,
    theta: Number,
    r: Number = math.inf,
    mu: Optional[Number] = None,
    q: Optional[Number] = None,
) -> RegimeReport:
    """Evaluate every admissibility condition and pick the strongest regime.

    Thresholds written with an equality are treated as inclusive (slack 0
    still qualifies); the local-in-time condition is strict. Slack values are
    exact Fractions when the inputs are rational.
    """
    if n_dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2, or 3, got {n_dim}")
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if r != math.inf and r <= n_dim:
        raise ValueError(f"integrability order r must exceed N={n_dim}, got {r}")
    if mu is not None and mu < 1:
        raise ValueError(f"mu must be >= 1, got {mu}")
    exact = _rational(theta, mu, q) and (r == math.inf or isinstance(r, Rational))
    one = Fraction(1) if exact else 1.0
    th = Fraction(theta) if exact else float(theta)
    inv_r = 0 * one if r == math.inf else one / r
    conditions: list[RegimeCondition] = []

    # strongest: global existence under small growth
    slack_g = one / n_dim - (inv_r + th)
    conditions.append(
        RegimeCondition(
            regime="GlobalSmallTheta",
            condition="0 < theta <= 1/N and 1/r + theta <= 1/N",
            slack=slack_g,
            holds=bool(theta > 0 and th <= one / n_dim and slack_g >= 0),
        )
    )
    slack_ps = one / (n_dim + 2) - (inv_r + th)
    conditions.append(
        RegimeCondition(
            regime="ParabolicSmallTheta",
            condition="1/r + theta <= 1/(N+2)",
            slack=slack_ps,
            holds=bool(theta > 0 and slack_ps >= 0),
        )
    )
    if q is not None:
        qv = Fraction(q) if exact else float(q)
        q_lo = 2 * (n_dim + 2) * one / (n_dim + 4)
        q_hi = (n_dim + 2) * one / 2
        q_in_range = q_lo <= qv < q_hi
        if q_in_range:
            qss = exponent_table(n_dim, qv).q_star_star
            slack_pl = one / (n_dim + 2) - (inv_r + th / qss)
            holds_pl = bool(theta > 0 and r > n_dim + 2 and slack_pl >= 0)
        else:
            slack_pl = None
            holds_pl = False
        conditions.append(
            RegimeCondition(
                regime="ParabolicLargeData",
                condition=(
                    "1/r + theta/q** <= 1/(N+2) with r > N+2 and "
                    "q in [2(N+2)/(N+4), (N+2)/2); data smallness checked separately"
                ),
                slack=slack_pl,
                holds=holds_pl,
            )
        )
    if mu is not None:
        muv = Fraction(mu) if exact else float(mu)
        slack_l = one / n_dim - (inv_r + th / muv)
        conditions.append(
            RegimeCondition(
                regime="LocalLargeTheta",
                condition="1/r + theta/mu < 1/N (strict)",
                slack=slack_l,
                holds=bool(theta > 0 and slack_l > 0),
            )
        )
    by_name = {c.regime: c for c in conditions}
    for name in REGIME_ORDER:
        c = by_name.get(name)
        if c is not None and c.holds:
            return RegimeReport(
                regime=name,
                binding_condition=c.condition,
                slack=c.slack,
                conditions=conditions,
                n_dim=n_dim,
                theta=theta,
                r=r,
                mu=mu,
                q=q,
            )
    return RegimeReport(
        regime="None",
        binding_condition="no admissibility condition satisfied",
        slack=None,
        conditions=conditions,
        n_dim=n_dim,
        theta=theta,
        r=r,
        mu=mu,
        q=q,
    )


def ode_bound(a: float, K: float, C: float, t: float) -> float:
    """Universal bound for y' + K y^{1+a} <= C y: (1/(aK))^{1/a} e^{Ct} t^{-1/a}.

    Independent of y(0); valid for every t > 0.
    """
    if a <= 0 or K <= 0:
        raise ValueError(f"need a > 0 and K > 0, got a={a}, K={K}")
    if C < 0:
        raise ValueError(f"need C >= 0, got {C}")
    if t <= 0:
        raise ValueError(f"bound only valid for t > 0, got {t}")
    return (1.0 / (a * K)) ** (1.0 / a) * math.exp(C * t) / t ** (1.0 / a)


@dataclass
class OdeSolution:
    times: np.ndarray
    values: np.ndarray
    blew_up: bool
    hit_time: Optional[float]
    threshold: float

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def ode_integrate(
    K: float,
    C: float,
    a: float,
    d: float,
    C_m: float,
    y0: float,
    t_end: float,
    threshold: float = 1e12,
    n_samples: int = 256,
) -> OdeSolution:
    """High-accuracy oracle for y' = C y - K y^{1+a} + C_m y^{1+d}.

    Samples on a log-spaced grid (plus t=0) and reports the time y crosses
    ``threshold`` as a suspected blow-up; an integrator step collapse without
    a crossing is reported the same way, with the last reached time as a
    lower bracket for the blow-up time.
    """
    if y0 <= 0:
        raise ValueError(f"y0 must be positive, got {y0}")
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if min(a, d) < 0:
        raise ValueError("exponent increments a, d must be >= 0")

    def rhs(_t, y):
        yv = max(float(y[0]), 0.0)
        return [C * yv - K * yv ** (1.0 + a) + C_m * yv ** (1.0 + d)]

    def cap(_t, y):
        return y[0] - threshold

    cap.terminal = True
    cap.direction = 1.0
    grid = np.concatenate([[0.0], np.geomspace(t_end * 1e-6, t_end, n_samples)])
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        [y0],
        method="RK45",
        rtol=1e-10,
        atol=1e-14 * max(1.0, y0),
        t_eval=grid,
        events=[cap],
    )
    times = sol.t
    values = sol.y[0]
    hit: Optional[float] = None
    blew = False
    if sol.t_events[0].size:
        hit = float(sol.t_events[0][0])
        blew = True
        times = np.append(times, hit)
        values = np.append(values, threshold)
    elif sol.status == -1:
        blew = True
        hit = float(times[-1]) if times.size else 0.0
    return OdeSolution(
        times=times, values=values, blew_up=blew, hit_time=hit, threshold=threshold
    )


def blowup_time(
    mu: float,
    r: float,
    n_dim: int,
    theta: float,
    C_mu: float,
    norm_u0: float,
) -> tuple[float, float]:
    """Exponent b and horizon T of the superlinear comparison ODE.

    y(t) = ||u(t)||_mu^mu obeys y' <= C_mu y^{1+b}; separation of variables
    blows that majorant up at T = 1/(b C_mu y0^b) with y0 = norm_u0^mu, and b
    = 2 r theta / (mu r - mu N - N r theta) (the 1/r = 0 limit for r = inf).
    Requires the denominator to be positive.
    """
    if n_dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2, or 3, got {n_dim}")
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if mu < 1:
        raise ValueError(f"mu must be >= 1, got {mu}")
    if C_mu <= 0 or norm_u0 <= 0:
        raise ValueError("C_mu and norm_u0 must be positive")
    if r == math.inf:
        denom = mu - n_dim * theta
        numer = 2.0 * theta
    else:
        if r <= 0:
            raise ValueError(f"r must be positive, got {r}")
        denom = mu * r - mu * n_dim - n_dim * r * theta
        numer = 2.0 * r * theta
    if denom <= 0:
        raise ValueError(
            "blow-up exponent undefined: need 1/r + theta/mu < 1/N "
            f"(denominator {denom} <= 0)"
        )
    b = numer / denom
    y0 = norm_u0**mu
    t_star = 1.0 / (b * C_mu * y0**b)
    return b, t_star


def slicing_plan(
    theta: float,
    norm_e: float,
    m0: float,
    a_const: float,
    horizon: float,
) -> tuple[float, int]:
    """Time-slice width keeping the per-slice drift contribution below 1/4.

    h = (4 A ||E||^2 M0^{2 theta})^{-1/(2 theta)}; the number of slices is
    ceil(T/h), one slice when h >= T. Vanishing drift or mass gives h = inf.
    """
    if theta <= 0:
        raise ValueError(f"slicing needs theta > 0, got {theta}")
    if a_const <= 0:
        raise ValueError(f"A must be positive, got {a_const}")
    if norm_e < 0 or m0 < 0 or horizon <= 0:
        raise ValueError("norm_e, m0 must be >= 0 and horizon > 0")
    base = 4.0 * a_const * norm_e**2 * m0 ** (2.0 * theta)
    if base == 0.0:
        return math.inf, 1
    h = base ** (-1.0 / (2.0 * theta))
    if h >= horizon:
        return h, 1
    return h, int(math.ceil(horizon / h * (1.0 - 1e-12)))


@dataclass
class SmallnessResult:
    lhs: float
    threshold: float
    satisfied: bool
    theta: float
    q: Optional[float]
    c_const: float
    note: str = "relative to assumed constants"

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "threshold": self.threshold,
            "satisfied": self.satisfied,
            "theta": self.theta,
            "q": self.q,
            "C": self.c_const,
            "note": self.note,
        }


def smallness_check(
    theta: float,
    q: Optional[float],
    norm_e: float,
    norm_f: float,
    norm_u0: float,
    c_const: float = 1.0,
) -> SmallnessResult:
    """Small-data gate ||E||^{1/theta} (||f|| + ||u0||) <= theta/(C(theta+1))^{(theta+1)/theta}."""
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if c_const <= 0:
        raise ValueError(f"C must be positive, got {c_const}")
    if min(norm_e, norm_f, norm_u0) < 0:
        raise ValueError("norms must be >= 0")
    threshold = theta / (c_const * (theta + 1.0)) ** ((theta + 1.0) / theta)
    lhs = norm_e ** (1.0 / theta) * (norm_f + norm_u0)
    return SmallnessResult(
        lhs=lhs,
        threshold=threshold,
        satisfied=lhs <= threshold,
        theta=theta,
        q=q,
        c_const=c_const,
    )


@dataclass
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int
    predicted: Optional[float] = None
    relative_deviation: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_samples": self.n_samples,
            "predicted": self.predicted,
            "relative_deviation": self.relative_deviation,
        }


def fit_decay_exponent(
    times,
    values,
    window: Optional[tuple[float, float]] = None,
    predicted: Optional[float] = None,
    min_samples: int = 10,
) -> DecayFit:
    """Least-squares slope of log(values) against log(times) over a window."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have matching shapes")
    lo, hi = window if window is not None else (0.0, math.inf)
    if not (hi > lo):
        raise ValueError(f"empty window [{lo}, {hi}]")
    mask = (t > 0.0) & (t >= lo) & (t <= hi)
    if int(np.count_nonzero(mask)) < min_samples:
        raise ValueError(
            f"need at least {min_samples} samples in window, got {int(np.count_nonzero(mask))}"
        )
    tv = t[mask]
    vv = v[mask]
    if np.any(vv <= 0):
        raise ValueError("non-positive norm values inside the fit window")
    x = np.log(tv)
    y = np.log(vv)
    xm = x - x.mean()
    denom = float(np.sum(xm * xm))
    if denom == 0.0:
        raise ValueError("degenerate window: all times equal")
    slope = float(np.sum(xm * y) / denom)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    rel = None
    if predicted is not None and predicted != 0:
        rel = abs(slope - predicted) / abs(predicted)
    return DecayFit(
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        window=(float(lo), float(min(hi, tv[-1]))),
        n_samples=int(tv.size),
        predicted=predicted,
        relative_deviation=rel,
    )


def fit_norm_decay(
    norms: NormSeries,
    m: float,
    window: Optional[tuple[float, float]] = None,
    predicted: Optional[float] = None,
) -> DecayFit:
    """Decay fit against the recorded norm column selected by m."""
    if m == 1:
        col = norms.l1
    elif m == 2:
        col = norms.l2
    elif math.isinf(m):
        col = norms.linf
    elif abs(m - norms.m) <= 1e-12:
        col = norms.lm
    else:
        raise ValueError(
            f"norm order {m} not recorded (series tracks m={norms.m}, 1, 2, inf)"
        )
    return fit_decay_exponent(norms.times, col, window=window, predicted=predicted)


def boundary_activation_time(series: SpaceTimeSeries, fraction: float = 0.01) -> float:
    """First snapshot time when boundary-adjacent amplitude reaches the given
    fraction of the global maximum; inf when it never does."""
    if not (0 < fraction < 1):
        raise ValueError(f"fraction must be in (0,1), got {fraction}")
    bmask = boundary_mask(series.grid)
    for t, f in zip(series.times, series.fields):
        if f.blown_up:
            break
        a = np.abs(f.values)
        gmax = float(a.max())
        if gmax == 0.0:
            continue
        if float(a[bmask].max()) > fraction * gmax:
            return float(t)
    return math.inf


def default_fit_window(trajectory: Trajectory, fraction: float = 0.01) -> tuple[float, float]:
    """Early-time window [t after 5 steps, boundary activation] for decay fits."""
    times = trajectory.norms.times
    lo_idx = min(5, len(times) - 1)
    lo = float(times[lo_idx])
    hi = boundary_activation_time(trajectory.series, fraction)
    if not math.isfinite(hi):
        hi = float(times[-1])
    return lo, hi


def gn_ratio(obj: Union[Field, SpaceTimeSeries]) -> float:
    """Interpolation-functional ratio with exponent sigma = 2(N+2)/N.

    For a field: int |u|^sigma / ((int u^2)^{2/N} int |grad u|^2), gradients
    taken by the scheme's own two-point differences with zero boundary data.
    For a series the numerator and gradient term integrate over time and the
    L^2 factor becomes its supremum in time. Returns 0 for vanishing input.
    """
    if isinstance(obj, Field):
        n = obj.grid.dim
        sigma = 2.0 * (n + 2) / n
        num = integrate_power(obj, sigma)
        l2sq = integrate_power(obj, 2.0)
        grad = gradient_energy(obj)
        denom = l2sq ** (2.0 / n) * grad
        return 0.0 if denom == 0.0 else num / denom
    n = obj.grid.dim
    sigma = 2.0 * (n + 2) / n
    w = obj.time_weights()
    num = 0.0
    grad = 0.0
    peak = 0.0
    for wk, f in zip(w, obj.fields):
        num += wk * integrate_power(f, sigma)
        grad += wk * gradient_energy(f)
        peak = max(peak, integrate_power(f, 2.0))
    denom = peak ** (2.0 / n) * grad
    return 0.0 if denom == 0.0 else num / denom


def random_band_limited(grid: Grid, rng: np.random.Generator, max_mode: int = 4) -> Field:
    """Random low-mode sine combination, vanishing on the box boundary."""
    centers = [grid.axis_centers(d) for d in range(grid.dim)]
    vals = np.zeros(grid.shape)
    modes = [range(1, max_mode + 1)] * grid.dim
    import itertools

    for combo in itertools.product(*modes):
        c = float(rng.normal())
        term = np.ones(grid.shape)
        for d, kd in enumerate(combo):
            s = np.sin(kd * math.pi * centers[d] / grid.extents[d])
            shape = [1] * grid.dim
            shape[d] = -1
            term = term * s.reshape(shape)
        vals += c * term
    return Field(grid, vals)


def estimate_gn_constant(
    grid: Grid, n_fields: int = 200, seed: int = 0, max_mode: int = 4
) -> float:
    """Empirical sup of gn_ratio over seeded random band-limited fields."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_fields):
        best = max(best, gn_ratio(random_band_limited(grid, rng, max_mode)))
    return best


def _bump_ratio_sup(grid: Grid) -> float:
    """Sup of gn_ratio over centered Gaussian bumps from cell to box scale.

    Band-limited noise undersamples concentrated profiles, which are the
    near-maximizers of the interpolation functional; without this family the
    auto-estimated constant can sit below the ratio of an ordinary smooth run.
    """
    centers = [grid.axis_centers(d) for d in range(grid.dim)]
    h = max(grid.spacing)
    cap = min(grid.extents) / 3.0
    best = 0.0
    width = 1.5 * h
    while width <= cap:
        vals = np.ones(grid.shape)
        for d in range(grid.dim):
            x = centers[d] - 0.5 * grid.extents[d]
            prof = np.exp(-0.5 * (x / width) ** 2)
            shape = [1] * grid.dim
            shape[d] = -1
            vals = vals * prof.reshape(shape)
        best = max(best, gn_ratio(Field(grid, vals)))
        width *= 1.6
    return best


@dataclass
class ConstantsConfig:
    """Knobs for the constants the analysis leaves unnamed.

    alpha/beta default to the problem's ellipticity bounds when used through
    run_diagnostics; c_gn = None asks for an empirical estimate on the run's
    grid. All checks that consume these are relative to assumed constants.
    """

    alpha: Optional[float] = None
    beta: Optional[float] = None
    sobolev: float = 1.0
    c_gn: Optional[float] = None
    c_alpha_q: float = 1.0
    a_const: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "sobolev", "c_gn", "c_alpha_q", "a_const"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass
class DiagnosticsReport:
    """Pass/fail grades of a trajectory against the integral estimates."""

    m0: float
    mass_bound_ok: bool
    mass_worst_slack: float
    mass_slack: np.ndarray
    mass_times: np.ndarray
    superlevel_ok: bool
    superlevel_worst_slack: float
    superlevel_levels: np.ndarray
    superlevel_slacks: np.ndarray
    diff_ineq_ok: bool
    diff_ineq_worst_slack: float
    diff_ineq_by_m: dict
    gn_ok: bool
    gn_ratio: float
    gn_constant_used: float
    decay_fit: Optional[DecayFit]
    note: str = "thresholds relative to assumed constants"

    @property
    def all_ok(self) -> bool:
        return bool(
            self.mass_bound_ok
            and self.superlevel_ok
            and self.diff_ineq_ok
            and self.gn_ok
        )

    def as_dict(self) -> dict:
        return {
            "m0": self.m0,
            "mass_bound_ok": self.mass_bound_ok,
            "mass_worst_slack": self.mass_worst_slack,
            "superlevel_ok": self.superlevel_ok,
            "superlevel_worst_slack": self.superlevel_worst_slack,
            "superlevel_levels": [float(k) for k in self.superlevel_levels],
            "diff_ineq_ok": self.diff_ineq_ok,
            "diff_ineq_worst_slack": self.diff_ineq_worst_slack,
            "diff_ineq_by_m": {
                str(m): {"ok": ok, "worst_slack": ws}
                for m, (ok, ws, _t, _s) in self.diff_ineq_by_m.items()
            },
            "gn_ok": self.gn_ok,
            "gn_ratio": self.gn_ratio,
            "gn_constant_used": self.gn_constant_used,
            "decay_fit": None if self.decay_fit is None else self.decay_fit.as_dict(),
            "all_ok": self.all_ok,
            "note": self.note,
        }

    def write_slack_csv(self, path: Union[str, Path]) -> None:
        """Per-time slack table: mass slack on the norm grid, drift-energy
        inequality slack on interior snapshot times (blank elsewhere)."""
        m_keys = sorted(self.diff_ineq_by_m.keys())
        header = ["t", "mass_slack"] + [f"diffineq_slack_m{m:g}" for m in m_keys]
        lookup = {}
        for m in m_keys:
            _ok, _ws, ts, slacks = self.diff_ineq_by_m[m]
            lookup[m] = {float(t): float(s) for t, s in zip(ts, slacks)}
        lines = [",".join(header)]
        for t, ms in zip(self.mass_times, self.mass_slack):
            row = [repr(float(t)), repr(float(ms))]
            for m in m_keys:
                v = lookup[m].get(float(t))
                row.append("" if v is None else repr(v))
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")


def _live_prefix(series: SpaceTimeSeries) -> SpaceTimeSeries:
    """Longest leading sub-series with no blown-up snapshot."""
    n = 0
    for f in series.fields:
        if f.blown_up:
            break
        n += 1
    if n == len(series.fields):
        return series
    if n < 1:
        raise ValueError("trajectory has no usable snapshots")
    return SpaceTimeSeries(series.grid, series.times[:n], series.fields[:n])


def _source_l1_total(problem: ProblemSpec, n_samples: int = 200) -> float:
    """Space-time L1 of the truncated source over the full horizon."""
    src = problem.source
    if src is None:
        return 0.0
    grid = problem.grid
    vol = grid.cell_volume
    n_cap = problem.nonlinearity.reg_n

    def l1_at(t: float) -> float:
        vals = src.cell_values(grid, t)
        if n_cap is not None:
            vals = np.clip(vals, -n_cap, n_cap)
        return float(np.sum(np.abs(vals))) * vol

    if src.static:
        return l1_at(0.0) * problem.horizon
    ts = np.linspace(0.0, problem.horizon, n_samples + 1)
    samples = np.array([l1_at(float(t)) for t in ts])
    return float(np.trapezoid(samples, ts))


def run_diagnostics(
    trajectory: Trajectory,
    constants: Optional[ConstantsConfig] = None,
    m_values: Sequence[float] = (2.0,),
    superlevel_exponents: Sequence[int] = tuple(range(-3, 11)),
    decay_m: float = 2.0,
    decay_mu: float = 1.0,
    decay_window: Optional[tuple[float, float]] = None,
) -> DiagnosticsReport:
    """Grade a trajectory: mass bound, superlevel bound, drift-energy
    inequality at the requested powers, interpolation-ratio bound, and an
    optional decay fit. Failures are reported, not raised."""
    problem = trajectory.problem
    grid = problem.grid
    vol = grid.cell_volume
    cons = constants or ConstantsConfig()
    alpha = cons.alpha if cons.alpha is not None else problem.coefficients.alpha
    norms = trajectory.norms
    live = _live_prefix(trajectory.series)

    # data size: initial mass plus total source mass over the horizon
    m0 = float(norms.l1[0]) + _source_l1_total(problem)

    # per-time mass bound with the running source budget
    src_cum = trajectory.source_l1_cumulative
    bound = norms.l1[0] + src_cum + 1e-8 * max(m0, 1e-300)
    mass_slack = bound - norms.l1
    mass_ok = bool(np.min(mass_slack) >= 0.0)

    # space-time superlevel bound at dyadic levels
    duration = float(live.times[-1]) if len(live) > 1 else 0.0
    levels = np.array([2.0**j for j in superlevel_exponents])
    sl_slacks = []
    for k in levels:
        meas = superlevel_measure(live, float(k)) if duration > 0 else 0.0
        sl_slacks.append(duration * m0 / float(k) - meas)
    sl_slacks = np.array(sl_slacks)
    superlevel_ok = bool(np.min(sl_slacks) >= 0.0) if sl_slacks.size else True

    # drift-energy differential inequality at each requested power
    diff_by_m: dict = {}
    theta = problem.nonlinearity.theta
    drift = problem.drift
    source = problem.source
    n_cap = problem.nonlinearity.reg_n
    e_sq = None
    if drift is not None and drift.static:
        ev = drift.cell_values(grid, 0.0)
        e_sq = np.sum(ev * ev, axis=0)
    times = live.times
    worst_overall = math.inf
    for m in m_values:
        if m < 1:
            raise ValueError(f"diagnostic power m must be >= 1, got {m}")
        ys = np.array([integrate_power(f, m) for f in live.fields])
        ts, slacks = [], []
        for k in range(1, len(times) - 1):
            dt2 = float(times[k + 1] - times[k - 1])
            lhs = (ys[k + 1] - ys[k - 1]) / dt2
            u = live.fields[k].values
            rhs = 0.0
            if drift is not None and m > 1:
                esq_k = e_sq
                if esq_k is None:
                    ev = drift.cell_values(grid, float(times[k]))
                    esq_k = np.sum(ev * ev, axis=0)
                if problem.nonlinearity.form == "power":
                    growth = np.abs(u) ** (2.0 * theta + m)
                else:
                    # form-aware variant: |g(u)|^2 |u|^{m-2}
                    g = problem.nonlinearity.g(u)
                    growth = g * g * np.abs(u) ** (m - 2.0)
                rhs += (
                    m * (m - 1.0) / (2.0 * alpha) * float(np.sum(esq_k * growth)) * vol
                )
            if source is not None:
                f_vals = source.cell_values(grid, float(times[k]))
                if n_cap is not None:
                    f_vals = np.clip(f_vals, -n_cap, n_cap)
                rhs += m * float(np.sum(np.abs(f_vals) * np.abs(u) ** (m - 1.0))) * vol
            tol = 0.05 * abs(rhs) + 1e-10
            ts.append(float(times[k]))
            slacks.append(rhs + tol - lhs)
        ts = np.array(ts)
        slacks = np.array(slacks)
        ok = bool(np.min(slacks) >= 0.0) if slacks.size else True
        worst = float(np.min(slacks)) if slacks.size else math.inf
        worst_overall = min(worst_overall, worst)
        diff_by_m[float(m)] = (ok, worst, ts, slacks)
    diff_ok = all(entry[0] for entry in diff_by_m.values())

    # space-time interpolation ratio against the assumed (or estimated) constant
    ratio = gn_ratio(live)
    c_gn = cons.c_gn
    if c_gn is None:
        c_gn = 1.1 * max(
            estimate_gn_constant(grid, n_fields=50, seed=0), _bump_ratio_sup(grid)
        )
    gn_ok = ratio <= c_gn

    fit = None
    try:
        window = decay_window or default_fit_window(trajectory)
        predicted = None
        if decay_mu is not None and decay_m > decay_mu:
            predicted = -(grid.dim / 2.0) * (1.0 / decay_mu - 1.0 / decay_m)
        fit = fit_norm_decay(norms, decay_m, window=window, predicted=predicted)
    except ValueError:
        fit = None

    return DiagnosticsReport(
        m0=m0,
        mass_bound_ok=mass_ok,
        mass_worst_slack=float(np.min(mass_slack)),
        mass_slack=mass_slack,
        mass_times=norms.times.copy(),
        superlevel_ok=superlevel_ok,
        superlevel_worst_slack=float(np.min(sl_slacks)) if sl_slacks.size else math.inf,
        superlevel_levels=levels,
        superlevel_slacks=sl_slacks,
        diff_ineq_ok=diff_ok,
        diff_ineq_worst_slack=worst_overall,
        diff_ineq_by_m=diff_by_m,
        gn_ok=gn_ok,
        gn_ratio=ratio,
        gn_constant_used=float(c_gn),
        decay_fit=fit,
    )
