"""Problem data: nonlinear drift laws, coefficients, and presets.

The equation being discretized is

    du/dt - div( M grad u + E g(u) ) = f      on a box, zero boundary data,

with M a per-cell diagonal diffusivity bounded between alpha and beta, E a
bounded vector drift field, and g a superlinear odd nonlinearity. Two forms
are supported:

* ``power``: g(s) = |s|^theta s, with the bounded regularization
  g_n(s) = |s|^theta s / (1 + |s|^{theta+1}/n).
* ``kq``: the quadratic boson law g(s) = s(1+s) for s >= 0, odd-extended,
  regularized as s(1+s)/(1+s^2/n) for s >= 0 (theta = 1 for exponent
  bookkeeping).

``reg_n = None`` means the unregularized law. Closed-form coefficients are
sampled at cell centers (and at face centers where the solver needs face
normal components).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .fields import Field, Grid, make_grid

__all__ = [
    "Nonlinearity",
    "power_nonlinearity",
    "kq_nonlinearity",
    "Drift",
    "TabulatedDrift",
    "ClosedFormDrift",
    "radial_drift",
    "constant_drift",
    "Source",
    "TabulatedSource",
    "ClosedFormSource",
    "constant_source",
    "CoefficientSet",
    "ProblemSpec",
    "make_problem",
    "build_problem",
    "load_problem_config",
    "PRESETS",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Odd superlinear drift law with optional bounded regularization."""

    theta: float
    reg_n: Optional[float] = None
    form: str = "power"

    def __post_init__(self) -> None:
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.form not in ("power", "kq"):
            raise ValueError(f"unknown nonlinearity form {self.form!r}")
        if self.form == "kq" and self.theta != 1.0:
            raise ValueError("the kq form has quadratic growth; theta must be 1")
        if self.reg_n is not None and not (self.reg_n > 0 and math.isfinite(self.reg_n)):
            raise ValueError(f"reg_n must be positive and finite or None, got {self.reg_n}")

    def h(self, s):
        """Unregularized law."""
        arr = np.asarray(s, dtype=float)
        if self.form == "power":
            out = np.sign(arr) * np.abs(arr) ** (self.theta + 1.0)
        else:
            a = np.abs(arr)
            out = np.sign(arr) * (a + a * a)
        return float(out) if np.ndim(s) == 0 else out

    def g(self, s):
        """Regularized law; equals h when reg_n is None."""
        if self.reg_n is None:
            return self.h(s)
        arr = np.asarray(s, dtype=float)
        n = self.reg_n
        a = np.abs(arr)
        if self.form == "power":
            x = a ** (self.theta + 1.0)
            out = np.sign(arr) * x / (1.0 + x / n)
        else:
            out = np.sign(arr) * (a + a * a) / (1.0 + a * a / n)
        return float(out) if np.ndim(s) == 0 else out

    def lipschitz_bound(self, smax: float) -> float:
        """Upper bound for sup_{|s| <= smax} |g'(s)|, used by the CFL rule.

        For the power form with finite n the derivative peaks at
        s* = (n theta / (theta+2))^{1/(theta+1)} and the supremum is exact;
        the kq bound 1 + 2 smax dominates the derivative for every n.
        """
        smax = float(abs(smax))
        if self.form == "kq":
            return 1.0 + 2.0 * smax
        th = self.theta
        if self.reg_n is None:
            return (th + 1.0) * smax**th if th > 0 else 1.0
        n = self.reg_n
        if th == 0.0:
            return 1.0  # derivative 1/(1+|s|/n)^2 peaks at s = 0
        if smax == 0.0:
            return 0.0
        # Work in log space: for denormal theta the peak location underflows
        # to zero and would wrongly report a vanishing bound.
        ln_peak = (math.log(n) + math.log(th) - math.log(th + 2.0)) / (th + 1.0)
        ln_s = min(math.log(smax), ln_peak)
        num = (th + 1.0) * math.exp(th * ln_s)
        den = 1.0 + math.exp((th + 1.0) * ln_s) / n
        return num / den / den


def power_nonlinearity(theta: float, reg_n: Optional[float] = None) -> Nonlinearity:
    return Nonlinearity(theta=theta, reg_n=reg_n, form="power")


def kq_nonlinearity(reg_n: Optional[float] = None) -> Nonlinearity:
    return Nonlinearity(theta=1.0, reg_n=reg_n, form="kq")


class Drift:
    """Vector coefficient E. Subclasses provide cell and face samples."""

    static = True

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        """Components at cell centers, shape (dim, *cells)."""
        raise NotImplementedError

    def face_speed(self, grid: Grid, axis: int, t: float = 0.0) -> np.ndarray:
        """Normal component E . e_axis at the faces orthogonal to ``axis``.

        Shape: cells, except the given axis which has cells+1 entries.
        """
        raise NotImplementedError

    def magnitude(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        comps = self.cell_values(grid, t)
        return np.sqrt(np.sum(comps * comps, axis=0))

    def max_face_speed(self, grid: Grid, axis: int, t: float = 0.0) -> float:
        return float(np.max(np.abs(self.face_speed(grid, axis, t))))


class TabulatedDrift(Drift):
    """Cell-centered drift table; face values are arithmetic neighbor means."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("drift table must be finite")

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        if self.values.shape != (grid.dim,) + grid.shape:
            raise ValueError(
                f"drift table shape {self.values.shape} does not match (dim, *cells)"
            )
        return self.values

    def face_speed(self, grid: Grid, axis: int, t: float = 0.0) -> np.ndarray:
        comp = self.cell_values(grid, t)[axis]
        n = grid.cells[axis]
        shape = list(grid.shape)
        shape[axis] = n + 1
        out = np.empty(shape)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        inner = [slice(None)] * grid.dim
        lo[axis] = 0
        hi[axis] = n
        inner[axis] = slice(1, n)
        left = [slice(None)] * grid.dim
        right = [slice(None)] * grid.dim
        left[axis] = slice(0, n - 1)
        right[axis] = slice(1, n)
        out[tuple(lo)] = np.take(comp, 0, axis=axis)
        out[tuple(hi)] = np.take(comp, n - 1, axis=axis)
        out[tuple(inner)] = 0.5 * (comp[tuple(left)] + comp[tuple(right)])
        return out


class ClosedFormDrift(Drift):
    """Drift from a closed form, sampled exactly at the points requested.

    ``component_fn(axis, coords, t)`` returns the ``axis`` component on the
    coordinate arrays ``coords`` (one array per axis).
    """

    def __init__(
        self,
        component_fn: Callable[[int, tuple, float], np.ndarray],
        name: str = "custom",
        static: bool = True,
    ):
        self.component_fn = component_fn
        self.name = name
        self.static = static

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        coords = grid.centers()
        comps = [
            np.broadcast_to(
                np.asarray(self.component_fn(d, coords, t), dtype=float), grid.shape
            )
            for d in range(grid.dim)
        ]
        return np.stack(comps)

    def face_speed(self, grid: Grid, axis: int, t: float = 0.0) -> np.ndarray:
        coords = grid.face_coords(axis)
        shape = coords[0].shape
        vals = np.asarray(self.component_fn(axis, coords, t), dtype=float)
        return np.broadcast_to(vals, shape).copy()


def radial_drift(center: Sequence[float], scale: float = 1.0) -> ClosedFormDrift:
    """E(x) = scale * (x - center)."""
    c = tuple(float(v) for v in center)

    def component(axis: int, coords: tuple, t: float) -> np.ndarray:
        return scale * (coords[axis] - c[axis])

    return ClosedFormDrift(component, name=f"radial(center={c}, scale={scale})")


def constant_drift(vector: Sequence[float]) -> ClosedFormDrift:
    vec = tuple(float(v) for v in vector)

    def component(axis: int, coords: tuple, t: float) -> np.ndarray:
        return np.full(np.asarray(coords[axis]).shape, vec[axis])

    return ClosedFormDrift(component, name=f"constant({vec})")


class Source:
    """Scalar source term f. ``cell_values`` samples it at cell centers."""

    static = True

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError


class TabulatedSource(Source):
    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("source table must be finite")

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        if self.values.shape != grid.shape:
            raise ValueError(
                f"source table shape {self.values.shape} does not match cells"
            )
        return self.values


class ClosedFormSource(Source):
    def __init__(
        self,
        fn: Callable[[tuple, float], np.ndarray],
        name: str = "custom",
        static: bool = False,
    ):
        self.fn = fn
        self.name = name
        self.static = static

    def cell_values(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        vals = np.asarray(self.fn(grid.centers(), t), dtype=float)
        return np.broadcast_to(vals, grid.shape).copy()


def constant_source(value: float) -> ClosedFormSource:
    v = float(value)
    return ClosedFormSource(
        lambda coords, t: np.full(np.asarray(coords[0]).shape, v),
        name=f"constant({v})",
        static=True,
    )


@dataclass
class CoefficientSet:
    """Diffusivity, drift, source, and initial data with ellipticity bounds."""

    diffusivity: np.ndarray  # shape (dim, *cells), per-axis diagonal entries
    alpha: float
    beta: float
    u0: Field
    drift: Optional[Drift] = None
    source: Optional[Source] = None

    def __post_init__(self) -> None:
        self.diffusivity = np.asarray(self.diffusivity, dtype=float)
        grid = self.u0.grid
        expect = (grid.dim,) + grid.shape
        if self.diffusivity.shape != expect:
            raise ValueError(
                f"diffusivity shape {self.diffusivity.shape}, expected {expect}"
            )
        if not (0 < self.alpha <= self.beta):
            raise ValueError(f"need 0 < alpha <= beta, got {self.alpha}, {self.beta}")
        lo = float(np.min(self.diffusivity))
        hi = float(np.max(self.diffusivity))
        if lo < self.alpha - 1e-12 or hi > self.beta + 1e-12:
            raise ValueError(
                f"diffusivity range [{lo}, {hi}] violates bounds [{self.alpha}, {self.beta}]"
            )


@dataclass
class ProblemSpec:
    """Everything a run needs: grid, coefficients, drift law, horizon."""

    grid: Grid
    coefficients: CoefficientSet
    nonlinearity: Nonlinearity
    horizon: float

    def __post_init__(self) -> None:
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.coefficients.u0.grid != self.grid:
            raise ValueError("initial data grid does not match the problem grid")

    @property
    def drift(self) -> Optional[Drift]:
        return self.coefficients.drift

    @property
    def source(self) -> Optional[Source]:
        return self.coefficients.source

    @property
    def u0(self) -> Field:
        return self.coefficients.u0


def _gaussian_bump(grid: Grid, mass: float, sigma: float, center=None) -> Field:
    """Gaussian bump rescaled so the discrete cell-sum mass is exact."""
    if center is None:
        center = [e / 2.0 for e in grid.extents]
    coords = grid.centers()
    r2 = np.zeros(grid.shape)
    for d in range(grid.dim):
        r2 = r2 + (coords[d] - center[d]) ** 2
    vals = np.exp(-r2 / (2.0 * sigma * sigma))
    total = float(np.sum(vals)) * grid.cell_volume
    if total <= 0:
        raise ValueError("degenerate bump; increase sigma or grid resolution")
    return Field(grid, vals * (mass / total))


def _unit_diffusivity(grid: Grid) -> np.ndarray:
    return np.ones((grid.dim,) + grid.shape)


PRESETS = ("heat", "kq", "power-drift")


def make_problem(
    preset: str,
    dim: int = 3,
    cells: Optional[Sequence[int]] = None,
    extents: Optional[Sequence[float]] = None,
    theta: float = 1.0,
    reg_n: Optional[float] = 1.0e6,
    mass: float = 1.0,
    sigma: Optional[float] = None,
    horizon: float = 1.0,
    alpha: float = 1.0,
    beta: float = 1.0,
    drift_scale: float = 1.0,
) -> ProblemSpec:
    """Build one of the named scenarios.

    heat         unit box, M = I, no drift, Gaussian initial bump.
    kq           box [-L, L]^dim (stored as [0, 2L)^dim), M = I, quadratic
                 boson law, outward E(x) = x - center; large mass condenses.
    power-drift  unit box, M = I, power law with given theta, E = x - center.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if preset == "kq":
        extents = tuple(extents) if extents is not None else (2.0,) * dim
        cells = tuple(cells) if cells is not None else (24,) * dim
    else:
        extents = tuple(extents) if extents is not None else (1.0,) * dim
        cells = tuple(cells) if cells is not None else (32,) * dim
    grid = make_grid(dim, extents, cells)
    center = [e / 2.0 for e in grid.extents]
    if sigma is None:
        # The boson preset wants a bump wide enough to feed the condensation
        # spike; the narrow default used elsewhere stalls below threshold.
        sigma = min(grid.extents) / (5.0 if preset == "kq" else 10.0)
    u0 = _gaussian_bump(grid, mass, sigma, center)
    if preset == "heat":
        nonlin = power_nonlinearity(theta, reg_n)
        drift = None
    elif preset == "kq":
        nonlin = kq_nonlinearity(reg_n)
        drift = radial_drift(center, scale=drift_scale)
    else:
        nonlin = power_nonlinearity(theta, reg_n)
        drift = radial_drift(center, scale=drift_scale)
    coeffs = CoefficientSet(
        diffusivity=_unit_diffusivity(grid),
        alpha=alpha,
        beta=beta,
        u0=u0,
        drift=drift,
        source=None,
    )
    return ProblemSpec(grid=grid, coefficients=coeffs, nonlinearity=nonlin, horizon=horizon)


def _parse_reg_n(raw) -> Optional[float]:
    if raw is None:
        return None
    if isinstance(raw, str):
        if raw.lower() in ("inf", "infinity", "none", "unregularized"):
            return None
        return float(raw)
    v = float(raw)
    return None if math.isinf(v) else v


def _parse_drift_form(form: str, grid: Grid, scale: float) -> Optional[Drift]:
    form = form.strip()
    if form in ("zero", "none", ""):
        return None
    if form == "radial":
        center = [e / 2.0 for e in grid.extents]
        return radial_drift(center, scale=scale)
    if form.startswith("constant:"):
        vec = [float(v) for v in form.split(":", 1)[1].split(",")]
        if len(vec) == 1:
            vec = vec * grid.dim
        return constant_drift(vec)
    raise ValueError(f"unknown E_form {form!r}")


def _parse_source_form(form: str) -> Optional[Source]:
    form = form.strip()
    if form in ("zero", "none", ""):
        return None
    if form.startswith("constant:"):
        return constant_source(float(form.split(":", 1)[1]))
    raise ValueError(f"unknown f_form {form!r}")


def build_problem(cfg: dict) -> ProblemSpec:
    """Build a problem from a plain config mapping.

    Recognized keys: dim, extents, cells, preset, theta, reg_n, alpha, beta,
    horizon, mass, sigma, E_form, E_scale, f_form.
    """
    cfg = dict(cfg)
    preset = cfg.get("preset")
    dim = int(cfg.get("dim", 3))
    kwargs = {}
    for key in ("cells", "extents"):
        if key in cfg:
            kwargs[key] = cfg[key]
    for key in ("theta", "mass", "sigma", "horizon", "alpha", "beta", "drift_scale"):
        if key in cfg:
            kwargs[key] = float(cfg[key])
    if "reg_n" in cfg:
        kwargs["reg_n"] = _parse_reg_n(cfg["reg_n"])
    if preset:
        problem = make_problem(preset, dim=dim, **kwargs)
    else:
        # no preset: unit-box power problem assembled from the keys directly
        extents = cfg.get("extents", [1.0] * dim)
        cells = cfg.get("cells", [32] * dim)
        grid = make_grid(dim, extents, cells)
        theta = float(cfg.get("theta", 1.0))
        nonlin = power_nonlinearity(theta, _parse_reg_n(cfg.get("reg_n", 1.0e6)))
        sigma = float(cfg.get("sigma", min(grid.extents) / 10.0))
        u0 = _gaussian_bump(grid, float(cfg.get("mass", 1.0)), sigma)
        alpha = float(cfg.get("alpha", 1.0))
        beta = float(cfg.get("beta", max(alpha, 1.0)))
        diff = np.full((grid.dim,) + grid.shape, 0.5 * (alpha + beta))
        coeffs = CoefficientSet(
            diffusivity=diff,
            alpha=alpha,
            beta=beta,
            u0=u0,
            drift=None,
            source=None,
        )
        problem = ProblemSpec(
            grid=grid,
            coefficients=coeffs,
            nonlinearity=nonlin,
            horizon=float(cfg.get("horizon", 1.0)),
        )
    if "E_form" in cfg:
        problem.coefficients.drift = _parse_drift_form(
            str(cfg["E_form"]), problem.grid, float(cfg.get("E_scale", 1.0))
        )
    if "f_form" in cfg:
        problem.coefficients.source = _parse_source_form(str(cfg["f_form"]))
    return problem


def load_problem_config(path: Union[str, Path]) -> dict:
    """Read a TOML or JSON problem config into a plain dict."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    raise ValueError(f"config must be .toml or .json, got {path.suffix!r}")
