"""Cell-averaged fields on rectangular boxes.

A grid covers the box ``[0, L_1) x ... x [0, L_d)`` with a uniform number of
cells per axis; a field stores one average per cell in C (lexicographic)
order. Space-time series stack snapshots on a strictly increasing time grid
starting at 0. Time integrals use trapezoidal weights, so the weights of a
series sum exactly to its duration.

Snapshots a solver has flagged as blown up carry finite or non-finite data
that no longer means anything; every norm-like helper here rejects them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "SpaceTimeSeries",
    "make_grid",
    "integrate_power",
    "lp_norm",
    "linf_norm",
    "truncation_pair",
    "superlevel_measure",
    "marcinkiewicz_norm",
    "space_time_lp",
    "boundary_mask",
    "write_field_csv",
    "read_field_csv",
    "write_field_raw",
    "read_field_raw",
]


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid; zero boundary data lives half a cell outside."""

    dim: int
    extents: tuple[float, ...]
    cells: tuple[int, ...]
    spacing: tuple[float, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates as dim arrays of shape ``cells``."""
        axes = [self.axis_centers(d) for d in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def face_coords(self, axis: int) -> tuple[np.ndarray, ...]:
        """Face-center coordinates for the faces orthogonal to ``axis``.

        Shape per array: cells, except axis ``axis`` which has cells+1 entries
        (both boundary faces included).
        """
        axes = [self.axis_centers(d) for d in range(self.dim)]
        axes[axis] = np.arange(self.cells[axis] + 1) * self.spacing[axis]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def face_area(self, axis: int) -> float:
        return self.cell_volume / self.spacing[axis]


def make_grid(
    dim: int,
    extents: Sequence[float],
    cells: Sequence[int],
) -> Grid:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    extents = tuple(float(e) for e in extents)
    cells = tuple(int(c) for c in cells)
    if len(extents) != dim or len(cells) != dim:
        raise ValueError(
            f"extents/cells must each have {dim} entries, got {len(extents)}/{len(cells)}"
        )
    for e in extents:
        if not np.isfinite(e) or e <= 0:
            raise ValueError(f"extents must be positive and finite, got {e}")
    for c in cells:
        if c < 3:
            raise ValueError(f"need at least 3 cells per axis, got {c}")
    spacing = tuple(e / c for e, c in zip(extents, cells))
    return Grid(dim=dim, extents=extents, cells=cells, spacing=spacing)


@dataclass
class Field:
    """Cell averages on a grid. ``blown_up`` marks data past the solver cap."""

    grid: Grid
    values: np.ndarray
    blown_up: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not self.blown_up and not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in a field not flagged blown_up")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.blown_up)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        vals = np.asarray(fn(*grid.centers()), dtype=float)
        return cls(grid, np.broadcast_to(vals, grid.shape).copy())


@dataclass
class SpaceTimeSeries:
    """Snapshots on a shared grid over a strictly increasing time grid from 0."""

    grid: Grid
    times: np.ndarray
    fields: list[Field]

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("times must be a nonempty 1-d array")
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields length mismatch")
        if self.times[0] != 0.0:
            raise ValueError(f"time grid must start at 0, got {self.times[0]}")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        for f in self.fields:
            if f.grid != self.grid:
                raise ValueError("all snapshots must share the series grid")

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def time_weights(self) -> np.ndarray:
        """Trapezoidal weights; they sum to the series duration."""
        t = self.times
        if len(t) == 1:
            return np.zeros(1)
        w = np.empty(len(t))
        w[0] = 0.5 * (t[1] - t[0])
        w[-1] = 0.5 * (t[-1] - t[-2])
        if len(t) > 2:
            w[1:-1] = 0.5 * (t[2:] - t[:-2])
        return w

    @classmethod
    def from_function(
        cls,
        grid: Grid,
        times: Sequence[float],
        fn: Callable[..., np.ndarray],
    ) -> "SpaceTimeSeries":
        """Sample ``fn(t, *coords)`` at cell centers for each time."""
        coords = grid.centers()
        fields = []
        for t in times:
            vals = np.asarray(fn(float(t), *coords), dtype=float)
            fields.append(Field(grid, np.broadcast_to(vals, grid.shape).copy()))
        return cls(grid, np.asarray(times, dtype=float), fields)


FieldLike = Union[Field, SpaceTimeSeries]


def _require_live(f: Field) -> None:
    if f.blown_up:
        raise ValueError("refusing to take norms of a blown-up snapshot")


def integrate_power(f: Field, m: float) -> float:
    """Integral of |u|^m over the box (cell-sum quadrature). Requires m >= 1."""
    _require_live(f)
    if m < 1:
        raise ValueError(f"integrate_power needs m >= 1, got {m}")
    return float(np.sum(np.abs(f.values) ** m) * f.grid.cell_volume)


def lp_norm(f: Field, m: float) -> float:
    return integrate_power(f, m) ** (1.0 / m)


def linf_norm(f: Field) -> float:
    _require_live(f)
    return float(np.max(np.abs(f.values)))


def truncation_pair(values, k: float):
    """Split s into (T_k(s), s - T_k(s)) with T_k = clamp to [-k, k].

    Accepts scalars, arrays, or fields. The clamp is exact; the pair sums
    back to the input exactly whenever |s| <= 2k (the subtraction s - k is
    then lossless) and to within one rounding error of s otherwise. No
    choice of excess can do better once the clamp is pinned at k, since
    k + g can step over s between adjacent floats g.
    """
    if k <= 0:
        raise ValueError(f"truncation level must be > 0, got {k}")
    if isinstance(values, Field):
        _require_live(values)
        tk, gk = truncation_pair(values.values, k)
        return Field(values.grid, tk), Field(values.grid, gk)
    arr = np.asarray(values, dtype=float)
    tk = np.clip(arr, -k, k)
    gk = arr - tk
    if np.isscalar(values) or arr.ndim == 0:
        return float(tk), float(gk)
    return tk, gk


def _sample_weights(obj: FieldLike) -> tuple[np.ndarray, np.ndarray]:
    """Flatten |values| with their measure weights (cell volume, x dt for series)."""
    if isinstance(obj, Field):
        _require_live(obj)
        a = np.abs(obj.values).ravel()
        return a, np.full(a.size, obj.grid.cell_volume)
    vol = obj.grid.cell_volume
    w_t = obj.time_weights()
    chunks, weights = [], []
    for wk, f in zip(w_t, obj.fields):
        _require_live(f)
        a = np.abs(f.values).ravel()
        chunks.append(a)
        weights.append(np.full(a.size, wk * vol))
    return np.concatenate(chunks), np.concatenate(weights)


def superlevel_measure(obj: FieldLike, k: float) -> float:
    """Measure of {|u| > k}; space measure for a field, space-time for a series."""
    if k < 0:
        raise ValueError(f"level must be >= 0, got {k}")
    a, w = _sample_weights(obj)
    return float(np.sum(w[a > k]))


def marcinkiewicz_norm(obj: FieldLike, p: float) -> float:
    """Weak-L^p norm sup_k k (meas{|u|>k})^{1/p}, exact for piecewise data.

    The supremum over k is attained at the left limit of some value level, so
    it suffices to scan the distinct levels v with meas{|u| >= v}.
    """
    if p <= 1:
        raise ValueError(f"marcinkiewicz_norm needs p > 1, got {p}")
    a, w = _sample_weights(obj)
    keep = a > 0
    if not np.any(keep):
        return 0.0
    a, w = a[keep], w[keep]
    order = np.argsort(-a, kind="stable")
    a_sorted = a[order]
    cum = np.cumsum(w[order])
    # last index of each run of equal values = measure of {|u| >= level}
    lasts = np.append(np.nonzero(np.diff(a_sorted))[0], a_sorted.size - 1)
    levels = a_sorted[lasts]
    meas = cum[lasts]
    best = float(np.max(levels**p * meas))
    return best ** (1.0 / p)


def space_time_lp(series: SpaceTimeSeries, p: float) -> float:
    """Space-time L^p norm of a series with trapezoidal time weights."""
    if p < 1:
        raise ValueError(f"space_time_lp needs p >= 1, got {p}")
    vol = series.grid.cell_volume
    w_t = series.time_weights()
    total = 0.0
    for wk, f in zip(w_t, series.fields):
        _require_live(f)
        total += wk * vol * float(np.sum(np.abs(f.values) ** p))
    return total ** (1.0 / p)


def boundary_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of cells touching the box boundary along any axis."""
    mask = np.zeros(grid.shape, dtype=bool)
    for d in range(grid.dim):
        idx_lo = [slice(None)] * grid.dim
        idx_hi = [slice(None)] * grid.dim
        idx_lo[d] = 0
        idx_hi[d] = grid.cells[d] - 1
        mask[tuple(idx_lo)] = True
        mask[tuple(idx_hi)] = True
    return mask


def write_field_csv(f: Field, path: Union[str, Path]) -> None:
    lines = ["index,value"]
    flat = f.values.ravel()
    for i in range(flat.size):
        lines.append(f"{i},{float(flat[i])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(grid: Grid, path: Union[str, Path], blown_up: bool = False) -> Field:
    raw = Path(path).read_text().strip().splitlines()
    if not raw or raw[0] != "index,value":
        raise ValueError(f"{path}: not a field CSV (missing 'index,value' header)")
    flat = np.empty(grid.n_cells)
    seen = 0
    for line in raw[1:]:
        idx_s, val_s = line.split(",")
        flat[int(idx_s)] = float(val_s)
        seen += 1
    if seen != grid.n_cells:
        raise ValueError(f"{path}: expected {grid.n_cells} rows, got {seen}")
    return Field(grid, flat.reshape(grid.shape), blown_up=blown_up)


def write_field_raw(f: Field, path: Union[str, Path]) -> None:
    f.values.astype("<f8").ravel().tofile(path)


def read_field_raw(grid: Grid, path: Union[str, Path], blown_up: bool = False) -> Field:
    flat = np.fromfile(path, dtype="<f8")
    if flat.size != grid.n_cells:
        raise ValueError(f"{path}: expected {grid.n_cells} values, got {flat.size}")
    return Field(grid, flat.reshape(grid.shape), blown_up=blown_up)
