"""Grids, fields, norms, truncation, and the weak-norm machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superdrift import (
    Field,
    SpaceTimeSeries,
    boundary_mask,
    integrate_power,
    linf_norm,
    lp_norm,
    make_grid,
    marcinkiewicz_norm,
    read_field_csv,
    read_field_raw,
    space_time_lp,
    superlevel_measure,
    truncation_pair,
    write_field_csv,
    write_field_raw,
)


def test_grid_geometry_oracles():
    g = make_grid(2, (1.0, 2.0), (4, 8))
    assert g.shape == (4, 8)
    assert g.n_cells == 32
    # cell is 0.25 x 0.25
    assert g.cell_volume == pytest.approx(0.0625)
    assert g.volume == pytest.approx(2.0)
    assert g.face_area(0) == pytest.approx(0.25)
    assert g.face_area(1) == pytest.approx(0.25)
    np.testing.assert_allclose(g.axis_centers(0), [0.125, 0.375, 0.625, 0.875])


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_grid(4, (1, 1, 1, 1), (2, 2, 2, 2))
    with pytest.raises(ValueError):
        make_grid(1, (0.0,), (4,))
    with pytest.raises(ValueError):
        make_grid(2, (1.0, 1.0), (4,))


def test_field_shape_and_finiteness_guards():
    g = make_grid(1, (1.0,), (4,))
    with pytest.raises(ValueError):
        Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        Field(g, np.array([0.0, np.inf, 0.0, 0.0]))
    # the same data is allowed once it is marked as past the cap
    f = Field(g, np.array([0.0, np.inf, 0.0, 0.0]), blown_up=True)
    with pytest.raises(ValueError, match="blown-up"):
        linf_norm(f)
    with pytest.raises(ValueError, match="blown-up"):
        integrate_power(f, 2.0)


def test_norms_on_a_constant_field():
    g = make_grid(3, (1.0, 1.0, 1.0), (4, 4, 4))
    f = Field(g, np.full(g.shape, -2.0))
    assert integrate_power(f, 1.0) == pytest.approx(2.0)
    assert integrate_power(f, 3.0) == pytest.approx(8.0)
    assert lp_norm(f, 2.0) == pytest.approx(2.0)
    assert linf_norm(f) == 2.0


@given(
    s=st.floats(-50, 50),
    k=st.floats(1e-9, 20),
)
def test_truncation_pair_reassembles(s, k):
    tk, gk = truncation_pair(s, k)
    # exact at or below the level and in the Sterbenz range; one rounding
    # error of s at most beyond it (the clamp itself is always exact)
    if abs(s) <= 2 * k:
        assert tk + gk == s
    else:
        assert abs((tk + gk) - s) <= np.spacing(abs(s))
    assert abs(tk) <= k
    # the excess only activates past the level
    if abs(s) <= k:
        assert gk == 0.0
    else:
        assert gk != 0.0


@given(
    vals=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30),
    k=st.floats(1e-9, 1e5),
)
def test_truncation_pair_arrays(vals, k):
    arr = np.asarray(vals)
    tk, gk = truncation_pair(arr, k)
    assert np.all(np.abs((tk + gk) - arr) <= np.spacing(np.abs(arr)))
    exact = np.abs(arr) <= 2 * k
    np.testing.assert_array_equal((tk + gk)[exact], arr[exact])
    assert np.all(np.abs(tk) <= k)
    assert np.all(gk * arr >= 0.0)  # excess keeps the sign of the input


def test_superlevel_measure_counts_cells():
    g = make_grid(1, (1.0,), (10,))
    vals = np.array([3.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
    f = Field(g, vals)
    assert superlevel_measure(f, 1.0) == pytest.approx(0.1)
    assert superlevel_measure(f, 0.4) == pytest.approx(1.0)
    assert superlevel_measure(f, 3.0) == pytest.approx(0.0)  # strict inequality


def test_marcinkiewicz_two_level_oracle():
    # levels 3 (measure 0.1) and 0.5 (measure 1.0):
    # sup of k^2 meas is max(0.9, 0.25) = 0.9
    g = make_grid(1, (1.0,), (10,))
    vals = np.array([3.0] + [0.5] * 9)
    f = Field(g, vals)
    assert marcinkiewicz_norm(f, 2.0) == pytest.approx(math.sqrt(0.9), rel=1e-12)


def test_marcinkiewicz_dominated_by_lp():
    rng = np.random.default_rng(7)
    g = make_grid(2, (1.0, 1.0), (8, 8))
    f = Field(g, rng.normal(size=g.shape))
    for p in (1.5, 2.0, 3.0):
        assert marcinkiewicz_norm(f, p) <= lp_norm(f, p) + 1e-12


def test_space_time_lp_constant_series():
    g = make_grid(1, (1.0,), (8,))
    times = [0.0, 0.25, 1.0]
    series = SpaceTimeSeries(
        g, np.array(times), [Field(g, np.full(g.shape, 2.0)) for _ in times]
    )
    # integral of 2^p over box x [0,1]
    assert space_time_lp(series, 1.0) == pytest.approx(2.0)
    assert space_time_lp(series, 2.0) == pytest.approx(2.0)


def test_series_time_weights_sum_to_duration():
    g = make_grid(1, (1.0,), (4,))
    times = np.array([0.0, 0.1, 0.4, 1.0])
    series = SpaceTimeSeries(g, times, [Field.zeros(g) for _ in times])
    assert series.time_weights().sum() == pytest.approx(1.0)


def test_series_validation():
    g = make_grid(1, (1.0,), (4,))
    with pytest.raises(ValueError, match="start at 0"):
        SpaceTimeSeries(g, np.array([0.5, 1.0]), [Field.zeros(g), Field.zeros(g)])
    with pytest.raises(ValueError, match="increasing"):
        SpaceTimeSeries(
            g, np.array([0.0, 1.0, 1.0]), [Field.zeros(g) for _ in range(3)]
        )


def test_boundary_mask_1d_and_2d():
    g1 = make_grid(1, (1.0,), (5,))
    np.testing.assert_array_equal(
        boundary_mask(g1), [True, False, False, False, True]
    )
    g2 = make_grid(2, (1.0, 1.0), (3, 3))
    m = boundary_mask(g2)
    assert m.sum() == 8  # all but the center cell
    assert not m[1, 1]


def test_field_io_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = make_grid(2, (1.0, 1.0), (5, 7))
    f = Field(g, rng.normal(size=g.shape))
    write_field_csv(f, tmp_path / "f.csv")
    back = read_field_csv(g, tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, f.values)
    write_field_raw(f, tmp_path / "f.f64")
    back = read_field_raw(g, tmp_path / "f.f64")
    np.testing.assert_array_equal(back.values, f.values)


def test_field_io_blown_flag(tmp_path):
    g = make_grid(1, (1.0,), (3,))
    f = Field(g, np.array([1.0, np.nan, 2.0]), blown_up=True)
    write_field_raw(f, tmp_path / "b.f64")
    back = read_field_raw(g, tmp_path / "b.f64", blown_up=True)
    assert back.blown_up
    assert np.isnan(back.values[1])


@settings(max_examples=30)
@given(
    m=st.floats(1.0, 6.0),
    scale=st.floats(0.1, 10.0),
)
def test_lp_norm_homogeneity(m, scale):
    rng = np.random.default_rng(11)
    g = make_grid(1, (2.0,), (16,))
    vals = rng.normal(size=g.shape)
    f = Field(g, vals)
    fs = Field(g, scale * vals)
    assert lp_norm(fs, m) == pytest.approx(scale * lp_norm(f, m), rel=1e-10)
