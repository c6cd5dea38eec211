import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penalab import (GridMismatchError, ScalarField, build_grid, h1_seminorm_sq, integrate,
                     lp_norm, project_box, read_field_csv, write_field_csv)


def test_toy_grid_has_one_node():
    g = build_grid("interval", 3, extents=(0.0, 2.0))
    assert g.h == (1.0,)
    assert g.n_interior == 1
    assert g.cell_volume == 1.0
    assert g.measure == 2.0


def test_rectangle_sizes():
    g = build_grid("rectangle", (5, 9), extents=((0, 1), (0, 2)))
    assert g.h == (0.25, 0.25)
    assert g.n_interior == 3 * 7
    assert g.measure == pytest.approx(2.0)


def test_disk_mask_is_inside_and_measure_close():
    g = build_grid("disk", 201, radius=1.0)
    x, y = g.coords()
    assert np.all(x**2 + y**2 < 1.0)
    assert g.measure == pytest.approx(math.pi, rel=2e-2)


@pytest.mark.parametrize("kind,n", [("interval", 2), ("rectangle", (3, 2)), ("triangle", 5)])
def test_bad_grids_rejected(kind, n):
    with pytest.raises(ValueError):
        build_grid(kind, n)


def test_norms_of_sine():
    g = build_grid("interval", 2001, extents=(0.0, math.pi))
    s = ScalarField.from_function(g, np.sin)
    assert integrate(s) == pytest.approx(2.0, rel=1e-6)
    assert lp_norm(s, 2) ** 2 == pytest.approx(math.pi / 2, rel=1e-6)
    assert lp_norm(s, 4) ** 4 == pytest.approx(3 * math.pi / 8, rel=1e-6)
    assert lp_norm(s, math.inf) == pytest.approx(1.0, abs=1e-6)
    assert h1_seminorm_sq(s) == pytest.approx(math.pi / 2, rel=1e-6)


def test_field_arithmetic_checks_grid():
    a = ScalarField.constant(build_grid("interval", 11), 1.0)
    b = ScalarField.constant(build_grid("interval", 13), 1.0)
    with pytest.raises(GridMismatchError):
        a + b
    assert (a * 3 - a).max() == 2.0


def test_csv_round_trip(tmp_path):
    g = build_grid("disk", 31, radius=0.5, center=(0.2, -0.1))
    f = ScalarField.from_function(g, lambda x, y: np.exp(x) * np.cos(3 * y))
    path = tmp_path / "f.csv"
    write_field_csv(f, path)
    back = read_field_csv(g, path)
    np.testing.assert_array_equal(back.values, f.values)
    with pytest.raises(GridMismatchError):
        read_field_csv(build_grid("disk", 33, radius=0.5), path)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.floats(-2, 0), st.floats(0, 2))
def test_project_box_is_idempotent_projection(vals, lo, hi):
    g = build_grid("interval", 11)
    f = ScalarField(g, np.array(vals))
    once = project_box(f, lo, hi)
    np.testing.assert_array_equal(project_box(once, lo, hi).values, once.values)
    assert once.min() >= lo and once.max() <= hi


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9), st.floats(0.1, 10), st.sampled_from([1.5, 2, 4, 7]))
def test_lp_norm_is_homogeneous(vals, c, q):
    f = ScalarField(build_grid("interval", 11), np.array(vals))
    assert lp_norm(f * c, q) == pytest.approx(c * lp_norm(f, q), rel=1e-12, abs=1e-300)
