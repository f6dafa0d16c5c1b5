import numpy as np
import pytest

from nlacoustics.errors import ValidationError
from nlacoustics.grids import (
    AxisSpec,
    Field,
    GridSpec,
    Trajectory,
    bounded_axis,
    check_support_compact,
    field_from_function,
    make_grid,
    periodic_axis,
    trajectory_from_fields,
    zero_field,
)


class TestAxisAndGrid:
    def test_periodic_coordinates_exclude_endpoint(self):
        g = make_grid(GridSpec((periodic_axis("x", 2 * np.pi, 8),)))
        np.testing.assert_allclose(g.coordinate("x"), np.arange(8) * np.pi / 4)

    def test_bounded_coordinates_include_endpoints(self):
        g = make_grid(GridSpec((bounded_axis("x", 2.0, 9),)))
        np.testing.assert_allclose(g.coordinate("x"), np.linspace(0.0, 2.0, 9))

    def test_integer_wavenumbers_on_2pi_axis(self):
        g = make_grid(GridSpec((periodic_axis("x", 2 * np.pi, 8),)))
        k = g.wavenumbers("x")
        np.testing.assert_allclose(sorted(k), [-3, -2, -1, 0, 1, 2, 3, 4])

    def test_rejects_nonpositive_extent(self):
        with pytest.raises(ValidationError):
            AxisSpec("x", "periodic", 0.0, 16)
        with pytest.raises(ValidationError):
            AxisSpec("x", "periodic", -1.0, 16)

    def test_rejects_too_few_points(self):
        with pytest.raises(ValidationError):
            AxisSpec("x", "bounded", 1.0, 5)

    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValidationError):
            GridSpec((periodic_axis("x", 1.0, 8), bounded_axis("x", 1.0, 8)))

    def test_axis_lookup_by_label_and_index(self):
        g = make_grid(GridSpec((periodic_axis("t", 1.0, 8), bounded_axis("x", 1.0, 9))))
        assert g.axis_index("x") == 1
        assert g.axis_index(-1) == 1
        with pytest.raises(ValidationError):
            g.axis_index("nope")

    def test_quadrature_weights(self):
        gp = make_grid(GridSpec((periodic_axis("x", 2.0, 8),)))
        np.testing.assert_allclose(gp.axes[0].quadrature_weights(), 0.25 * np.ones(8))
        gb = make_grid(GridSpec((bounded_axis("x", 2.0, 9),)))
        w = gb.axes[0].quadrature_weights()
        assert w[0] == w[-1] == 0.125
        np.testing.assert_allclose(w.sum(), 2.0)


class TestField:
    def test_shape_mismatch_rejected(self):
        g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        with pytest.raises(ValidationError):
            Field(g, np.zeros(9))

    def test_nonfinite_rejected(self):
        g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        v = np.zeros(8)
        v[3] = np.nan
        with pytest.raises(ValidationError):
            Field(g, v)

    def test_values_are_frozen(self):
        g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        f = zero_field(g)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_arithmetic(self):
        g = make_grid(GridSpec((periodic_axis("x", 2 * np.pi, 16),)))
        f = field_from_function(g, np.sin)
        h = 2.0 * f - f
        np.testing.assert_allclose(h.values, f.values)

    def test_compact_support_check(self):
        g = make_grid(GridSpec((bounded_axis("x", 20.0, 129),)))
        f = field_from_function(g, lambda x: np.exp(-((x - 10.0) ** 2)))
        assert check_support_compact(f, "x")
        wide = field_from_function(g, lambda x: np.exp(-0.01 * (x - 10.0) ** 2))
        assert not check_support_compact(wide, "x")


class TestTrajectory:
    def test_frames_share_grid(self):
        g1 = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        g2 = make_grid(GridSpec((periodic_axis("x", 1.0, 16),)))
        with pytest.raises(ValidationError):
            trajectory_from_fields([zero_field(g1), zero_field(g2)], step=0.1)

    def test_positive_step_required(self):
        g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        with pytest.raises(ValidationError):
            Trajectory(g, 0.0, np.zeros((3, 8)))

    def test_times(self):
        g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
        traj = Trajectory(g, 0.5, np.zeros((4, 8)), start=1.0)
        np.testing.assert_allclose(traj.times(), [1.0, 1.5, 2.0, 2.5])
