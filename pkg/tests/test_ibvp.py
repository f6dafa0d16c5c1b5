import numpy as np
import pytest

from nlacoustics.errors import CompatibilityError, ValidationError
from nlacoustics.grids import (
    Field,
    GridSpec,
    bounded_axis,
    make_grid,
    periodic_axis,
    zero_field,
)
from nlacoustics.models import (
    BoundaryData,
    extract_periodic_regime,
    solve_kuznetsov_ibvp,
    sponge_profile,
    zero_boundary,
)
from nlacoustics.params import ModelParams


def half_space_grid(depth=12 * np.pi, nx=768, ny=8, ly=2 * np.pi):
    return make_grid(
        GridSpec(
            (
                bounded_axis("x1", depth, nx, role="propagation"),
                periodic_axis("x2", ly, ny, role="transverse"),
            )
        )
    )


def transverse_grid(ny=8, ly=2 * np.pi):
    return make_grid(GridSpec((periodic_axis("x2", ly, ny, role="transverse"),)))


def sine_boundary(ny=8, amp=1.0, period=2 * np.pi, nt=32, ramp_periods=2):
    tg = transverse_grid(ny=ny)
    t = period * np.arange(nt) / nt
    vals = amp * np.sin(2 * np.pi * t / period)[:, None] * np.ones((1, ny))
    return BoundaryData(tg, vals, period, ramp_time=ramp_periods * period)


class TestIbvp:
    def test_zero_everything_stays_zero(self):
        p = ModelParams(eps=0.1, nu=0.5)
        g = half_space_grid(depth=4 * np.pi, nx=64, ny=8)
        bc = zero_boundary(transverse_grid(), period=2 * np.pi)
        traj = solve_kuznetsov_ibvp(p, zero_field(g), zero_field(g), bc, dt=0.05, horizon=2.0)
        np.testing.assert_array_equal(traj.values, 0.0)

    def test_compatibility_enforced(self):
        p = ModelParams(eps=0.0, nu=0.0)
        g = half_space_grid(depth=4 * np.pi, nx=64, ny=8)
        bc = sine_boundary(ramp_periods=0)  # g(0)=0 but g_t(0) != 0
        with pytest.raises(CompatibilityError):
            solve_kuznetsov_ibvp(p, zero_field(g), zero_field(g), bc, dt=0.05, horizon=1.0)

    def test_dalembert_outgoing_wave(self):
        # linear inviscid boundary forcing: u = sin(w (t - x/c)) behind the
        # fully ramped front, measured at 128 points per wavelength
        p = ModelParams(eps=0.0, nu=0.0, c=1.0)
        period = 2 * np.pi
        depth = 12 * np.pi  # 6 wavelengths
        grid = half_space_grid(depth=depth, nx=768, ny=8)
        ramp_periods = 2
        bc = sine_boundary(nt=64, ramp_periods=ramp_periods)
        dx = depth / (768 - 1)
        dt = 0.4 * dx
        horizon = dt * round((ramp_periods * period + 0.8 * depth / p.c) / dt)
        traj = solve_kuznetsov_ibvp(
            p, zero_field(grid), zero_field(grid), bc, dt, horizon, save_every=50
        )
        t_end = traj.times()[-1]
        x = grid.coordinate("x1")
        causal = x < p.c * (t_end - ramp_periods * period)
        clear_of_sponge = x < 0.8 * depth
        sel = causal & clear_of_sponge
        exact = np.sin(2 * np.pi / period * (t_end - x[sel] / p.c))
        got = traj.values[-1][sel, 0]
        rel = np.linalg.norm(got - exact) / np.linalg.norm(exact)
        assert rel <= 0.02

    def test_sponge_two_depth_comparison(self):
        # doubling the truncation depth must not change the interior once
        # the wavefront has entered (and reflected off) the sponge; the
        # nested point counts make the two depth grids share their nodes
        p = ModelParams(eps=0.0, nu=0.0, c=1.0)
        depth = 8 * np.pi
        bc = sine_boundary(nt=64, ramp_periods=1)
        dt = 0.02
        horizon = dt * round((2.5 * depth / p.c) / dt)
        nx = 257
        sols = {}
        for mult, points in ((1, nx), (2, 2 * nx - 1)):
            grid = half_space_grid(depth=mult * depth, nx=points, ny=8)
            traj = solve_kuznetsov_ibvp(
                p, zero_field(grid), zero_field(grid), bc, dt, horizon, save_every=200
            )
            sols[mult] = (grid, traj)
        g1, t1 = sols[1]
        g2, t2 = sols[2]
        np.testing.assert_allclose(g2.coordinate("x1")[:nx], g1.coordinate("x1"))
        x1 = g1.coordinate("x1")
        keep = x1 <= 0.7 * depth
        a = t1.values[-1][keep, :]
        b = t2.values[-1][:nx][keep, :]
        scale = np.max(np.abs(b))
        assert np.max(np.abs(a - b)) <= 1e-4 * scale

    def test_sponge_profile_shape(self):
        g = half_space_grid(depth=10.0, nx=128, ny=8)
        sig = sponge_profile(g.axes[0], c=2.0)
        x = g.coordinate("x1")
        assert np.all(sig[x <= 8.5] == 0.0)
        assert sig[-1] == pytest.approx(100.0 * 2.0 / 1.5)
        assert np.all(np.diff(sig) >= 0.0)


class TestPeriodicRegime:
    def test_zero_boundary_converges_immediately(self):
        p = ModelParams(eps=0.1, nu=0.5)
        g = half_space_grid(depth=4 * np.pi, nx=64, ny=8)
        bc = zero_boundary(transverse_grid(), period=2 * np.pi)
        out = extract_periodic_regime(p, g, bc, dt=2 * np.pi / 128, tol=1e-6)
        assert out.transient_periods == 0
        np.testing.assert_array_equal(out.trajectory.values, 0.0)

    def test_linear_regime_matches_per_mode_ode_oracle(self):
        # independent oracle: steady time-harmonic response, one banded
        # solve per (time mode, transverse mode) on the same depth operator
        p = ModelParams(eps=0.1, nu=0.8, c=1.0)
        period = 2 * np.pi
        depth = 6 * np.pi
        nx, ny = 192, 8
        grid = half_space_grid(depth=depth, nx=nx, ny=ny)
        amp = 1e-6
        bc = sine_boundary(ny=ny, amp=amp, nt=32, ramp_periods=0)
        dt = period / 512
        out = extract_periodic_regime(
            p, grid, bc, dt=dt, tol=1e-5, frames_per_period=64, max_periods=40
        )
        traj = out.trajectory

        from nlacoustics.models import _depth_derivative_matrices, sponge_profile

        d1, d2 = _depth_derivative_matrices(nx, grid.axes[0].spacing)
        sigma = sponge_profile(grid.axes[0], p.c)
        omega = 2 * np.pi / period
        coef = p.c**2 + 1j * omega * p.delta_visc * p.eps
        # boundary signal amp*sin(w t) = Im(amp e^{i w t}):
        mat = (
            np.diag(-(omega**2) + 1j * omega * sigma)
            + p.c * np.diag(sigma) @ d1.toarray()
            - coef * d2.toarray()
        )
        mat[0, :] = 0.0
        mat[0, 0] = 1.0
        mat[-1, :] = 0.0
        mat[-1, -1] = 1.0
        rhs = np.zeros(nx, dtype=complex)
        rhs[0] = amp
        u_hat = np.linalg.solve(mat, rhs)
        times = traj.times()
        oracle = np.imag(u_hat[None, :] * np.exp(1j * omega * times)[:, None])
        got = traj.values[:, :, 0]
        err = np.max(np.abs(got - oracle)) / np.max(np.abs(oracle))
        assert err <= 5e-3

    def test_tighter_tol_needs_more_periods(self):
        p = ModelParams(eps=0.1, nu=0.6, c=1.0)
        grid = half_space_grid(depth=4 * np.pi, nx=128, ny=8)
        bc = sine_boundary(amp=1e-4, nt=32, ramp_periods=0)
        dt = 2 * np.pi / 256
        counts = []
        for tol in (1e-2, 1e-3, 1e-4):
            out = extract_periodic_regime(p, grid, bc, dt=dt, tol=tol, max_periods=80)
            counts.append(out.transient_periods)
        assert counts[0] <= counts[1] <= counts[2]

    def test_requires_viscosity(self):
        p = ModelParams(eps=0.1, nu=0.0)
        grid = half_space_grid(depth=4 * np.pi, nx=64, ny=8)
        bc = zero_boundary(transverse_grid(), period=2 * np.pi)
        with pytest.raises(ValidationError):
            extract_periodic_regime(p, grid, bc, dt=0.05, tol=1e-6)
