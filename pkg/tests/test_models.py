import numpy as np
import pytest
import sympy as sp

from nlacoustics.errors import DegeneracyAbort, ValidationError
from nlacoustics.grids import (
    Field,
    GridSpec,
    Trajectory,
    field_from_function,
    make_grid,
    periodic_axis,
    zero_field,
)
from nlacoustics.models import (
    apply_kuznetsov_operator,
    apply_westervelt_operator,
    discrepancy_energy,
    solve_kuznetsov_ivp,
    solve_westervelt_ivp,
    wave_energy,
)
from nlacoustics.operators import l2_norm
from nlacoustics.params import ModelParams


def torus_1d(points=32, extent=2 * np.pi):
    return make_grid(GridSpec((periodic_axis("x1", extent, points, role="propagation"),)))


def torus_2d(nx=32, ny=16, lx=2 * np.pi, ly=2 * np.pi):
    return make_grid(
        GridSpec(
            (
                periodic_axis("x1", lx, nx, role="propagation"),
                periodic_axis("x2", ly, ny, role="transverse"),
            )
        )
    )


def sample_trajectory(grid, fn, times, dt):
    vals = np.stack([fn(t, *grid.meshes()) for t in times])
    return Trajectory(grid, dt, vals, "t")


class TestOperatorAppliers:
    def test_zero_trajectory(self):
        g = torus_1d()
        traj = Trajectory(g, 0.1, np.zeros((8, 32)), "t")
        p = ModelParams(eps=0.1, nu=0.3)
        out = apply_kuznetsov_operator(traj, p)
        np.testing.assert_array_equal(out.values, 0.0)
        out_w = apply_westervelt_operator(traj, p)
        np.testing.assert_array_equal(out_w.values, 0.0)

    def test_linear_wave_residual_refines_at_scheme_order(self):
        # exact linear standing wave: residual is pure time-discretization error
        p = ModelParams(eps=0.0, nu=0.0, c=1.0)
        g = torus_1d()
        errs = []
        for dt in (0.02, 0.01):
            times = dt * np.arange(41)
            traj = sample_trajectory(g, lambda t, x: np.cos(x) * np.cos(t), times, dt)
            res = apply_kuznetsov_operator(traj, p)
            errs.append(np.max(np.abs(res.values)))
        assert errs[0] / errs[1] > 8.0

    def test_manufactured_kuznetsov_matches_symbolic(self):
        p = ModelParams(c=1.3, rho0=0.9, nu=0.4, gamma=1.5, eps=0.1)
        t, x = sp.symbols("t x")
        u = sp.sin(t) * sp.sin(x)
        bracket = (
            sp.diff(u, x) ** 2
            + (p.gamma - 1) / (2 * p.c**2) * sp.diff(u, t) ** 2
            + p.nu / p.rho0 * sp.diff(u, x, 2)
        )
        expr = sp.diff(u, t, 2) - p.c**2 * sp.diff(u, x, 2) - p.eps * sp.diff(bracket, t)
        oracle = sp.lambdify((t, x), expr, "numpy")
        g = torus_1d(points=48)
        dt = 0.005
        times = dt * np.arange(60)
        traj = sample_trajectory(g, lambda tt, xx: np.sin(tt) * np.sin(xx), times, dt)
        res = apply_kuznetsov_operator(traj, p)
        tm, xm = np.meshgrid(times, g.coordinate("x1"), indexing="ij")
        np.testing.assert_allclose(res.values, oracle(tm, xm), atol=2e-7)

    def test_manufactured_westervelt_matches_symbolic(self):
        p = ModelParams(c=1.1, rho0=1.2, nu=0.2, gamma=1.4, eps=0.1)
        t, x = sp.symbols("t x")
        u = sp.sin(t) * sp.cos(x)
        bracket = (
            p.nu / p.rho0 * sp.diff(u, x, 2)
            + (p.gamma + 1) / (2 * p.c**2) * sp.diff(u, t) ** 2
        )
        expr = sp.diff(u, t, 2) - p.c**2 * sp.diff(u, x, 2) - p.eps * sp.diff(bracket, t)
        oracle = sp.lambdify((t, x), expr, "numpy")
        g = torus_1d(points=48)
        dt = 0.005
        times = dt * np.arange(60)
        traj = sample_trajectory(g, lambda tt, xx: np.sin(tt) * np.cos(xx), times, dt)
        res = apply_westervelt_operator(traj, p)
        tm, xm = np.meshgrid(times, g.coordinate("x1"), indexing="ij")
        np.testing.assert_allclose(res.values, oracle(tm, xm), atol=2e-7)

    def test_operators_coincide_at_eps_zero(self, rng):
        p = ModelParams(eps=0.0, nu=0.7)
        g = torus_1d()
        vals = rng.standard_normal((10, 32))
        traj = Trajectory(g, 0.05, vals, "t")
        a = apply_kuznetsov_operator(traj, p)
        b = apply_westervelt_operator(traj, p)
        np.testing.assert_array_equal(a.values, b.values)


class TestTorusStepper:
    def test_zero_data_zero_trajectory(self):
        p = ModelParams(eps=0.1, nu=0.5)
        g = torus_2d(nx=16, ny=8)
        traj = solve_kuznetsov_ivp(p, zero_field(g), zero_field(g), dt=0.05, horizon=1.0)
        np.testing.assert_array_equal(traj.values, 0.0)

    def test_linear_standing_wave_second_order(self):
        # u = cos(x) cos(c t); halving dt shrinks the L2 error ~4x
        p = ModelParams(eps=0.0, nu=0.0, c=1.0)
        g = torus_1d()
        u0 = field_from_function(g, np.cos)
        u1 = zero_field(g)
        horizon = 2.0
        errs = []
        for dt in (0.02, 0.01):
            traj = solve_kuznetsov_ivp(p, u0, u1, dt, horizon)
            exact = np.cos(g.coordinate("x1")) * np.cos(traj.times()[-1])
            errs.append(l2_norm(Field(g, traj.values[-1] - exact)))
        ratio = errs[0] / errs[1]
        assert 3.5 < ratio < 4.5

    def test_modal_decay_matches_dispersion_root(self):
        # tiny amplitude keeps the run linear; decay rate of the damped
        # mode must match Re of the root of  l^2 + nu*eps*k^2 l + c^2 k^2 = 0
        p = ModelParams(eps=0.1, nu=1.0, c=1.0)
        k = 1
        gamma_exact = 0.5 * p.nu * p.eps * k**2
        omega = np.sqrt(p.c**2 * k**2 - gamma_exact**2)
        g = torus_1d(points=16)
        amp = 1e-8
        u0 = field_from_function(g, lambda x: amp * np.cos(k * x))
        dt = 1e-3
        n_periods = 8
        horizon = n_periods * 2 * np.pi / omega
        horizon = dt * round(horizon / dt)
        traj = solve_kuznetsov_ivp(p, u0, zero_field(g), dt, horizon, save_every=5)
        spec = np.fft.rfft(traj.values, axis=1)[:, k] / g.shape[0]
        v = np.real(spec)  # cos-mode amplitude
        vdot = np.gradient(v, traj.step)
        energy = v**2 + (vdot / omega) ** 2
        tt = traj.times()
        sel = energy > 1e-6 * energy[0]
        slope = np.polyfit(tt[sel], np.log(energy[sel]), 1)[0]
        gamma_measured = -0.5 * slope
        assert abs(gamma_measured - gamma_exact) <= 0.01 * gamma_exact

    def test_inviscid_energy_drift(self):
        p = ModelParams(eps=0.0, nu=0.0, c=1.0)
        g = torus_2d(nx=32, ny=32)
        u0 = field_from_function(g, lambda x, y: np.cos(x) + 0.5 * np.sin(y))
        dt = 1e-3 * 2 * np.pi
        period = 2 * np.pi
        steps_per_period = int(round(period / dt))
        horizon = 3 * steps_per_period * dt
        traj = solve_kuznetsov_ivp(p, u0, zero_field(g), dt, horizon, save_every=1)
        e = wave_energy(traj, p)
        # compare at matching phases, one period apart
        drift1 = abs(e[2 * steps_per_period] - e[steps_per_period]) / e[steps_per_period]
        assert drift1 <= 1e-6

    def test_viscous_energy_monotone(self):
        p = ModelParams(eps=0.1, nu=1.0, c=1.0)
        g = torus_1d(points=16)
        amp = 1e-6
        u0 = field_from_function(g, lambda x: amp * np.cos(x))
        traj = solve_kuznetsov_ivp(p, u0, zero_field(g), dt=0.01, horizon=5.0)
        e = wave_energy(traj, p)
        assert np.all(np.diff(e) <= 1e-12 * e[0])

    def test_eps_zero_models_coincide_bitwise(self):
        p = ModelParams(eps=0.0, nu=0.4)
        g = torus_2d(nx=16, ny=8)
        u0 = field_from_function(g, lambda x, y: np.sin(x) * np.cos(y))
        u1 = field_from_function(g, lambda x, y: 0.1 * np.cos(x))
        a = solve_kuznetsov_ivp(p, u0, u1, dt=0.05, horizon=1.0)
        b = solve_westervelt_ivp(p, u0, u1, dt=0.05, horizon=1.0)
        np.testing.assert_array_equal(a.values, b.values)

    def test_initial_degeneracy_rejected(self):
        p = ModelParams(eps=0.4, nu=0.0, gamma=3.0)
        g = torus_1d(points=16)
        u1 = field_from_function(g, lambda x: 2.0 / (p.alpha * p.eps) * np.cos(x))
        with pytest.raises(ValidationError):
            solve_kuznetsov_ivp(p, zero_field(g), u1, dt=0.05, horizon=0.5)

    def test_runtime_degeneracy_aborts(self):
        # start inside [1/2, 3/2] but close to the edge; steepening in the
        # inviscid run pushes u_t past the runtime guard
        p = ModelParams(eps=0.45, nu=0.0, gamma=3.0, c=1.0)
        g = torus_1d(points=64)
        cap = 1.0 / (p.alpha * p.eps)
        u1 = field_from_function(g, lambda x: 0.49 * cap * np.cos(x))
        with pytest.raises(DegeneracyAbort):
            solve_kuznetsov_ivp(p, zero_field(g), u1, dt=0.04, horizon=40.0)

    def test_cfl_rule_enforced(self):
        p = ModelParams(c=2.0)
        g = torus_1d(points=64)
        dx = 2 * np.pi / 64
        with pytest.raises(ValidationError):
            solve_kuznetsov_ivp(p, zero_field(g), zero_field(g), dt=dx, horizon=1.0)


class TestDiscrepancyEnergy:
    def _standing_wave(self, n_frames=12, dt=0.05):
        g = torus_1d(points=32)
        times = dt * np.arange(n_frames)
        vals = np.stack([np.cos(g.coordinate("x1")) * np.cos(t) for t in times])
        return Trajectory(g, dt, vals, "t")

    def test_identical_trajectories(self):
        traj = self._standing_wave()
        series = discrepancy_energy(traj, traj)
        np.testing.assert_array_equal(series.e, 0.0)

    def test_standing_wave_constant_energy(self):
        traj = self._standing_wave(n_frames=24, dt=0.02)
        zero = traj.with_values(np.zeros_like(traj.values))
        series = discrepancy_energy(traj, zero)
        np.testing.assert_allclose(series.e, np.sqrt(np.pi), rtol=1e-5)

    def test_homogeneity(self):
        traj = self._standing_wave()
        zero = traj.with_values(np.zeros_like(traj.values))
        double = traj.with_values(2.0 * traj.values)
        e1 = discrepancy_energy(traj, zero).e
        e2 = discrepancy_energy(double, zero).e
        np.testing.assert_allclose(e2, 2.0 * e1, rtol=1e-12)

    def test_grid_mismatch_rejected(self):
        a = self._standing_wave()
        g2 = torus_1d(points=16)
        b = Trajectory(g2, a.step, np.zeros((a.n_frames, 16)), "t")
        with pytest.raises(ValidationError):
            discrepancy_energy(a, b)
