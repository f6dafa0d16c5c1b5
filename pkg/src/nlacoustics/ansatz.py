"""Changes of variables tying the exact model to each approximation.

The paraxial composition u(t, x1, x') = F(tau, z, y) is evaluated without
resampling error wherever the grids allow it: the transverse axes are
chosen index-aligned (y = sqrt(eps) x'), periodic offsets (tau = t - x1/c,
z = x1 - c t) become exact trigonometric phase shifts, and only the march
coordinate is interpolated (cubic spline over the stored frames).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline

from .errors import InversionFailureError, ValidationError
from .grids import (
    BOUNDED,
    PERIODIC,
    AxisSpec,
    Field,
    Grid,
    GridSpec,
    Trajectory,
    check_support_compact,
    make_grid,
)
from .models import BoundaryData
from .operators import (
    antiderivative_mean_zero,
    derivative,
    gradient,
    laplacian,
    l2_norm,
    sample_periodic,
    spectral_shift,
    time_derivative_series,
)
from .paraxial import npe_rhs
from .params import ModelParams

KZK = "kzk"
NPE = "npe"


@dataclass(frozen=True)
class ParaxialMap:
    """The coordinate change (t, x1, x') <-> (tau, z, y) for one model kind."""

    kind: str
    eps: float
    c: float

    def __post_init__(self) -> None:
        if self.kind not in (KZK, NPE):
            raise ValidationError(f"unknown paraxial kind {self.kind!r}")

    def forward(self, t, x1, *xp):
        """(t, x1, x'...) -> (tau, z, y...)."""
        t = np.asarray(t, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        root = np.sqrt(self.eps)
        if self.kind == KZK:
            tau = t - x1 / self.c
            z = self.eps * x1
        else:
            tau = self.eps * t
            z = x1 - self.c * t
        return (tau, z) + tuple(root * np.asarray(x) for x in xp)

    def inverse(self, tau, z, *y):
        """(tau, z, y...) -> (t, x1, x'...); needs eps > 0."""
        if self.eps == 0.0:
            raise ValidationError("the paraxial map is not invertible at eps = 0")
        tau = np.asarray(tau, dtype=float)
        z = np.asarray(z, dtype=float)
        root = np.sqrt(self.eps)
        if self.kind == KZK:
            x1 = z / self.eps
            t = tau + x1 / self.c
        else:
            t = tau / self.eps
            x1 = z + self.c * t
        return (t, x1) + tuple(np.asarray(v) / root for v in y)


def map_coordinates(pmap: ParaxialMap, t, x):
    """Forward map applied to (t, x-tuple); returns (tau, z, y...)."""
    return pmap.forward(t, x[0], *x[1:])


@dataclass(frozen=True)
class AnsatzFieldSet:
    """Matched initial (and boundary) data produced by one builder."""

    u0: Field
    u1: Field
    g: BoundaryData | None
    provenance: str


# ---------------------------------------------------------------------------
# grid pairing helpers
# ---------------------------------------------------------------------------


def matched_transverse_axes(paraxial_grid: Grid, eps: float) -> tuple[AxisSpec, ...]:
    """Transverse x' axes index-aligned with the paraxial y axes."""
    if eps <= 0.0:
        raise ValidationError("matched grids need eps > 0")
    root = np.sqrt(eps)
    axes = []
    for ax in paraxial_grid.axes[1:]:
        axes.append(AxisSpec(f"x{len(axes) + 2}", PERIODIC, ax.extent / root, ax.points, "transverse"))
    return tuple(axes)


def matched_torus_grid(npe_grid: Grid, eps: float) -> Grid:
    """Fully periodic (x1, x') grid matching an NPE (z, y) grid."""
    zax = npe_grid.axes[0]
    x1 = AxisSpec("x1", PERIODIC, zax.extent, zax.points, "propagation")
    return make_grid(GridSpec((x1,) + matched_transverse_axes(npe_grid, eps)))


def matched_half_space_grid(kzk_grid: Grid, eps: float, depth: float, points: int) -> Grid:
    """Bounded-depth (x1, x') grid matching a KZK (tau, y) grid."""
    x1 = AxisSpec("x1", BOUNDED, depth, points, "propagation")
    return make_grid(GridSpec((x1,) + matched_transverse_axes(kzk_grid, eps)))


def _check_transverse_match(target: Grid, paraxial_grid: Grid, eps: float) -> None:
    want = matched_transverse_axes(paraxial_grid, eps)
    got = target.axes[1:]
    if len(want) != len(got):
        raise ValidationError("transverse axis count mismatch between grids")
    for w, g in zip(want, got):
        if g.kind != PERIODIC or g.points != w.points or abs(g.extent - w.extent) > 1e-9 * w.extent:
            raise ValidationError(
                "target transverse axes must be the paraxial y axes rescaled by eps^-1/2"
            )


# ---------------------------------------------------------------------------
# KZK ansatz
# ---------------------------------------------------------------------------


class KzkAnsatz:
    """Approximate half-space solution built from a marched KZK trajectory.

    ubar(t, x1, x') = (c^2/rho0) * invd_tau I(t - x1/c, eps x1, sqrt(eps) x').
    The z direction is cubic-spline interpolated over the stored march, the
    retarded time is an exact phase evaluation per depth node.
    """

    def __init__(self, i_traj: Trajectory, params: ModelParams, grid: Grid):
        if params.eps <= 0.0:
            raise ValidationError("the KZK ansatz needs eps > 0")
        kgrid = i_traj.grid
        _check_transverse_match(grid, kgrid, params.eps)
        depth_ax = grid.axes[0]
        if depth_ax.kind != BOUNDED:
            raise ValidationError("KZK ansatz target grid needs a bounded depth axis")
        z_needed = params.eps * depth_ax.extent
        z_marched = i_traj.step * (i_traj.n_frames - 1)
        if z_needed > z_marched * (1.0 + 1e-12):
            raise ValidationError(
                f"depth extends to z = {z_needed:.4g} but the march only reaches "
                f"{z_marched:.4g}; extend the march rather than extrapolating"
            )
        self.params = params
        self.grid = grid
        self.kgrid = kgrid
        self.period = kgrid.axes[0].extent
        x1 = grid.coordinate(0)
        zs = i_traj.times()
        j_vals = np.stack(
            [antiderivative_mean_zero(i_traj.frame(i), 0).values for i in range(i_traj.n_frames)]
        )
        spline_j = CubicSpline(zs, j_vals, axis=0)
        spline_i = CubicSpline(zs, i_traj.values, axis=0)
        # (depth, tau, y...) samples of invd_tau I and I at z = eps * x1
        self._j_at_depth = spline_j(params.eps * x1)
        self._i_at_depth = spline_i(params.eps * x1)
        ntau = kgrid.axes[0].points
        k = 2.0 * np.pi * np.arange(ntau // 2 + 1) / self.period
        self._weights = np.ones(k.size)
        self._weights[1:] = 2.0
        if ntau % 2 == 0:
            self._weights[-1] = 1.0
        self._k = k
        self._spec_j = np.fft.rfft(self._j_at_depth, axis=1) / ntau
        self._spec_i = np.fft.rfft(self._i_at_depth, axis=1) / ntau
        self._x1 = x1

    def _sample(self, spec, t: float) -> npt.NDArray[np.float64]:
        # evaluate each depth row at its own retarded time t - x1/c
        tau_star = t - self._x1 / self.params.c
        phase = np.exp(1j * np.outer(tau_star, self._k)) * self._weights
        shape = (spec.shape[0], spec.shape[1]) + (1,) * (spec.ndim - 2)
        return np.real(np.sum(spec * phase.reshape(shape), axis=1))

    def ubar_at(self, t: float) -> Field:
        scale = self.params.c**2 / self.params.rho0
        return Field(self.grid, scale * self._sample(self._spec_j, t))

    def ubar_t_at(self, t: float) -> Field:
        # d/dt of the composition hits only tau: (c^2/rho0) I(tau, z, y)
        scale = self.params.c**2 / self.params.rho0
        return Field(self.grid, scale * self._sample(self._spec_i, t))

    def trajectory(self, times, step: float) -> Trajectory:
        vals = np.stack([self.ubar_at(float(t)).values for t in times])
        return Trajectory(self.grid, step, vals, "t", start=float(times[0]))


def build_ubar_from_kzk(
    i_traj: Trajectory, params: ModelParams, grid: Grid, t: float
) -> Field:
    """One composed frame; use KzkAnsatz directly for many frames."""
    return KzkAnsatz(i_traj, params, grid).ubar_at(t)


def kzk_boundary_g(
    i0: Field, params: ModelParams, ramp_time: float = 0.0
) -> BoundaryData:
    """Dirichlet trace (c^2/rho0) invd_tau I0 on the x1 = 0 plane."""
    kgrid = i0.grid
    j0 = antiderivative_mean_zero(i0, 0)
    tgrid = make_grid(GridSpec(matched_transverse_axes(kgrid, params.eps)))
    scale = params.c**2 / params.rho0
    return BoundaryData(tgrid, scale * j0.values, kgrid.axes[0].extent, ramp_time)


def kzk_initial_data(
    i_traj: Trajectory, params: ModelParams, grid: Grid
) -> AnsatzFieldSet:
    """Initial data u(0) = ubar(0), u_t(0) = ubar_t(0) plus the matching trace."""
    ansatz = KzkAnsatz(i_traj, params, grid)
    u0 = ansatz.ubar_at(0.0)
    u1 = ansatz.ubar_t_at(0.0)
    g = kzk_boundary_g(i_traj.frame(0), params)
    for f in (u0, u1):
        for ax in range(1, grid.ndim):
            if not check_support_compact(f, ax):
                warnings.warn(
                    "ansatz data is not numerically compact in the transverse box",
                    stacklevel=2,
                )
    return AnsatzFieldSet(u0, u1, g, "kzk")


# ---------------------------------------------------------------------------
# NPE ansatz
# ---------------------------------------------------------------------------


class NpeAnsatz:
    """Approximate torus solution built from a marched NPE trajectory.

    ubar(t, x1, x') = -(c/rho0) invd_z xi(eps t, x1 - c t, sqrt(eps) x');
    the z offset is an exact spectral shift, tau is spline interpolated.
    """

    def __init__(self, xi_traj: Trajectory, params: ModelParams, grid: Grid):
        if params.eps <= 0.0:
            raise ValidationError("the NPE ansatz needs eps > 0")
        ngrid = xi_traj.grid
        _check_transverse_match(grid, ngrid, params.eps)
        x1_ax = grid.axes[0]
        z_ax = ngrid.axes[0]
        if x1_ax.kind != PERIODIC:
            raise ValidationError("NPE ansatz target grid must be a torus")
        if x1_ax.points != z_ax.points or abs(x1_ax.extent - z_ax.extent) > 1e-12 * z_ax.extent:
            raise ValidationError("x1 axis must carry the same period and points as z")
        self.params = params
        self.grid = grid
        self.ngrid = ngrid
        self.extent = z_ax.extent
        self._taus = xi_traj.times()
        self._spline_xi = CubicSpline(self._taus, xi_traj.values, axis=0)

    def _xi_at(self, tau: float) -> npt.NDArray[np.float64]:
        tau_max = self._taus[-1]
        if tau < -1e-12 or tau > tau_max * (1.0 + 1e-12):
            raise ValidationError(
                f"slow time {tau:.4g} outside the marched range [0, {tau_max:.4g}]"
            )
        return self._spline_xi(min(max(tau, 0.0), tau_max))

    def ubar_at(self, t: float) -> Field:
        p = self.params
        xi = self._xi_at(p.eps * t)
        j = antiderivative_mean_zero(Field(self.ngrid, xi), 0).values
        shifted = spectral_shift(j, 0, self.extent, -p.c * t)
        return Field(self.grid, -(p.c / p.rho0) * shifted)

    def ubar_t_at(self, t: float) -> Field:
        # chain rule: du/dt = eps d_tau ubar - c d_z ubar, with d_tau xi
        # supplied by the NPE equation itself
        p = self.params
        xi = Field(self.ngrid, self._xi_at(p.eps * t))
        dtau_xi = npe_rhs(p, xi)
        j_t = antiderivative_mean_zero(dtau_xi, 0).values
        vals = (p.c**2 / p.rho0) * xi.values - p.eps * (p.c / p.rho0) * j_t
        shifted = spectral_shift(vals, 0, self.extent, -p.c * t)
        return Field(self.grid, shifted)

    def trajectory(self, times, step: float) -> Trajectory:
        vals = np.stack([self.ubar_at(float(t)).values for t in times])
        return Trajectory(self.grid, step, vals, "t", start=float(times[0]))


def build_ubar_from_npe(
    xi_traj: Trajectory, params: ModelParams, grid: Grid, t: float
) -> Field:
    return NpeAnsatz(xi_traj, params, grid).ubar_at(t)


def npe_initial_data(xi0: Field, params: ModelParams, grid: Grid) -> AnsatzFieldSet:
    """u0 = -(c/rho0) invd_z xi0 and u1 from the chain rule at t = 0."""
    ngrid = xi0.grid
    _check_transverse_match(grid, ngrid, params.eps)
    p = params
    j0 = antiderivative_mean_zero(xi0, 0).values
    u0 = Field(grid, -(p.c / p.rho0) * j0)
    dtau_xi = npe_rhs(p, xi0)
    j_t = antiderivative_mean_zero(dtau_xi, 0).values
    u1 = Field(grid, (p.c**2 / p.rho0) * xi0.values - p.eps * (p.c / p.rho0) * j_t)
    return AnsatzFieldSet(u0, u1, None, "npe")


# ---------------------------------------------------------------------------
# Westervelt algebraic ansatz
# ---------------------------------------------------------------------------


def westervelt_forward(u_traj: Trajectory, params: ModelParams) -> Trajectory:
    """Pi = u + (eps / 2 c^2) d/dt(u^2), frame-wise on a stored trajectory."""
    if u_traj.n_frames < 5:
        raise ValidationError("forward ansatz needs at least 5 frames")
    sq = u_traj.with_values(u_traj.values**2)
    dsq = time_derivative_series(sq, 1).values
    scale = params.eps / (2.0 * params.c**2)
    return u_traj.with_values(u_traj.values + scale * dsq)


def westervelt_inverse(
    pi_traj: Trajectory, params: ModelParams, tol: float, max_sweeps: int = 60
) -> Trajectory:
    """Solve Pi = ubar + (eps/c^2) ubar d/dt(ubar) for ubar by fixed point.

    The whole stored trajectory is swept at once, recomputing the time
    derivative each sweep; stops when the sweep-to-sweep L2 change drops
    below ``tol`` (absolute, in the trajectory's L2 metric).
    """
    eps, c2 = params.eps, params.c**2
    if eps == 0.0:
        return pi_traj
    dpi = time_derivative_series(pi_traj, 1).values
    gate = eps * np.max(np.abs(pi_traj.values)) * np.max(np.abs(dpi)) / c2
    if gate > 0.1:
        raise ValidationError(
            f"inversion gate violated: eps*max|Pi|*max|dPi/dt|/c^2 = {gate:.3g} > 0.1"
        )
    weight = pi_traj.grid.quadrature_weight
    ubar = pi_traj.values.copy()
    prev_change = np.inf
    for _ in range(max_sweeps):
        du = time_derivative_series(pi_traj.with_values(ubar), 1).values
        new = pi_traj.values - (eps / c2) * ubar * du
        change = float(
            np.max(np.sqrt(np.sum((new - ubar) ** 2 * weight, axis=tuple(range(1, new.ndim)))))
        )
        ubar = new
        if change <= tol:
            return pi_traj.with_values(ubar)
        if change > prev_change * (1.0 + 1e-12):
            if change <= 10.0 * tol:
                return pi_traj.with_values(ubar)  # stagnated at the roundoff floor
            raise InversionFailureError(
                f"fixed-point sweeps stopped contracting (change {change:.3g})"
            )
        prev_change = change
    raise InversionFailureError(f"no contraction to tol={tol:g} in {max_sweeps} sweeps")


def westervelt_initial_data(
    u0: Field, u1: Field, params: ModelParams
) -> tuple[Field, Field]:
    """Matched (Pi0, Pi1) with the second time derivative taken from the
    quasilinear equation itself rather than from unavailable history."""
    p = params
    eps, c2 = p.eps, p.c**2
    factor = 1.0 - (p.gamma - 1.0) / c2 * eps * u1.values
    if np.min(factor) < 0.25:
        raise ValidationError("initial data degenerate: 1 - (gamma-1) eps u1 / c^2 < 1/4")
    pi0 = Field(u0.grid, u0.values + (eps / c2) * u0.values * u1.values)
    lap_u0 = laplacian(u0).values
    lap_u1 = laplacian(u1).values
    grad_dot = sum(
        (a.values * b.values) for a, b in zip(gradient(u0), gradient(u1))
    )
    utt0 = (c2 * lap_u0 + p.delta_visc * eps * lap_u1 + 2.0 * eps * grad_dot) / factor
    pi1 = Field(
        u1.grid,
        u1.values + (eps / c2) * u1.values**2 + (eps / c2) * u0.values * utt0,
    )
    return pi0, pi1


# ---------------------------------------------------------------------------
# data-mismatch bump
# ---------------------------------------------------------------------------


def delta_bump(grid: Grid, delta: float, seed: int = 0) -> Field:
    """Mean-free Gaussian-derivative bump scaled to L2 norm ``delta``.

    The shape is fixed (derivative of a Gaussian along the first axis,
    plain Gaussians transversally); only its placement is seeded.  The
    bump stays clear of bounded-axis ends so boundary traces and sponge
    regions are untouched.
    """
    rng = np.random.default_rng(seed)
    meshes = grid.meshes()
    bump = np.ones(grid.shape)
    for i, ax in enumerate(grid.axes):
        lo, hi = (0.3, 0.55) if ax.kind == BOUNDED else (0.25, 0.75)
        center = ax.extent * rng.uniform(lo, hi)
        width = ax.extent / 14.0
        s = (meshes[i] - center) / width
        if i == 0:
            bump = bump * (-s) * np.exp(-0.5 * s**2)
        else:
            bump = bump * np.exp(-0.5 * s**2)
    # the wrapped/truncated Gaussian tail leaves a tiny mean; project it out
    bump = bump - np.mean(bump, axis=0, keepdims=True)
    f = Field(grid, bump)
    norm = l2_norm(f)
    if norm == 0.0:
        raise ValidationError("degenerate bump")
    return Field(grid, (delta / norm) * bump)
