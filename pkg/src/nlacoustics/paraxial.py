"""One-way models marched in their slow variable: KZK (in z) and NPE (in tau).

Both live in the mean-free periodic class along their fast axis (tau for
KZK, z for NPE); the inverse derivative of the diffraction term is only
defined there, so every step projects the fast-axis mean back to zero
(the equations preserve it analytically, the projection removes the
roundoff drift).

The march uses the same semi-implicit splitting as the time steppers:
Crank-Nicolson on the per-mode diagonal linear multiplier (dissipation +
diffraction), Adams-Bashforth 2 on the dealiased quadratic nonlinearity,
with a Heun first step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import BlowUpAbort, SolverAbort, ValidationError
from .grids import Field, Grid, Trajectory
from .operators import (
    derivative,
    hs_norm,
    l2_norm_values,
    require_mean_zero,
    spectral_derivative,
    time_derivative_series,
)
from .params import ModelParams

KZK = "kzk"
NPE = "npe"

# Default H^2 smallness gate relative to the ambient density; the
# well-posedness theory only gives an unquantified smallness threshold,
# so the gate exists to turn blow-up into an actionable rejection.
SMALLNESS_H2_FACTOR = 0.1


@dataclass(frozen=True)
class KzkState:
    """Density-like state on the tau x transverse torus at march position z."""

    field: Field
    z: float = 0.0

    def __post_init__(self) -> None:
        _require_paraxial_grid(self.field.grid)
        require_mean_zero(self.field.values, 0, tol=1e-10, what="KZK state (tau mean)")


@dataclass(frozen=True)
class NpeState:
    """Density-like state on the z x transverse torus at slow time tau."""

    field: Field
    tau: float = 0.0

    def __post_init__(self) -> None:
        _require_paraxial_grid(self.field.grid)
        require_mean_zero(self.field.values, 0, tol=1e-10, what="NPE state (z mean)")


def _require_paraxial_grid(grid: Grid) -> None:
    if not grid.is_fully_periodic():
        raise ValidationError("paraxial states live on fully periodic grids")
    if grid.ndim < 1:
        raise ValidationError("paraxial grid needs the fast axis")


def _march_coefficients(kind: str, params: ModelParams) -> tuple[float, float, float]:
    """(nonlinear, diffusion, diffraction) coefficients of the integrated form."""
    c, rho0, nu, gamma = params.c, params.rho0, params.nu, params.gamma
    if kind == KZK:
        # c dI/dz = a d_tau(I^2) + b d_tau^2 I + g inv_d_tau Lap_y I
        return (
            (gamma + 1.0) / (4.0 * rho0 * c),
            nu / (2.0 * c**3 * rho0),
            c / 2.0,
        )
    if kind == NPE:
        # d xi/d tau = -a d_z(xi^2) + b d_z^2 xi - g inv_d_z Lap_y xi
        return (
            -(gamma + 1.0) * c / (4.0 * rho0),
            nu / (2.0 * rho0),
            -c / 2.0,
        )
    raise ValidationError(f"unknown paraxial kind {kind!r}")


class _ParaxialWorkspace:
    """Spectral data for the fast axis (rfft) x transverse axes (fft)."""

    def __init__(self, grid: Grid, kind: str, params: ModelParams, include=(True, True, True)):
        _require_paraxial_grid(grid)
        self.grid = grid
        self.shape = grid.shape
        self.axes = tuple(range(grid.ndim))
        include_nl, include_diff, include_dfr = include
        a, b, g = _march_coefficients(kind, params)
        self.nonlin_coeff = a if include_nl else 0.0

        n_last = grid.shape[-1]
        spec_shape = grid.shape[:-1] + (n_last // 2 + 1,)
        kfast = None
        kfast_odd = None
        q2 = np.zeros(spec_shape)
        mask = np.ones(spec_shape, dtype=bool)
        for i, ax in enumerate(grid.axes):
            if i == grid.ndim - 1:
                k = 2.0 * np.pi * np.arange(n_last // 2 + 1) / ax.extent
                keep = np.arange(n_last // 2 + 1) <= n_last // 3
            else:
                k = ax.wavenumbers()
                m = np.abs(np.fft.fftfreq(ax.points, d=1.0 / ax.points))
                keep = m <= ax.points // 3
            sh = [1] * grid.ndim
            sh[i] = k.size
            if i == 0:
                kfast = k.reshape(sh)
                k_odd = k.copy()
                if ax.points % 2 == 0 and grid.ndim > 1:
                    k_odd[ax.points // 2] = 0.0  # unmatched Nyquist, odd operators
                kfast_odd = k_odd.reshape(sh)
            if i > 0:
                q2 = q2 + (k**2).reshape(sh)
            mask &= keep.reshape(sh)
        self.mask = mask
        self.kfast = np.broadcast_to(kfast, spec_shape)
        self.kfast_odd = np.broadcast_to(kfast_odd, spec_shape)
        invertible = self.kfast_odd != 0.0
        lin = np.zeros(spec_shape, dtype=np.complex128)
        if include_diff:
            lin = lin - b * self.kfast**2
        if include_dfr:
            with np.errstate(divide="ignore", invalid="ignore"):
                dfr = np.where(invertible, g * (-q2) / (1j * self.kfast_odd), 0.0)
            lin = lin + dfr
        self.lin = np.where(self.kfast == 0.0, 0.0, lin)
        self.mean_rows = self.kfast == 0.0

    def fwd(self, v):
        return np.fft.rfftn(v, axes=self.axes)

    def bwd(self, s):
        return np.fft.irfftn(s, s=self.shape, axes=self.axes)

    def project(self, spec):
        spec[self.mean_rows] = 0.0
        return spec

    def nonlinear(self, v):
        if self.nonlin_coeff == 0.0:
            return 0.0
        spec = self.fwd(v * v) * self.mask
        return self.nonlin_coeff * (1j * self.kfast_odd) * spec


def _paraxial_march(
    kind: str,
    params: ModelParams,
    state0: Field,
    step: float,
    horizon: float,
    save_every: int = 1,
    include_nonlinearity: bool = True,
    include_diffusion: bool = True,
    include_diffraction: bool = True,
    project_mean: bool = True,
    smallness_gate: float | None = None,
    march_label: str | None = None,
) -> Trajectory:
    grid = state0.grid
    _require_paraxial_grid(grid)
    require_mean_zero(state0.values, 0, tol=1e-10, what="initial state (fast-axis mean)")
    if step <= 0 or horizon <= 0:
        raise ValidationError("march step and horizon must be positive")
    gate = (
        smallness_gate
        if smallness_gate is not None
        else SMALLNESS_H2_FACTOR * params.rho0
    )
    h2 = hs_norm(state0, 2.0)
    if h2 > gate:
        raise ValidationError(
            f"initial state too large: H^2 norm {h2:.3g} exceeds the smallness gate {gate:.3g}"
        )
    ws = _ParaxialWorkspace(
        grid, kind, params, (include_nonlinearity, include_diffusion, include_diffraction)
    )
    n_steps = int(round(horizon / step))
    norm0 = l2_norm_values(state0.values, grid)

    lam = ws.lin * step
    cn_num = 1.0 + 0.5 * lam
    cn_den = 1.0 - 0.5 * lam

    spec = ws.fwd(state0.values)
    if project_mean:
        ws.project(spec)
    frames = [ws.bwd(spec)]
    n_prev = None
    saved_state = spec

    for n in range(n_steps):
        v_phys = ws.bwd(saved_state)
        _check_blowup(v_phys, grid, norm0, n)
        n_curr = ws.nonlinear(v_phys)
        if n == 0 or n_prev is None:
            # Heun start: CN linear + explicit predictor/corrector nonlinearity
            pred = (cn_num * saved_state + step * n_curr) / cn_den
            n_pred = ws.nonlinear(ws.bwd(pred))
            spec_next = (cn_num * saved_state + 0.5 * step * (n_curr + n_pred)) / cn_den
        else:
            spec_next = (
                cn_num * saved_state + step * (1.5 * n_curr - 0.5 * n_prev)
            ) / cn_den
        if project_mean:
            ws.project(spec_next)
        n_prev = n_curr
        saved_state = spec_next
        if (n + 1) % save_every == 0:
            frames.append(ws.bwd(saved_state))

    label = march_label or ("z" if kind == KZK else "tau")
    return Trajectory(grid, step * save_every, np.stack(frames), label)


def _check_blowup(values, grid, norm0, step_index):
    if not np.all(np.isfinite(values)):
        raise SolverAbort(f"non-finite paraxial state at step {step_index}")
    if norm0 > 0 and l2_norm_values(values, grid) > 2.0 * norm0:
        raise BlowUpAbort(
            f"state norm doubled by step {step_index}; nonlinear regime left the gate"
        )


def kzk_march(
    params: ModelParams,
    i0: Field,
    dz: float,
    z_max: float,
    save_every: int = 1,
    **kw,
) -> Trajectory:
    """March the integrated KZK equation in the propagation distance z."""
    return _paraxial_march(KZK, params, i0, dz, z_max, save_every, **kw)


def npe_march(
    params: ModelParams,
    xi0: Field,
    dtau: float,
    tau_max: float,
    save_every: int = 1,
    **kw,
) -> Trajectory:
    """March the integrated NPE equation in the slow time tau."""
    return _paraxial_march(NPE, params, xi0, dtau, tau_max, save_every, **kw)


# ---------------------------------------------------------------------------
# PDE-form operators on stored marches
# ---------------------------------------------------------------------------


def apply_kzk_operator(
    traj: Trajectory, params: ModelParams, include_nonlinearity: bool = True
) -> Trajectory:
    """Residual of c I_{tau z} - ((gamma+1)/4 rho0) (I^2)_{tau tau}
    - (nu / 2 c^2 rho0) I_{tau tau tau} - (c^2/2) Lap_y I on stored z-frames."""
    if traj.n_frames < 7:
        raise ValidationError("KZK operator needs at least 7 stored z-frames")
    c, rho0, nu, gamma = params.c, params.rho0, params.nu, params.gamma
    dz_series = time_derivative_series(traj, 1).values
    out = np.empty_like(traj.values)
    for i in range(traj.n_frames):
        f = traj.frame(i)
        dz_f = Field(traj.grid, dz_series[i])
        term = c * spectral_derivative(dz_f, 0, 1).values
        if include_nonlinearity:
            sq = Field(traj.grid, f.values**2)
            term -= (gamma + 1.0) / (4.0 * rho0) * spectral_derivative(sq, 0, 2).values
        term -= nu / (2.0 * c**2 * rho0) * spectral_derivative(f, 0, 3).values
        lap_y = np.zeros_like(f.values)
        for ax in range(1, traj.grid.ndim):
            lap_y += spectral_derivative(f, ax, 2).values
        term -= 0.5 * c**2 * lap_y
        out[i] = term
    return traj.with_values(out)


def apply_npe_operator(
    traj: Trajectory, params: ModelParams, include_nonlinearity: bool = True
) -> Trajectory:
    """Residual of xi_{tau z} + ((gamma+1) c / 4 rho0) (xi^2)_{zz}
    - (nu / 2 rho0) xi_{zzz} + (c/2) Lap_y xi on stored tau-frames."""
    if traj.n_frames < 7:
        raise ValidationError("NPE operator needs at least 7 stored tau-frames")
    c, rho0, nu, gamma = params.c, params.rho0, params.nu, params.gamma
    dtau_series = time_derivative_series(traj, 1).values
    out = np.empty_like(traj.values)
    for i in range(traj.n_frames):
        f = traj.frame(i)
        dtau_f = Field(traj.grid, dtau_series[i])
        term = spectral_derivative(dtau_f, 0, 1).values.copy()
        if include_nonlinearity:
            sq = Field(traj.grid, f.values**2)
            term += (gamma + 1.0) * c / (4.0 * rho0) * spectral_derivative(sq, 0, 2).values
        term -= nu / (2.0 * rho0) * spectral_derivative(f, 0, 3).values
        lap_y = np.zeros_like(f.values)
        for ax in range(1, traj.grid.ndim):
            lap_y += spectral_derivative(f, ax, 2).values
        term += 0.5 * c * lap_y
        out[i] = term
    return traj.with_values(out)


def npe_rhs(params: ModelParams, xi: Field) -> Field:
    """d xi / d tau from the integrated NPE equation (used by data builders)."""
    from .operators import antiderivative_mean_zero

    a, b, g = _march_coefficients(NPE, params)
    sq = Field(xi.grid, xi.values**2)
    out = a * spectral_derivative(sq, 0, 1).values
    out += b * spectral_derivative(xi, 0, 2).values
    lap_y = np.zeros_like(xi.values)
    for ax in range(1, xi.grid.ndim):
        lap_y += spectral_derivative(xi, ax, 2).values
    if xi.grid.ndim > 1:
        out += g * antiderivative_mean_zero(Field(xi.grid, lap_y), 0).values
    return Field(xi.grid, out)


def kzk_rhs(params: ModelParams, i_field: Field) -> Field:
    """dI/dz from the integrated KZK equation (used by data builders)."""
    from .operators import antiderivative_mean_zero

    a, b, g = _march_coefficients(KZK, params)
    sq = Field(i_field.grid, i_field.values**2)
    out = a * spectral_derivative(sq, 0, 1).values
    out += b * spectral_derivative(i_field, 0, 2).values
    lap_y = np.zeros_like(i_field.values)
    for ax in range(1, i_field.grid.ndim):
        lap_y += spectral_derivative(i_field, ax, 2).values
    if i_field.grid.ndim > 1:
        out += g * antiderivative_mean_zero(Field(i_field.grid, lap_y), 0).values
    return Field(i_field.grid, out)
