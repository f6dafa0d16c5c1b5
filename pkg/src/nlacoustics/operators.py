"""Discrete calculus on grids: spectral and finite-difference derivatives,
the mean-zero periodic antiderivative, norms, dealiasing, and trajectory
time derivatives.

Periodic axes get exact Fourier calculus on resolved modes.  Bounded axes
get 4th-order centered stencils with one-sided closures.  All operators
are linear maps applied along a single axis of an n-dimensional sample
array.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from .errors import MeanViolationError, UnsupportedAxisError, ValidationError
from .grids import BOUNDED, PERIODIC, Field, Grid, Trajectory

# ---------------------------------------------------------------------------
# stencil machinery (bounded axes and stored trajectories)
# ---------------------------------------------------------------------------


def stencil_weights(offsets: npt.NDArray[np.float64], order: int) -> npt.NDArray[np.float64]:
    """Weights w so that sum w_j f(x + o_j h) ~ h^order f^(order)(x).

    Solved from the Vandermonde moment conditions; exact for polynomials
    of degree < len(offsets).
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    n = offsets.size
    if order >= n:
        raise ValidationError(f"need more than {order} points for derivative order {order}")
    a = np.vander(offsets, n, increasing=True).T
    b = np.zeros(n)
    b[order] = float(math.factorial(order))
    return np.linalg.solve(a, b)


def _fd_matrix_rows(n: int, order: int, acc_width: int) -> list[tuple[int, npt.NDArray]]:
    """One-sided boundary rows for a centered interior scheme.

    Returns (row_index, start_column, weights) for rows where the centered
    stencil of half-width ``acc_width`` does not fit.
    """
    npts = 2 * acc_width + 2 if order % 2 == 0 else 2 * acc_width + 1
    # Use enough points that the shifted stencil keeps 4th-order accuracy:
    # m-th derivative from p points is accurate to order p - m.
    npts = max(npts, order + 4 + (1 if order % 2 == 0 else 0))
    npts = min(npts, n)
    rows = []
    for i in range(acc_width):
        offsets = np.arange(npts) - i
        rows.append((i, 0, stencil_weights(offsets, order)))
    for i in range(n - acc_width, n):
        start = n - npts
        offsets = np.arange(npts) - (i - start)
        rows.append((i, start, stencil_weights(offsets, order)))
    return rows


def _apply_fd_along_axis(
    values: npt.NDArray, axis: int, spacing: float, order: int
) -> npt.NDArray:
    """4th-order finite difference along ``axis`` (one-sided at the ends)."""
    n = values.shape[axis]
    min_pts = order + 4 + (1 if order % 2 == 0 else 0)
    if n < min_pts:
        raise ValidationError(
            f"need at least {min_pts} points along the axis for order {order}, got {n}"
        )
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    half = 3 if order == 3 else 2
    central = stencil_weights(np.arange(-half, half + 1), order)
    # interior: shifted-slice accumulation, O(stencil) vectorized passes
    interior = slice(half, n - half)
    acc = np.zeros_like(v[interior])
    for j, w in enumerate(central):
        acc += w * v[j : n - 2 * half + j]
    out[interior] = acc
    for i, start, w in _fd_matrix_rows(n, order, half):
        out[i] = np.tensordot(w, v[start : start + w.size], axes=(0, 0))
    out /= spacing**order
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# spectral calculus on periodic axes
# ---------------------------------------------------------------------------


def _rfft_wavenumbers(extent: float, n: int) -> npt.NDArray[np.float64]:
    return 2.0 * np.pi * np.arange(n // 2 + 1) / extent


def spectral_derivative(f: Field, axis: int | str, order: int = 1) -> Field:
    """Exact derivative of resolved Fourier modes along a periodic axis.

    The mean mode maps to zero for any order >= 1; for odd orders the
    unmatched Nyquist mode (even point counts) is zeroed as well.
    """
    grid = f.grid
    i = grid.axis_index(axis)
    ax = grid.axes[i]
    if ax.kind != PERIODIC:
        raise UnsupportedAxisError(
            f"axis {ax.label!r} is bounded; use fd_derivative for bounded axes"
        )
    if order not in (1, 2, 3):
        raise ValidationError(f"spectral derivative order must be 1..3, got {order}")
    return Field(grid, _spectral_derivative_values(f.values, i, ax.extent, order))


def _spectral_derivative_values(
    values: npt.NDArray, axis: int, extent: float, order: int
) -> npt.NDArray:
    n = values.shape[axis]
    k = _rfft_wavenumbers(extent, n)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0  # Nyquist has no signed partner
    spec = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = k.size
    spec *= mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


def antiderivative_mean_zero(f: Field, axis: int | str, tol: float = 1e-10) -> Field:
    """Periodic antiderivative normalized to zero mean along ``axis``.

    Inverts the spectral derivative on the mean-free class; equals the
    running integral plus the constant that recenters the result, i.e.
    the inverse-derivative convention used throughout the paraxial
    models.  Rejects input whose mean along the axis is not numerically
    zero, because the inversion is ill-posed there.
    """
    grid = f.grid
    i = grid.axis_index(axis)
    ax = grid.axes[i]
    if ax.kind != PERIODIC:
        raise UnsupportedAxisError(f"axis {ax.label!r} must be periodic")
    require_mean_zero(f.values, i, tol=tol, what=f"axis {ax.label!r}")
    n = ax.points
    k = _rfft_wavenumbers(ax.extent, n)
    mult = np.zeros(k.size, dtype=np.complex128)
    mult[1:] = 1.0 / (1j * k[1:])
    spec = np.fft.rfft(f.values, axis=i)
    shape = [1] * f.values.ndim
    shape[i] = k.size
    spec *= mult.reshape(shape)
    return Field(grid, np.fft.irfft(spec, n=n, axis=i))


def require_mean_zero(
    values: npt.NDArray, axis: int, tol: float = 1e-10, what: str = "axis"
) -> None:
    """Raise MeanViolationError unless the mean along ``axis`` is ~0."""
    mean = np.mean(values, axis=axis)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    bound = tol * max(scale, np.finfo(np.float64).tiny)
    worst = float(np.max(np.abs(mean)))
    if worst > bound:
        raise MeanViolationError(
            f"{what}: |mean| = {worst:.3e} exceeds {bound:.3e}; "
            "input must be mean-free along the periodic axis"
        )


def project_mean_zero(values: npt.NDArray, axis: int) -> npt.NDArray:
    """Remove the mean along ``axis``."""
    return values - np.mean(values, axis=axis, keepdims=True)


def spectral_shift(values: npt.NDArray, axis: int, extent: float, shift) -> npt.NDArray:
    """Evaluate a periodic sample set at coordinates shifted by ``shift``.

    ``shift`` may be a scalar or an array broadcastable against the
    non-axis dimensions; trigonometric interpolation, exact for resolved
    modes.  Positive shift means sampling f(x + shift).
    """
    n = values.shape[axis]
    k = _rfft_wavenumbers(extent, n)
    spec = np.fft.rfft(values, axis=axis)
    spec = np.moveaxis(spec, axis, -1)
    shift = np.asarray(shift, dtype=np.float64)
    phase = np.exp(1j * shift[..., None] * k) if shift.ndim else np.exp(1j * shift * k)
    spec = spec * phase
    out = np.fft.irfft(spec, n=n, axis=-1)
    return np.moveaxis(out, -1, axis)


def sample_periodic(values: npt.NDArray, axis: int, extent: float, at: float) -> npt.NDArray:
    """Trigonometric point evaluation of a periodic sample set at ``at``."""
    n = values.shape[axis]
    k = _rfft_wavenumbers(extent, n)
    spec = np.fft.rfft(values, axis=axis) / n
    weights = np.exp(1j * k * at)
    weights[1:] *= 2.0
    if n % 2 == 0:
        weights[-1] *= 0.5
    spec = np.moveaxis(spec, axis, -1)
    return np.real(spec @ weights)


def fd_derivative(f: Field, axis: int | str, order: int = 1) -> Field:
    """4th-order finite-difference derivative along a bounded axis."""
    grid = f.grid
    i = grid.axis_index(axis)
    ax = grid.axes[i]
    if ax.kind != BOUNDED:
        raise UnsupportedAxisError(
            f"axis {ax.label!r} is periodic; use spectral_derivative there"
        )
    if order not in (1, 2):
        raise ValidationError(f"fd derivative order must be 1 or 2, got {order}")
    return Field(grid, _apply_fd_along_axis(f.values, i, ax.spacing, order))


def derivative(f: Field, axis: int | str, order: int = 1) -> Field:
    """Kind-dispatching derivative: spectral on periodic, FD on bounded."""
    if f.grid.axis(axis).kind == PERIODIC:
        return spectral_derivative(f, axis, order)
    return fd_derivative(f, axis, order)


def gradient(f: Field, axes=None) -> list[Field]:
    """First derivatives along the given axes (default: all)."""
    axes = range(f.grid.ndim) if axes is None else [f.grid.axis_index(a) for a in axes]
    return [derivative(f, i, 1) for i in axes]


def laplacian(f: Field, axes=None) -> Field:
    axes = range(f.grid.ndim) if axes is None else [f.grid.axis_index(a) for a in axes]
    out = np.zeros(f.grid.shape)
    for i in axes:
        out += derivative(f, i, 2).values
    return Field(f.grid, out)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def l2_norm(f: Field, axes=None) -> float | npt.NDArray[np.float64]:
    """sqrt(integral of f^2) with the quadrature implied by the grid.

    With the default ``axes=None`` (all axes) returns a float; a proper
    subset integrates those axes out and returns the remaining sample
    array.
    """
    grid = f.grid
    if axes is None:
        idx = tuple(range(grid.ndim))
    else:
        idx = tuple(sorted({grid.axis_index(a) for a in axes}))
    w = np.ones([1] * grid.ndim)
    for i in idx:
        shape = [1] * grid.ndim
        shape[i] = grid.shape[i]
        w = w * grid.axes[i].quadrature_weights().reshape(shape)
    sq = np.sum(f.values**2 * w, axis=idx)
    if len(idx) == grid.ndim:
        return float(np.sqrt(sq))
    return np.sqrt(sq)


def l2_norm_values(values: npt.NDArray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(values**2 * grid.quadrature_weight)))


def hs_norm(f: Field, s: float) -> float:
    """Sobolev H^s norm via mode-weighted sums; fully periodic grids only.

    Bounded axes have no natural fractional calculus on this grid family,
    so mixed grids only offer the L2 norm.
    """
    grid = f.grid
    if not grid.is_fully_periodic():
        raise UnsupportedAxisError("H^s norms are only defined on fully periodic grids")
    spec = np.fft.fftn(f.values)
    norm = np.prod([float(n) for n in grid.shape])
    coeff_sq = np.abs(spec / norm) ** 2
    k_sq = np.zeros(grid.shape)
    for i, ax in enumerate(grid.axes):
        shape = [1] * grid.ndim
        shape[i] = ax.points
        k_sq = k_sq + (ax.wavenumbers() ** 2).reshape(shape)
    measure = np.prod([ax.extent for ax in grid.axes])
    return float(np.sqrt(measure * np.sum((1.0 + k_sq) ** s * coeff_sq)))


# ---------------------------------------------------------------------------
# dealiasing
# ---------------------------------------------------------------------------


def dealias_mask(n: int) -> npt.NDArray[np.bool_]:
    """rfft-mode keep-mask implementing the 2/3 rule (top third zeroed)."""
    modes = np.arange(n // 2 + 1)
    return modes <= n // 3


def dealias(f: Field, axes=None) -> Field:
    """Zero the top third of modes along the given periodic axes."""
    grid = f.grid
    if axes is None:
        idx = grid.periodic_axes()
    else:
        idx = tuple(grid.axis_index(a) for a in axes)
    values = f.values
    for i in idx:
        if grid.axes[i].kind != PERIODIC:
            raise UnsupportedAxisError(f"axis {grid.axes[i].label!r} is not periodic")
        values = dealias_values(values, i)
    return Field(grid, values)


def dealias_values(values: npt.NDArray, axis: int) -> npt.NDArray:
    n = values.shape[axis]
    spec = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = n // 2 + 1
    spec *= dealias_mask(n).reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


# ---------------------------------------------------------------------------
# stored-trajectory time derivatives
# ---------------------------------------------------------------------------


def time_derivative_series(traj: Trajectory, order: int = 1) -> Trajectory:
    """4th-order finite differences of the stored frames along the march axis."""
    if order not in (1, 2, 3):
        raise ValidationError(f"time derivative order must be 1..3, got {order}")
    if traj.n_frames < order + 4:
        raise ValidationError(
            f"need at least {order + 4} frames for order {order}, got {traj.n_frames}"
        )
    out = _apply_fd_along_axis(traj.values, 0, traj.step, order)
    return traj.with_values(out)


def trajectory_map(traj: Trajectory, fn) -> Trajectory:
    """Apply ``fn`` frame-wise (ndarray -> ndarray) and restack."""
    return traj.with_values(np.stack([fn(traj.values[i]) for i in range(traj.n_frames)]))
