import numpy as np

from nlacoustics.grids import Field, GridSpec, bounded_axis, make_grid, periodic_axis


def periodic_grid_1d(extent=2.0 * np.pi, points=64, label="x"):
    return make_grid(GridSpec((periodic_axis(label, extent, points),)))


def bounded_grid_1d(extent=1.0, points=33, label="x"):
    return make_grid(GridSpec((bounded_axis(label, extent, points),)))


def random_band_limited(grid, rng, axis=0, max_mode=None, mean_zero=False):
    """Random real field band-limited along ``axis`` (other axes white)."""
    ax = grid.axes[axis]
    n = ax.points
    kmax = max_mode if max_mode is not None else n // 4
    shape = list(grid.shape)
    shape[axis] = n // 2 + 1
    coeff = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    modes = np.arange(n // 2 + 1)
    sel = [np.newaxis] * len(shape)
    sel[axis] = slice(None)
    coeff *= (modes <= kmax)[tuple(sel)]
    if mean_zero:
        idx = [slice(None)] * len(shape)
        idx[axis] = 0
        coeff[tuple(idx)] = 0.0
    values = np.fft.irfft(coeff, n=n, axis=axis)
    return Field(grid, values)
