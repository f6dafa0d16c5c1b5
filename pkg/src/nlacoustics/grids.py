"""Tensor-product grids, sampled fields, and stored trajectories.

Axes are either ``periodic`` (uniform spacing ``extent/points``, endpoint
excluded, spectral calculus available) or ``bounded`` (uniform spacing
``extent/(points-1)``, endpoints included, finite differences only).
Grids and fields are immutable value objects; every operation in the
package returns fresh instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt

from .errors import ValidationError

PERIODIC = "periodic"
BOUNDED = "bounded"

_KINDS = (PERIODIC, BOUNDED)
_ROLES = ("time", "propagation", "transverse", "space")

MIN_POINTS = 8


@dataclass(frozen=True)
class AxisSpec:
    """One axis of a tensor-product grid."""

    label: str
    kind: str
    extent: float
    points: int
    role: str = "space"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValidationError(f"axis {self.label!r}: unknown kind {self.kind!r}")
        if self.role not in _ROLES:
            raise ValidationError(f"axis {self.label!r}: unknown role {self.role!r}")
        if not self.extent > 0.0:
            raise ValidationError(f"axis {self.label!r}: extent must be positive")
        if self.points < MIN_POINTS:
            raise ValidationError(
                f"axis {self.label!r}: needs at least {MIN_POINTS} points, got {self.points}"
            )

    @property
    def spacing(self) -> float:
        if self.kind == PERIODIC:
            return self.extent / self.points
        return self.extent / (self.points - 1)

    def coordinates(self) -> npt.NDArray[np.float64]:
        if self.kind == PERIODIC:
            return self.spacing * np.arange(self.points)
        return np.linspace(0.0, self.extent, self.points)

    def wavenumbers(self) -> npt.NDArray[np.float64]:
        """Wavenumbers 2*pi*m/extent in FFT order, m in the symmetric
        integer range (Nyquist counted positive for even point counts)."""
        if self.kind != PERIODIC:
            raise ValidationError(f"axis {self.label!r} is bounded, has no wavenumbers")
        m = np.fft.fftfreq(self.points, d=1.0 / self.points)
        if self.points % 2 == 0:
            m = m.copy()
            m[self.points // 2] = self.points // 2
        return 2.0 * np.pi * m / self.extent

    def quadrature_weights(self) -> npt.NDArray[np.float64]:
        """Uniform Riemann weights on periodic axes, trapezoid on bounded."""
        w = np.full(self.points, self.spacing)
        if self.kind == BOUNDED:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w


def periodic_axis(label: str, extent: float, points: int, role: str = "space") -> AxisSpec:
    return AxisSpec(label, PERIODIC, extent, points, role)


def bounded_axis(label: str, extent: float, points: int, role: str = "space") -> AxisSpec:
    return AxisSpec(label, BOUNDED, extent, points, role)


@dataclass(frozen=True)
class GridSpec:
    """Ordered collection of axes defining a tensor-product grid."""

    axes: tuple[AxisSpec, ...]

    def __post_init__(self) -> None:
        if not self.axes:
            raise ValidationError("grid needs at least one axis")
        labels = [a.label for a in self.axes]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate axis labels: {labels}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.points for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, int):
            if not -self.ndim <= axis < self.ndim:
                raise ValidationError(f"axis index {axis} out of range")
            return axis % self.ndim
        for i, a in enumerate(self.axes):
            if a.label == axis:
                return i
        raise ValidationError(f"no axis labelled {axis!r}")

    def axis(self, axis: int | str) -> AxisSpec:
        return self.axes[self.axis_index(axis)]


def make_grid(spec: GridSpec | tuple[AxisSpec, ...] | list[AxisSpec]) -> "Grid":
    """Build the coordinate arrays and cached spectral data for ``spec``."""
    if not isinstance(spec, GridSpec):
        spec = GridSpec(tuple(spec))
    return Grid(spec)


@dataclass(frozen=True)
class Grid:
    """A realized grid: coordinates, spacings, wavenumbers, quadrature."""

    spec: GridSpec

    @property
    def axes(self) -> tuple[AxisSpec, ...]:
        return self.spec.axes

    @property
    def ndim(self) -> int:
        return self.spec.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.shape

    def axis_index(self, axis: int | str) -> int:
        return self.spec.axis_index(axis)

    def axis(self, axis: int | str) -> AxisSpec:
        return self.spec.axis(axis)

    @cached_property
    def coordinates(self) -> tuple[npt.NDArray[np.float64], ...]:
        coords = tuple(a.coordinates() for a in self.axes)
        for c in coords:
            c.setflags(write=False)
        return coords

    def coordinate(self, axis: int | str) -> npt.NDArray[np.float64]:
        return self.coordinates[self.axis_index(axis)]

    def meshes(self) -> tuple[npt.NDArray[np.float64], ...]:
        """Full ndim coordinate meshes (ij indexing)."""
        return tuple(np.meshgrid(*self.coordinates, indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> dict[int, npt.NDArray[np.float64]]:
        out = {}
        for i, a in enumerate(self.axes):
            if a.kind == PERIODIC:
                k = a.wavenumbers()
                k.setflags(write=False)
                out[i] = k
        return out

    def wavenumbers(self, axis: int | str) -> npt.NDArray[np.float64]:
        i = self.axis_index(axis)
        if i not in self._wavenumbers:
            raise ValidationError(f"axis {self.axes[i].label!r} is bounded, has no wavenumbers")
        return self._wavenumbers[i]

    def spacing(self, axis: int | str) -> float:
        return self.axis(axis).spacing

    @cached_property
    def quadrature_weight(self) -> npt.NDArray[np.float64]:
        """Outer-product quadrature weight over the whole grid."""
        w = np.ones(self.shape)
        for i, a in enumerate(self.axes):
            shape = [1] * self.ndim
            shape[i] = a.points
            w = w * a.quadrature_weights().reshape(shape)
        w.setflags(write=False)
        return w

    def periodic_axes(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.axes) if a.kind == PERIODIC)

    def is_fully_periodic(self) -> bool:
        return all(a.kind == PERIODIC for a in self.axes)

    def axes_by_role(self, role: str) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.axes) if a.role == role)


@dataclass(frozen=True)
class Field:
    """Real samples on a grid, row-major over the grid axes."""

    grid: Grid
    values: npt.NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValidationError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("field contains non-finite samples")
        v = v.copy() if not v.flags.owndata or v.flags.writeable else v
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values: npt.NDArray[np.float64]) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + _vals(other))

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - _vals(other))

    def __mul__(self, other: "Field | float") -> "Field":
        return Field(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _vals(x):
    return x.values if isinstance(x, Field) else x


def field_from_function(grid: Grid, fn) -> Field:
    """Sample ``fn(*coordinate_meshes)`` on the grid."""
    return Field(grid, np.asarray(fn(*grid.meshes()), dtype=np.float64))


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly stepped sequence of fields along a march/time variable.

    The march variable is not a grid axis; each frame lives on the same
    spatial (or mapped) grid.  ``values`` is stacked with the march axis
    first: shape ``(frames,) + grid.shape``.
    """

    grid: Grid
    step: float
    values: npt.NDArray[np.float64] = field(repr=False)
    march_label: str = "t"
    start: float = 0.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != self.grid.ndim + 1 or v.shape[1:] != self.grid.shape:
            raise ValidationError(
                f"trajectory values shape {v.shape} does not match grid {self.grid.shape}"
            )
        if v.shape[0] < 1:
            raise ValidationError("trajectory needs at least one frame")
        if not self.step > 0.0:
            raise ValidationError("trajectory step must be positive")
        if not np.all(np.isfinite(v)):
            raise ValidationError("trajectory contains non-finite samples")
        v = v.copy() if not v.flags.owndata or v.flags.writeable else v
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def frame(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def frames(self):
        return (self.frame(i) for i in range(self.n_frames))

    def times(self) -> npt.NDArray[np.float64]:
        return self.start + self.step * np.arange(self.n_frames)

    def with_values(self, values: npt.NDArray[np.float64]) -> "Trajectory":
        return Trajectory(self.grid, self.step, values, self.march_label, self.start)


def trajectory_from_fields(
    fields, step: float, march_label: str = "t", start: float = 0.0
) -> Trajectory:
    fields = list(fields)
    if not fields:
        raise ValidationError("trajectory needs at least one frame")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid.spec != grid.spec:
            raise ValidationError("all trajectory frames must share one grid")
    stacked = np.stack([f.values for f in fields])
    return Trajectory(grid, step, stacked, march_label, start)


def check_support_compact(f: Field, axis: int | str, rel_tol: float = 1e-8) -> bool:
    """True if the boundary-trace magnitude is below ``rel_tol * max|f|``.

    Truncated unbounded directions must carry numerically compact data;
    builders warn through this predicate when truncation bites.
    """
    i = f.grid.axis_index(axis)
    vmax = f.max_abs()
    if vmax == 0.0:
        return True
    first = np.take(f.values, 0, axis=i)
    last = np.take(f.values, -1, axis=i)
    edge = max(np.max(np.abs(first)), np.max(np.abs(last)))
    return bool(edge <= rel_tol * vmax)
