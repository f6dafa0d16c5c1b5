"""Physical constants and the perturbation parameter for all model runs."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class ModelParams:
    """Medium constants plus the Mach-number-like small parameter.

    The quasilinear coefficient ``alpha`` multiplying u_t * u_tt, the
    gradient coefficient ``beta``, and the kinematic viscosity
    ``delta_visc`` are derived; the viscous term is carried as
    eps * delta_visc * Lap(u_t) uniformly across every model.

    ``eps`` may be zero: the linear-wave limit is used heavily for
    solver verification and model-coincidence checks.
    """

    c: float = 1.0
    rho0: float = 1.0
    nu: float = 0.0
    gamma: float = 1.4
    eps: float = 0.01

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise ValidationError("sound speed c must be positive")
        if not self.rho0 > 0.0:
            raise ValidationError("density rho0 must be positive")
        if self.nu < 0.0:
            raise ValidationError("viscosity nu must be nonnegative")
        if not self.gamma > 1.0:
            raise ValidationError("heat-capacity ratio gamma must exceed 1")
        if not 0.0 <= self.eps < 0.5:
            raise ValidationError("eps must lie in [0, 0.5)")

    @property
    def alpha(self) -> float:
        return (self.gamma - 1.0) / self.c**2

    @property
    def beta(self) -> float:
        return 2.0

    @property
    def delta_visc(self) -> float:
        return self.nu / self.rho0

    def replace(self, **kw) -> "ModelParams":
        data = {
            "c": self.c,
            "rho0": self.rho0,
            "nu": self.nu,
            "gamma": self.gamma,
            "eps": self.eps,
        }
        data.update(kw)
        return ModelParams(**data)
