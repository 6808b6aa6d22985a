"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid parameter set, controller configuration or scenario file."""


class AssumptionViolation(ValueError):
    """A runtime quantity left the bound declared for it in the configuration."""


class SimulationBlowUp(RuntimeError):
    """Non-finite value produced during integration."""

    def __init__(self, t: float, component: int | str, value: float):
        self.t = t
        self.component = component
        self.value = value
        super().__init__(
            f"non-finite value at t={t:.6g} s in component {component} ({value!r})"
        )


class UPONotFound(RuntimeError):
    """No period-1 close return below tolerance in a free run."""

    def __init__(self, best_distance: float, best_delta: tuple[float, float], tol: tuple[float, float]):
        self.best_distance = best_distance
        self.best_delta = best_delta
        self.tol = tol
        super().__init__(
            "no period-1 close return below tolerance "
            f"(tol_phi={tol[0]:g} rad, tol_phi_dot={tol[1]:g} rad/s); best candidate "
            f"|dphi|={best_delta[0]:.4g} rad, |dphi_dot|={best_delta[1]:.4g} rad/s "
            f"(scaled distance {best_distance:.3g})"
        )
