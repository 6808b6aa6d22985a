"""Sliding-mode tracking law with fuzzy disturbance compensation.

    s = e_dot + lambda e,                         e = phi - phi_d
    u_hat = h_hat^-1 (-f_hat - p_hat + phi_d'' - lambda e_dot)
    K = H h_hat^-1 (eta + |p_hat| + P + F) + (H - 1) |u_hat|
    u = u_hat - K sat(s / phi_bl)

with h_hat = sqrt(h_max h_min) and H = sqrt(h_max / h_min).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

from . import fuzzy
from .dynamics import PendulumParams, PlantState, drift
from .errors import ConfigError

F_HAT_MODES = ("exact", "frictionless", "custom")


@dataclass(frozen=True)
class ControllerConfig:
    lambda_: float = 10.0
    eta: float = 0.5
    F: float = 0.0
    P_bound: float = 0.0
    h_min: float = 1.0
    h_max: float = 1.0
    phi_bl: float = 0.1
    f_hat_mode: str = "frictionless"

    h_hat: float = field(init=False, repr=False, compare=False)
    H: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = (self.lambda_, self.eta, self.F, self.P_bound, self.h_min, self.h_max, self.phi_bl)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("controller parameters must be finite")
        if not self.lambda_ > 0:
            raise ConfigError("lambda must be > 0")
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if not 0 < self.h_min <= self.h_max:
            raise ConfigError(f"need 0 < h_min <= h_max (got {self.h_min}, {self.h_max})")
        if self.F < 0 or self.P_bound < 0:
            raise ConfigError("F and P_bound must be >= 0")
        if not self.phi_bl > 0:
            raise ConfigError("phi_bl must be > 0")
        if self.f_hat_mode not in F_HAT_MODES:
            raise ConfigError(f"f_hat_mode must be one of {F_HAT_MODES}, got {self.f_hat_mode!r}")
        h_hat, H = input_gain_estimate(self.h_min, self.h_max)
        object.__setattr__(self, "h_hat", h_hat)
        object.__setattr__(self, "H", H)

    @classmethod
    def for_plant(cls, params: PendulumParams, **overrides) -> "ControllerConfig":
        """Defaults with h known exactly (H = 1) and F covering the dropped dry friction."""
        kw = dict(h_min=params.h, h_max=params.h, F=params.c_dry)
        kw.update(overrides)
        return cls(**kw)

    def to_mapping(self) -> dict[str, object]:
        return {
            "lambda": self.lambda_,
            "eta": self.eta,
            "F": self.F,
            "P_bound": self.P_bound,
            "h_min": self.h_min,
            "h_max": self.h_max,
            "phi_bl": self.phi_bl,
            "f_hat_mode": self.f_hat_mode,
        }


class ErrorState(NamedTuple):
    e: float
    e_dot: float
    s: float


def input_gain_estimate(h_min: float | ControllerConfig, h_max: float | None = None) -> tuple[float, float]:
    """Geometric-mean estimate ``(h_hat, H)`` of an input gain known to lie in [h_min, h_max]."""
    if isinstance(h_min, ControllerConfig):
        return h_min.h_hat, h_min.H
    if h_max is None or not 0 < h_min <= h_max:
        raise ConfigError("need 0 < h_min <= h_max")
    return math.sqrt(h_max * h_min), math.sqrt(h_max / h_min)


def sliding_variable(e: float, e_dot: float, lambda_: float) -> float:
    return e_dot + lambda_ * e


def error_state(phi: float, phi_dot: float, phi_d: float, phi_d_dot: float, lambda_: float) -> ErrorState:
    e = phi - phi_d
    e_dot = phi_dot - phi_d_dot
    return ErrorState(e, e_dot, sliding_variable(e, e_dot, lambda_))


def equivalent_control(
    f_hat: float, p_hat: float, phi_dd_desired: float, e_dot: float, config: ControllerConfig
) -> float:
    return (-f_hat - p_hat + phi_dd_desired - config.lambda_ * e_dot) / config.h_hat


def gain_K(u_hat: float, p_hat: float, config: ControllerConfig) -> float:
    """Smallest gain satisfying the reaching bound (equality)."""
    H = config.H
    return H * (config.eta + abs(p_hat) + config.P_bound + config.F) / config.h_hat + (H - 1.0) * abs(u_hat)


def sat(x: float) -> float:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


def control_output(u_hat: float, K: float, s: float, phi_bl: float) -> float:
    return u_hat - K * sat(s / phi_bl)


def f_hat(
    state: PlantState,
    params: PendulumParams,
    mode: str = "frictionless",
    custom: Optional[Callable[[PlantState], float]] = None,
) -> float:
    """Nominal drift model used by the equivalent control."""
    if mode == "exact":
        return drift(state.phi, state.phi_dot, state.t, params)
    if mode == "frictionless":
        return drift(state.phi, state.phi_dot, state.t, params, dry_friction=False)
    if mode == "custom":
        if custom is None:
            raise ConfigError("f_hat_mode 'custom' needs a nominal model callable")
        return custom(state)
    raise ConfigError(f"unknown f_hat mode {mode!r}")


def model_defect_bound(mode: str, params: PendulumParams) -> Optional[float]:
    """Guaranteed sup |f_hat - f| for the built-in modes; None when not checkable."""
    if mode == "exact":
        return 0.0
    if mode == "frictionless":
        return params.c_dry
    return None


def check_against_plant(config: ControllerConfig, params: PendulumParams) -> None:
    """Reject configurations whose declared bounds are contradicted by the known plant."""
    defect = model_defect_bound(config.f_hat_mode, params)
    if defect is not None and config.F < defect * (1 - 1e-12):
        raise ConfigError(
            f"F = {config.F:g} is below the {config.f_hat_mode} model defect bound {defect:g} (mu/I)"
        )
    h = params.h
    if not config.h_min * (1 - 1e-12) <= h <= config.h_max * (1 + 1e-12):
        raise ConfigError(f"plant input gain h = {h:g} outside [h_min, h_max] = [{config.h_min:g}, {config.h_max:g}]")


class ControlSample(NamedTuple):
    u: float
    p_hat: float
    K: float
    e: float
    e_dot: float
    s: float
    dp_hat: list


class SlidingModeController:
    """Closed-loop law: maps (t, plant state, consequents, reference) to control and adaptation rate.

    ``nominal`` is the parameter set the model-based terms are built from; it
    defaults to the plant parameters passed to the simulation.
    """

    def __init__(
        self,
        config: ControllerConfig,
        compensator: fuzzy.FuzzyCompensator,
        nominal: PendulumParams,
        custom_f_hat: Optional[Callable[[PlantState], float]] = None,
    ):
        if config.f_hat_mode == "custom" and custom_f_hat is None:
            raise ConfigError("f_hat_mode 'custom' needs a nominal model callable")
        self.config = config
        self.compensator = compensator
        self.nominal = nominal
        self.custom_f_hat = custom_f_hat
        self._dry = config.f_hat_mode == "exact"

    @property
    def n_rules(self) -> int:
        return self.compensator.n_rules

    def nominal_drift(self, t: float, phi: float, phi_dot: float) -> float:
        if self.custom_f_hat is not None and self.config.f_hat_mode == "custom":
            return self.custom_f_hat(PlantState(phi, phi_dot, t))
        return drift(phi, phi_dot, t, self.nominal, dry_friction=self._dry)

    def evaluate(
        self,
        t: float,
        phi: float,
        phi_dot: float,
        p_hat_vec: Sequence[float],
        phi_d: float,
        phi_d_dot: float,
        phi_d_ddot: float,
    ) -> ControlSample:
        cfg = self.config
        comp = self.compensator
        e = phi - phi_d
        e_dot = phi_dot - phi_d_dot
        s = sliding_variable(e, e_dot, cfg.lambda_)
        psi = fuzzy.normalized_basis(s, comp)
        p_hat = sum(p * w for p, w in zip(p_hat_vec, psi))
        u_hat = equivalent_control(self.nominal_drift(t, phi, phi_dot), p_hat, phi_d_ddot, e_dot, cfg)
        K = gain_K(u_hat, p_hat, cfg)
        u = control_output(u_hat, K, s, cfg.phi_bl)
        dp = fuzzy.adaptation_from_basis(s, psi, comp, p_hat_vec)
        return ControlSample(u, p_hat, K, e, e_dot, s, dp)
