"""Driven pendulum with viscous and dry friction, string-spring excitation.

Equation of motion (angles in rad, SI units)::

    phi'' + (zeta/I) phi' + (k d^2 / 2I) phi + (mu/I) sgn(phi') + (m g D / 2I) sin(phi)
        = (k d / 2I) * (sqrt(a^2 + b^2 - 2ab cos(omega t)) - (a - b) - dl)

and its control-affine form ``phi'' = f(phi, phi', t) + h u + p`` with ``u = -dl``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping, Optional

from .errors import AssumptionViolation, ConfigError, SimulationBlowUp

PARAM_KEYS = ("a", "b", "d", "D", "m", "I", "k", "zeta", "mu", "omega", "g")


def sgn(x: float) -> float:
    """Sign with sgn(0) = 0."""
    return float((x > 0) - (x < 0))


@dataclass(frozen=True)
class PendulumParams:
    a: float
    b: float
    d: float
    D: float
    m: float
    I: float
    k: float
    zeta: float
    mu: float
    omega: float
    g: float = 9.81
    # tanh(phi_dot / friction_eps) replaces sgn(phi_dot) when > 0
    friction_eps: float = 0.0

    # derived coefficients, filled in __post_init__
    c_visc: float = field(init=False, repr=False, compare=False)
    c_spring: float = field(init=False, repr=False, compare=False)
    c_dry: float = field(init=False, repr=False, compare=False)
    c_grav: float = field(init=False, repr=False, compare=False)
    h: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for f in fields(self):
            if f.init and not math.isfinite(getattr(self, f.name)):
                raise ConfigError(f"plant parameter {f.name} must be finite")
        if self.I <= 0 or self.d <= 0 or self.omega <= 0 or self.g <= 0:
            raise ConfigError("plant parameters I, d, omega, g must be > 0")
        if self.k < 0:
            raise ConfigError("plant stiffness k must be >= 0")
        if not self.a > self.b > 0:
            raise ConfigError(f"string-spring geometry requires a > b > 0 (a={self.a}, b={self.b})")
        if self.zeta < 0 or self.mu < 0 or self.friction_eps < 0:
            raise ConfigError("zeta, mu and friction_eps must be >= 0")
        two_i = 2.0 * self.I
        object.__setattr__(self, "c_visc", self.zeta / self.I)
        object.__setattr__(self, "c_spring", self.k * self.d**2 / two_i)
        object.__setattr__(self, "c_dry", self.mu / self.I)
        object.__setattr__(self, "c_grav", self.m * self.g * self.D / two_i)
        object.__setattr__(self, "h", self.k * self.d / two_i)

    @property
    def drive_period(self) -> float:
        return 2.0 * math.pi / self.omega

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "PendulumParams":
        missing = [key for key in PARAM_KEYS if key not in values]
        if missing:
            raise ConfigError(f"missing plant parameter(s): {', '.join(missing)}")
        kwargs = {}
        for key in PARAM_KEYS + ("friction_eps",):
            if key in values:
                try:
                    kwargs[key] = float(values[key])
                except (TypeError, ValueError):
                    raise ConfigError(f"plant parameter {key} is not a number: {values[key]!r}") from None
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, float]:
        out = {key: getattr(self, key) for key in PARAM_KEYS}
        if self.friction_eps > 0:
            out["friction_eps"] = self.friction_eps
        return out


def load_params(path: str | Path) -> PendulumParams:
    """Read a flat ``key = value`` parameter file."""
    from .config import read_flat_file

    return PendulumParams.from_mapping(read_flat_file(path))


def default_params() -> PendulumParams:
    return load_params(Path(__file__).with_name("data") / "default_plant.txt")


@dataclass(frozen=True)
class PlantState:
    phi: float
    phi_dot: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("phi", "phi_dot", "t"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (math.isfinite(self.phi) and math.isfinite(self.phi_dot) and math.isfinite(self.t)):
            raise ValueError(f"non-finite plant state {self!r}")


@dataclass(frozen=True)
class Disturbance:
    """Additive acceleration disturbance p(t) with an optional declared bound.

    With ``enforce`` set, every evaluation exceeding ``bound`` raises
    :class:`AssumptionViolation`. Turn it off to inject deliberate violations.
    """

    p_fn: Optional[Callable[[float], float]] = None
    bound: Optional[float] = None
    enforce: bool = True
    label: str = "none"

    def __call__(self, t: float) -> float:
        if self.p_fn is None:
            return 0.0
        p = self.p_fn(t)
        if self.enforce and self.bound is not None and abs(p) > self.bound:
            raise AssumptionViolation(f"|p({t:.6g})| = {abs(p):.6g} exceeds declared bound {self.bound:g}")
        return p

    @property
    def is_zero(self) -> bool:
        return self.p_fn is None

    def with_bound(self, bound: float, enforce: bool | None = None) -> "Disturbance":
        return Disturbance(self.p_fn, bound, self.enforce if enforce is None else enforce, self.label)

    @classmethod
    def constant(cls, c: float, **kw) -> "Disturbance":
        c = float(c)
        return cls(lambda t: c, label=f"constant:{c!r}", **kw)

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float, **kw) -> "Disturbance":
        """``amplitude * sin(frequency * t)``, frequency in rad/s."""
        amplitude, frequency = float(amplitude), float(frequency)
        return cls(
            lambda t: amplitude * math.sin(frequency * t),
            label=f"sinusoid:{amplitude!r}:{frequency!r}",
            **kw,
        )

    @classmethod
    def parse(cls, text: str, **kw) -> "Disturbance":
        """Parse ``none``, ``constant:<c>`` or ``sinusoid:<amplitude>:<frequency>``."""
        parts = [p.strip() for p in text.strip().split(":")]
        try:
            if parts == ["none"] or parts == [""]:
                return cls(**kw)
            if parts[0] == "constant" and len(parts) == 2:
                return cls.constant(float(parts[1]), **kw)
            if parts[0] == "sinusoid" and len(parts) == 3:
                return cls.sinusoid(float(parts[1]), float(parts[2]), **kw)
        except ValueError:
            pass
        raise ConfigError(f"unrecognised disturbance spec {text!r}")


NO_DISTURBANCE = Disturbance()


def excitation_length(t: float, params: PendulumParams) -> float:
    """String-spring stretch sqrt(a^2 + b^2 - 2ab cos(wt)) - (a - b), always >= 0."""
    a, b = params.a, params.b
    r = math.sqrt(a * a + b * b - 2.0 * a * b * math.cos(params.omega * t)) - (a - b)
    # rounding can leave -1e-17 near wt = 0 mod 2pi
    return r if r > 0.0 else 0.0


def friction_sign(phi_dot: float, params: PendulumParams) -> float:
    if params.friction_eps > 0:
        return math.tanh(phi_dot / params.friction_eps)
    return float((phi_dot > 0) - (phi_dot < 0))


def drift(phi: float, phi_dot: float, t: float, params: PendulumParams, dry_friction: bool = True) -> float:
    """Drift term f of the control-affine form, from raw floats."""
    f = (
        -params.c_visc * phi_dot
        - params.c_spring * phi
        - params.c_grav * math.sin(phi)
        + params.h * excitation_length(t, params)
    )
    if dry_friction:
        f -= params.c_dry * friction_sign(phi_dot, params)
    return f


def decompose(state: PlantState, params: PendulumParams) -> tuple[float, float]:
    """Return ``(f, h)`` such that phi'' = f + h u + p."""
    return drift(state.phi, state.phi_dot, state.t, params), params.h


def acceleration(
    state: PlantState,
    u: float,
    disturbance: Disturbance = NO_DISTURBANCE,
    params: PendulumParams | None = None,
) -> float:
    if params is None:
        raise TypeError("acceleration() requires plant parameters")
    if not math.isfinite(u):
        raise SimulationBlowUp(state.t, "u", u)
    f, h = decompose(state, params)
    return f + h * u + disturbance(state.t)


def eq_of_motion_rhs(state: PlantState, delta_l: float, params: PendulumParams) -> float:
    """phi'' solved directly from the second-order equation, with string change ``delta_l``.

    Written independently of :func:`decompose` so the two can be checked against each other.
    """
    phi, dphi, t = state.phi, state.phi_dot, state.t
    p = params
    forcing = (p.k * p.d / (2 * p.I)) * (
        math.sqrt(p.a**2 + p.b**2 - 2 * p.a * p.b * math.cos(p.omega * t)) - (p.a - p.b) - delta_l
    )
    return (
        forcing
        - (p.zeta / p.I) * dphi
        - (p.k * p.d**2 / (2 * p.I)) * phi
        - p.mu * sgn(dphi) / p.I
        - p.m * p.g * p.D * math.sin(phi) / (2 * p.I)
    )


def mechanical_energy(phi: float, phi_dot: float, params: PendulumParams) -> float:
    """Kinetic + spring + gravity energy per unit inertia (rad^2/s^2), excitation excluded."""
    return 0.5 * phi_dot**2 + 0.5 * params.c_spring * phi**2 + params.c_grav * (1.0 - math.cos(phi))
