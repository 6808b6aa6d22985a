"""Reference trajectories: the sinusoidal test orbit and period-1 orbits taken from free runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, UPONotFound

TWO_PI = 2.0 * math.pi

# close-return tolerance on the stroboscopic section (rad, rad/s)
DEFAULT_TOL = (0.3, 1.5)


class ReferencePoint(NamedTuple):
    phi_d: float
    phi_d_dot: float
    phi_d_ddot: float


@dataclass(frozen=True)
class GenericOrbit:
    """phi_d = amplitude * sin(frequency * t)."""

    amplitude: float = 2.3
    frequency: float = TWO_PI

    def __call__(self, t: float) -> ReferencePoint:
        a, w = self.amplitude, self.frequency
        sw, cw = math.sin(w * t), math.cos(w * t)
        return ReferencePoint(a * sw, a * w * cw, -a * w * w * sw)

    def sample(self, t):
        t = np.asarray(t, dtype=float)
        a, w = self.amplitude, self.frequency
        sw, cw = np.sin(w * t), np.cos(w * t)
        return a * sw, a * w * cw, -a * w * w * sw


def generic_orbit(t: float) -> ReferencePoint:
    """The default test orbit: phi_d = 2.3 sin(2 pi t), phi_d_dot = 4.6 pi cos(2 pi t)."""
    return GenericOrbit()(t)


@dataclass(frozen=True, eq=False)
class SampledOrbit:
    """One period of a recorded orbit.

    ``t`` runs from 0 to below ``period``. ``t_offset`` is the drive time (mod
    period) at which the first sample was taken, so the orbit stays in phase
    with the excitation. ``end_state`` is the recorded state one period after
    the first sample.

    Angles are compared without wrapping: the string-spring torque grows with
    phi itself, so states 2 pi apart are different states of this plant.
    """

    period: float
    t: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    t_offset: float = 0.0
    end_state: Optional[tuple[float, float]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        dphi = np.asarray(self.phi_dot, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_dot", dphi)
        if not (math.isfinite(self.period) and self.period > 0):
            raise ConfigError("orbit period must be > 0")
        if t.ndim != 1 or len(t) < 4 or phi.shape != t.shape or dphi.shape != t.shape:
            raise ConfigError("orbit needs at least 4 samples of (t, phi, phi_dot)")
        if t[0] != 0.0 or not np.all(np.diff(t) > 0) or t[-1] >= self.period:
            raise ConfigError("orbit sample times must start at 0, increase strictly and stay below the period")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(dphi))):
            raise ConfigError("orbit samples must be finite")
        knots = np.append(t, self.period)
        object.__setattr__(self, "_phi_spline", CubicSpline(knots, np.append(phi, phi[0]), bc_type="periodic"))
        vel_spline = CubicSpline(knots, np.append(dphi, dphi[0]), bc_type="periodic")
        object.__setattr__(self, "_vel_spline", vel_spline)
        object.__setattr__(self, "_acc_spline", vel_spline.derivative())

    def closure_error(self) -> tuple[float, float]:
        """(|dphi|, |dphi_dot|) between the recorded end state and the start."""
        if self.end_state is None:
            return 0.0, 0.0
        return (
            float(abs(self.end_state[0] - self.phi[0])),
            float(abs(self.end_state[1] - self.phi_dot[0])),
        )

    def check_closure(self, tol_close: tuple[float, float]) -> bool:
        dphi, ddot = self.closure_error()
        return dphi <= tol_close[0] and ddot <= tol_close[1]

    def evaluate(self, t):
        """Vectorised (phi_d, phi_d_dot, phi_d_ddot) at orbit-local times."""
        tau = np.mod(np.asarray(t, dtype=float), self.period)
        return self._phi_spline(tau), self._vel_spline(tau), self._acc_spline(tau)


def interpolate(orbit: SampledOrbit, t: float) -> ReferencePoint:
    """Periodic cubic interpolation of the orbit at orbit-local time ``t``."""
    phi, dphi, ddphi = orbit.evaluate(t)
    return ReferencePoint(float(phi), float(dphi), float(ddphi))


@dataclass(frozen=True, eq=False)
class OrbitReference:
    """Reference provider following a sampled orbit in phase with the drive."""

    orbit: SampledOrbit

    def __call__(self, t: float) -> ReferencePoint:
        return interpolate(self.orbit, t - self.orbit.t_offset)

    def sample(self, t):
        return self.orbit.evaluate(np.asarray(t, dtype=float) - self.orbit.t_offset)


def find_period1_upo(
    free_run,
    drive_period: float,
    tol: tuple[float, float] = DEFAULT_TOL,
    discard_periods: int = 0,
    all_phases: bool = True,
    min_periods: int = 200,
    close_seam: bool = True,
) -> SampledOrbit:
    """Close-returns search for a period-1 orbit in an uncontrolled run.

    Every stored step is a candidate section phase; for each phase the
    stroboscopic points one drive period apart are compared and the closest
    consecutive pair (max of the per-component distances scaled by ``tol``)
    is kept. With ``all_phases=False`` only the section at the record's
    initial phase is used. With ``close_seam`` a smooth cubic correction
    is subtracted from the segment so that it closes exactly in position and
    velocity; ``end_state`` keeps the recorded end point either way. Raises :class:`UPONotFound` when no pair is below
    ``tol``.
    """
    t = np.asarray(free_run.t, dtype=float)
    phi = np.asarray(free_run.phi, dtype=float)
    dphi = np.asarray(free_run.phi_dot, dtype=float)
    if len(t) < 2:
        raise ConfigError("free run is too short")
    dt = float(t[1] - t[0])
    n_per = int(round(drive_period / dt))
    if n_per < 4 or abs(n_per * dt - drive_period) > 1e-6 * drive_period:
        raise ConfigError(f"record step {dt:g} s does not divide the drive period {drive_period:g} s")
    start = discard_periods * n_per
    n_periods = (len(t) - 1 - start) // n_per
    if n_periods < min_periods:
        raise ConfigError(f"free run covers {n_periods} drive periods after discard; need >= {min_periods}")
    tol_phi, tol_dot = tol
    if not (tol_phi > 0 and tol_dot > 0):
        raise ConfigError("close-return tolerances must be > 0")

    idx = np.arange(start, len(t) - n_per)
    if not all_phases:
        idx = idx[::n_per]
    d_phi = np.abs(phi[idx + n_per] - phi[idx])
    d_dot = np.abs(dphi[idx + n_per] - dphi[idx])
    scaled = np.maximum(d_phi / tol_phi, d_dot / tol_dot)
    best = int(np.argmin(scaled))
    if not scaled[best] < 1.0:
        raise UPONotFound(float(scaled[best]), (float(d_phi[best]), float(d_dot[best])), tuple(tol))

    j = int(idx[best])
    seg = slice(j, j + n_per)
    seg_phi = phi[seg].copy()
    seg_dot = dphi[seg].copy()
    if close_seam:
        c, c_dot = _seam_correction(
            np.arange(n_per) / n_per, n_per * dt, phi[j + n_per] - phi[j], dphi[j + n_per] - dphi[j]
        )
        seg_phi -= c
        seg_dot -= c_dot
    return SampledOrbit(
        period=n_per * dt,
        t=dt * np.arange(n_per),
        phi=seg_phi,
        phi_dot=seg_dot,
        t_offset=float(t[j] % drive_period),
        end_state=(float(phi[j + n_per]), float(dphi[j + n_per])),
        meta={
            "source_time": float(t[j]),
            "scaled_distance": float(scaled[best]),
            "tol_phi": tol_phi,
            "tol_phi_dot": tol_dot,
        },
    )


def _seam_correction(tau: np.ndarray, period: float, d_phi: float, d_dot: float):
    """Cubic c(t) with c(0) = c'(0) = 0, c(T) = d_phi, c'(T) = d_dot, and its derivative.

    Subtracting (c, c') from (phi, phi_dot) closes the segment while keeping
    phi_dot the time derivative of phi.
    """
    h01 = 3 * tau**2 - 2 * tau**3
    h11 = tau**3 - tau**2
    c = d_phi * h01 + period * d_dot * h11
    c_dot = d_phi * (6 * tau - 6 * tau**2) / period + d_dot * (3 * tau**2 - 2 * tau)
    return c, c_dot


def dynamical_closure(orbit: SampledOrbit, params, steps_per_period: Optional[int] = None) -> tuple[float, float]:
    """Integrate the uncontrolled plant for one period from the orbit's first sample.

    Returns (|dphi|, |dphi_dot|) between the end state and the start.
    """
    from .integrator import AugmentedState, StepConfig, simulate
    from .dynamics import PlantState

    n = steps_per_period or len(orbit.t)
    step = StepConfig(dt=orbit.period / n, t_end=orbit.period)
    start = AugmentedState(PlantState(float(orbit.phi[0]), float(orbit.phi_dot[0]), orbit.t_offset))
    rec = simulate(params, None, step=step, initial=start)
    return (
        float(abs(rec.phi[-1] - orbit.phi[0])),
        float(abs(rec.phi_dot[-1] - orbit.phi_dot[0])),
    )


def write_orbit(orbit: SampledOrbit, path: str | Path) -> None:
    lines = [f"# period = {orbit.period!r}", f"# t_offset = {orbit.t_offset!r}"]
    if orbit.end_state is not None:
        lines.append(f"# end_state = {orbit.end_state[0]!r}, {orbit.end_state[1]!r}")
    for key, value in orbit.meta.items():
        lines.append(f"# {key} = {value!r}")
    lines.append("t,phi,phi_dot")
    lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(orbit.t.tolist(), orbit.phi.tolist(), orbit.phi_dot.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_orbit(path: str | Path) -> SampledOrbit:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read orbit file {path}: {exc.strerror or exc}") from None
    header: dict[str, str] = {}
    rows = []
    seen_columns = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                header[key.strip()] = value.strip()
            continue
        if not seen_columns:
            if [c.strip() for c in line.split(",")] != ["t", "phi", "phi_dot"]:
                raise ConfigError(f"{path}:{lineno}: expected header 't,phi,phi_dot'")
            seen_columns = True
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: malformed row {line!r}") from None
    if "period" not in header:
        raise ConfigError(f"{path}: missing '# period = <value>' line")
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError(f"{path}: rows must have three columns")
    end_state = None
    if "end_state" in header:
        a, b = (float(v) for v in header["end_state"].split(","))
        end_state = (a, b)
    try:
        return SampledOrbit(
            period=float(header["period"]),
            t=data[:, 0],
            phi=data[:, 1],
            phi_dot=data[:, 2],
            t_offset=float(header.get("t_offset", 0.0)),
            end_state=end_state,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
