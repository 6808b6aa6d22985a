"""Fixed-step RK4 integration of the closed loop.

The augmented state is the flat vector ``[phi, phi_dot, P_hat_1 .. P_hat_N]``.
The control law and the adaptation rate are re-evaluated at every RK stage,
so the controller acts in continuous time rather than sample-and-hold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .controller import SlidingModeController
from .dynamics import NO_DISTURBANCE, Disturbance, PendulumParams, PlantState, drift
from .errors import ConfigError, SimulationBlowUp

CSV_COLUMNS = ("t", "phi", "phi_d", "phi_dot", "phi_d_dot", "e", "e_dot", "s", "u", "p_hat", "K")

Rhs = Callable[[Sequence[float], float], Sequence[float]]


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-4
    t_end: float = 10.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be > 0")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError("t_end must be > 0")
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ConfigError(f"t_end / dt = {self.t_end / self.dt!r} is not a positive integer")
        if n > 10**9:
            raise ConfigError("t_end / dt exceeds 1e9 steps")

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)


@dataclass(frozen=True)
class AugmentedState:
    plant: PlantState
    p_hat_vec: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p_hat_vec", tuple(float(p) for p in self.p_hat_vec))
        if not all(math.isfinite(p) for p in self.p_hat_vec):
            raise ValueError("non-finite consequent in augmented state")

    def as_vector(self) -> list[float]:
        return [self.plant.phi, self.plant.phi_dot, *self.p_hat_vec]

    @classmethod
    def from_vector(cls, x: Sequence[float], t: float) -> "AugmentedState":
        return cls(PlantState(float(x[0]), float(x[1]), t), tuple(x[2:]))


class ReferenceProvider(Protocol):
    def sample(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Desired position, velocity and acceleration at the given times."""


def _check_finite(vec: Sequence[float], t: float) -> None:
    # one isfinite on the sum; inf - inf is nan, so this catches every non-finite entry
    if not math.isfinite(sum(vec)):
        for i, v in enumerate(vec):
            if not math.isfinite(v):
                raise SimulationBlowUp(t, i, v)
        raise SimulationBlowUp(t, "sum", sum(vec))


def rk4_step(
    rhs: Rhs, x: Sequence[float], t: float, dt: float, k1: Optional[Sequence[float]] = None
) -> list[float]:
    """One classical RK4 step; ``k1`` may be passed when rhs(x, t) is already known."""
    if k1 is None:
        k1 = rhs(x, t)
    _check_finite(k1, t)
    h2 = 0.5 * dt
    th = t + h2
    x2 = [xi + h2 * ki for xi, ki in zip(x, k1)]
    _check_finite(x2, th)
    k2 = rhs(x2, th)
    _check_finite(k2, th)
    x3 = [xi + h2 * ki for xi, ki in zip(x, k2)]
    _check_finite(x3, th)
    k3 = rhs(x3, th)
    _check_finite(k3, th)
    x4 = [xi + dt * ki for xi, ki in zip(x, k3)]
    _check_finite(x4, t + dt)
    k4 = rhs(x4, t + dt)
    _check_finite(k4, t + dt)
    h6 = dt / 6.0
    out = [xi + h6 * (a + 2.0 * b + 2.0 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]
    _check_finite(out, t + dt)
    return out


@dataclass
class TrajectoryRecord:
    """Time-indexed closed-loop record.

    ``data`` holds the CSV columns in order; ``p_hat_vec`` holds the
    consequent vector at each row.
    """

    data: np.ndarray
    p_hat_vec: np.ndarray
    meta: dict = field(default_factory=dict)

    def __getattr__(self, name: str) -> np.ndarray:
        try:
            idx = CSV_COLUMNS.index(name)
        except ValueError:
            raise AttributeError(name) from None
        return self.data[:, idx]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def dt(self) -> float:
        return float(self.meta["dt"])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in self.data:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, **meta) -> "TrajectoryRecord":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_COLUMNS:
                raise ConfigError(f"{path}: unexpected trajectory header {header}")
            data = np.array([[float(v) for v in row] for row in reader])
        meta.setdefault("dt", float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.0)
        return cls(data, np.zeros((len(data), 0)), meta)


def simulate(
    plant: PendulumParams,
    controller: Optional[SlidingModeController],
    disturbance: Disturbance = NO_DISTURBANCE,
    reference: Optional[ReferenceProvider] = None,
    step: StepConfig = StepConfig(),
    initial: Optional[AugmentedState] = None,
) -> TrajectoryRecord:
    """Integrate the closed loop; ``controller=None`` runs the unforced plant (u = 0)."""
    n_rules = controller.n_rules if controller is not None else 0
    if initial is None:
        initial = AugmentedState(PlantState(0.0, 0.0, 0.0), (0.0,) * n_rules)
    if controller is not None and len(initial.p_hat_vec) != n_rules:
        raise ConfigError(
            f"initial consequent vector has {len(initial.p_hat_vec)} entries, controller has {n_rules} rules"
        )
    n = step.n_steps
    dt = step.dt
    t0 = initial.plant.t
    half = 0.5 * dt

    if reference is not None:
        times = t0 + half * np.arange(2 * n + 1)
        r_phi, r_dphi, r_ddphi = (np.asarray(a, dtype=float).tolist() for a in reference.sample(times))
    else:
        r_phi = r_dphi = r_ddphi = None

    p_fn = None if disturbance.is_zero else disturbance
    h = plant.h
    n_p = len(initial.p_hat_vec)
    zeros_p = [0.0] * n_p
    clamp_lim = controller.compensator.p_clamp if controller is not None else None

    def law(x: Sequence[float], t: float):
        j = round((t - t0) / half)
        if r_phi is not None:
            ref = (r_phi[j], r_dphi[j], r_ddphi[j])
        else:
            ref = (0.0, 0.0, 0.0)
        if controller is None:
            return None, ref
        return controller.evaluate(t, x[0], x[1], x[2:], *ref), ref

    def rhs(x: Sequence[float], t: float) -> list[float]:
        phi, dphi = x[0], x[1]
        p = p_fn(t) if p_fn is not None else 0.0
        if controller is None:
            return [dphi, drift(phi, dphi, t, plant) + p, *zeros_p]
        out, _ = law(x, t)
        return [dphi, drift(phi, dphi, t, plant) + h * out.u + p, *out.dp_hat]

    width = len(CSV_COLUMNS)
    data = np.empty((n + 1, width))
    p_hist = np.empty((n + 1, n_p))
    x = initial.as_vector()

    def record_row(i: int, t: float, x: Sequence[float]) -> list[float]:
        out, ref = law(x, t)
        phi, dphi = x[0], x[1]
        if out is None:
            e, e_dot = phi - ref[0], dphi - ref[1]
            row = (t, phi, ref[0], dphi, ref[1], e, e_dot, 0.0, 0.0, 0.0, 0.0)
            k1 = None
        else:
            row = (t, phi, ref[0], dphi, ref[1], out.e, out.e_dot, out.s, out.u, out.p_hat, out.K)
            p = p_fn(t) if p_fn is not None else 0.0
            k1 = [dphi, drift(phi, dphi, t, plant) + h * out.u + p, *out.dp_hat]
        data[i] = row
        p_hist[i] = x[2:]
        return k1

    for i in range(n):
        t = t0 + i * dt
        k1 = record_row(i, t, x)
        x = rk4_step(rhs, x, t, dt, k1=k1)
        if clamp_lim is not None:
            x[2:] = [min(clamp_lim, max(-clamp_lim, p)) for p in x[2:]]
    record_row(n, t0 + n * dt, x)

    meta = {"dt": dt, "t_end": step.t_end, "n_rules": n_p, "controlled": controller is not None}
    if controller is not None:
        cfg = controller.config
        meta.update(eta=cfg.eta, phi_bl=cfg.phi_bl, lambda_=cfg.lambda_, varphi=controller.compensator.varphi)
    return TrajectoryRecord(data, p_hist, meta)
