"""Scenario configuration and orchestration behind the command line.

A scenario file is flat ``key = value`` text; ``[scenario]``, ``[plant]``,
``[controller]`` and ``[fuzzy]`` headers are optional and only group keys.
Anything left out falls back to the bundled plant parameters and the
defaults below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import RunMetrics, effort_metrics, sliding_condition_report
from .config import format_flat, parse_sections, read_flat_file
from .controller import ControllerConfig, SlidingModeController, check_against_plant
from .dynamics import PARAM_KEYS, Disturbance, PendulumParams, PlantState, default_params, load_params
from .errors import ConfigError
from .fuzzy import FuzzyCompensator
from .integrator import AugmentedState, StepConfig, TrajectoryRecord, simulate
from .trajectory import GenericOrbit, OrbitReference, SampledOrbit, find_period1_upo, read_orbit, write_orbit

MODES = ("free_run", "generic_orbit", "upo_track", "upo_extract")

SCENARIO_KEYS = (
    "mode", "dt", "t_end", "initial_offset", "disturbance", "disturbance_enforce", "transient_cut",
    "output_dir", "orbit_file", "plant_file",
    "upo_dt", "upo_periods", "upo_discard", "upo_tol_phi", "upo_tol_phi_dot",
)
PLANT_KEYS = PARAM_KEYS + ("friction_eps",)
CONTROLLER_KEYS = ("lambda", "eta", "F", "P_bound", "h_min", "h_max", "phi_bl", "f_hat_mode")
FUZZY_KEYS = ("n_rules", "s_min", "s_max", "half_width", "varphi", "p_clamp")
ALL_KEYS = SCENARIO_KEYS + PLANT_KEYS + CONTROLLER_KEYS + FUZZY_KEYS

TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.txt"
ORBIT_FILE = "orbit.csv"


@dataclass(frozen=True)
class FuzzySpec:
    n_rules: int = 7
    s_min: float = -3.0
    s_max: float = 3.0
    half_width: Optional[float] = None
    varphi: float = 1.0
    p_clamp: Optional[float] = None

    def build(self) -> FuzzyCompensator:
        return FuzzyCompensator.uniform(self.n_rules, self.s_min, self.s_max, self.half_width, self.varphi, self.p_clamp)

    def to_mapping(self) -> dict[str, object]:
        out = {"n_rules": self.n_rules, "s_min": self.s_min, "s_max": self.s_max}
        out["half_width"] = "auto" if self.half_width is None else self.half_width
        out["varphi"] = self.varphi
        if self.p_clamp is not None:
            out["p_clamp"] = self.p_clamp
        return out


@dataclass(frozen=True)
class UPOSettings:
    """Free-run length and close-return tolerance for period-1 extraction."""

    dt: float = 1e-3
    periods: int = 500
    discard: int = 100
    tol_phi: float = 0.3
    tol_phi_dot: float = 1.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("upo_dt must be > 0")
        if self.periods < 200:
            raise ConfigError("upo_periods must be >= 200")
        if self.discard < 0:
            raise ConfigError("upo_discard must be >= 0")
        if not (self.tol_phi > 0 and self.tol_phi_dot > 0):
            raise ConfigError("upo tolerances must be > 0")

    def step_for(self, drive_period: float) -> StepConfig:
        # the step must divide the drive period so section points fall on samples
        n_per = max(4, round(drive_period / self.dt))
        return StepConfig(dt=drive_period / n_per, t_end=(self.discard + self.periods) * drive_period)


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    step: StepConfig
    plant: PendulumParams
    controller: ControllerConfig
    fuzzy: FuzzySpec = FuzzySpec()
    disturbance: str = "none"
    disturbance_enforce: bool = True
    initial_offset: float = 0.5
    output_dir: Path = Path("run")
    transient_cut: Optional[float] = None
    orbit_file: Optional[Path] = None
    upo: UPOSettings = UPOSettings()
    plant_source: str = field(default="bundled default", compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not math.isfinite(self.initial_offset):
            raise ConfigError("initial_offset must be finite")
        if self.transient_cut is not None and not 0 <= self.transient_cut < self.step.t_end:
            raise ConfigError(f"transient_cut must lie in [0, t_end) (got {self.transient_cut})")
        if self.orbit_file is not None and not Path(self.orbit_file).is_file():
            raise ConfigError(f"orbit file not found: {self.orbit_file}")
        self.fuzzy.build()
        check_against_plant(self.controller, self.plant)
        peak = disturbance_peak(self.disturbance)
        if self.disturbance_enforce and peak > self.controller.P_bound:
            raise ConfigError(
                f"disturbance {self.disturbance!r} peaks at {peak:g}, above P_bound = {self.controller.P_bound:g}"
            )

    @classmethod
    def from_mapping(cls, values: dict[str, str], base_dir: Path = Path(".")) -> "ScenarioConfig":
        unknown = sorted(set(values) - set(ALL_KEYS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        v = dict(values)

        plant_source = "bundled default"
        if "plant_file" in v:
            path = _resolve(v["plant_file"], base_dir)
            plant_map = read_flat_file(path)
            plant_source = str(path)
        else:
            plant_map = default_params().to_mapping()
        overrides = {k: v[k] for k in PLANT_KEYS if k in v}
        if overrides:
            plant_source += " with overrides " + ", ".join(sorted(overrides))
        plant_map = {**plant_map, **overrides}
        plant = PendulumParams.from_mapping(plant_map)

        mode_f = v.get("f_hat_mode", "frictionless")
        ctrl = ControllerConfig(
            lambda_=_float(v, "lambda", 10.0),
            eta=_float(v, "eta", 0.5),
            F=_float(v, "F", plant.c_dry if mode_f == "frictionless" else 0.0),
            P_bound=_float(v, "P_bound", 0.0),
            h_min=_float(v, "h_min", plant.h),
            h_max=_float(v, "h_max", plant.h),
            phi_bl=_float(v, "phi_bl", 0.1),
            f_hat_mode=mode_f,
        )
        hw = v.get("half_width", "auto").strip()
        clamp = v.get("p_clamp", "none").strip()
        fz = FuzzySpec(
            n_rules=_int(v, "n_rules", 7),
            s_min=_float(v, "s_min", -3.0),
            s_max=_float(v, "s_max", 3.0),
            half_width=None if hw == "auto" else _float(v, "half_width", 0.0),
            varphi=_float(v, "varphi", 1.0),
            p_clamp=None if clamp == "none" else _float(v, "p_clamp", 0.0),
        )
        upo = UPOSettings(
            dt=_float(v, "upo_dt", 1e-3),
            periods=_int(v, "upo_periods", 500),
            discard=_int(v, "upo_discard", 100),
            tol_phi=_float(v, "upo_tol_phi", 0.3),
            tol_phi_dot=_float(v, "upo_tol_phi_dot", 1.5),
        )
        cut = v.get("transient_cut", "auto").strip()
        orbit = v.get("orbit_file", "none").strip()
        return cls(
            mode=v.get("mode", "generic_orbit").strip(),
            step=StepConfig(_float(v, "dt", 1e-4), _float(v, "t_end", 10.0)),
            plant=plant,
            controller=ctrl,
            fuzzy=fz,
            disturbance=v.get("disturbance", "none").strip(),
            disturbance_enforce=_bool(v, "disturbance_enforce", True),
            initial_offset=_float(v, "initial_offset", 0.5),
            output_dir=Path(v.get("output_dir", "run").strip()),
            transient_cut=None if cut == "auto" else _float(v, "transient_cut", 0.0),
            orbit_file=None if orbit == "none" else _resolve(orbit, base_dir),
            upo=upo,
            plant_source=plant_source,
        )

    def to_sections(self) -> dict[str, dict[str, object]]:
        """Fully resolved key-value echo, grouped the same way as scenario files."""
        scenario = {
            "mode": self.mode,
            "dt": self.step.dt,
            "t_end": self.step.t_end,
            "initial_offset": self.initial_offset,
            "disturbance": self.disturbance,
            "disturbance_enforce": "true" if self.disturbance_enforce else "false",
            "transient_cut": "auto" if self.transient_cut is None else self.transient_cut,
            "output_dir": str(self.output_dir),
            "orbit_file": "none" if self.orbit_file is None else str(self.orbit_file),
            "upo_dt": self.upo.dt,
            "upo_periods": self.upo.periods,
            "upo_discard": self.upo.discard,
            "upo_tol_phi": self.upo.tol_phi,
            "upo_tol_phi_dot": self.upo.tol_phi_dot,
        }
        return {
            "scenario": scenario,
            "plant": self.plant.to_mapping(),
            "controller": self.controller.to_mapping(),
            "fuzzy": self.fuzzy.to_mapping(),
        }

    def to_text(self, prefix: str = "") -> str:
        return "\n".join(format_flat(vals, prefix + name) for name, vals in self.to_sections().items())


def load_scenario(path: str | Path, overrides: Optional[dict[str, str]] = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = read_flat_file(path)
    values.update(overrides or {})
    return ScenarioConfig.from_mapping(values, base_dir=path.parent)


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def disturbance_peak(spec: str) -> float:
    """sup |p| of a disturbance spec."""
    dist = Disturbance.parse(spec)
    if dist.is_zero:
        return 0.0
    parts = spec.split(":")
    return abs(float(parts[1]))


# ---------------------------------------------------------------- running


@dataclass
class RunResult:
    config: ScenarioConfig
    record: TrajectoryRecord
    metrics: RunMetrics
    info: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    orbit: Optional[SampledOrbit] = None


def build_disturbance(cfg: ScenarioConfig) -> Disturbance:
    return Disturbance.parse(cfg.disturbance).with_bound(cfg.controller.P_bound, cfg.disturbance_enforce)


def extract_orbit(cfg: ScenarioConfig) -> tuple[SampledOrbit, dict]:
    """Unforced run from (initial_offset, 0) and close-return search on it."""
    T = cfg.plant.drive_period
    step = cfg.upo.step_for(T)
    start = AugmentedState(PlantState(cfg.initial_offset, 0.0, 0.0))
    free = simulate(cfg.plant, None, step=step, initial=start)
    orbit = find_period1_upo(free, T, (cfg.upo.tol_phi, cfg.upo.tol_phi_dot), discard_periods=cfg.upo.discard)
    prov = {
        "upo_omega": cfg.plant.omega,
        "upo_free_run_dt": step.dt,
        "upo_free_run_periods": cfg.upo.discard + cfg.upo.periods,
        "upo_initial_state": f"{cfg.initial_offset!r}, 0.0",
        "upo_source_time": orbit.meta["source_time"],
        "upo_scaled_distance": orbit.meta["scaled_distance"],
        "upo_t_offset": orbit.t_offset,
        "upo_raw_closure_phi": orbit.closure_error()[0],
        "upo_raw_closure_phi_dot": orbit.closure_error()[1],
    }
    return orbit, prov


def _tracking_run(cfg: ScenarioConfig, reference) -> TrajectoryRecord:
    comp = cfg.fuzzy.build()
    ctl = SlidingModeController(cfg.controller, comp, cfg.plant)
    r0 = reference.sample(np.array([0.0]))
    start = AugmentedState(
        PlantState(float(r0[0][0]) + cfg.initial_offset, float(r0[1][0]), 0.0), comp.p_hat_vec
    )
    return simulate(cfg.plant, ctl, build_disturbance(cfg), reference, cfg.step, start)


def execute(cfg: ScenarioConfig) -> RunResult:
    """Run one scenario in memory. Raises the package errors unchanged."""
    info: dict[str, object] = {"mode": cfg.mode}
    prov: dict[str, object] = {"package_version": __version__, "plant_source": cfg.plant_source}
    orbit = None

    if cfg.mode == "free_run":
        start = AugmentedState(PlantState(cfg.initial_offset, 0.0, 0.0))
        record = simulate(cfg.plant, None, build_disturbance(cfg), None, cfg.step, start)
        prov["reference"] = "none (controller disabled)"
    elif cfg.mode == "generic_orbit":
        record = _tracking_run(cfg, GenericOrbit())
        prov["reference"] = "phi_d = 2.3 sin(2 pi t)"
    elif cfg.mode == "upo_track":
        if cfg.orbit_file is not None:
            orbit = read_orbit(cfg.orbit_file)
            prov["reference"] = f"period-1 orbit loaded from {cfg.orbit_file}"
        else:
            orbit, extra = extract_orbit(cfg)
            prov["reference"] = "period-1 orbit extracted by close returns"
            prov.update(extra)
        record = _tracking_run(cfg, OrbitReference(orbit))
        info["orbit_period"] = orbit.period
    else:
        orbit, extra = extract_orbit(cfg)
        prov["reference"] = "extracted orbit; trajectory is one unforced period from its first sample"
        prov.update(extra)
        start = AugmentedState(PlantState(float(orbit.phi[0]), float(orbit.phi_dot[0]), orbit.t_offset))
        n = len(orbit.t)
        record = simulate(cfg.plant, None, reference=OrbitReference(orbit),
                          step=StepConfig(orbit.period / n, orbit.period), initial=start)
        info["orbit_period"] = orbit.period
        info["dynamical_closure_phi"] = float(abs(record.phi[-1] - orbit.phi[0]))
        info["dynamical_closure_phi_dot"] = float(abs(record.phi_dot[-1] - orbit.phi_dot[0]))

    cut = cfg.transient_cut
    if cut is not None and cut >= record.t[-1]:
        cut = None
    metrics = effort_metrics(record, cut)
    info["dt"] = record.dt
    info["n_samples"] = len(record)
    info["transient_cut"] = float(cut if cut is not None else record.t[0] + 0.5 * (record.t[-1] - record.t[0]))
    if record.meta.get("controlled"):
        rep = sliding_condition_report(record, cfg.controller.eta, cfg.controller.phi_bl)
        info["sliding_out_of_layer_steps"] = rep.n_out_of_layer
        info["sliding_violations"] = rep.n_violations
        info["sliding_worst_margin"] = rep.worst_margin
        steady = record.t >= info["transient_cut"]
        info["max_abs_s_steady"] = float(np.max(np.abs(record.s[steady])))
        info["steady_s_within_layer"] = "yes" if info["max_abs_s_steady"] <= cfg.controller.phi_bl else "no"
    return RunResult(cfg, record, metrics, info, prov, orbit)


def write_outputs(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.record.to_csv(out_dir / TRAJECTORY_FILE)
    if result.orbit is not None and result.config.mode == "upo_extract":
        write_orbit(result.orbit, out_dir / ORBIT_FILE)
    (out_dir / SUMMARY_FILE).write_text(format_summary(result))


def format_summary(result: RunResult) -> str:
    parts = [
        format_flat(result.metrics.to_mapping(), "metrics"),
        format_flat(result.info, "run"),
        format_flat(result.provenance, "provenance"),
        result.config.to_text(prefix="config."),
    ]
    return "\n".join(parts)


def read_summary(path: str | Path) -> dict[str, dict[str, str]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read summary {path}: {exc.strerror or exc}") from None
    sections = parse_sections(text, source=str(path))
    if "metrics" not in sections:
        raise ConfigError(f"{path}: no [metrics] section")
    try:
        RunMetrics.from_mapping(sections["metrics"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed metrics ({exc})") from None
    return sections


def config_from_summary(path: str | Path) -> ScenarioConfig:
    sections = read_summary(path)
    values: dict[str, str] = {}
    for name, vals in sections.items():
        if name.startswith("config."):
            values.update(vals)
    return ScenarioConfig.from_mapping(values)


def _resolve(value: str, base_dir: Path) -> Path:
    p = Path(value.strip()).expanduser()
    return p if p.is_absolute() else (base_dir / p).resolve()


def _float(v: dict, key: str, default: float) -> float:
    if key not in v:
        return float(default)
    try:
        return float(v[key])
    except ValueError:
        raise ConfigError(f"{key} is not a number: {v[key]!r}") from None


def _int(v: dict, key: str, default: int) -> int:
    if key not in v:
        return int(default)
    try:
        return int(v[key])
    except ValueError:
        raise ConfigError(f"{key} is not an integer: {v[key]!r}") from None


def _bool(v: dict, key: str, default: bool) -> bool:
    if key not in v:
        return default
    text = v[key].strip().lower()
    if text in ("true", "yes", "1", "on"):
        return True
    if text in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {v[key]!r}")


def with_output_dir(cfg: ScenarioConfig, out: Optional[str | Path]) -> ScenarioConfig:
    return cfg if out is None else replace(cfg, output_dir=Path(out))
