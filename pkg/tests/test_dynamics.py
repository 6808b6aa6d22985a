import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afsmc.dynamics import (
    Disturbance,
    PendulumParams,
    PlantState,
    acceleration,
    decompose,
    default_params,
    drift,
    eq_of_motion_rhs,
    excitation_length,
    load_params,
    mechanical_energy,
    sgn,
)
from afsmc.errors import AssumptionViolation, ConfigError, SimulationBlowUp
from afsmc.integrator import AugmentedState, StepConfig, simulate

P = default_params()


def test_default_parameter_file_values():
    assert (P.a, P.b, P.d, P.D) == (0.16, 0.06, 0.048, 0.095)
    assert P.k == 2.47 and P.I == 1.738e-4 and P.omega == 5.61


def test_input_gain_hand_value():
    assert P.h == pytest.approx(2.47 * 0.048 / (2 * 1.738e-4), rel=1e-15)
    assert P.h == pytest.approx(341.08, abs=5e-3)


def test_excitation_length_closed_forms():
    assert excitation_length(0.0, P) == 0.0
    t_half = math.pi / P.omega
    assert excitation_length(t_half, P) == pytest.approx(2 * P.b, rel=1e-12)
    # wt close to pi/2: sqrt(a^2 + b^2) - (a - b)
    assert excitation_length(0.28, P) == pytest.approx(0.070880, abs=2e-5)
    exact = math.sqrt(0.16**2 + 0.06**2 - 2 * 0.16 * 0.06 * math.cos(5.61 * 0.28)) - 0.10
    assert excitation_length(0.28, P) == pytest.approx(exact, rel=1e-14)


def test_excitation_length_nonnegative_dense_sweep():
    ts = np.linspace(0.0, 3 * P.drive_period, 20001)
    assert min(excitation_length(float(t), P) for t in ts) >= 0.0


def test_drift_rest_state_is_zero():
    f, _ = decompose(PlantState(0.0, 0.0, 0.0), P)
    assert f == 0.0


def test_drift_quarter_turn():
    f, _ = decompose(PlantState(math.pi / 2, 0.0, 0.0), P)
    expected = -(P.k * P.d**2 / (2 * P.I)) * (math.pi / 2) - P.m * P.g * P.D / (2 * P.I)
    assert f == pytest.approx(expected, rel=1e-13)


def test_acceleration_examples():
    rest = PlantState(0.0, 0.0, 0.0)
    no_mu = replace(P, mu=0.0)
    assert acceleration(rest, 0.0, params=no_mu) == 0.0
    assert acceleration(rest, 0.01, params=P) == pytest.approx(P.h * 0.01, rel=1e-15)
    assert acceleration(rest, 0.0, Disturbance.constant(0.5), params=P) == 0.5


def test_acceleration_rejects_non_finite_u():
    with pytest.raises(SimulationBlowUp):
        acceleration(PlantState(0.0, 0.0), math.nan, params=P)


def test_non_finite_state_rejected():
    with pytest.raises(ValueError):
        PlantState(math.inf, 0.0)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=1000, deadline=None)
@given(phi=finite, dphi=finite, t=st.floats(0, 100), u=st.floats(-0.1, 0.1), p=st.floats(-10, 10))
def test_decomposition_identity(phi, dphi, t, u, p):
    state = PlantState(phi, dphi, t)
    f, h = decompose(state, P)
    assert acceleration(state, u, Disturbance.constant(p), params=P) == f + h * u + p


@settings(max_examples=300, deadline=None)
@given(phi=finite, dphi=finite, t=st.floats(0, 100), u=st.floats(-0.1, 0.1))
def test_affine_form_matches_equation_of_motion(phi, dphi, t, u):
    state = PlantState(phi, dphi, t)
    a1 = acceleration(state, u, params=P)
    a2 = eq_of_motion_rhs(state, -u, P)
    assert a1 == pytest.approx(a2, rel=1e-11, abs=1e-9)


def test_h_state_independent():
    rng = np.random.default_rng(1)
    hs = {decompose(PlantState(*rng.normal(size=2) * 5, rng.uniform(0, 10)), P)[1] for _ in range(100)}
    assert len(hs) == 1


def test_sgn_zero():
    assert sgn(0.0) == 0.0 and sgn(-2.0) == -1.0 and sgn(3.0) == 1.0


def test_friction_smoothing_option():
    smooth = replace(P, friction_eps=1e-3)
    f_hard = drift(0.0, 1.0, 0.0, P)
    f_soft = drift(0.0, 1.0, 0.0, smooth)
    assert f_soft == pytest.approx(f_hard, rel=1e-9)
    assert drift(0.0, 0.0, 0.0, smooth) == 0.0


def test_energy_non_increasing_with_viscous_damping_only():
    plant = replace(P, mu=0.0, k=0.0, zeta=1e-4)
    rec = simulate(plant, None, step=StepConfig(1e-3, 5.0), initial=AugmentedState(PlantState(2.0, 0.0)))
    E = np.array([mechanical_energy(a, b, plant) for a, b in zip(rec.phi, rec.phi_dot)])
    assert E[-1] < E[0]
    assert np.max(np.diff(E)) <= 1e-9 * E[0]


@pytest.mark.parametrize(
    "change",
    [dict(I=0.0), dict(a=0.05), dict(b=0.0), dict(k=-1.0), dict(zeta=-1.0), dict(omega=math.nan)],
)
def test_invalid_parameters_rejected(change):
    with pytest.raises(ConfigError):
        replace(P, **change)


def test_parameter_file_round_trip(tmp_path):
    path = tmp_path / "plant.txt"
    path.write_text("".join(f"{k} = {v!r}  # note\n" for k, v in P.to_mapping().items()))
    assert load_params(path) == P


def test_parameter_file_missing_key(tmp_path):
    path = tmp_path / "plant.txt"
    path.write_text("a = 0.16\n")
    with pytest.raises(ConfigError, match="missing"):
        load_params(path)


def test_parameter_file_unreadable(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_params(tmp_path / "absent.txt")


def test_disturbance_bound_enforced():
    d = Disturbance.constant(2.0, bound=1.0)
    with pytest.raises(AssumptionViolation):
        d(0.0)
    assert Disturbance.constant(2.0, bound=1.0, enforce=False)(0.0) == 2.0


@pytest.mark.parametrize(
    "text,t,value",
    [("none", 1.0, 0.0), ("constant:1.5", 3.0, 1.5), ("sinusoid:2:3", 0.5, 2 * math.sin(1.5))],
)
def test_disturbance_parse(text, t, value):
    assert Disturbance.parse(text)(t) == pytest.approx(value)


def test_disturbance_parse_rejects_garbage():
    with pytest.raises(ConfigError):
        Disturbance.parse("square:1")


def test_params_mapping_round_trip():
    assert PendulumParams.from_mapping(P.to_mapping()) == P
