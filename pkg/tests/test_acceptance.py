"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The default-scenario runs are shared through session fixtures, so the
generic-orbit run, the orbit extraction and the orbit-tracking run each
happen once.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from afsmc.analysis import LyapunovOracle, error_envelope_excess, lyapunov_trace, sliding_condition_report
from afsmc.controller import ControllerConfig, SlidingModeController, control_output, gain_K
from afsmc.dynamics import Disturbance, PlantState, default_params
from afsmc.errors import UPONotFound
from afsmc.fuzzy import FuzzyCompensator, adaptation_derivative, estimate, normalized_basis
from afsmc.integrator import AugmentedState, StepConfig, rk4_step, simulate
from afsmc.scenarios import execute, extract_orbit, load_scenario
from afsmc.trajectory import GenericOrbit, dynamical_closure

DEFAULT_CFG = Path(__file__).resolve().parents[1] / "src" / "afsmc" / "data" / "default.cfg"
P = default_params()


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def generic_run():
    return timed(execute, load_scenario(DEFAULT_CFG))


@pytest.fixture(scope="session")
def upo_run():
    # extraction (100 + 500 drive periods) followed by tracking, identical controller settings
    return timed(execute, load_scenario(DEFAULT_CFG, {"mode": "upo_track"}))


# 1 -------------------------------------------------------------------------


def _oscillator_error(dt):
    rhs = lambda x, t: [x[1], -x[1] - x[0]]
    x = [1.0, 0.0]
    for i in range(round(10.0 / dt)):
        x = rk4_step(rhs, x, i * dt, dt)
    w = math.sqrt(3) / 2
    exact = math.exp(-5.0) * (math.cos(10 * w) + math.sin(10 * w) / (2 * w))
    return abs(x[0] - exact)


def test_c1_integrator_order(acceptance_report):
    errs, wall = timed(lambda: [_oscillator_error(dt) for dt in (1e-2, 5e-3, 2.5e-3)])
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(abs(r / 16 - 1) <= 0.2 for r in ratios) and wall < 1.0
    acceptance_report(1, "RK4 order on x'' = -x' - x", ok,
                      f"error ratios {ratios[0]:.2f}, {ratios[1]:.2f} (16 +/- 20%), {wall:.2f} s")
    assert ok


# 2 -------------------------------------------------------------------------


def test_c2_partition_of_unity(acceptance_report):
    rng = np.random.default_rng(2024)
    comp = FuzzyCompensator.uniform(7, -3.0, 3.0)

    def check():
        worst_sum, worst_bound = 0.0, 0.0
        for s in rng.uniform(-5, 5, 1000):
            psi = normalized_basis(float(s), comp)
            worst_sum = max(worst_sum, abs(sum(psi) - 1.0))
            p = rng.uniform(-50, 50, 7)
            est = estimate(float(s), comp, p.tolist())
            worst_bound = max(worst_bound, est - p.max(), p.min() - est, 0.0)
        return worst_sum, worst_bound

    (worst_sum, worst_bound), wall = timed(check)
    ok = worst_sum < 1e-12 and worst_bound <= 1e-12 and wall < 1.0
    acceptance_report(2, "partition of unity and estimate bounds", ok,
                      f"max |sum psi - 1| = {worst_sum:.1e}, max bound excess = {worst_bound:.1e}, {wall:.2f} s")
    assert ok


# 3 -------------------------------------------------------------------------


def test_c3_gain_bound(acceptance_report):
    rng = np.random.default_rng(3)
    worst = 0.0
    sat_mismatch = 0
    for _ in range(1000):
        h_min = rng.uniform(0.5, 500)
        cfg = ControllerConfig(
            eta=rng.uniform(1e-3, 5), P_bound=rng.uniform(0, 10), F=rng.uniform(0, 10),
            h_min=h_min, h_max=h_min * rng.uniform(1, 20), phi_bl=rng.uniform(1e-3, 1),
        )
        u_hat, p_hat = rng.uniform(-10, 10), rng.uniform(-10, 10)
        K = gain_K(u_hat, p_hat, cfg)
        bracket = cfg.eta + abs(p_hat) + cfg.P_bound + cfg.F + (cfg.H - 1) * abs(u_hat) * cfg.h_hat / cfg.H
        worst = max(worst, abs(K * cfg.h_hat / cfg.H - bracket) / max(1.0, bracket))
        s = math.copysign(cfg.phi_bl * rng.uniform(1, 100), rng.uniform(-1, 1))
        if control_output(u_hat, K, s, cfg.phi_bl) != u_hat - K * math.copysign(1.0, s):
            sat_mismatch += 1
    ok = worst <= 1e-12 and sat_mismatch == 0
    acceptance_report(3, "gain bound equality and sat/sgn coincidence", ok,
                      f"max relative residual {worst:.1e}, {sat_mismatch} sat/sgn mismatches in 1000")
    assert ok


# 4 -------------------------------------------------------------------------


def test_c4_sliding_condition(generic_run, acceptance_report):
    result, wall = generic_run
    cfg = result.config.controller
    rep = sliding_condition_report(result.record, cfg.eta, cfg.phi_bl)
    ok = rep.violation_fraction < 0.01 and wall < 30.0
    acceptance_report(4, "sliding condition, generic orbit", ok,
                      f"violation fraction {rep.violation_fraction:.4f} over {rep.n_out_of_layer} out-of-layer steps, "
                      f"worst margin {rep.worst_margin:.3g}, run {wall:.1f} s")
    assert ok


# 5 -------------------------------------------------------------------------


def test_c5_surface_convergence(generic_run, acceptance_report):
    result, _ = generic_run
    rec, cfg = result.record, result.config.controller
    t_settle = result.metrics.s_settling_time
    bound = cfg.phi_bl / cfg.lambda_
    s0 = abs(rec.s[0])
    reach_limit = 1.2 * s0 / cfg.eta
    steady = rec.t >= 0.5 * rec.t[-1]
    steady_err = float(np.max(np.abs(rec.e[steady])))
    envelope = error_envelope_excess(rec, t_settle, cfg.phi_bl, cfg.lambda_) if math.isfinite(t_settle) else math.inf
    right_after = float(np.max(np.abs(rec.e[rec.t >= t_settle]))) if math.isfinite(t_settle) else math.inf
    ok = (
        math.isfinite(t_settle)
        and t_settle < 0.5 * rec.t[-1]
        and steady_err <= bound + 1e-6
        and envelope <= 1e-6
        and t_settle <= reach_limit
    )
    acceptance_report(
        5, "surface convergence", ok,
        f"settles at {t_settle:.3f} s (limit {reach_limit:.1f} s); steady max|e| {steady_err:.5f} <= {bound:.3f}; "
        f"envelope excess {envelope:.1e}; max|e| from settling on {right_after:.4f} (decaying, informational)",
    )
    assert ok


# 6 -------------------------------------------------------------------------


def _scalar_oracle(p_bar=2.0, varphi=1.0, K_bar=2.0, dt=1e-2):
    comp = FuzzyCompensator((0.0,), 1.0, varphi)

    def rhs(x, t):
        return [-K_bar * x[0] + p_bar - estimate(x[0], comp, [x[1]]), *adaptation_derivative(x[0], comp)]

    x = [0.0, 0.0]
    for i in range(round(50.0 / varphi / dt)):
        x = rk4_step(rhs, x, i * dt, dt)
    return x[1]


def test_c6_adaptation_oracle(acceptance_report):
    p_bar, varphi = 2.0, 500.0

    def closed_loop():
        cfg = ControllerConfig.for_plant(P, F=0.0, f_hat_mode="exact", P_bound=abs(p_bar))
        ctl = SlidingModeController(cfg, FuzzyCompensator((0.0,), 1.0, varphi), P)
        r0 = GenericOrbit()(0.0)
        start = AugmentedState(PlantState(r0.phi_d + 0.5, r0.phi_d_dot), (0.0,))
        dist = Disturbance.constant(p_bar, bound=abs(p_bar))
        return simulate(P, ctl, dist, GenericOrbit(), StepConfig(1e-4, 3.0), start), cfg

    (rec, cfg), wall = timed(closed_loop)
    scalar_p, wall_scalar = timed(_scalar_oracle, p_bar)
    tr = lyapunov_trace(rec, LyapunovOracle((p_bar,), varphi), phi_bl=cfg.phi_bl)
    rel = abs(rec.p_hat[-1] - p_bar) / abs(p_bar)
    rel_scalar = abs(scalar_p - p_bar) / abs(p_bar)
    tol_v = 1e-3 * tr.V[0]
    ok = rel < 0.05 and rel_scalar < 0.05 and tr.max_increase_out_of_layer <= tol_v and wall + wall_scalar < 5.0
    acceptance_report(
        6, "adaptation oracle and Lyapunov trace", ok,
        f"closed loop |p_hat - p|/|p| = {rel:.1e}, scalar system {rel_scalar:.1e}; "
        f"max out-of-layer V increase {tr.max_increase_out_of_layer:.2e} (limit {tol_v:.2e}); "
        f"{wall + wall_scalar:.1f} s",
    )
    assert ok


# 7 -------------------------------------------------------------------------


def test_c7_effort_comparison(generic_run, upo_run, acceptance_report):
    gen, _ = generic_run
    upo, wall = upo_run
    assert gen.config.controller == upo.config.controller and gen.config.fuzzy == upo.config.fuzzy
    e_gen, e_upo = gen.metrics.effort_l1, upo.metrics.effort_l1
    ok = e_upo < e_gen and wall < 120.0
    acceptance_report(7, "effort: orbit from the attractor vs generic orbit", ok,
                      f"effort_l1 generic {e_gen:.4f}, extracted orbit {e_upo:.4f} (ratio {e_upo / e_gen:.3f}); "
                      f"extraction + tracking {wall:.1f} s")
    assert ok


# 8 -------------------------------------------------------------------------


def test_c8_upo_extraction(upo_run, acceptance_report):
    upo, _ = upo_run
    orbit = upo.orbit
    tol = (upo.config.upo.tol_phi, upo.config.upo.tol_phi_dot)
    d_phi, d_dot = dynamical_closure(orbit, P)
    found_ok = d_phi < 2 * tol[0] and d_dot < 2 * tol[1] and upo.config.upo.periods == 500

    periodic_cfg = load_scenario(DEFAULT_CFG, {"omega": "5.85", "mode": "upo_extract"})
    try:
        extract_orbit(periodic_cfg)
        diagnostic = None
    except UPONotFound as exc:
        diagnostic = exc
    diag_ok = diagnostic is not None and diagnostic.best_distance >= 1.0 and "best candidate" in str(diagnostic)

    ok = found_ok and diag_ok
    acceptance_report(
        8, "period-1 orbit extraction", ok,
        f"omega 5.61: closure |dphi| {d_phi:.3f} < {2 * tol[0]:.1f}, |dphi_dot| {d_dot:.3f} < {2 * tol[1]:.1f}; "
        f"omega 5.85 (periodic, not period-1): "
        + (f"diagnostic scaled distance {diagnostic.best_distance:.2f}" if diagnostic else "no diagnostic"),
    )
    assert ok


# 9 -------------------------------------------------------------------------


def test_c9_monitor_negative_control(acceptance_report):
    P_bound = 5.0
    cfg = ControllerConfig.for_plant(P, F=0.0, f_hat_mode="exact", P_bound=P_bound)
    r0 = GenericOrbit()(0.0)
    start = AugmentedState(PlantState(r0.phi_d + 0.5, r0.phi_d_dot), (0.0,) * 7)

    def fraction(p):
        ctl = SlidingModeController(cfg, FuzzyCompensator.uniform(7), P)
        dist = Disturbance.constant(p, bound=P_bound, enforce=False)
        rec = simulate(P, ctl, dist, GenericOrbit(), StepConfig(1e-4, 1.0), start)
        return sliding_condition_report(rec, cfg.eta, cfg.phi_bl)

    honest = fraction(P_bound)
    violated = fraction(2 * P_bound)
    ok = violated.violation_fraction > 0 and honest.violation_fraction < 0.01
    acceptance_report(9, "monitor flags |p| = 2 P_bound", ok,
                      f"violation fraction {violated.violation_fraction:.4f} with |p| = 2 P_bound "
                      f"vs {honest.violation_fraction:.4f} with |p| = P_bound")
    assert ok
