"""Post-run monitors and metrics.

Everything here is pure post-processing of a :class:`TrajectoryRecord`:
the discrete sliding-condition monitor, the Lyapunov trace for runs whose
optimal consequents are known, and the effort/tracking summary.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SlidingReport:
    violation_fraction: float
    worst_margin: float
    n_out_of_layer: int
    n_violations: int

    @property
    def vacuous(self) -> bool:
        return self.n_out_of_layer == 0


def sliding_condition_report(record, eta: float, phi_bl: float, rel_tol: float = 0.05) -> SlidingReport:
    """Check 1/2 d(s^2)/dt <= -eta |s| on consecutive samples with |s| > phi_bl.

    The margin ``m = (s[i+1]^2 - s[i]^2) / (2 dt) + eta |s[i]|`` counts as a
    violation when it exceeds ``rel_tol * eta * |s[i]|``. ``worst_margin`` is
    nan for a vacuous report.
    """
    s = np.asarray(record.s, dtype=float)
    if len(s) < 2:
        raise ValueError("sliding-condition report needs at least two samples")
    dt = np.diff(np.asarray(record.t, dtype=float))
    s0, s1 = s[:-1], s[1:]
    out = np.abs(s0) > phi_bl
    n_out = int(out.sum())
    if n_out == 0:
        return SlidingReport(0.0, math.nan, 0, 0)
    abs_s = np.abs(s0[out])
    margin = 0.5 * (s1[out] ** 2 - s0[out] ** 2) / dt[out] + eta * abs_s
    bad = margin > rel_tol * eta * abs_s
    return SlidingReport(float(bad.mean()), float(margin.max()), n_out, int(bad.sum()))


@dataclass(frozen=True)
class LyapunovOracle:
    """Known optimal consequents for a synthetic run."""

    p_star_vec: tuple[float, ...]
    varphi: float

    def __post_init__(self):
        object.__setattr__(self, "p_star_vec", tuple(float(p) for p in self.p_star_vec))
        if not self.varphi > 0:
            raise ValueError("varphi must be > 0")


@dataclass(frozen=True)
class LyapunovTrace:
    V: np.ndarray
    max_increase: float
    max_increase_out_of_layer: float


def lyapunov_trace(record, oracle: LyapunovOracle, phi_bl: Optional[float] = None) -> LyapunovTrace:
    """V = s^2 / 2 + |P_hat - P_star|^2 / (2 varphi) along the record.

    ``max_increase_out_of_layer`` only looks at steps starting with
    |s| > phi_bl (all steps when ``phi_bl`` is None).
    """
    p_hist = np.asarray(record.p_hat_vec, dtype=float)
    p_star = np.asarray(oracle.p_star_vec, dtype=float)
    if p_hist.ndim != 2 or p_hist.shape[1] != p_star.size:
        raise ValueError(
            f"oracle has {p_star.size} consequents, record has {p_hist.shape[1] if p_hist.ndim == 2 else '?'}"
        )
    s = np.asarray(record.s, dtype=float)
    delta = p_hist - p_star
    V = 0.5 * s**2 + np.sum(delta**2, axis=1) / (2.0 * oracle.varphi)
    inc = np.diff(V)
    if inc.size == 0:
        return LyapunovTrace(V, 0.0, 0.0)
    mask = np.ones_like(inc, dtype=bool) if phi_bl is None else np.abs(s[:-1]) > phi_bl
    max_out = float(inc[mask].max()) if mask.any() else 0.0
    return LyapunovTrace(V, float(inc.max()), max_out)


@dataclass(frozen=True)
class RunMetrics:
    rms_error_steady: float
    max_error_steady: float
    effort_l1: float
    effort_rms: float
    sliding_violation_fraction: float
    s_settling_time: float

    def to_mapping(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunMetrics":
        return cls(**{f.name: float(values[f.name]) for f in fields(cls)})


def settling_time(t: np.ndarray, s: np.ndarray, phi_bl: float) -> float:
    """First sample time after which |s| <= phi_bl for the rest of the record (inf if never)."""
    outside = np.nonzero(np.abs(s) > phi_bl)[0]
    if outside.size == 0:
        return float(t[0])
    last = int(outside[-1])
    if last == len(t) - 1:
        return math.inf
    return float(t[last + 1])


def effort_metrics(
    record,
    transient_cut: Optional[float] = None,
    phi_bl: Optional[float] = None,
    eta: Optional[float] = None,
) -> RunMetrics:
    """Effort and tracking metrics after ``transient_cut`` (default: second half of the run).

    ``phi_bl`` and ``eta`` default to the values stored in the record's meta;
    without them the sliding-related fields are reported as 0 and inf.
    """
    t = np.asarray(record.t, dtype=float)
    if transient_cut is None:
        transient_cut = t[0] + 0.5 * (t[-1] - t[0])
    if not transient_cut < t[-1]:
        raise ValueError(f"transient_cut {transient_cut} is not before the end of the record ({t[-1]})")
    meta = getattr(record, "meta", {}) or {}
    phi_bl = meta.get("phi_bl") if phi_bl is None else phi_bl
    eta = meta.get("eta") if eta is None else eta

    sel = t >= transient_cut
    ts = t[sel]
    u = np.abs(np.asarray(record.u, dtype=float)[sel])
    e = np.asarray(record.e, dtype=float)[sel]
    span = ts[-1] - ts[0]
    effort_l1 = float(np.trapezoid(u, ts)) if ts.size > 1 else 0.0
    effort_rms = float(math.sqrt(np.trapezoid(u**2, ts) / span)) if span > 0 else float(u[0]) if u.size else 0.0

    if phi_bl is not None and eta is not None:
        report = sliding_condition_report(record, eta, phi_bl)
        violation = report.violation_fraction
        settle = settling_time(t, np.asarray(record.s, dtype=float), phi_bl)
    else:
        violation, settle = 0.0, math.inf

    return RunMetrics(
        rms_error_steady=float(np.sqrt(np.mean(e**2))),
        max_error_steady=float(np.max(np.abs(e))),
        effort_l1=effort_l1,
        effort_rms=effort_rms,
        sliding_violation_fraction=violation,
        s_settling_time=settle,
    )


def error_envelope_excess(record, t_settle: float, phi_bl: float, lambda_: float) -> float:
    """Largest excess of |e| over the bound implied by |s| <= phi_bl from ``t_settle`` on.

    From e' = -lambda e + s with |s| <= phi_bl:
    |e(t)| <= |e(T)| exp(-lambda (t-T)) + (phi_bl / lambda)(1 - exp(-lambda (t-T))).
    """
    t = np.asarray(record.t, dtype=float)
    e = np.asarray(record.e, dtype=float)
    sel = t >= t_settle
    if not sel.any():
        return 0.0
    ts, es = t[sel], np.abs(e[sel])
    decay = np.exp(-lambda_ * (ts - ts[0]))
    bound = es[0] * decay + (phi_bl / lambda_) * (1.0 - decay)
    return float(np.max(es - bound))
