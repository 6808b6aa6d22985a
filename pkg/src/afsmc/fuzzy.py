"""Zero-order TSK compensator over the sliding variable.

Rules use symmetric triangular memberships; the two outermost rules are
shoulders (membership 1 beyond their centre). The output is the normalized
weighted sum of the consequents ``P_hat`` and the consequents follow the
gradient law ``dP_hat/dt = varphi * s * Psi(s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FuzzyCompensator:
    centers: tuple[float, ...]
    half_width: float
    varphi: float
    p_hat_vec: tuple[float, ...] = ()
    p_clamp: Optional[float] = None

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        object.__setattr__(self, "centers", centers)
        n = len(centers)
        if n < 1:
            raise ConfigError("fuzzy compensator needs at least one rule")
        if not all(math.isfinite(c) for c in centers):
            raise ConfigError("rule centers must be finite")
        if any(c1 <= c0 for c0, c1 in zip(centers, centers[1:])):
            raise ConfigError("rule centers must be strictly increasing")
        if not self.half_width > 0:
            raise ConfigError("half_width must be > 0")
        if any(c1 - c0 > self.half_width * (1 + 1e-12) for c0, c1 in zip(centers, centers[1:])):
            raise ConfigError("adjacent center spacing must not exceed half_width (coverage gap)")
        if not self.varphi > 0:
            raise ConfigError("adaptation rate varphi must be > 0")
        if self.p_clamp is not None and not self.p_clamp > 0:
            raise ConfigError("p_clamp must be > 0 when given")
        p = tuple(float(v) for v in self.p_hat_vec) if self.p_hat_vec else (0.0,) * n
        if len(p) != n:
            raise ConfigError(f"p_hat_vec has {len(p)} entries for {n} rules")
        object.__setattr__(self, "p_hat_vec", p)

    @property
    def n_rules(self) -> int:
        return len(self.centers)

    @classmethod
    def uniform(
        cls,
        n_rules: int = 7,
        s_min: float = -3.0,
        s_max: float = 3.0,
        half_width: Optional[float] = None,
        varphi: float = 1.0,
        p_clamp: Optional[float] = None,
    ) -> "FuzzyCompensator":
        """Evenly spaced rules over [s_min, s_max]; half_width defaults to the spacing."""
        n_rules = int(n_rules)
        if n_rules < 1:
            raise ConfigError("n_rules must be >= 1")
        if n_rules == 1:
            centers = (0.5 * (s_min + s_max),)
            spacing = max(s_max - s_min, 1.0)
        else:
            if not s_max > s_min:
                raise ConfigError("s_max must exceed s_min")
            centers = tuple(np.linspace(s_min, s_max, n_rules).tolist())
            spacing = (s_max - s_min) / (n_rules - 1)
        return cls(centers, spacing if half_width is None else half_width, varphi, p_clamp=p_clamp)


def firing_strengths(s: float, comp: FuzzyCompensator) -> list[float]:
    c = comp.centers
    hw = comp.half_width
    n = len(c)
    w = [max(0.0, 1.0 - abs(s - cr) / hw) for cr in c]
    if s <= c[0]:
        w[0] = 1.0
    if s >= c[n - 1]:
        w[n - 1] = 1.0
    return w


def normalize(weights: Sequence[float]) -> list[float]:
    total = sum(weights)
    if not total > 0:
        raise ConfigError("no rule fires; membership coverage violated")
    return [w / total for w in weights]


def normalized_basis(s: float, comp: FuzzyCompensator) -> list[float]:
    """Psi(s): firing strengths divided by their sum."""
    return normalize(firing_strengths(s, comp))


def estimate(s: float, comp: FuzzyCompensator, p_hat_vec: Optional[Sequence[float]] = None) -> float:
    """p_hat(s) = P_hat . Psi(s), using ``p_hat_vec`` in place of the stored consequents if given."""
    p = comp.p_hat_vec if p_hat_vec is None else p_hat_vec
    return sum(pr * psi for pr, psi in zip(p, normalized_basis(s, comp)))


def adaptation_derivative(
    s: float, comp: FuzzyCompensator, p_hat_vec: Optional[Sequence[float]] = None
) -> list[float]:
    """dP_hat/dt = varphi * s * Psi(s), with the optional clamp acting as a projection."""
    return adaptation_from_basis(s, normalized_basis(s, comp), comp, p_hat_vec)


def adaptation_from_basis(
    s: float, psi: Sequence[float], comp: FuzzyCompensator, p_hat_vec: Optional[Sequence[float]] = None
) -> list[float]:
    gain = comp.varphi * s
    dp = [gain * w for w in psi]
    if comp.p_clamp is not None and p_hat_vec is not None:
        lim = comp.p_clamp
        for r, pr in enumerate(p_hat_vec):
            if (pr >= lim and dp[r] > 0) or (pr <= -lim and dp[r] < 0):
                dp[r] = 0.0
    return dp


def clamp(p_hat_vec: Sequence[float], comp: FuzzyCompensator) -> list[float]:
    if comp.p_clamp is None:
        return list(p_hat_vec)
    lim = comp.p_clamp
    return [min(lim, max(-lim, p)) for p in p_hat_vec]
