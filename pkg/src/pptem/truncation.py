"""Bound functions and the truncation mappings.

The clamp edge for step size ``delta`` is chosen directly as

    upper(delta) = K0_hat * delta ** (-k_bar / gamma),   lower = 1 / upper

which corresponds to the bound function ``h(delta) = phi(upper(delta))``
with ``phi(R) = 2 * H0 * R ** gamma``.  Then
``sqrt(delta) * h(delta) = 2 * H0 * K0_hat**gamma * delta**(1/2 - k_bar)``,
so the admissibility window holds with ``U_hat = 2 * H0 * K0_hat**gamma``
whenever ``k_bar <= 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ModelSpec

# relative slack for comparisons that hold with equality in exact arithmetic
_REL_TOL = 1e-12


@dataclass(frozen=True)
class TruncationPolicy:
    H0: float
    gamma: float
    K0_hat: float = 1.0
    k_bar: float = 0.5
    U_hat: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.H0 > 0:
            raise ValueError(f"H0 must be positive, got {self.H0}")
        if not self.K0_hat >= 1:
            raise ValueError(f"K0_hat must be >= 1, got {self.K0_hat}")
        if not 0 < self.k_bar <= 0.5:
            raise ValueError(f"k_bar must lie in (0, 1/2], got {self.k_bar}")
        if self.U_hat is None:
            object.__setattr__(self, "U_hat", 2.0 * self.H0 * self.K0_hat**self.gamma)
        elif not self.U_hat > 0:
            raise ValueError(f"U_hat must be positive, got {self.U_hat}")

    @classmethod
    def for_model(cls, model: ModelSpec, **overrides) -> "TruncationPolicy":
        """Default policy for ``model``; any field may be overridden by keyword."""
        H0 = overrides.pop("H0", None)
        if H0 is None:
            H0 = default_H0(model)
        gamma = overrides.pop("gamma", model.gamma)
        return cls(H0=H0, gamma=gamma, **overrides)

    def with_overrides(self, **overrides) -> "TruncationPolicy":
        # U_hat is derived unless given explicitly
        if "U_hat" not in overrides:
            overrides["U_hat"] = None
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return {
            "H0": self.H0,
            "gamma": self.gamma,
            "K0_hat": self.K0_hat,
            "k_bar": self.k_bar,
            "U_hat": self.U_hat,
        }


def default_H0(model: ModelSpec) -> float:
    """``max(21 d^((alpha+1)/2) K1, |f(1)|)`` with f evaluated at the all-ones state."""
    growth = 21.0 * model.d ** ((model.alpha + 1.0) / 2.0) * model.lipschitz_scale
    f_one = float(np.linalg.norm(model.f(np.ones(model.d), 0.0)))
    return max(growth, f_one)


@dataclass(frozen=True)
class ClampInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.upper > 1:
            raise ValueError(f"clamp upper edge must exceed 1, got {self.upper}")
        if not 0 < self.lower < 1:
            raise ValueError(f"clamp lower edge must lie in (0, 1), got {self.lower}")

    @classmethod
    def from_upper(cls, upper: float) -> "ClampInterval":
        return cls(lower=1.0 / upper, upper=float(upper))


def phi(R: float, policy: TruncationPolicy) -> float:
    if not R > 1:
        raise ValueError(f"phi is defined for R > 1, got {R}")
    return 2.0 * policy.H0 * R**policy.gamma


def phi_inv(y: float, policy: TruncationPolicy) -> float:
    floor = 2.0 * policy.H0
    if not y > floor:
        raise ValueError(f"phi_inv is defined for y > phi(1) = {floor}, got {y}")
    return (y / floor) ** (1.0 / policy.gamma)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError(f"step size must lie in (0, 1), got {delta}")


def clamp_upper(delta: float, policy: TruncationPolicy) -> float:
    _check_delta(delta)
    return policy.K0_hat * delta ** (-policy.k_bar / policy.gamma)


def clamp_interval(delta: float, policy: TruncationPolicy) -> ClampInterval:
    return ClampInterval.from_upper(clamp_upper(delta, policy))


def h(delta: float, policy: TruncationPolicy) -> float:
    """The implied bound function ``phi(upper(delta))``."""
    return 2.0 * policy.H0 * clamp_upper(delta, policy) ** policy.gamma


def pi_delta(x, iv: ClampInterval) -> np.ndarray:
    """Componentwise clamp into ``[iv.lower, iv.upper]``; accepts any real input."""
    arr = np.asarray(x, dtype=float)
    return np.minimum(np.maximum(arr, iv.lower), iv.upper)


def norm_truncate(x, bound: float) -> np.ndarray:
    """Radial projection onto the Euclidean ball of radius ``bound``.

    Works row-wise on batches.  Does nothing for the sign of the components,
    so a nonpositive state stays nonpositive.
    """
    arr = np.asarray(x, dtype=float)
    norm = np.linalg.norm(arr, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(norm > bound, bound / norm, 1.0)
    return arr * scale


@dataclass
class PolicyCheck:
    delta: float
    h: float
    h_above_phi1: float
    lower_margin: float
    upper_margin: float
    decreasing: bool

    @property
    def passed(self) -> bool:
        return (
            self.h_above_phi1 > 0
            and self.lower_margin >= 0
            and self.upper_margin >= 0
            and self.decreasing
        )


@dataclass
class PolicyReport:
    policy: TruncationPolicy
    checks: list[PolicyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[PolicyCheck]:
        return [c for c in self.checks if not c.passed]


def validate_policy(policy: TruncationPolicy, deltas) -> PolicyReport:
    """Evaluate the admissibility window on a list of step sizes.

    Margins are signed and scaled by the compared quantity, so a negative
    value is a violation beyond rounding.
    """
    ordered = sorted(float(d) for d in deltas)
    for d in ordered:
        _check_delta(d)
    report = PolicyReport(policy=policy)
    phi_one = 2.0 * policy.H0
    phi_K0 = 2.0 * policy.H0 * policy.K0_hat**policy.gamma
    prev_h = math.inf
    for d in ordered:
        hd = h(d, policy)
        scaled = math.sqrt(d) * hd
        floor = phi_K0 * d ** (0.5 - policy.k_bar)
        lower_margin = (scaled - floor) / abs(floor) + _REL_TOL
        upper_margin = (policy.U_hat - scaled) / abs(policy.U_hat) + _REL_TOL
        report.checks.append(
            PolicyCheck(
                delta=d,
                h=hd,
                h_above_phi1=hd - phi_one,
                lower_margin=lower_margin,
                upper_margin=upper_margin,
                decreasing=hd < prev_h,
            )
        )
        prev_h = hd
    return report
