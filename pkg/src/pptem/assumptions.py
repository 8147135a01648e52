"""Sampling and grid checks of the coefficient hypotheses.

The checkers estimate constants empirically and return the worst point they
saw.  None of them proves anything; a pass only says no counterexample was
found on the sampled set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec

DEFAULT_TOL = 1e-9
DEFAULT_GRID = (1e-3, 1e3, 64)
DEFAULT_PAIRS = 10_000


@dataclass
class AssumptionReport:
    assumption: str
    passed: bool
    worst_margin: float
    witness: tuple = ()
    estimated_constants: dict = field(default_factory=dict)
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        # keep the pass flag consistent with the margin
        if math.isnan(self.worst_margin):
            self.passed = False
        else:
            self.passed = bool(self.passed and self.worst_margin >= -self.tolerance)

    def summary(self) -> str:
        consts = ", ".join(f"{k}={v:.6g}" for k, v in self.estimated_constants.items())
        status = "pass" if self.passed else "FAIL"
        return f"{self.assumption}: {status} (worst margin {self.worst_margin:.6g}; {consts})"


def _check_region(region) -> tuple[float, float]:
    lo, hi = (float(v) for v in region)
    if not 0 < lo < hi:
        raise ValueError(f"region must be a positive box (lo, hi) with lo < hi, got {region}")
    return lo, hi


def _sample_pairs(d: int, region, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Half the pairs are independent log-uniform points, half are near pairs."""
    lo, hi = _check_region(region)
    rng = np.random.default_rng(seed)
    a, b = math.log(lo), math.log(hi)
    x = np.exp(rng.uniform(a, b, size=(n, d)))
    y = np.exp(rng.uniform(a, b, size=(n, d)))
    near = n // 2
    # relative perturbations between 1e-6 and 1e-1
    eps = np.exp(rng.uniform(math.log(1e-6), math.log(1e-1), size=(near, 1)))
    y[:near] = np.clip(x[:near] * (1 + eps * rng.uniform(-1, 1, size=(near, d))), lo, hi)
    return x, y


def _pair_norms(model: ModelSpec, x, y, t: float):
    with np.errstate(all="ignore"):
        df = model.f(x, t) - model.f(y, t)
        dg = (model.g(x, t) - model.g(y, t)).reshape(len(x), -1)
    return df, dg


def check_lipschitz_growth(model: ModelSpec, region=(1e-2, 1e2), n_samples: int = DEFAULT_PAIRS,
                           seed: int = 0, declared_K1: float | None = None, t: float = 0.0,
                           tol: float = DEFAULT_TOL) -> AssumptionReport:
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    x, y = _sample_pairs(model.d, region, n_samples, seed)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0
    x, y, dist = x[keep], y[keep], dist[keep]
    df, dg = _pair_norms(model, x, y, t)
    num = np.maximum(np.linalg.norm(df, axis=1), np.linalg.norm(dg, axis=1))
    nx, ny = np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1)
    a, b = model.alpha, model.beta
    weight = 1 + nx**a + ny**a + nx ** (-b) + ny ** (-b)
    with np.errstate(all="ignore"):
        ratio = num / (weight * dist)
    ratio = np.where(np.isfinite(ratio), ratio, np.inf)
    i = int(np.argmax(ratio))
    K1 = float(ratio[i])
    declared = model.lipschitz_scale if declared_K1 is None else float(declared_K1)
    margin = declared - K1 if math.isfinite(K1) else -math.inf
    return AssumptionReport(
        assumption="lipschitz_growth",
        passed=True,
        worst_margin=margin,
        witness=(x[i].tolist(), y[i].tolist()),
        estimated_constants={"K1": K1, "declared_K1": declared},
        tolerance=tol,
    )


def _time_grid(model: ModelSpec, t_grid) -> np.ndarray:
    if t_grid is not None:
        return np.asarray(t_grid, dtype=float)
    return np.linspace(0.0, 2.0, 9) if model.time_dependent else np.zeros(1)


def check_dissipativity(model: ModelSpec, p_bar: float, q_bar: float, grid=DEFAULT_GRID,
                        t_grid=None, other_points: int = 9,
                        tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Search a threshold ``x_bar_i`` per component on a log grid.

    For each value of ``x_i`` the other components range over a coarser log
    grid (``other_points`` per component) and every time in ``t_grid``; the
    small-state margin takes the minimum and the large-state ratio the maximum
    over those.  The threshold is the first grid value where the small-state
    inequality fails (or the last grid value if it never does).  At least the
    first grid value must satisfy the small-state inequality, since the
    interval ``(0, x_bar)`` is never empty.
    """
    if not p_bar > 1:
        raise ValueError(f"p_bar must exceed 1, got {p_bar}")
    if not q_bar > 0:
        raise ValueError(f"q_bar must be positive, got {q_bar}")
    lo, hi, n = grid
    _check_region((lo, hi))
    axis = np.geomspace(lo, hi, int(n))
    others = np.geomspace(lo, hi, other_points)
    times = _time_grid(model, t_grid)
    d = model.d

    consts: dict = {}
    worst = math.inf
    witness: tuple = ()
    ok = True
    for i in range(d):
        rest = [others] * (d - 1)
        combos = np.array(np.meshgrid(*rest, indexing="ij")).reshape(d - 1, -1).T if d > 1 else np.zeros((1, 0))
        small = np.full(len(axis), math.inf)
        large = np.full(len(axis), -math.inf)
        for t in times:
            for j, v in enumerate(axis):
                x = np.insert(combos, i, v, axis=1)
                with np.errstate(all="ignore"):
                    fi = model.f(x, t)[:, i]
                    gi2 = np.sum(model.g(x, t)[:, i, :] ** 2, axis=1)
                a = v * fi - 0.5 * (q_bar + 1) * gi2
                b = (v * fi + 0.5 * (p_bar - 1) * gi2) / (1 + v * v)
                a = np.where(np.isnan(a), -math.inf, a)
                b = np.where(np.isnan(b), math.inf, b)
                small[j] = min(small[j], float(a.min()))
                large[j] = max(large[j], float(b.max()))

        holds = small >= -tol
        if not holds[0]:
            ok = False
            if small[0] < worst:
                worst, witness = float(small[0]), (i, float(axis[0]))
            consts[f"x_bar_{i}"] = math.nan
            consts[f"K2_{i}"] = math.nan
            continue
        fails = np.flatnonzero(~holds)
        j = int(fails[0]) if len(fails) else len(axis) - 1
        K2 = float(large[j:].max())
        if not math.isfinite(K2):
            ok = False
            k = j + int(np.argmax(large[j:]))
            worst, witness = -math.inf, (i, float(axis[k]))
        consts[f"x_bar_{i}"] = float(axis[j])
        consts[f"x_bar_{i}_bracket_low"] = float(axis[j - 1]) if j > 0 else 0.0
        consts[f"K2_{i}"] = max(K2, 0.0)
        m = float(small[:j].min()) if j > 0 else float(small[0])
        if m < worst:
            worst, witness = m, (i, float(axis[int(np.argmin(small[:max(j, 1)]))]))
    return AssumptionReport("dissipativity", ok, worst, witness, consts, tol)


def check_monotonicity(model: ModelSpec, p: float, n_samples: int = DEFAULT_PAIRS, region=(1e-2, 1e2),
                       seed: int = 0, K3_budget: float | None = None, t: float = 0.0,
                       tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Empirical one-sided Lipschitz constant ``K3``.

    Without a budget the check passes whenever the estimate is finite.
    """
    if not p > 2:
        raise ValueError(f"p must exceed 2, got {p}")
    x, y = _sample_pairs(model.d, region, n_samples, seed)
    diff = x - y
    dist2 = np.sum(diff**2, axis=1)
    keep = dist2 > 0
    x, y, diff, dist2 = x[keep], y[keep], diff[keep], dist2[keep]
    df, dg = _pair_norms(model, x, y, t)
    with np.errstate(all="ignore"):
        ratio = (np.sum(diff * df, axis=1) + 0.5 * (p - 1) * np.sum(dg**2, axis=1)) / dist2
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    i = int(np.argmax(ratio))
    K3 = float(ratio[i])
    if K3_budget is None:
        margin = 0.0 if math.isfinite(K3) else -math.inf
    else:
        margin = float(K3_budget) - K3
    consts = {"K3": K3}
    if K3_budget is not None:
        consts["K3_budget"] = float(K3_budget)
    return AssumptionReport("monotonicity", True, margin, (x[i].tolist(), y[i].tolist()), consts, tol)


def check_exponents(model: ModelSpec, p_bar: float, q_bar: float, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Arithmetic side conditions linking the moment exponents to the growth rates."""
    margins = {
        "p_bar - 2(alpha+1)": p_bar - 2 * (model.alpha + 1),
        "q_bar - 2 beta": q_bar - 2 * model.beta,
        "p_bar + q_bar - gamma": p_bar + q_bar - model.gamma,
    }
    name = min(margins, key=margins.get)
    return AssumptionReport("exponents", True, margins[name], (name,), dict(margins), tol)
