from __future__ import annotations

import math

import numpy as np
import pytest

from pptem.assumptions import (
    AssumptionReport,
    check_dissipativity,
    check_exponents,
    check_lipschitz_growth,
    check_monotonicity,
)
from pptem.core import ModelSpec
from pptem.models import ginzburg_landau, sirs_periodic


def _scalar(f, g=None, alpha=2.0, beta=0.5, K1=1.0):
    g = g or (lambda x: np.zeros_like(x))
    return ModelSpec("toy", 1, 1, lambda x, t: f(x), lambda x, t: g(x)[..., None], alpha, beta, K1)


def test_report_pass_tracks_margin():
    assert not AssumptionReport("x", True, -1.0).passed
    assert AssumptionReport("x", True, -1e-12).passed
    assert not AssumptionReport("x", True, math.nan).passed


def test_gl_dissipativity_threshold():
    rep = check_dissipativity(ginzburg_landau(), p_bar=4, q_bar=0.05)
    assert rep.passed
    lo, hi = rep.estimated_constants["x_bar_0_bracket_low"], rep.estimated_constants["x_bar_0"]
    assert lo <= math.sqrt(0.375) <= hi


def test_gl_dissipativity_fails_for_larger_q():
    rep = check_dissipativity(ginzburg_landau(), p_bar=4, q_bar=0.1)
    assert not rep.passed
    assert rep.worst_margin < 0


def test_exponential_growth_dissipativity_trivial_case():
    rep = check_dissipativity(_scalar(lambda x: x), p_bar=2, q_bar=1)
    assert rep.passed
    assert rep.estimated_constants["K2_0"] <= 1.0


def test_sirs_dissipativity_is_a_report():
    rep = check_dissipativity(sirs_periodic(), p_bar=4, q_bar=0.5, grid=(1e-2, 1e2, 16), other_points=4)
    assert isinstance(rep.passed, bool)
    assert set(rep.estimated_constants) >= {"x_bar_0", "K2_0"}


def test_lipschitz_gl_stabilises():
    gl = ginzburg_landau()
    a = check_lipschitz_growth(gl, (0.01, 100), 2000, seed=1).estimated_constants["K1"]
    b = check_lipschitz_growth(gl, (0.01, 100), 20000, seed=1).estimated_constants["K1"]
    assert math.isfinite(b) and b <= 1.2 * a + 1e-9


def test_lipschitz_linear_bounded_by_norm():
    rep = check_lipschitz_growth(_scalar(lambda x: -3.0 * x), (0.01, 100), 5000)
    assert rep.estimated_constants["K1"] <= 3.0 + 1e-9


def test_lipschitz_exponential_fails_on_wide_box():
    model = _scalar(np.exp, K1=10.0)
    narrow = check_lipschitz_growth(model, (0.01, 2), 2000)
    wide = check_lipschitz_growth(model, (0.01, 100), 2000)
    assert wide.estimated_constants["K1"] > 1e10 * narrow.estimated_constants["K1"]
    assert not wide.passed


def test_lipschitz_needs_enough_samples():
    with pytest.raises(ValueError):
        check_lipschitz_growth(ginzburg_landau(), n_samples=10)


def test_monotonicity_gl_bound():
    p, lam, sigma = 3.0, 1.0, 5.0
    c = lam + sigma**2 / 2
    rep = check_monotonicity(ginzburg_landau(lam, sigma), p, 5000)
    assert rep.estimated_constants["K3"] <= c + (p - 1) * sigma**2 / 2 + 1e-9


def test_monotonicity_contraction():
    rep = check_monotonicity(_scalar(lambda x: -x), 3.0, 2000)
    assert rep.estimated_constants["K3"] <= -1 + 1e-9


def test_monotonicity_square_fails_budget():
    model = _scalar(lambda x: x**2)
    small = check_monotonicity(model, 3.0, 2000, region=(0.01, 1), K3_budget=10.0)
    wide = check_monotonicity(model, 3.0, 2000, region=(0.01, 100), K3_budget=10.0)
    assert small.passed and not wide.passed
    assert wide.estimated_constants["K3"] > small.estimated_constants["K3"]


def test_checkers_deterministic():
    gl = ginzburg_landau()
    a = check_monotonicity(gl, 3.0, 2000, seed=4)
    b = check_monotonicity(gl, 3.0, 2000, seed=4)
    assert a.estimated_constants == b.estimated_constants


def test_exponent_preconditions():
    gl = ginzburg_landau()
    ok = check_exponents(gl, p_bar=6.0, q_bar=1.0)
    assert ok.passed
    bad = check_exponents(gl, p_bar=4.0, q_bar=1.0)
    assert not bad.passed and bad.witness == ("p_bar - 2(alpha+1)",)
