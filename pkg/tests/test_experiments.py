from __future__ import annotations

import math

import numpy as np
import pytest

from pptem.core import ModelSpec
from pptem.experiments import (
    ConvergenceConfig,
    MomentDiagnosticConfig,
    build_error_table,
    fit_order,
    increment_scaling_diagnostic,
    moment_diagnostic,
    positivity_stats,
    positivity_table,
    rms_error,
    run_convergence,
    run_convergence_study,
)
from pptem.models import brownian_motion, cev, cev_lamperti, get_model, ginzburg_landau
from pptem.truncation import TruncationPolicy

PUBLISHED_ROW = (0.4538, 0.2570, 0.1417, 0.0897, 0.0568)
LADDER = tuple(2.0**-k for k in (8, 9, 10, 11, 12))


def test_rms_examples():
    assert rms_error([[1.0], [2.0]], [[1.0], [2.0]]) == 0.0
    assert rms_error([[0.3], [0.4]], [[0.0], [0.0]]) == pytest.approx(0.3535533906, abs=1e-10)
    assert math.isnan(rms_error([[np.nan], [1.0]], [[0.0], [0.0]]))


def test_rms_permutation_invariant():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    perm = rng.permutation(50)
    assert rms_error(a, b) == pytest.approx(rms_error(a[perm], b[perm]), rel=1e-14)


def test_fit_order_exact_power_law():
    deltas = [2.0**-k for k in range(3, 10)]
    slope, icpt = fit_order([3.0 * d**0.5 for d in deltas], deltas)
    assert slope == pytest.approx(0.5, abs=1e-12)
    assert icpt == pytest.approx(math.log2(3.0), abs=1e-12)


def test_fit_order_two_points():
    slope, _ = fit_order([0.8, 0.5], [0.1, 0.05])
    assert slope == pytest.approx(math.log2(0.8 / 0.5), rel=1e-12)


def test_fit_order_published_row_against_polyfit():
    oracle = np.polyfit(np.log2(LADDER), np.log2(PUBLISHED_ROW), 1)[0]
    slope, _ = fit_order(PUBLISHED_ROW, LADDER)
    assert slope == pytest.approx(oracle, rel=1e-12)
    assert slope == pytest.approx(0.7515, abs=5e-4)


@pytest.mark.parametrize("errors", [[0.1, 0.0], [0.1, -1.0], [0.1, np.nan]])
def test_fit_order_rejects_bad_values(errors):
    with pytest.raises(ValueError):
        fit_order(errors, [0.1, 0.05])


def test_error_table_excludes_nan_rows():
    t = build_error_table(LADDER, [math.nan, 0.25, 0.14, 0.09, 0.057], [3, 0, 0, 0, 0])
    assert t.n_excluded == 1
    assert [r.delta for r in t.rows] == sorted(LADDER, reverse=True)
    assert math.isfinite(t.fitted_order)


def test_config_invariants():
    gl = ginzburg_landau()
    with pytest.raises(ValueError):
        ConvergenceConfig(gl, (1.0,), test_deltas=(3 * 2.0**-14,), M=10)
    with pytest.raises(ValueError):
        ConvergenceConfig(gl, (1.0,), T=1.0 + 2.0**-20, M=10)
    with pytest.raises(ValueError):
        ConvergenceConfig(gl, (1.0, 2.0), M=10)


def test_coupling_reference_and_coarse_runs_share_brownian_path():
    # with a noise-only model every scheme reproduces B(T) exactly
    bm = brownian_motion(1)
    cfg = ConvergenceConfig(bm, (1.0,), "em", M=64, test_deltas=LADDER, positive_domain=False)
    res = run_convergence(cfg)
    assert np.max(res.squared_errors) < 1e-24


def test_ou_known_order_one():
    from pptem.models import ornstein_uhlenbeck, ou_exact_terminal

    cfg = ConvergenceConfig(ornstein_uhlenbeck(), (1.0,), "em", M=1000, master_seed=1,
                            positive_domain=False, exact_solution=ou_exact_terminal)
    assert run_convergence_study(cfg).fitted_order == pytest.approx(1.0, abs=0.1)


def test_worker_count_does_not_change_results():
    gl = ginzburg_landau()
    base = dict(model=gl, x0=(1.0,), M=300, master_seed=5, test_deltas=(2.0**-8, 2.0**-9), ref_delta=2.0**-11,
                batch_size=64)
    a = run_convergence_study(ConvergenceConfig(**base, workers=1))
    b = run_convergence_study(ConvergenceConfig(**base, workers=3))
    assert [r.rms_error for r in a.rows] == [r.rms_error for r in b.rows]


def test_positivity_cev_em_and_pptem():
    model = cev()
    em = positivity_stats(model, "em", 0.25, 1.0, 2000, 7, x0=(2.0,))
    assert 5 < em.percent_nonpositive < 20
    lam = get_model("cev_lamperti")
    pp = positivity_stats(lam.spec, "pptem", 0.25, 1.0, 2000, 7, x0=lam.default_x0)
    assert pp.percent_post_clamp == 0.0


def test_positivity_path_counting_at_least_value_counting():
    model = cev()
    v = positivity_stats(model, "em", 0.125, 1.0, 1000, 3, x0=(2.0,), counting="value")
    p = positivity_stats(model, "em", 0.125, 1.0, 1000, 3, x0=(2.0,), counting="path")
    assert p.percent_nonpositive >= v.percent_nonpositive
    with pytest.raises(ValueError):
        positivity_stats(model, "em", 0.125, 1.0, 10, 3, x0=(2.0,), counting="ever")


def test_positivity_table_layout():
    lam = get_model("cev_lamperti")
    rep = positivity_table(cev(), ["em", "tem", "pptem"], [2.0**-k for k in (2, 3, 4, 5)], 1.0, 200, 0, (2.0,),
                           pptem_model=(lam.spec, lam.default_x0, None))
    assert len(rep.rows) == 12
    assert [r.scheme for r in rep.rows[:4]] == ["em"] * 4
    assert rep.get("pptem", 0.25).percent_post_clamp == 0.0


def test_moment_diagnostic_frozen_dynamics():
    frozen = ModelSpec("frozen", 1, 1, lambda x, t: np.zeros_like(x), lambda x, t: np.zeros(x.shape + (1,)), 1.0, 0.5)
    cfg = MomentDiagnosticConfig(p_bar=4, q_bar=1, M=20)
    rep = moment_diagnostic(frozen, "pptem", [2.0**-4, 2.0**-5], 1.0, None, cfg, (1.5,))
    for r in rep.rows:
        assert r.sup_moment == pytest.approx(1.5**4, rel=1e-14)
        assert r.sup_inverse_moment == pytest.approx(1 / 1.5, rel=1e-14)
    assert rep.stable


def test_moment_diagnostic_gl_stable():
    cfg = MomentDiagnosticConfig(p_bar=4, q_bar=1, M=2000)
    rep = moment_diagnostic(ginzburg_landau(), "pptem", [2.0**-k for k in range(6, 11)], 1.0, None, cfg, (1.0,))
    assert rep.stable


def test_moment_diagnostic_flags_lv_em_divergence():
    e = get_model("lotka_volterra_3d")
    cfg = MomentDiagnosticConfig(M=500)
    rep = moment_diagnostic(e.spec, "em", [2.0**-8], 1.0, None, cfg, e.default_x0)
    assert not math.isfinite(rep.rows[0].sup_moment) and not rep.stable


def test_increment_scaling_gl():
    rep = increment_scaling_diagnostic(ginzburg_landau(), 2, [2.0**-k for k in range(5, 9)], 1.0, 500, (1.0,))
    assert 0.8 <= rep.slope <= 1.2


def test_increment_scaling_brownian_exact_variance():
    bm = brownian_motion(1)
    pol = TruncationPolicy(H0=1.0, gamma=1.5, K0_hat=1e6)
    rep = increment_scaling_diagnostic(bm, 2, [2.0**-k for k in range(4, 8)], 1.0, 2000, (10.0,), policy=pol)
    # E|B(t) - B(t_k)|^2 = t - t_k = delta / 2
    np.testing.assert_allclose(rep.moments, [d / 2 for d in rep.deltas], rtol=0.05)
