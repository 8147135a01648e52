from __future__ import annotations

import numpy as np
import pytest

from pptem.core import ModelSpec, SchemeKind, in_positive_cone


def _linear(d=2, m=1):
    return ModelSpec("lin", d, m, lambda x, t: -x, lambda x, t: np.zeros(x.shape + (m,)), 1.0, 0.5)


@pytest.mark.parametrize(
    "x, expected",
    [((1.0, 2.0, 3.0), True), ((1.0, 0.0), False), ((1.0, -1e-300), False), ((np.nan, 1.0), False)],
)
def test_in_positive_cone(x, expected):
    assert in_positive_cone(x) is expected


def test_scheme_parse_accepts_values_and_names():
    assert SchemeKind.parse("em") is SchemeKind.EM
    assert SchemeKind.parse("TEM") is SchemeKind.TEM_NORM
    assert SchemeKind.parse("tem_norm") is SchemeKind.TEM_NORM
    assert SchemeKind.parse(SchemeKind.PPTEM) is SchemeKind.PPTEM
    with pytest.raises(ValueError, match="unknown scheme"):
        SchemeKind.parse("milstein")


def test_single_and_batched_evaluation_agree():
    model = _linear(d=2)
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert model.f(x[0]).shape == (2,)
    assert model.g(x[0]).shape == (2, 1)
    np.testing.assert_array_equal(model.f(x)[1], model.f(x[1]))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dimension"):
        _linear(d=2).f(np.ones(3))


def test_gamma_is_max_of_alpha_and_beta_plus_one():
    m = ModelSpec("m", 1, 1, lambda x, t: x, lambda x, t: x[..., None], alpha=3.0, beta=1.0)
    assert m.gamma == 3.0
    m2 = ModelSpec("m", 1, 1, lambda x, t: x, lambda x, t: x[..., None], alpha=1.0, beta=2.5)
    assert m2.gamma == 3.5


@pytest.mark.parametrize("kw", [dict(d=0), dict(alpha=0.0), dict(beta=-1.0), dict(lipschitz_scale=0.0)])
def test_invalid_spec_rejected(kw):
    base = dict(name="m", d=1, m=1, drift=lambda x, t: x, diffusion=lambda x, t: x[..., None], alpha=1.0, beta=0.5)
    base.update(kw)
    with pytest.raises(ValueError):
        ModelSpec(**base)
