"""Benchmark SDEs with positive solutions, plus two reference toys.

All coefficient functions are vectorised over a leading batch axis.
Declared growth exponents follow the convention of the local Lipschitz
bound: ``alpha`` is the polynomial growth of the *derivative* of the
coefficients at infinity, ``beta`` its singular growth at the boundary.
Models without a singular term carry a nominal ``beta = 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ModelSpec

NOMINAL_BETA = 0.5


def _col(values: np.ndarray) -> np.ndarray:
    """Shape ``(n, d)`` -> ``(n, d, 1)`` diffusion for scalar noise."""
    return values[..., None]


# --------------------------------------------------------------------------
# scalar models


def cev(kappa: float = 4.0, mu: float = 0.5, xi: float = 1.0, theta: float = 0.55,
        negative_base: str = "nan") -> ModelSpec:
    """Constant-elasticity-of-variance process in its original coordinates.

    ``negative_base`` picks how ``x**theta`` treats a negative iterate of an
    unclamped scheme: ``"nan"`` (the power is undefined, the path diverges)
    or ``"abs"`` (use ``|x|**theta``).
    """
    _check_cev(kappa, mu, xi, theta)
    if negative_base not in ("nan", "abs"):
        raise ValueError(f"negative_base must be 'nan' or 'abs', got {negative_base!r}")

    def drift(x, t):
        return kappa * (mu - x)

    if negative_base == "nan":
        def diffusion(x, t):
            return _col(xi * np.power(x, theta))
    else:
        def diffusion(x, t):
            return _col(xi * np.abs(x) ** theta)

    return ModelSpec(
        name="cev", d=1, m=1, drift=drift, diffusion=diffusion,
        alpha=1.0, beta=1.0 - theta, lipschitz_scale=max(kappa, theta * xi),
        singular=True,
        params=dict(kappa=kappa, mu=mu, xi=xi, theta=theta, negative_base=negative_base),
    )


def cev_lamperti(kappa: float = 4.0, mu: float = 0.5, xi: float = 1.0, theta: float = 0.55) -> ModelSpec:
    """CEV in the coordinate ``Y = X**(1 - theta)``.

    By Ito's formula

        dY = (1-theta) [kappa*mu*Y**(-theta/(1-theta)) - kappa*Y
                        - theta*xi**2/2 * Y**(-1)] dt + (1-theta)*xi dB,

    so the noise becomes additive.
    """
    _check_cev(kappa, mu, xi, theta)
    c = 1.0 - theta
    e = theta / c

    def drift(y, t):
        return c * (kappa * mu * y ** (-e) - kappa * y - 0.5 * theta * xi**2 / y)

    def diffusion(y, t):
        return np.full(y.shape + (1,), c * xi)

    return ModelSpec(
        name="cev_lamperti", d=1, m=1, drift=drift, diffusion=diffusion,
        alpha=1.0, beta=1.0 / c, lipschitz_scale=c * max(kappa * mu * e, kappa, 0.5 * theta * xi**2),
        singular=True, params=dict(kappa=kappa, mu=mu, xi=xi, theta=theta),
    )


def _check_cev(kappa, mu, xi, theta):
    if min(kappa, mu, xi) <= 0:
        raise ValueError("CEV needs kappa, mu, xi > 0")
    if not 0.5 < theta < 1:
        raise ValueError(f"CEV needs theta in (1/2, 1), got {theta}")


def lamperti_to_x(y, theta: float) -> np.ndarray:
    return np.asarray(y, dtype=float) ** (1.0 / (1.0 - theta))


def x_to_lamperti(x, theta: float) -> np.ndarray:
    return np.asarray(x, dtype=float) ** (1.0 - theta)


def ait_sahalia(a_m1: float = 3.0, a0: float = 2.0, a1: float = 1.0, a2: float = 5.0,
                sigma: float = 2.0, r: float = 4.0, rho: float = 2.0, strict: bool = True) -> ModelSpec:
    """Generalised Ait-Sahalia interest-rate model.

    ``strict=False`` skips the parameter constraints so degenerate members of
    the family (such as the Ginzburg-Landau equation) can be built.
    """
    if strict:
        if min(a_m1, a0, a1, a2, sigma) <= 0:
            raise ValueError("Ait-Sahalia needs a_-1, a0, a1, a2, sigma > 0")
        if not (r > 1 and rho > 1):
            raise ValueError(f"Ait-Sahalia needs r, rho > 1, got r={r}, rho={rho}")
        if not r + 1 > 2 * rho:
            raise ValueError(f"Ait-Sahalia needs r + 1 > 2 rho, got r={r}, rho={rho}")

    def drift(x, t):
        return a_m1 / x - a0 + a1 * x - a2 * x**r

    def diffusion(x, t):
        return _col(sigma * x**rho)

    return ModelSpec(
        name="ait_sahalia", d=1, m=1, drift=drift, diffusion=diffusion,
        alpha=max(max(r, rho) - 1.0, 1.0), beta=2.0,
        lipschitz_scale=max(a_m1, a1, a2 * r, sigma * rho),
        singular=a_m1 != 0,
        params=dict(a_m1=a_m1, a0=a0, a1=a1, a2=a2, sigma=sigma, r=r, rho=rho),
    )


def ginzburg_landau(lam: float = 1.0, sigma: float = 5.0) -> ModelSpec:
    if lam < 0 or sigma < 0:
        raise ValueError("Ginzburg-Landau needs lambda, sigma >= 0")
    lin = lam + 0.5 * sigma**2

    def drift(x, t):
        return -(x**3) + lin * x

    def diffusion(x, t):
        return _col(sigma * x)

    return ModelSpec(
        name="ginzburg_landau", d=1, m=1, drift=drift, diffusion=diffusion,
        alpha=2.0, beta=NOMINAL_BETA, lipschitz_scale=max(lin, 3.0, sigma),
        params=dict(lam=lam, sigma=sigma),
    )


# --------------------------------------------------------------------------
# three-dimensional models


def lotka_volterra_3d(c=(50.0, 30.0, 20.0), a_diag=(-55.0, -10.0, -15.0),
                      sigma=(7.0, 2.0, 5.0)) -> ModelSpec:
    """Competitive Lotka-Volterra system driven by one scalar Brownian motion."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_diag, dtype=float)
    s = np.asarray(sigma, dtype=float)

    def drift(x, t):
        return x * (c + a * x)

    def diffusion(x, t):
        sx = np.sin(x)
        cx = np.cos(x[:, :2])
        total = x.sum(axis=1)
        zeta = np.empty_like(x)
        zeta[:, 0] = sx.sum(axis=1) / (1.0 + total)
        zeta[:, 1] = total / (1.0 + total**2)
        zeta[:, 2] = cx.sum(axis=1) / (1.0 + x[:, 2] ** 2)
        return _col(x * (s + zeta))

    return ModelSpec(
        name="lotka_volterra_3d", d=3, m=1, drift=drift, diffusion=diffusion,
        alpha=1.0, beta=NOMINAL_BETA, lipschitz_scale=float(max(np.abs(c).max(), 2 * np.abs(a).max(), s.max() + 3)),
        params=dict(c=tuple(c), a_diag=tuple(a), sigma=tuple(s)),
    )


def lv_drift_jacobian(x, c=(50.0, 30.0, 20.0), a_diag=(-55.0, -10.0, -15.0)) -> np.ndarray:
    """Analytic Jacobian of the Lotka-Volterra drift, ``diag(c + 2 a x)``."""
    x = np.asarray(x, dtype=float)
    return np.diag(np.asarray(c) + 2.0 * np.asarray(a_diag) * x)


def sirs(mu_fn: Callable[[float], float], xi_fn: Callable[[float], float],
         gamma_fn: Callable[[float], float], sigma: float = 1.0, params: dict | None = None) -> ModelSpec:
    """Non-autonomous SIRS epidemic model with time-varying rates."""
    if sigma <= 0:
        raise ValueError("SIRS needs sigma > 0")

    def drift(x, t):
        mu, xi, gam = mu_fn(t), xi_fn(t), gamma_fn(t)
        S, I, R = x[:, 0], x[:, 1], x[:, 2]
        inf = xi * S * I
        return np.stack([mu - mu * S - inf, inf - (mu + gam) * I, gam * I - mu * R], axis=1)

    def diffusion(x, t):
        S, I = x[:, 0], x[:, 1]
        v = sigma * S * I
        return _col(np.stack([-v, v, np.zeros_like(v)], axis=1))

    return ModelSpec(
        name="sirs", d=3, m=1, drift=drift, diffusion=diffusion,
        alpha=1.0, beta=1.0, lipschitz_scale=4.0, time_dependent=True,
        params=dict(params or {}, sigma=sigma),
    )


def sirs_periodic(mu0=1.0, mu1=0.3, xi0=2.0, xi1=1.0, gamma0=0.6, gamma1=0.1,
                  omega=np.pi, sigma=1.0) -> ModelSpec:
    """SIRS with ``mu = mu0 + mu1 cos(wt)``, ``xi = xi0 + xi1 sin(wt)``,
    ``gamma = gamma0 + gamma1 sin(wt)``."""
    return sirs(
        lambda t: mu0 + mu1 * np.cos(omega * t),
        lambda t: xi0 + xi1 * np.sin(omega * t),
        lambda t: gamma0 + gamma1 * np.sin(omega * t),
        sigma,
        params=dict(mu0=mu0, mu1=mu1, xi0=xi0, xi1=xi1, gamma0=gamma0, gamma1=gamma1, omega=omega),
    )


def hiv_aids(N: float = 1.0, mu1: float = 0.5, mu2: float = 0.4, xi: float = 0.5,
             gamma: float = 0.3, sigma: float = 1.0) -> ModelSpec:
    if min(N, mu1, mu2, xi, gamma, sigma) <= 0:
        raise ValueError("HIV/AIDS model needs all constants > 0")

    def drift(x, t):
        S, I, A = x[:, 0], x[:, 1], x[:, 2]
        inf = xi * S * I
        return np.stack([N - mu1 * S - inf, inf - (mu1 + gamma) * I, gamma * I - (mu1 + mu2) * A], axis=1)

    def diffusion(x, t):
        S, I = x[:, 0], x[:, 1]
        v = sigma * S * I
        return _col(np.stack([-v, v, np.zeros_like(v)], axis=1))

    return ModelSpec(
        name="hiv_aids", d=3, m=1, drift=drift, diffusion=diffusion,
        alpha=1.0, beta=1.0, lipschitz_scale=2.0,
        params=dict(N=N, mu1=mu1, mu2=mu2, xi=xi, gamma=gamma, sigma=sigma),
    )


# --------------------------------------------------------------------------
# reference toys (not positive; used to validate the measurement pipeline)


def brownian_motion(d: int = 1) -> ModelSpec:
    """``dX = dB`` with ``m = d``."""
    eye = np.eye(d)

    def drift(x, t):
        return np.zeros_like(x)

    def diffusion(x, t):
        return np.broadcast_to(eye, x.shape[:-1] + (d, d)).copy()

    return ModelSpec(name="brownian_motion", d=d, m=d, drift=drift, diffusion=diffusion,
                     alpha=1.0, beta=NOMINAL_BETA)


def ornstein_uhlenbeck(rate: float = 1.0, sigma: float = 0.5) -> ModelSpec:
    """``dX = -rate X dt + sigma dB``, whose solution is explicit."""

    def drift(x, t):
        return -rate * x

    def diffusion(x, t):
        return np.full(x.shape + (1,), sigma)

    return ModelSpec(name="ornstein_uhlenbeck", d=1, m=1, drift=drift, diffusion=diffusion,
                     alpha=1.0, beta=NOMINAL_BETA, lipschitz_scale=rate,
                     params=dict(rate=rate, sigma=sigma))


def ou_exact_terminal(x0, dB_fine: np.ndarray, delta_fine: float, T: float,
                      rate: float = 1.0, sigma: float = 0.5) -> np.ndarray:
    """Terminal value of the OU solution given the fine-grid increments.

    The stochastic integral of ``exp(-rate (T - s))`` is replaced by its
    conditional expectation given the fine increments: each ``dB_k`` is
    weighted by the average of the integrand over its step.
    """
    n_steps = dB_fine.shape[1]
    s = delta_fine * np.arange(n_steps + 1)
    edges = np.exp(-rate * (T - s))
    weights = (edges[1:] - edges[:-1]) / (rate * delta_fine)
    x0 = np.asarray(x0, dtype=float)
    return np.exp(-rate * T) * x0 + sigma * np.einsum("k,nkj->nj", weights, dB_fine)


# --------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class ModelCatalogEntry:
    spec: ModelSpec
    default_params: dict
    default_x0: tuple
    default_T: float
    short: str
    benchmarks: tuple = ()
    policy_defaults: dict = field(default_factory=dict)
    pptem_surrogate: str | None = None
    description: str = ""


@dataclass(frozen=True)
class _Recipe:
    factory: Callable[..., ModelSpec]
    default_params: dict
    default_x0: tuple
    default_T: float
    short: str
    benchmarks: tuple
    description: str
    policy_defaults: dict = field(default_factory=dict)
    pptem_surrogate: str | None = None
    x0_transform: Callable | None = None


_CEV_DEFAULTS = dict(kappa=4.0, mu=0.5, xi=1.0, theta=0.55)

CATALOG: dict[str, _Recipe] = {
    "cev": _Recipe(
        cev, dict(_CEV_DEFAULTS, negative_base="nan"), (2.0,), 1.0, "cev",
        ("positivity",), "CEV process, original coordinates",
        pptem_surrogate="cev_lamperti",
    ),
    "cev_lamperti": _Recipe(
        cev_lamperti, dict(_CEV_DEFAULTS), (2.0,), 1.0, "cevl",
        ("convergence", "positivity"), "CEV process in Lamperti coordinates Y = X^(1-theta)",
        x0_transform=lambda x0, p: tuple(x_to_lamperti(x0, p["theta"])),
    ),
    "ait_sahalia": _Recipe(
        ait_sahalia, dict(a_m1=3.0, a0=2.0, a1=1.0, a2=5.0, sigma=2.0, r=4.0, rho=2.0),
        (2.0,), 1.0, "as", ("convergence", "positivity"), "generalised Ait-Sahalia model",
    ),
    "ginzburg_landau": _Recipe(
        ginzburg_landau, dict(lam=1.0, sigma=5.0), (1.0,), 1.0, "gl",
        ("convergence",), "stochastic Ginzburg-Landau equation",
    ),
    "lotka_volterra_3d": _Recipe(
        lotka_volterra_3d, dict(c=(50.0, 30.0, 20.0), a_diag=(-55.0, -10.0, -15.0), sigma=(7.0, 2.0, 5.0)),
        (0.5, 2.0, 1.0), 1.0, "lv", ("convergence", "comparison"),
        "three-species Lotka-Volterra system with one shared noise",
        policy_defaults=dict(K0_hat=100.0),
    ),
    "sirs": _Recipe(
        sirs_periodic, dict(mu0=1.0, mu1=0.3, xi0=2.0, xi1=1.0, gamma0=0.6, gamma1=0.1, omega=float(np.pi), sigma=1.0),
        (3.0, 0.5, 0.5), 1.0, "sirs", ("convergence",), "periodic SIRS epidemic model",
    ),
    "hiv_aids": _Recipe(
        hiv_aids, dict(N=1.0, mu1=0.5, mu2=0.4, xi=0.5, gamma=0.3, sigma=1.0),
        (2.0, 1.0, 1.0), 1.0, "hiv", ("convergence",), "stochastic HIV/AIDS model",
    ),
}


def model_names() -> list[str]:
    return list(CATALOG)


def get_model(name: str, **overrides) -> ModelCatalogEntry:
    """Build a catalog entry, overriding default parameters by keyword."""
    try:
        recipe = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(CATALOG)}") from None
    unknown = set(overrides) - set(recipe.default_params)
    if unknown:
        raise KeyError(
            f"unknown parameter(s) {sorted(unknown)} for {name}; "
            f"accepted: {sorted(recipe.default_params)}"
        )
    params = dict(recipe.default_params, **overrides)
    spec = recipe.factory(**params)
    x0 = recipe.default_x0
    if recipe.x0_transform is not None:
        x0 = recipe.x0_transform(np.asarray(x0), params)
    return ModelCatalogEntry(
        spec=spec,
        default_params=params,
        default_x0=tuple(float(v) for v in x0),
        default_T=recipe.default_T,
        short=recipe.short,
        benchmarks=recipe.benchmarks,
        policy_defaults=dict(recipe.policy_defaults),
        pptem_surrogate=recipe.pptem_surrogate,
        description=recipe.description,
    )
