"""One-step integrators and batched path simulation.

Every step function accepts a single state ``(d,)`` with ``dB`` of shape
``(m,)`` or a batch ``(n, d)`` with ``dB`` of shape ``(n, m)``.

EM and TEM evaluate the coefficient formulas wherever they are sent.  A
fractional power of a negative number yields NaN and the path is marked
diverged; with ``domain="cone"`` any state outside the positive cone is
treated that way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec, SchemeKind
from .noise import IncrementGrid
from .truncation import ClampInterval, norm_truncate, pi_delta

DOMAINS = ("formula", "cone")


def _noise_term(G: np.ndarray, dB: np.ndarray) -> np.ndarray:
    if G.ndim == 2:
        return G @ dB
    if G.shape[-1] == 1:
        return G[..., 0] * dB[..., :1]
    return np.einsum("nij,nj->ni", G, dB)


def _mask_cone(x: np.ndarray) -> np.ndarray:
    bad = ~(x > 0)
    if x.ndim == 1:
        return np.full_like(x, np.nan) if bad.any() else x
    rows = bad.any(axis=1)
    if not rows.any():
        return x
    out = x.copy()
    out[rows] = np.nan
    return out


def _euler_increment(model: ModelSpec, x_eval: np.ndarray, delta: float, dB: np.ndarray, t: float) -> np.ndarray:
    return model.f(x_eval, t) * delta + _noise_term(model.g(x_eval, t), np.asarray(dB, dtype=float))


def pptem_step(x_k, delta: float, dB, model: ModelSpec, iv: ClampInterval, t: float = 0.0):
    """Returns ``(x_tilde, x_next)``: the raw Euler iterate and its clamp."""
    x = np.asarray(x_k, dtype=float)
    with np.errstate(all="ignore"):
        x_tilde = x + _euler_increment(model, x, delta, dB, t)
    return x_tilde, pi_delta(x_tilde, iv)


def em_step(x_k, delta: float, dB, model: ModelSpec, t: float = 0.0, domain: str = "formula"):
    x = np.asarray(x_k, dtype=float)
    x_eval = _mask_cone(x) if domain == "cone" else x
    with np.errstate(all="ignore"):
        return x + _euler_increment(model, x_eval, delta, dB, t)


def tem_step(x_k, delta: float, dB, model: ModelSpec, bound: float, t: float = 0.0, domain: str = "formula"):
    """Euler step with coefficients evaluated at the norm-truncated state."""
    x = np.asarray(x_k, dtype=float)
    x_eval = norm_truncate(x, bound)
    if domain == "cone":
        x_eval = _mask_cone(x_eval)
    with np.errstate(all="ignore"):
        return x + _euler_increment(model, x_eval, delta, dB, t)


def one_step_psi(x, delta: float, dB, model: ModelSpec, iv: ClampInterval, t: float = 0.0):
    """Clamp first, then take an Euler step from the clamped point."""
    p = pi_delta(x, iv)
    with np.errstate(all="ignore"):
        return p + _euler_increment(model, p, delta, dB, t)


@dataclass
class Trajectory:
    times: np.ndarray
    pre_clamp: np.ndarray
    post_clamp: np.ndarray
    diverged: bool
    first_nonpositive_step: int | None
    scheme: SchemeKind = SchemeKind.PPTEM

    @property
    def terminal(self) -> np.ndarray:
        return self.post_clamp[-1]


@dataclass
class BatchRun:
    """Per-path outcome of simulating a batch of paths on one grid.

    ``nonpositive_steps`` counts steps ``k = 1..N`` whose monitored iterate
    (pre-clamp for PPTEM, the iterate itself for EM/TEM) is finite with a
    component ``<= 0``.  ``post_nonpositive_steps`` does the same for the
    post-clamp state.  Once a path produces a non-finite value it is frozen
    at NaN and flagged ``diverged``.
    """

    scheme: SchemeKind
    delta: float
    n_steps: int
    terminal: np.ndarray
    diverged: np.ndarray
    left_cone: np.ndarray
    nonpositive_steps: np.ndarray
    post_nonpositive_steps: np.ndarray
    first_nonpositive_step: np.ndarray
    samples: dict = field(default_factory=dict)
    pre_path: np.ndarray | None = None
    post_path: np.ndarray | None = None

    @property
    def failed(self) -> np.ndarray:
        """Paths whose terminal value cannot be compared with a positive reference."""
        return self.diverged | self.left_cone


def run_batch(
    model: ModelSpec,
    scheme,
    delta: float,
    dB: np.ndarray,
    x0,
    iv: ClampInterval | None = None,
    t0: float = 0.0,
    domain: str = "formula",
    record_steps=None,
    record_path: bool = False,
) -> BatchRun:
    """Simulate ``n`` paths driven by increments ``dB`` of shape ``(n, N, m)``."""
    scheme = SchemeKind.parse(scheme)
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")
    dB = np.asarray(dB, dtype=float)
    if dB.ndim != 3 or dB.shape[2] != model.m:
        raise ValueError(f"increments must have shape (n, N, {model.m}), got {dB.shape}")
    n, n_steps, _ = dB.shape
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (n, model.d)))
    if x.shape != (n, model.d):
        raise ValueError(f"initial state has wrong dimension for {model.name}")
    if scheme is not SchemeKind.EM and iv is None:
        raise ValueError(f"{scheme.value} needs a clamp interval")

    diverged = np.zeros(n, dtype=bool)
    left_cone = np.zeros(n, dtype=bool)
    nonpos = np.zeros(n, dtype=np.int64)
    post_nonpos = np.zeros(n, dtype=np.int64)
    first = np.full(n, -1, dtype=np.int64)
    wanted = set(record_steps or ())
    samples = {0: x.copy()} if 0 in wanted else {}
    pre_path = post_path = None
    if record_path:
        pre_path = np.empty((n_steps + 1, n, model.d))
        post_path = np.empty((n_steps + 1, n, model.d))
        pre_path[0] = x
        post_path[0] = x

    for k in range(n_steps):
        t = t0 + k * delta
        step_dB = dB[:, k, :]
        if scheme is SchemeKind.PPTEM:
            monitored, x_next = pptem_step(x, delta, step_dB, model, iv, t)
        elif scheme is SchemeKind.EM:
            x_next = em_step(x, delta, step_dB, model, t, domain)
            monitored = x_next
        else:
            x_next = tem_step(x, delta, step_dB, model, iv.upper, t, domain)
            monitored = x_next

        # a row sum is non-finite iff some component is
        finite = np.isfinite(monitored.sum(axis=1))
        if scheme is SchemeKind.PPTEM:
            finite &= np.isfinite(x_next.sum(axis=1))
        newly = ~finite & ~diverged
        if newly.any():
            diverged |= newly
        hit = finite & (monitored.min(axis=1) <= 0)
        nonpos += hit
        if scheme is not SchemeKind.PPTEM:
            # the monitored iterate is the state itself
            post_nonpos += hit
            left_cone |= hit
        new_first = hit & (first < 0)
        if new_first.any():
            first[new_first] = k + 1
        if diverged.any():
            x_next = np.where(diverged[:, None], np.nan, x_next)
            monitored = np.where(diverged[:, None], np.nan, monitored)
        x = x_next
        if record_path:
            pre_path[k + 1] = monitored
            post_path[k + 1] = x
        if k + 1 in wanted:
            samples[k + 1] = x.copy()

    return BatchRun(
        scheme=scheme,
        delta=float(delta),
        n_steps=n_steps,
        terminal=x,
        diverged=diverged,
        left_cone=left_cone,
        nonpositive_steps=nonpos,
        post_nonpositive_steps=post_nonpos,
        first_nonpositive_step=first,
        samples=samples,
        pre_path=pre_path,
        post_path=post_path,
    )


def simulate_path(
    model: ModelSpec,
    scheme,
    delta: float,
    n_steps: int,
    increments: IncrementGrid,
    x0,
    iv: ClampInterval | None = None,
    t0: float = 0.0,
    domain: str = "formula",
) -> Trajectory:
    scheme = SchemeKind.parse(scheme)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.d,):
        raise ValueError(f"x0 must have shape ({model.d},), got {x0.shape}")
    if not (x0 > 0).all():
        raise ValueError("x0 must lie in the positive cone")
    if increments.m != model.m:
        raise ValueError(f"increments have m={increments.m}, model needs m={model.m}")
    if increments.n_steps < n_steps:
        raise ValueError(f"increments cover {increments.n_steps} steps, {n_steps} requested")
    if not math.isclose(increments.delta, delta, rel_tol=1e-12):
        raise ValueError(f"increment grid has delta={increments.delta}, scheme uses {delta}")
    times = t0 + delta * np.arange(n_steps + 1)
    if n_steps == 0:
        state = x0[None, :].copy()
        return Trajectory(times, state, state.copy(), False, None, scheme)
    run = run_batch(
        model, scheme, delta, increments.values[None, :n_steps, :], x0, iv, t0, domain, record_path=True
    )
    first = int(run.first_nonpositive_step[0])
    return Trajectory(
        times=times,
        pre_clamp=run.pre_path[:, 0, :],
        post_clamp=run.post_path[:, 0, :],
        diverged=bool(run.diverged[0]),
        first_nonpositive_step=first if first >= 0 else None,
        scheme=scheme,
    )
