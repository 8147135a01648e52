"""Monte Carlo drivers: strong-error ladders, positivity tables, moment and
increment diagnostics.

All drivers split the path indices into fixed-size chunks.  A chunk's
numbers depend only on ``(master_seed, path indices, config)``, never on
which worker ran it, and per-path results are reduced in path-index order,
so the output is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ModelSpec, SchemeKind
from .noise import coarsen_values, increment_block
from .schemes import run_batch
from .truncation import TruncationPolicy, clamp_interval

DEFAULT_REF_DELTA = 2.0**-14
DEFAULT_TEST_DELTAS = tuple(2.0**-k for k in (8, 9, 10, 11, 12))


def _chunks(M: int, size: int) -> list[range]:
    return [range(s, min(s + size, M)) for s in range(0, M, size)]


def _map_chunks(fn, chunks, workers: int):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _steps(T: float, delta: float) -> int:
    n = T / delta
    if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
        raise ValueError(f"T={T} is not an integer multiple of delta={delta}")
    return int(round(n))


def _ratio(coarse: float, fine: float) -> int:
    r = coarse / fine
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9 * k or (k & (k - 1)):
        raise ValueError(f"step size {coarse} is not a power-of-two multiple of {fine}")
    return k


def _interval(policy: TruncationPolicy | None, scheme: SchemeKind, delta: float):
    if scheme is SchemeKind.EM:
        return None
    if policy is None:
        raise ValueError(f"{scheme.value} needs a truncation policy")
    return clamp_interval(delta, policy)


# --------------------------------------------------------------------------
# error measurement


def rms_error(terminal_numeric, terminal_reference) -> float:
    """Root-mean-square Euclidean distance between paired terminal states."""
    a = np.asarray(terminal_numeric, dtype=float)
    b = np.asarray(terminal_reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired lists differ in shape: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    if a.shape[0] < 1:
        raise ValueError("need at least one pair")
    sq = np.sum((a - b) ** 2, axis=1)
    return float(np.sqrt(np.mean(sq)))


def fit_order(errors, deltas) -> tuple[float, float]:
    """Least-squares slope and intercept of log2(error) against log2(delta)."""
    e = np.asarray(errors, dtype=float)
    d = np.asarray(deltas, dtype=float)
    if e.shape != d.shape or e.ndim != 1 or e.size < 2:
        raise ValueError("need two equal-length lists with at least two entries")
    if not (np.all(np.isfinite(e)) and np.all(e > 0) and np.all(d > 0)):
        raise ValueError("errors and step sizes must be finite and positive")
    x = np.log2(d)
    y = np.log2(e)
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


@dataclass
class ErrorRow:
    delta: float
    rms_error: float
    diverged_count: int


@dataclass
class ErrorTable:
    rows: list[ErrorRow]
    fitted_order: float
    fit_intercept: float
    n_excluded: int = 0
    metadata: dict = field(default_factory=dict)

    def errors(self) -> list[float]:
        return [r.rms_error for r in self.rows]

    def deltas(self) -> list[float]:
        return [r.delta for r in self.rows]

    def row(self, delta: float) -> ErrorRow:
        for r in self.rows:
            if math.isclose(r.delta, delta, rel_tol=1e-12):
                return r
        raise KeyError(delta)


def build_error_table(deltas, errors, diverged, metadata=None) -> ErrorTable:
    """Sort rows by step size (descending) and fit the order over finite rows."""
    rows = sorted(
        (ErrorRow(float(d), float(e), int(c)) for d, e, c in zip(deltas, errors, diverged)),
        key=lambda r: -r.delta,
    )
    usable = [r for r in rows if math.isfinite(r.rms_error) and r.rms_error > 0]
    if len(usable) >= 2:
        slope, icpt = fit_order([r.rms_error for r in usable], [r.delta for r in usable])
    else:
        slope = icpt = math.nan
    return ErrorTable(rows, slope, icpt, len(rows) - len(usable), dict(metadata or {}))


@dataclass
class ConvergenceConfig:
    """Strong-error study on a dyadic ladder of step sizes.

    ``exact_solution`` replaces the fine-grid reference run when the SDE has
    a known solution; it receives ``(x0, dB_ref, ref_delta, T)`` with
    ``dB_ref`` of shape ``(n, N_ref, m)`` and returns terminal states.
    ``positive_domain`` marks paths that leave the positive cone as failed.
    """

    model: ModelSpec
    x0: tuple
    scheme: SchemeKind = SchemeKind.PPTEM
    T: float = 1.0
    ref_delta: float = DEFAULT_REF_DELTA
    test_deltas: tuple = DEFAULT_TEST_DELTAS
    M: int = 100_000
    master_seed: int = 0
    policy: TruncationPolicy | None = None
    domain: str = "formula"
    positive_domain: bool = True
    exact_solution: Callable | None = None
    batch_size: int = 1024
    workers: int = 1
    model_name: str = ""

    def __post_init__(self):
        self.scheme = SchemeKind.parse(self.scheme)
        if self.M < 1:
            raise ValueError("M must be at least 1")
        self.n_ref = _steps(self.T, self.ref_delta)
        self.factors = [_ratio(d, self.ref_delta) for d in self.test_deltas]
        for d in self.test_deltas:
            _steps(self.T, d)
        if self.policy is None and self.scheme is not SchemeKind.EM:
            self.policy = TruncationPolicy.for_model(self.model)
        if np.asarray(self.x0).shape != (self.model.d,):
            raise ValueError(f"x0 must have {self.model.d} components")

    def describe(self) -> dict:
        meta = {
            "model": self.model_name or self.model.name,
            "scheme": self.scheme.value,
            "seed": self.master_seed,
            "M": self.M,
            "T": self.T,
            "ref_delta": self.ref_delta,
            "x0": list(self.x0),
            "domain": self.domain,
            "reference": "exact" if self.exact_solution else f"{self.scheme.value}@ref_delta",
        }
        if self.policy is not None:
            meta["policy"] = self.policy.as_dict()
        return meta


def _convergence_chunk(cfg: ConvergenceConfig, paths: range):
    model = cfg.model
    dB = increment_block(cfg.master_seed, paths, cfg.n_ref, model.m, cfg.ref_delta)
    if cfg.exact_solution is not None:
        ref = np.asarray(cfg.exact_solution(np.asarray(cfg.x0, float), dB, cfg.ref_delta, cfg.T), dtype=float)
        ref_failed = ~np.isfinite(ref).all(axis=1)
    else:
        run = run_batch(model, cfg.scheme, cfg.ref_delta, dB, cfg.x0,
                        _interval(cfg.policy, cfg.scheme, cfg.ref_delta), domain=cfg.domain)
        ref = run.terminal
        ref_failed = run.failed if cfg.positive_domain else run.diverged
    sq = np.empty((len(paths), len(cfg.test_deltas)))
    failed = np.empty_like(sq, dtype=bool)
    for j, (delta, factor) in enumerate(zip(cfg.test_deltas, cfg.factors)):
        coarse = dB if factor == 1 else coarsen_values(dB, factor)
        run = run_batch(model, cfg.scheme, delta, coarse, cfg.x0,
                        _interval(cfg.policy, cfg.scheme, delta), domain=cfg.domain)
        with np.errstate(all="ignore"):
            sq[:, j] = np.sum((run.terminal - ref) ** 2, axis=1)
        bad = run.failed if cfg.positive_domain else run.diverged
        failed[:, j] = bad | ref_failed
    return sq, failed


@dataclass
class ConvergenceResult:
    table: ErrorTable
    squared_errors: np.ndarray
    failed: np.ndarray


def run_convergence(cfg: ConvergenceConfig) -> ConvergenceResult:
    parts = _map_chunks(lambda c: _convergence_chunk(cfg, c), _chunks(cfg.M, cfg.batch_size), cfg.workers)
    sq = np.concatenate([p[0] for p in parts])
    failed = np.concatenate([p[1] for p in parts])
    errors = []
    for j in range(len(cfg.test_deltas)):
        if failed[:, j].any():
            errors.append(math.nan)
        else:
            errors.append(float(np.sqrt(np.mean(sq[:, j]))))
    table = build_error_table(cfg.test_deltas, errors, failed.sum(axis=0), cfg.describe())
    return ConvergenceResult(table, sq, failed)


def run_convergence_study(cfg: ConvergenceConfig) -> ErrorTable:
    """Strong-error ladder: one Brownian path per index shared by every grid."""
    return run_convergence(cfg).table


# --------------------------------------------------------------------------
# positivity


@dataclass
class PositivityRow:
    scheme: str
    delta: float
    percent_nonpositive: float
    percent_post_clamp: float
    percent_diverged: float
    counting: str = "value"


@dataclass
class PositivityReport:
    rows: list[PositivityRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def get(self, scheme, delta) -> PositivityRow:
        key = SchemeKind.parse(scheme).value
        for r in self.rows:
            if r.scheme == key and math.isclose(r.delta, delta, rel_tol=1e-12):
                return r
        raise KeyError((key, delta))


COUNTING_MODES = ("value", "path")


def positivity_stats(
    model: ModelSpec,
    scheme,
    delta: float,
    T: float,
    M: int,
    seed: int,
    policy: TruncationPolicy | None = None,
    x0=None,
    counting: str = "value",
    domain: str = "formula",
    batch_size: int = 1024,
    workers: int = 1,
) -> PositivityRow:
    """Percentage of nonpositive iterates over ``M`` paths.

    ``counting="value"`` divides the number of nonpositive iterates
    ``X_1..X_N`` by ``M * N``; ``counting="path"`` counts each path at most
    once.  For PPTEM the pre-clamp iterate is monitored and the post-clamp
    percentage is reported alongside.
    """
    scheme = SchemeKind.parse(scheme)
    if counting not in COUNTING_MODES:
        raise ValueError(f"counting must be one of {COUNTING_MODES}")
    if x0 is None:
        raise ValueError("x0 is required")
    if policy is None and scheme is not SchemeKind.EM:
        policy = TruncationPolicy.for_model(model)
    n_steps = _steps(T, delta)
    iv = _interval(policy, scheme, delta)

    def chunk(paths):
        dB = increment_block(seed, paths, n_steps, model.m, delta)
        run = run_batch(model, scheme, delta, dB, x0, iv, domain=domain)
        return run.nonpositive_steps, run.post_nonpositive_steps, run.diverged

    parts = _map_chunks(chunk, _chunks(M, batch_size), workers)
    pre = np.concatenate([p[0] for p in parts])
    post = np.concatenate([p[1] for p in parts])
    div = np.concatenate([p[2] for p in parts])
    if counting == "value":
        pct = 100.0 * pre.sum() / (M * n_steps)
        pct_post = 100.0 * post.sum() / (M * n_steps)
    else:
        pct = 100.0 * np.count_nonzero(pre) / M
        pct_post = 100.0 * np.count_nonzero(post) / M
    return PositivityRow(scheme.value, float(delta), float(pct), float(pct_post),
                         100.0 * np.count_nonzero(div) / M, counting)


def positivity_table(model: ModelSpec, schemes, deltas, T: float, M: int, seed: int,
                     x0, policy: TruncationPolicy | None = None,
                     pptem_model: tuple[ModelSpec, tuple, TruncationPolicy | None] | None = None,
                     **kwargs) -> PositivityReport:
    """Rows ordered scheme-major, step size descending.

    ``pptem_model`` optionally substitutes ``(model, x0, policy)`` for the
    PPTEM rows, e.g. a transformed equation whose solution maps back
    positively onto the original one.
    """
    report = PositivityReport(metadata={"T": T, "M": M, "seed": seed})
    for s in schemes:
        kind = SchemeKind.parse(s)
        m, x, pol = model, x0, policy
        if kind is SchemeKind.PPTEM and pptem_model is not None:
            m, x, pol = pptem_model
            report.metadata["pptem_model"] = m.name
        for d in sorted(deltas, reverse=True):
            report.rows.append(positivity_stats(m, kind, d, T, M, seed, pol, x, **kwargs))
    return report


# --------------------------------------------------------------------------
# moment diagnostics


@dataclass
class MomentDiagnosticConfig:
    p_bar: float = 4.0
    q_bar: float = 1.0
    n_times: int = 17
    M: int = 10_000
    ratio_bound: float = 2.0
    seed: int = 0
    batch_size: int = 1024

    def __post_init__(self):
        if not self.p_bar > 1:
            raise ValueError(f"p_bar must exceed 1, got {self.p_bar}")
        if not self.q_bar > 0:
            raise ValueError(f"q_bar must be positive, got {self.q_bar}")
        if self.n_times < 2:
            raise ValueError("need at least two sample times")

    def lyapunov(self, x) -> np.ndarray:
        """``sum_i x_i^p_bar + x_i^-q_bar`` row-wise."""
        x = np.asarray(x, dtype=float)
        return np.sum(x**self.p_bar + x ** (-self.q_bar), axis=-1)


@dataclass
class MomentRow:
    delta: float
    sup_moment: float
    sup_inverse_moment: float
    diverged_count: int


@dataclass
class MomentReport:
    rows: list[MomentRow]
    stable: bool
    p_bar: float
    q_bar: float
    ratio_bound: float


def moment_diagnostic(model: ModelSpec, scheme, delta_list, T: float, M: int | None,
                      cfg: MomentDiagnosticConfig, x0, policy: TruncationPolicy | None = None,
                      domain: str = "formula") -> MomentReport:
    """``sup_t E|X(t)|^p_bar`` and ``sup_t E|X(t)|^-q_bar`` per step size."""
    scheme = SchemeKind.parse(scheme)
    M = cfg.M if M is None else M
    deltas = sorted((float(d) for d in delta_list), reverse=True)
    finest = deltas[-1]
    factors = [_ratio(d, finest) for d in deltas]
    n_fine = _steps(T, finest)
    if policy is None and scheme is not SchemeKind.EM:
        policy = TruncationPolicy.for_model(model)
    sample_steps = {}
    for d in deltas:
        n = _steps(T, d)
        if n % (cfg.n_times - 1):
            raise ValueError(f"{cfg.n_times} equally spaced times are not grid points for delta={d}")
        stride = n // (cfg.n_times - 1)
        sample_steps[d] = [i * stride for i in range(cfg.n_times)]

    def chunk(paths):
        dB = increment_block(cfg.seed, paths, n_fine, model.m, finest)
        out = []
        for d, f in zip(deltas, factors):
            coarse = dB if f == 1 else coarsen_values(dB, f)
            run = run_batch(model, scheme, d, coarse, x0, _interval(policy, scheme, d),
                            domain=domain, record_steps=sample_steps[d])
            with np.errstate(all="ignore"):
                norms = np.stack([np.linalg.norm(run.samples[k], axis=1) for k in sample_steps[d]])
                out.append((np.sum(norms**cfg.p_bar, axis=1), np.sum(norms ** (-cfg.q_bar), axis=1),
                            int(run.diverged.sum())))
        return out

    parts = _map_chunks(chunk, _chunks(M, cfg.batch_size), 1)
    rows = []
    for j, d in enumerate(deltas):
        pm = sum(p[j][0] for p in parts) / M
        qm = sum(p[j][1] for p in parts) / M
        div = sum(p[j][2] for p in parts)
        rows.append(MomentRow(d, float(np.max(pm)), float(np.max(qm)), div))
    stable = True
    for a, b in zip(rows, rows[1:]):
        for u, v in ((a.sup_moment, b.sup_moment), (a.sup_inverse_moment, b.sup_inverse_moment)):
            if not (math.isfinite(u) and math.isfinite(v) and u > 0 and v > 0):
                stable = False
            elif max(u / v, v / u) > cfg.ratio_bound:
                stable = False
    if any(not (math.isfinite(r.sup_moment) and math.isfinite(r.sup_inverse_moment)) for r in rows):
        stable = False
    return MomentReport(rows, stable, cfg.p_bar, cfg.q_bar, cfg.ratio_bound)


# --------------------------------------------------------------------------
# increment scaling


@dataclass
class IncrementScalingReport:
    p: float
    deltas: list[float]
    moments: list[float]
    slope: float
    intercept: float

    @property
    def target(self) -> float:
        return self.p / 2.0


def increment_scaling_diagnostic(model: ModelSpec, p: float, delta_list, T: float, M: int,
                                 x0, seed: int = 0, policy: TruncationPolicy | None = None,
                                 scheme=SchemeKind.PPTEM, batch_size: int = 512) -> IncrementScalingReport:
    """Estimate ``E|X(t) - X(t_k)|^p`` at mid-step times from a fine proxy path.

    The proxy runs on half the smallest step size so every mid-step time is
    a grid point.  The estimate averages over all steps ``k`` and paths.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    scheme = SchemeKind.parse(scheme)
    deltas = sorted((float(d) for d in delta_list), reverse=True)
    fine = deltas[-1] / 2.0
    n_fine = _steps(T, fine)
    halves = [_ratio(d / 2.0, fine) for d in deltas]
    if policy is None and scheme is not SchemeKind.EM:
        policy = TruncationPolicy.for_model(model)
    iv = _interval(policy, scheme, fine)

    def chunk(paths):
        dB = increment_block(seed, paths, n_fine, model.m, fine)
        run = run_batch(model, scheme, fine, dB, x0, iv, record_path=True)
        path = run.post_path
        sums = []
        for half in halves:
            starts = path[0:n_fine:2 * half]
            mids = path[half:n_fine:2 * half]
            dist = np.linalg.norm(mids - starts, axis=2) ** p
            sums.append((float(np.sum(dist)), dist.size))
        return sums

    parts = _map_chunks(chunk, _chunks(M, batch_size), 1)
    moments = []
    for j in range(len(deltas)):
        total = sum(pt[j][0] for pt in parts)
        count = sum(pt[j][1] for pt in parts)
        moments.append(total / count)
    slope, icpt = fit_order(moments, deltas)
    return IncrementScalingReport(p, deltas, moments, slope, icpt)
