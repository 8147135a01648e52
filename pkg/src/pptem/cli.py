"""Command-line front end.

Config files are INI files read with :mod:`configparser`.  Allowed sections:

``[run]``
    keys shared by every subcommand (model, seed, paths, T, x0, workers,
    output_dir)
``[simulate]``, ``[converge]``, ``[positivity]``, ``[diagnose]``
    keys for that subcommand only
``[params]``
    model parameter overrides, e.g. ``sigma = 3``
``[policy]``
    truncation constants: ``H0``, ``gamma``, ``K0_hat``, ``k_bar``, ``U_hat``

Unknown sections and keys are rejected.  Command-line flags override file
values.  Exit codes: 0 success, 2 configuration error, 3 divergence in
``simulate --strict``.
"""

from __future__ import annotations

import argparse
import configparser
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assumptions import check_dissipativity, check_exponents, check_lipschitz_growth, check_monotonicity
from .core import SchemeKind
from .experiments import (
    DEFAULT_REF_DELTA,
    DEFAULT_TEST_DELTAS,
    ConvergenceConfig,
    MomentDiagnosticConfig,
    moment_diagnostic,
    positivity_table,
    run_convergence_study,
)
from .models import CATALOG, get_model, x_to_lamperti
from .noise import generate_increments
from .output import (
    error_table_body,
    fmt,
    output_dir,
    plot_body,
    positivity_body,
    write_file,
)
from .schemes import simulate_path
from .truncation import TruncationPolicy, clamp_interval

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3
SUBCOMMANDS = ("simulate", "converge", "positivity", "diagnose", "list-models")
POLICY_KEYS = ("H0", "gamma", "K0_hat", "k_bar", "U_hat")
RUN_KEYS = ("model", "seed", "paths", "T", "x0", "workers", "output_dir")
COMMAND_KEYS = {
    "simulate": ("scheme", "delta", "strict"),
    "converge": ("scheme", "deltas", "ref_delta"),
    "positivity": ("schemes", "deltas", "counting"),
    "diagnose": ("p_bar", "q_bar", "p", "samples", "deltas"),
    "list-models": (),
}
DEFAULT_PATHS = {"simulate": 1, "converge": 100_000, "positivity": 100_000, "diagnose": 10_000}
DEFAULT_POSITIVITY_DELTAS = tuple(2.0**-k for k in (2, 3, 4, 5))
DEFAULT_DIAGNOSE_DELTAS = tuple(2.0**-k for k in (6, 7, 8, 9, 10))


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    model: str = ""
    params: dict = field(default_factory=dict)
    schemes: list = field(default_factory=list)
    T: float | None = None
    x0: tuple | None = None
    deltas: tuple = ()
    ref_delta: float = DEFAULT_REF_DELTA
    M: int = 1
    seed: int = 0
    policy: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int = 1
    strict: bool = False
    counting: str = "value"
    p_bar: float = 4.0
    q_bar: float = 1.0
    p: float = 4.0
    samples: int = 10_000


_DELTA_RE = re.compile(r"^2\s*(?:\^|\*\*)\s*(-?\d+)$")


def parse_number(text: str, key: str) -> float:
    text = str(text).strip()
    m = _DELTA_RE.match(text)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse number {text!r}") from None


def parse_list(text: str, key: str) -> tuple[float, ...]:
    items = [s for s in re.split(r"[,\s]+", str(text).strip()) if s]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return tuple(parse_number(s, key) for s in items)


def parse_int(text, key: str) -> int:
    value = parse_number(text, key)
    if value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(value)


def parse_bool(text, key: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _read_file(path: str, subcommand: str) -> tuple[dict, dict, dict]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case (H0, K0_hat)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    allowed = {"run", "params", "policy", *SUBCOMMANDS}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"{path}: unknown section [{section}]; allowed: {sorted(allowed)}")
    values: dict = {}
    for section, keys in (("run", RUN_KEYS), (subcommand, COMMAND_KEYS[subcommand])):
        if not parser.has_section(section):
            continue
        for key, val in parser.items(section):
            if key not in keys:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]; allowed: {list(keys)}")
            values[key] = val
    # other subcommands' sections are validated too, so typos never pass silently
    for other in SUBCOMMANDS:
        if other != subcommand and parser.has_section(other):
            for key, _ in parser.items(other):
                if key not in COMMAND_KEYS[other]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{other}]")
    params = dict(parser.items("params")) if parser.has_section("params") else {}
    policy = dict(parser.items("policy")) if parser.has_section("policy") else {}
    for key in policy:
        if key not in POLICY_KEYS:
            raise ConfigError(f"{path}: unknown key {key!r} in [policy]; allowed: {list(POLICY_KEYS)}")
    return values, params, policy


def _coerce_param(name: str, text, default):
    if isinstance(default, str):
        return str(text)
    if isinstance(default, tuple):
        return parse_list(text, name)
    return parse_number(text, name)


def _split_assignments(items, key: str) -> dict:
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"{key}: expected name=value, got {item!r}")
        out[name.strip()] = val.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pptem", description="Positivity-preserving truncated Euler experiments")
    parser.add_argument("--version", action="version", version=f"pptem {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--model", help="catalog model name")
        p.add_argument("--param", action="append", metavar="NAME=VALUE", help="model parameter override")
        p.add_argument("--policy", action="append", metavar="NAME=VALUE", help="truncation constant override")
        p.add_argument("--seed", help="master seed")
        p.add_argument("--paths", "-M", dest="paths", help="number of Monte Carlo paths")
        p.add_argument("--T", dest="T", help="terminal time")
        p.add_argument("--x0", help="initial state, comma separated")
        p.add_argument("--workers", help="worker threads")
        p.add_argument("--output-dir", dest="output_dir", help="directory for output files")

    p = sub.add_parser("simulate", help="simulate one path and write it")
    common(p)
    p.add_argument("--scheme")
    p.add_argument("--delta")
    p.add_argument("--strict", action="store_const", const="true", default=None,
                   help="exit with status 3 if the path diverges")

    p = sub.add_parser("converge", help="strong-error ladder and fitted order")
    common(p)
    p.add_argument("--scheme")
    p.add_argument("--deltas", help="test step sizes, e.g. 2^-8,2^-9")
    p.add_argument("--ref-delta", dest="ref_delta")

    p = sub.add_parser("positivity", help="percentages of nonpositive iterates")
    common(p)
    p.add_argument("--schemes", help="comma separated, e.g. em,tem,pptem")
    p.add_argument("--deltas")
    p.add_argument("--counting", choices=("value", "path"))

    p = sub.add_parser("diagnose", help="assumption checks and moment diagnostic")
    common(p)
    p.add_argument("--p-bar", dest="p_bar")
    p.add_argument("--q-bar", dest="q_bar")
    p.add_argument("--p", dest="p", help="monotonicity exponent")
    p.add_argument("--samples", help="sample pairs for the sampling checks")
    p.add_argument("--deltas", help="step sizes for the moment diagnostic")

    sub.add_parser("list-models", help="print the model catalog")
    return parser


def parse_config(argv=None) -> RunConfig:
    """Resolve defaults, config file and flags into a :class:`RunConfig`."""
    args = build_parser().parse_args(argv)
    cmd = args.subcommand
    cfg = RunConfig(subcommand=cmd)
    if cmd == "list-models":
        return cfg

    values, params, policy = _read_file(args.config, cmd) if args.config else ({}, {}, {})
    for key in RUN_KEYS + COMMAND_KEYS[cmd]:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    params.update(_split_assignments(args.param, "--param"))
    policy.update(_split_assignments(args.policy, "--policy"))

    model = values.get("model")
    if not model:
        raise ConfigError("no model given (use --model or [run] model)")
    if model not in CATALOG:
        raise ConfigError(f"unknown model {model!r}; available: {', '.join(CATALOG)}")
    cfg.model = model
    defaults = CATALOG[model].default_params
    for name, text in params.items():
        if name not in defaults:
            raise ConfigError(f"unknown parameter {name!r} for {model}; accepted: {sorted(defaults)}")
        cfg.params[name] = _coerce_param(name, text, defaults[name])
    for name, text in policy.items():
        if name not in POLICY_KEYS:
            raise ConfigError(f"unknown policy key {name!r}; allowed: {list(POLICY_KEYS)}")
        cfg.policy[name] = parse_number(text, name)

    cfg.seed = parse_int(values.get("seed", 0), "seed")
    cfg.M = parse_int(values.get("paths", DEFAULT_PATHS[cmd]), "paths")
    if cfg.M < 1:
        raise ConfigError("paths: must be at least 1")
    cfg.workers = parse_int(values.get("workers", 1), "workers")
    if cfg.workers < 1:
        raise ConfigError("workers: must be at least 1")
    if "T" in values:
        cfg.T = parse_number(values["T"], "T")
        if not cfg.T > 0:
            raise ConfigError("T: must be positive")
    if "x0" in values:
        cfg.x0 = parse_list(values["x0"], "x0")
    cfg.output_dir = values.get("output_dir")

    if cmd == "simulate":
        cfg.schemes = [_scheme(values.get("scheme", "pptem"))]
        cfg.deltas = (parse_number(values.get("delta", "2^-8"), "delta"),)
        cfg.strict = parse_bool(values.get("strict", "false"), "strict")
    elif cmd == "converge":
        cfg.schemes = [_scheme(values.get("scheme", "pptem"))]
        cfg.deltas = parse_list(values["deltas"], "deltas") if "deltas" in values else DEFAULT_TEST_DELTAS
        cfg.ref_delta = parse_number(values.get("ref_delta", DEFAULT_REF_DELTA), "ref_delta")
    elif cmd == "positivity":
        cfg.schemes = [_scheme(s) for s in re.split(r"[,\s]+", values.get("schemes", "em,tem,pptem")) if s]
        cfg.deltas = parse_list(values["deltas"], "deltas") if "deltas" in values else DEFAULT_POSITIVITY_DELTAS
        cfg.counting = values.get("counting", "value")
        if cfg.counting not in ("value", "path"):
            raise ConfigError(f"counting: expected value or path, got {cfg.counting!r}")
    elif cmd == "diagnose":
        cfg.p_bar = parse_number(values.get("p_bar", 4.0), "p_bar")
        cfg.q_bar = parse_number(values.get("q_bar", 1.0), "q_bar")
        cfg.p = parse_number(values.get("p", 4.0), "p")
        cfg.samples = parse_int(values.get("samples", 10_000), "samples")
        cfg.deltas = parse_list(values["deltas"], "deltas") if "deltas" in values else DEFAULT_DIAGNOSE_DELTAS
    for d in cfg.deltas + (cfg.ref_delta,):
        if not 0 < d < 1:
            raise ConfigError(f"step sizes must lie in (0, 1), got {d}")
    return cfg


def _scheme(text: str) -> SchemeKind:
    try:
        return SchemeKind.parse(text.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _policy_for(entry, overrides: dict) -> TruncationPolicy:
    merged = dict(entry.policy_defaults, **overrides)
    try:
        return TruncationPolicy.for_model(entry.spec, **merged)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from None


def _entry(cfg: RunConfig):
    entry = get_model(cfg.model, **cfg.params)
    x0 = cfg.x0 if cfg.x0 is not None else entry.default_x0
    if len(x0) != entry.spec.d:
        raise ConfigError(f"x0: {cfg.model} needs {entry.spec.d} components, got {len(x0)}")
    if not all(v > 0 for v in x0):
        raise ConfigError("x0: every component must be positive")
    T = cfg.T if cfg.T is not None else entry.default_T
    return entry, tuple(x0), T


def _metadata(cfg: RunConfig, entry, scheme: str, T: float, policy: TruncationPolicy | None) -> dict:
    meta = {"model": cfg.model, "scheme": scheme, "seed": cfg.seed, "M": cfg.M, "T": T}
    if cfg.params:
        meta["params"] = cfg.params
    if policy is not None:
        meta["policy"] = policy.as_dict()
    return meta


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    entry, x0, T = _entry(cfg)
    scheme, delta = cfg.schemes[0], cfg.deltas[0]
    n = T / delta
    if abs(n - round(n)) > 1e-9 * n:
        raise ConfigError(f"T={T} is not a multiple of delta={delta}")
    n = int(round(n))
    policy = _policy_for(entry, cfg.policy) if scheme is not SchemeKind.EM else None
    iv = clamp_interval(delta, policy) if policy is not None else None
    inc = generate_increments(cfg.seed, 0, n, entry.spec.m, delta)
    traj = simulate_path(entry.spec, scheme, delta, n, inc, x0, iv)
    cols = ["t"] + [f"x{i}" for i in range(entry.spec.d)]
    lines = [",".join(cols)]
    for t, row in zip(traj.times, traj.post_clamp):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
    path = out / f"{entry.short}_{scheme.value}_path.csv"
    meta = _metadata(cfg, entry, scheme.value, T, policy)
    meta["delta"] = delta
    meta["diverged"] = traj.diverged
    write_file(path, "\n".join(lines) + "\n", meta)
    print(f"wrote {path}")
    if traj.diverged:
        print(f"path diverged (first nonpositive step: {traj.first_nonpositive_step})", file=sys.stderr)
        if cfg.strict:
            return EXIT_DIVERGED
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: Path) -> int:
    entry, x0, T = _entry(cfg)
    scheme = cfg.schemes[0]
    policy = _policy_for(entry, cfg.policy) if scheme is not SchemeKind.EM else None
    try:
        conv = ConvergenceConfig(entry.spec, x0, scheme, T=T, ref_delta=cfg.ref_delta, test_deltas=tuple(cfg.deltas),
                                 M=cfg.M, master_seed=cfg.seed, policy=policy, workers=cfg.workers,
                                 model_name=cfg.model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = run_convergence_study(conv)
    meta = _metadata(cfg, entry, scheme.value, T, policy)
    meta["ref_delta"] = cfg.ref_delta
    path = write_file(out / f"{entry.short}_{scheme.value}_convergence.csv", error_table_body(table), meta)
    plot = write_file(out / f"{entry.short}_{scheme.value}_convergence_plot.csv", plot_body(table), meta)
    for r in table.rows:
        print(f"delta={r.delta:.6g}  rms={r.rms_error:.6g}  diverged={r.diverged_count}")
    print(f"fitted order {table.fitted_order:.4f}")
    print(f"wrote {path} and {plot}")
    return EXIT_OK


def cmd_positivity(cfg: RunConfig, out: Path) -> int:
    entry, x0, T = _entry(cfg)
    policy = _policy_for(entry, cfg.policy)
    surrogate = None
    if entry.pptem_surrogate and SchemeKind.PPTEM in cfg.schemes:
        shared = {k: v for k, v in cfg.params.items() if k in CATALOG[entry.pptem_surrogate].default_params}
        sur = get_model(entry.pptem_surrogate, **shared)
        theta = sur.default_params.get("theta")
        sur_x0 = tuple(float(v) for v in x_to_lamperti(np.asarray(x0), theta)) if theta else sur.default_x0
        surrogate = (sur.spec, sur_x0, _policy_for(sur, cfg.policy))
    try:
        report = positivity_table(entry.spec, cfg.schemes, cfg.deltas, T, cfg.M, cfg.seed, x0, policy,
                                  pptem_model=surrogate, counting=cfg.counting, workers=cfg.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    meta = _metadata(cfg, entry, ",".join(s.value for s in cfg.schemes), T, policy)
    meta["counting"] = cfg.counting
    if surrogate is not None:
        meta["pptem_model"] = surrogate[0].name
    path = write_file(out / f"{entry.short}_positivity.csv", positivity_body(report), meta)
    for r in report.rows:
        print(f"{r.scheme:6s} delta={r.delta:.6g}  nonpositive={r.percent_nonpositive:.2f}%")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, out: Path) -> int:
    entry, x0, T = _entry(cfg)
    spec = entry.spec
    reports = [
        check_lipschitz_growth(spec, n_samples=max(cfg.samples, 1000), seed=cfg.seed),
        check_dissipativity(spec, cfg.p_bar, cfg.q_bar),
        check_monotonicity(spec, cfg.p, n_samples=cfg.samples, seed=cfg.seed),
        check_exponents(spec, cfg.p_bar, cfg.q_bar),
    ]
    policy = _policy_for(entry, cfg.policy)
    try:
        moments = moment_diagnostic(spec, SchemeKind.PPTEM, cfg.deltas, T, cfg.M,
                                    MomentDiagnosticConfig(p_bar=cfg.p_bar, q_bar=cfg.q_bar, seed=cfg.seed),
                                    x0, policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lines = ["check,passed,worst_margin,constants"]
    for rep in reports:
        consts = ";".join(f"{k}={fmt(v)}" for k, v in rep.estimated_constants.items())
        lines.append(f"{rep.assumption},{rep.passed},{fmt(rep.worst_margin)},{consts}")
        print(rep.summary())
    for row in moments.rows:
        lines.append(f"moments@{fmt(row.delta)},{moments.stable},{fmt(row.sup_moment)},"
                     f"inverse={fmt(row.sup_inverse_moment)};diverged={row.diverged_count}")
    print(f"moment bounds stable across step sizes: {moments.stable}")
    meta = _metadata(cfg, entry, "pptem", T, policy)
    meta.update(p_bar=cfg.p_bar, q_bar=cfg.q_bar, p=cfg.p)
    path = write_file(out / f"{entry.short}_diagnose.csv", "\n".join(lines) + "\n", meta)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_list_models() -> int:
    for name in CATALOG:
        e = get_model(name)
        params = ", ".join(
            f"{k}={v}" if not isinstance(v, float) else f"{k}={v:g}" for k, v in e.default_params.items()
        )
        x0 = ", ".join(f"{v:g}" for v in e.default_x0)
        print(f"{name:18s} d={e.spec.d} m={e.spec.m} T={e.default_T:g} x0=({x0})  {params}")
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    if cfg.subcommand == "list-models":
        return cmd_list_models()
    try:
        out = output_dir(cfg.output_dir)
    except OSError as exc:
        raise ConfigError(f"output directory: {exc}") from None
    handler = {
        "simulate": cmd_simulate,
        "converge": cmd_converge,
        "positivity": cmd_positivity,
        "diagnose": cmd_diagnose,
    }[cfg.subcommand]
    return handler(cfg, out)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (ConfigError, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"pptem: error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"pptem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
