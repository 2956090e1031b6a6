"""Flat ``key = value`` experiment configuration files."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .fem import StarDomain
from .geometry import BallQuantities, WarpProfile, parse_profile
from .overdetermined import phi_multiple
from .radial import MIN_EXPONENT

KINDS = ("radial", "phi-table", "fem-ball", "fem-star", "classify", "rigidity-sweep")

_COMMON = {"kind", "profile", "n", "p", "quad_tol", "out_dir", "seed"}
_SOLVER = {"N_r", "N_theta", "epsilon", "max_iterations", "energy_tolerance", "damping", "offset"}
ALLOWED = {
    "radial": _COMMON | {"r", "grid_size"},
    "phi-table": _COMMON | {"t_max", "points"},
    "fem-ball": _COMMON | _SOLVER | {"r", "boundary_tol"},
    "fem-star": _COMMON | _SOLVER | {"domain", "n_bins", "sandwich_tol"},
    "classify": _COMMON | {"domain", "f"},
    "rigidity-sweep": _COMMON | _SOLVER | {"R", "k", "lambdas", "n_bins", "workers"},
}
REQUIRED = {
    "radial": {"r"},
    "phi-table": {"t_max"},
    "fem-ball": {"r"},
    "fem-star": {"domain"},
    "classify": {"domain", "f"},
    "rigidity-sweep": set(),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    profile: str
    p: float
    n: int = 2
    quad_tol: float = 1e-10
    out_dir: str = "out"
    seed: int | None = None
    r: float | None = None
    grid_size: int = 1025
    t_max: float | None = None
    points: int = 257
    domain: str | None = None
    f: str | None = None
    N_r: int = 64
    N_theta: int = 128
    epsilon: float = 1e-8
    max_iterations: int = 200
    energy_tolerance: float = 1e-12
    damping: float = 1.0
    offset: float = 0.0
    boundary_tol: float = 0.01
    sandwich_tol: float = 2e-3
    R: float = 1.0
    k: int = 2
    lambdas: tuple = (0.0, 0.1, 0.2, 0.3)
    n_bins: int = 16
    workers: int = 1

    def echo(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key, text):
    kind = _TYPES[key]
    if "int" in kind and "float" not in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    if kind == "tuple":
        return tuple(float(x) for x in text.replace(",", " ").split())
    return text


def _split_spec(text):
    name, _, rest = text.partition(":")
    params = {}
    for item in rest.replace(",", " ").split():
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad parameter {item!r} in {text!r}")
        params[key.strip()] = float(value)
    return name.strip(), params


def parse_domain(text: str, seed: int | None = None) -> StarDomain:
    """Domain from ``"disk: r=0.8"``, ``"fourier: a0=1 c2=0.3 s3=0.1"`` or
    ``"random: a0=1 modes=3 amplitude=0.2"`` (the last needs a seed)."""
    name, params = _split_spec(text)
    if name == "disk":
        if set(params) != {"r"}:
            raise ValueError("disk takes exactly the parameter r")
        return StarDomain.disk(params["r"])
    if name == "fourier":
        a0 = params.pop("a0", None)
        if a0 is None:
            raise ValueError("fourier domains need a0")
        cos, sin = {}, {}
        for key, value in params.items():
            if key[:1] not in "cs" or not key[1:].isdigit() or int(key[1:]) < 1:
                raise ValueError(f"bad Fourier coefficient name {key!r}")
            (cos if key[0] == "c" else sin)[int(key[1:])] = value
        K = max([*cos, *sin, 0])
        return StarDomain(a0, tuple(cos.get(k, 0.0) for k in range(1, K + 1)),
                          tuple(sin.get(k, 0.0) for k in range(1, K + 1)))
    if name == "random":
        if seed is None:
            raise ValueError("random domains need a seed")
        a0 = params.get("a0", 1.0)
        modes = int(params.get("modes", 3))
        amplitude = params.get("amplitude", 0.2)
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1, 1, size=(2, modes)) / np.arange(1, modes + 1) ** 2
        scale = amplitude * a0 / np.abs(coeffs).sum()
        return StarDomain(a0, tuple(scale * coeffs[0]), tuple(scale * coeffs[1]))
    raise ValueError(f"unknown domain form {name!r}; use disk, fourier or random")


def parse_f(text: str, quantities: BallQuantities):
    """``"phi-multiple: linear a=0 b=1"`` and the other whitelisted multiples of phi."""
    head, _, rest = text.partition(":")
    if head.strip() != "phi-multiple":
        raise ValueError(f"unknown f form {head.strip()!r}; use phi-multiple")
    words = rest.split()
    if not words:
        raise ValueError("phi-multiple needs a form name")
    _, params = _split_spec(":" + " ".join(words[1:]))
    return phi_multiple(quantities, words[0], **params)


def _validate(cfg: ExperimentConfig) -> WarpProfile:
    if not cfg.p >= MIN_EXPONENT:
        raise ConfigError(f"p: must be at least {MIN_EXPONENT}")
    try:
        profile = parse_profile(cfg.profile, cfg.n)
    except ValueError as exc:
        raise ConfigError(f"profile: {exc}") from exc
    if cfg.r is not None and not 0 < cfg.r < profile.max_radius:
        raise ConfigError(f"r: must lie in (0, {profile.max_radius})")
    if cfg.grid_size < 17:
        raise ConfigError("grid_size: must be at least 17")
    if cfg.kind.startswith("fem") or cfg.kind == "rigidity-sweep":
        if cfg.n != 2:
            raise ConfigError("n: finite-element experiments need n = 2")
        if cfg.N_r < 4 or cfg.N_theta < 8 or cfg.N_theta % 2:
            raise ConfigError("N_r/N_theta: need N_r >= 4 and even N_theta >= 8")
    if cfg.domain is not None:
        try:
            parse_domain(cfg.domain, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from exc
    if cfg.f is not None:
        try:
            parse_f(cfg.f, None)
        except ValueError as exc:
            raise ConfigError(f"f: {exc}") from exc
    if cfg.kind == "phi-table" and not 0 < cfg.t_max < profile.max_radius:
        raise ConfigError(f"t_max: must lie in (0, {profile.max_radius})")
    if cfg.kind == "rigidity-sweep" and (not cfg.lambdas or cfg.workers < 1):
        raise ConfigError("lambdas/workers: need at least one lambda and one worker")
    return profile


def parse_config(text: str) -> ExperimentConfig:
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
        lines[key] = lineno
    kind = values.get("kind")
    if kind is None:
        raise ConfigError("missing required key 'kind'")
    if kind not in KINDS:
        raise ConfigError(f"kind: invalid kind {kind!r}; choose from {', '.join(KINDS)}")
    for key in values:
        if key not in ALLOWED[kind]:
            raise ConfigError(f"line {lines[key]}: key {key!r} is not used by kind {kind!r}")
    for key in sorted(REQUIRED[kind] | {"profile", "p"}):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def profile_of(cfg: ExperimentConfig) -> WarpProfile:
    return parse_profile(cfg.profile, cfg.n)

