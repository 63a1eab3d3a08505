"""Run configuration: parsing, validation, canonical hashing.

Configs are plain ``key = value`` text with ``#`` comments.  Unknown keys,
type mismatches and invariant violations are hard errors that name the
offending key and rule — a run must never start from a half-understood
config.  The canonical hash covers every effective (defaulted or not) value,
so identical hashes mean identical runs.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, fields as dc_fields

from .errors import ConfigError

_NONLINEARITIES = ("z4", "z5", "cos_z3")


@dataclass
class SolverConfig:
    """Everything a pipeline run depends on.

    forcing is either "mode" specs 'j:n1[,n2..]:re[:im]' separated by ';',
    or 'random' (drawn with forcing_norm/forcing_sigma from seed).
    """

    d: int = 1
    m: float = 1.0
    omega: float = 1.234
    eps: float = 1e-3
    delta: float = 0.05
    zeta: float = 3.5
    beta: float = 0.05
    theta_link: float = 0.5
    c0: float = 1.5
    rho: float | None = None        # default: the certified partition exponent
    N_diag: int = 1
    J_max: int = 16
    N_max: int = 3
    nonlinearity: str = "z4"
    forcing: str = "1:1:1.0"
    forcing_norm: float = 1.0
    forcing_sigma: float = 2.0
    sigma: float = 2.0
    tol_step: float = 1e-10
    k_max: int = 12
    omega_grid: float = 1e-3
    seed: int = 0

    def hash(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in dc_fields(self)]
        return hashlib.sha256("\n".join(sorted(lines)).encode()).hexdigest()[:16]


def _coerce(name: str, raw: str, target_type):
    raw = raw.strip()
    try:
        if target_type is int:
            v = int(raw)
        elif target_type is float:
            v = float(raw)
        else:
            return raw
    except ValueError:
        raise ConfigError(
            f"key '{name}': cannot parse {raw!r} as {target_type.__name__}") from None
    return v


def parse_config(text: str) -> SolverConfig:
    """Parse and validate key = value text into a SolverConfig."""
    cfg = SolverConfig()
    types = {f.name: f.type for f in dc_fields(SolverConfig)}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add(key)
        ann = types[key]
        if key == "rho":
            setattr(cfg, key, None if val.strip().lower() in ("none", "auto")
                    else _coerce(key, val, float))
            continue
        if ann in ("int", int):
            setattr(cfg, key, _coerce(key, val, int))
        elif ann in ("float", float):
            setattr(cfg, key, _coerce(key, val, float))
        else:
            setattr(cfg, key, val.strip())
    validate_config(cfg)
    return cfg


def validate_config(cfg: SolverConfig) -> None:
    """Enforce every standing invariant, naming the violated rule."""
    def bad(rule: str):
        raise ConfigError(f"config invariant violated: {rule}")

    if cfg.d < 1:
        bad(f"d >= 1 (got {cfg.d})")
    if cfg.m <= 0:
        bad(f"m > 0 (got {cfg.m})")
    if not (1.0 <= cfg.omega <= 2.0):
        bad(f"omega in [1, 2] (got {cfg.omega})")
    if cfg.eps < 0:
        bad(f"eps >= 0 (got {cfg.eps})")
    if cfg.delta <= 0:
        bad(f"delta > 0 (got {cfg.delta})")
    if cfg.eps > cfg.delta**2:
        bad(f"eps <= delta**2 (got eps={cfg.eps}, delta**2={cfg.delta**2})")
    if not (0.0 < cfg.beta < 0.1):
        bad(f"beta in (0, 1/10) (got {cfg.beta})")
    if cfg.rho is not None and not (0.0 < cfg.rho < cfg.beta):
        bad(f"rho in (0, beta) (got {cfg.rho})")
    if cfg.c0 <= 0:
        bad(f"c0 > 0 (got {cfg.c0})")
    if cfg.J_max < 1 or cfg.N_max < 1:
        bad(f"J_max, N_max >= 1 (got {cfg.J_max}, {cfg.N_max})")
    if cfg.nonlinearity not in _NONLINEARITIES:
        bad(f"nonlinearity in {_NONLINEARITIES} (got '{cfg.nonlinearity}')")
    if cfg.tol_step <= 0:
        bad(f"tol_step > 0 (got {cfg.tol_step})")
    if cfg.k_max < 1:
        bad(f"k_max >= 1 (got {cfg.k_max})")
    if cfg.N_diag < 0:
        bad(f"N_diag >= 0 (got {cfg.N_diag})")
    if cfg.omega_grid <= 0:
        bad(f"omega_grid > 0 (got {cfg.omega_grid})")
    zeta_floor = cfg.beta * cfg.d + cfg.d / 2.0 + 2.0
    if cfg.zeta <= zeta_floor:
        warnings.warn(
            f"zeta={cfg.zeta} does not exceed beta*d + d/2 + 2 = {zeta_floor:.3f}; "
            "the excluded-measure bound degrades at this setting", stacklevel=2)


def parse_forcing_modes(spec: str, d: int):
    """Parse 'j:n1[,n2..]:re[:im]' mode groups separated by ';'."""
    out = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = [b.strip() for b in part.split(":")]
        if len(bits) not in (3, 4):
            raise ConfigError(
                f"forcing mode {part!r}: expected j:n1[,n2..]:re[:im]")
        try:
            j = int(bits[0])
            n = tuple(int(s) for s in bits[1].split(","))
            re = float(bits[2])
            im = float(bits[3]) if len(bits) == 4 else 0.0
        except ValueError:
            raise ConfigError(f"forcing mode {part!r}: malformed numbers") from None
        if len(n) != d:
            raise ConfigError(
                f"forcing mode {part!r}: spatial index has {len(n)} components, "
                f"expected d={d}")
        out.append((j, n, complex(re, im)))
    if not out:
        raise ConfigError(f"forcing spec {spec!r} contains no modes")
    return out
