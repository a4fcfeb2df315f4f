"""Command configurations and their strict JSON loader.

Every dataclass below documents the defaults used when no ``--config`` is
given.  A config file must list every field of its schema: missing or
unknown keys and wrong types raise :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field

from .study import BlowupConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GroundStateConfig:
    dim: int = 1
    tol: float = 1e-6            # relative PDE residual and closed-form error (N=1)
    resolution: float = 1.0      # default-grid resolution factor
    e_crit_tol: float = 1e-6
    gn_tol: float = 1e-6


@dataclass(frozen=True)
class LinopsConfig:
    dim: int = 1
    identity_tol: float = 1e-5
    coarse_resolution: float = 0.5   # refinement study: coarse vs default grid
    min_order: float = 2.0
    samples: int = 100               # random orthogonalized fields
    coercivity_spread: float = 0.2   # relative mu change allowed between grids


@dataclass(frozen=True)
class ProfileConfig:
    dim: int = 1
    sigma: float = 0.25
    residual_tol: float = 1e-7
    solvability_tol: float = 1e-8
    identity_tol: float = 1e-10
    identity_cases: list = field(default_factory=lambda: [[1, 0.1], [1, 0.2], [1, 0.25],
                                                          [2, 0.3], [2, 0.4]])
    eesti_lambdas: list = field(default_factory=lambda: [1e-2, 3e-3, 1e-3])
    eesti_spread: float = 3.0


@dataclass(frozen=True)
class LawConfig:
    dim: int = 1
    sigma: float = 0.25
    E0: float = 0.0
    lambda0: float = 1e-2
    s0: float = 1e3                  # ODE residual window [s0, 10 s0]
    ode_tol: float = 1e-6
    lambert_samples: int = 2000
    lambert_tol: float = 1e-14
    wprop_eps: float = 0.1
    wprop_samples: int = 100
    japp_lambdas: list = field(default_factory=lambda: [1e-4, 1e-6, 1e-8])
    japp_spread: float = 3.0
    roundtrip_tol: float = 1e-8
    energy_levels: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    energy_tol: float = 1e-8


@dataclass(frozen=True)
class ValidationConfig:
    """Explicit-solution run of the unperturbed equation (sigma = 0)."""
    nodes: int = 4096
    r_max: float = 20.0
    t0: float = -0.5
    t1: float = -0.4
    dt: float = 2.5e-5
    error_tol: float = 1e-3
    mass_tol: float = 1e-8
    energy_tol: float = 1e-6
    order_nodes: int = 1024
    order_dts: list = field(default_factory=lambda: [4e-3, 2e-3, 1e-3])
    order_reference_ratio: int = 16
    order_tol: float = 0.2


@dataclass(frozen=True)
class DecomposeCheckConfig:
    dim: int = 1
    sigma: float = 0.25
    samples: int = 100
    lambda_range: list = field(default_factory=lambda: [0.005, 0.08])
    b_range: float = 0.1
    param_tol: float = 1e-8
    ortho_tol: float = 1e-10
    delta: float = 0.5
    h_eps: float = 1e-4
    h_ratio_tol: float = 0.1
    sandwich_samples: int = 100


@dataclass(frozen=True)
class DecomposeConfig:
    delta: float = 0.5
    tol: float = 1e-12
    max_iter: int = 40


@dataclass(frozen=True)
class RateStudyConfig:
    source: str = "decomposition"    # "decomposition" (a mod.csv) or "law" (synthetic)
    input: str = ""                  # decomposition CSV; ignored for "law"
    dim: int = 1
    sigma: float = 0.25
    E0: float = 0.0
    fit_T: bool = True
    transient_factor: float = 1.5    # keep samples with lambda < lambda[0] / factor
    min_decades: float = 1.0
    exponent_tol: float = 0.15
    law_t: list = field(default_factory=lambda: [-1e-5, -1e-11])
    law_samples: int = 40


SCOPES = ("ground-state", "linops", "profile", "law", "simulate", "decompose")

VERIFY_SECTIONS = {
    "ground-state": GroundStateConfig,
    "linops": LinopsConfig,
    "profile": ProfileConfig,
    "law": LawConfig,
    "simulate": ValidationConfig,
    "decompose": DecomposeCheckConfig,
}


def _type_ok(value, tp) -> bool:
    if tp is bool:
        return isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        return ok and math.isfinite(value)
    if tp is str:
        return isinstance(value, str)
    if tp is list:
        return isinstance(value, list)
    return True


def from_mapping(cls, data, where: str = "config"):
    """Build ``cls`` from a mapping that names every field exactly once."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    missing = [n for n in names if n not in data]
    unknown = sorted(set(data) - set(names))
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(missing)}")
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    for n in names:
        if not _type_ok(data[n], hints[n]):
            raise ConfigError(f"{where}.{n}: expected {hints[n].__name__}")
    try:
        return cls(**{n: data[n] for n in names})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def read_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from None


def load(cls, path):
    return from_mapping(cls, read_json(path)) if path else cls()


def load_verify(path, scopes) -> dict:
    """Sections for the requested scopes; a file must carry each of them in full."""
    if not path:
        return {s: VERIFY_SECTIONS[s]() for s in scopes}
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    out = {}
    for s in scopes:
        if s not in data:
            raise ConfigError(f"config: missing section {s}")
        out[s] = from_mapping(VERIFY_SECTIONS[s], data[s], s)
    return out


def as_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def validate_blowup(cfg: BlowupConfig) -> BlowupConfig:
    if cfg.dim < 1 or not (0 < cfg.sigma < 1):
        raise ConfigError("config: dim must be >= 1 and sigma in (0, 1)")
    if cfg.model not in ("A", "B"):
        raise ConfigError("config.model: expected 'A' or 'B'")
    if cfg.snapshots < 4 or cfg.grad_ceiling <= 1:
        raise ConfigError("config: need snapshots >= 4 and grad_ceiling > 1")
    return cfg


__all__ = [
    "ConfigError", "GroundStateConfig", "LinopsConfig", "ProfileConfig", "LawConfig",
    "ValidationConfig", "DecomposeCheckConfig", "DecomposeConfig", "RateStudyConfig",
    "BlowupConfig", "SCOPES", "VERIFY_SECTIONS", "from_mapping", "load", "load_verify",
    "read_json", "as_dict", "config_hash", "validate_blowup",
]
