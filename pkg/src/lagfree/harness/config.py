"""Run configuration: a flat TOML document mapped onto typed objects."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..model import Params, ProfileSpec, make_params
from ..solver import StepConfig


class ConfigError(ValueError):
    pass


# key -> default; None marks a required key
_DEFAULTS: dict[str, Any] = {
    "gamma": None,
    "mu": None,
    "dim": None,
    "profile": "constant",
    "a0": 1.0,
    "parabolic_b": 1.2,
    "bump_base": 1.0,
    "bump_amplitude": 1.0,
    "bump_center": 0.0,
    "bump_width": 0.3,
    "table_r": [],
    "table_rho": [],
    "u0": "zero",
    "u0_slope": 0.0,
    "u0_table_r": [],
    "u0_table_u": [],
    "epsilon": 0.0,
    "cfl": 0.5,
    "dt_max": 1.0,
    "scheme": "semi_implicit",
    "picard_tol": 1e-12,
    "picard_max_iter": 50,
    "n_cells": None,
    "t_end": None,
    "sample_every": 0.1,
    "snapshot_times": [],
    "output_dir": "out",
    "seed": 0,
}

KEYS = tuple(_DEFAULTS)


@dataclass(frozen=True)
class RunConfig:
    params: Params
    profile: ProfileSpec
    step: StepConfig
    n_cells: int
    t_end: float
    sample_every: float = 0.1
    snapshot_times: tuple[float, ...] = ()
    output_dir: Path = Path("out")
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ConfigError(f"n_cells must be an integer >= 8 (got {self.n_cells!r})")
        if not (self.t_end >= 0.0) or not math.isfinite(self.t_end):
            raise ConfigError(f"t_end must be a finite non-negative number (got {self.t_end!r})")
        if not (self.sample_every > 0.0):
            raise ConfigError(f"sample_every must be positive (got {self.sample_every!r})")

    def with_cells(self, n_cells: int, output_dir: Path | None = None) -> "RunConfig":
        doc = dict(self.raw)
        doc["n_cells"] = int(n_cells)
        if output_dir is not None:
            doc["output_dir"] = str(output_dir)
        return from_mapping(doc)


def _profile(doc: dict) -> ProfileSpec:
    kind = doc["profile"]
    if kind == "parabolic":
        shape = {"b": float(doc["parabolic_b"])}
    elif kind == "gaussian-bump":
        shape = {k: float(doc[f"bump_{k}"]) for k in ("base", "amplitude", "center", "width")}
    elif kind == "table":
        shape = {"r": list(doc["table_r"]), "rho": list(doc["table_rho"])}
    else:
        shape = {}
    u0 = doc["u0"]
    if u0 == "linear":
        vel = {"slope": float(doc["u0_slope"])}
    elif u0 == "table":
        vel = {"r": list(doc["u0_table_r"]), "u": list(doc["u0_table_u"])}
    else:
        vel = {}
    return ProfileSpec(kind, shape, float(doc["a0"]), u0, vel, float(doc["epsilon"]))


def from_mapping(mapping: dict) -> RunConfig:
    """Validate a flat key-value mapping and apply defaults."""
    unknown = sorted(set(mapping) - set(_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(k for k, v in _DEFAULTS.items() if v is None and k not in mapping)
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    doc = {k: mapping.get(k, v) for k, v in _DEFAULTS.items()}
    try:
        params = make_params(doc["gamma"], doc["mu"], doc["dim"])
        profile = _profile(doc)
        step = StepConfig(float(doc["cfl"]), float(doc["dt_max"]), str(doc["scheme"]),
                          float(doc["picard_tol"]), doc["picard_max_iter"])
        return RunConfig(
            params=params,
            profile=profile,
            step=step,
            n_cells=doc["n_cells"],
            t_end=float(doc["t_end"]),
            sample_every=float(doc["sample_every"]),
            snapshot_times=tuple(float(t) for t in doc["snapshot_times"]),
            output_dir=Path(doc["output_dir"]),
            seed=int(doc["seed"]),
            raw=doc,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    try:
        mapping = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return from_mapping(mapping)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def to_mapping(cfg: RunConfig) -> dict:
    p, prof, st = cfg.params, cfg.profile, cfg.step
    doc = dict(cfg.raw) if cfg.raw else {k: v for k, v in _DEFAULTS.items() if v is not None}
    doc.update(
        gamma=p.gamma, mu=p.mu, dim=p.dim, profile=prof.kind, a0=prof.a0, u0=prof.u0_kind,
        epsilon=prof.epsilon, cfl=st.cfl, dt_max=st.dt_max, scheme=st.scheme,
        picard_tol=st.picard_tol, picard_max_iter=int(st.picard_max_iter), n_cells=int(cfg.n_cells),
        t_end=cfg.t_end, sample_every=cfg.sample_every, snapshot_times=list(cfg.snapshot_times),
        output_dir=str(cfg.output_dir), seed=cfg.seed,
    )
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in doc.items()}


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_mapping(cfg))
