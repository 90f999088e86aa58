"""Run-configuration loading and validation (TOML or JSON).

A config file supplies defaults; CLI flags override.  Validation happens
before any computation and produces actionable diagnostics; every resolved
value is echoed into output artifacts for reproducibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .estimator import MCParams, ProbeFunction, make_probe
from .fields import FieldSpec, UnknownFamilyError, gauge_shift, make_field_spec, make_gauge
from .lattice import Lattice, LatticeError
from .specfun import MassDim


class ConfigError(ValueError):
    """Invalid run configuration; the message carries the offending key."""


_TOP_KEYS = {
    "command", "mass", "dim", "seed", "x", "time",
    "field", "potential", "gauge", "lattice", "mc", "probe",
    "output", "csv", "variant", "suite", "kinetic",
}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    try:
        return tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None


def _expect(cfg: dict, key: str, types, default=None):
    val = cfg.get(key, default)
    if val is not None and not isinstance(val, types):
        raise ConfigError(f"config key {key!r} must be {types}, got {type(val).__name__}")
    return val


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration root must be a table/object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}; known: {sorted(_TOP_KEYS)}")
    _expect(cfg, "mass", (int, float))
    _expect(cfg, "dim", int)
    _expect(cfg, "seed", int)
    _expect(cfg, "time", (int, float))
    for section in ("field", "potential", "gauge", "lattice", "mc", "probe"):
        sec = _expect(cfg, section, dict)
        if sec is not None and "family" not in sec and section in ("field", "potential", "gauge", "probe"):
            raise ConfigError(f"config section {section!r} needs a 'family' key")
    if "mass" in cfg and cfg["mass"] < 0:
        raise ConfigError("mass must be >= 0")
    if "dim" in cfg and cfg["dim"] < 1:
        raise ConfigError("dim must be >= 1")
    if "time" in cfg and cfg["time"] is not None and cfg["time"] <= 0:
        raise ConfigError("time must be > 0")
    return cfg


@dataclass
class Resolved:
    """Fully resolved run inputs plus the echoable configuration."""

    md: MassDim
    fs: FieldSpec
    probe: ProbeFunction | None
    lattice: Lattice | None
    mc: MCParams
    x: list
    t: float | None
    seed: int
    kinetic: str
    config: dict = field(default_factory=dict)


def resolve(cfg: dict) -> Resolved:
    """Build the numerical objects a command needs from a validated config."""
    cfg = validate_config(dict(cfg))
    d = int(cfg.get("dim", 1))
    m = float(cfg.get("mass", 1.0))
    md = MassDim(m, d)

    fsec = cfg.get("field") or {"family": "zero"}
    psec = cfg.get("potential") or {"family": "zero"}
    try:
        fs = make_field_spec(
            fsec["family"], psec["family"], d=d,
            field_params=fsec.get("params") or {},
            potential_params=psec.get("params") or {},
        )
        gsec = cfg.get("gauge")
        if gsec:
            fs = gauge_shift(fs, make_gauge(gsec["family"], d, **(gsec.get("params") or {})))
    except UnknownFamilyError as exc:
        raise ConfigError(str(exc)) from None
    except TypeError as exc:
        raise ConfigError(f"bad family parameters: {exc}") from None

    lat = None
    lsec = cfg.get("lattice")
    if lsec is not None:
        try:
            lat = Lattice(d, int(lsec.get("n", 64)), float(lsec.get("box", 20.0)))
        except LatticeError as exc:
            raise ConfigError(str(exc)) from None

    msec = cfg.get("mc") or {}
    mc = MCParams(
        n_paths=int(msec.get("paths", 100_000)),
        n_slices=int(msec.get("slices", 64)),
        eps_cut=float(msec.get("cutoff", 0.1)),
        fine_per_slice=int(msec.get("fine_per_slice", 8)),
        sampler=msec.get("sampler", "subordinated"),
        action=msec.get("action", "sliced"),
        chunk=int(msec.get("chunk", 4096)),
        control_factor=int(msec.get("control_factor", 2)),
    )
    try:
        mc.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    probe = None
    prsec = cfg.get("probe")
    if prsec is not None:
        try:
            probe = make_probe(prsec["family"], d, **(prsec.get("params") or {}))
        except KeyError as exc:
            raise ConfigError(f"unknown probe family: {exc}") from None

    x = cfg.get("x", 0.0)
    x = [float(v) for v in (x if isinstance(x, (list, tuple)) else [x] * d)]
    if len(x) != d:
        raise ConfigError(f"x must have {d} components, got {len(x)}")

    t = cfg.get("time")
    echo = {
        "mass": m,
        "dim": d,
        "seed": int(cfg.get("seed", 0)),
        "x": x,
        "time": t,
        "field": {"family": fsec["family"], "params": fsec.get("params") or {}},
        "potential": {"family": psec["family"], "params": psec.get("params") or {}},
        "gauge": cfg.get("gauge"),
        "lattice": lsec,
        "kinetic": cfg.get("kinetic", "spectral"),
        "mc": {
            "paths": mc.n_paths,
            "slices": mc.n_slices,
            "cutoff": mc.eps_cut,
            "fine_per_slice": mc.fine_per_slice,
            "sampler": mc.sampler,
            "action": mc.action,
            "chunk": mc.chunk,
            "control_factor": mc.control_factor,
        },
        "probe": prsec,
    }
    return Resolved(
        md=md,
        fs=fs,
        probe=probe,
        lattice=lat,
        mc=mc,
        x=x,
        t=float(t) if t is not None else None,
        seed=int(cfg.get("seed", 0)),
        kinetic=cfg.get("kinetic", "spectral"),
        config=echo,
    )
