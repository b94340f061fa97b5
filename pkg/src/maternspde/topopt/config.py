"""Optimization settings and the flat ``key=value`` config file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigurationError, MeshIOError
from ..grf import GrfConfig


@dataclass(frozen=True)
class OptConfig:
    """Heat-sink optimization settings.

    ``load="constant"`` uses a uniform unit heat source; ``load="grf"``
    draws ``n_samples`` Matern fields from ``grf`` once and keeps them fixed.
    With ``symmetrize`` the sample count counts mirrored pairs.
    """

    gamma: float = 0.5
    filter_r: float = 0.02
    p: float = 3.0
    kappa_min: float = 1e-3
    kappa_max: float = 1.0
    n_samples: int = 1
    load: str = "constant"
    grf: GrfConfig | None = None
    beta: float | None = None
    eta_proj: float = 0.5
    symmetrize: bool = False
    max_iters: int = 200
    move_limit: float = 0.2
    dirichlet_length: float = 1.0 / 7.0
    stop_tol: float = 1e-6
    stop_window: int = 10
    solver: str = "direct"
    snapshot_every: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.filter_r < 0:
            raise ConfigurationError("filter_r must be >= 0")
        if self.p < 1:
            raise ConfigurationError("SIMP exponent p must be >= 1")
        if not 0 < self.kappa_min < self.kappa_max:
            raise ConfigurationError("need 0 < kappa_min < kappa_max")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if self.load not in ("constant", "grf"):
            raise ConfigurationError(f"load must be 'constant' or 'grf', got {self.load!r}")
        if self.load == "grf" and self.grf is None:
            raise ConfigurationError("load=grf needs a GrfConfig")
        if self.beta is not None and not self.beta > 0:
            raise ConfigurationError("projection beta must be positive")
        if not 0 < self.eta_proj < 1:
            raise ConfigurationError("eta_proj must lie in (0, 1)")
        if self.max_iters < 0 or not 0 < self.move_limit <= 1:
            raise ConfigurationError("need max_iters >= 0 and 0 < move_limit <= 1")
        if not 0 < self.dirichlet_length <= 1:
            raise ConfigurationError("dirichlet_length must lie in (0, 1]")
        if self.init not in ("uniform", "sin5phi"):
            raise ConfigurationError(f"unknown initial design {self.init!r}")

    def with_(self, **changes) -> "OptConfig":
        return replace(self, **changes)


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}

_OPT_KEYS = {"gamma": float, "filter_r": float, "p": float, "kappa_min": float,
             "kappa_max": float, "n_samples": int, "load": str, "beta": float,
             "eta_proj": float, "symmetrize": "bool", "max_iters": int, "move_limit": float,
             "dirichlet_length": float, "stop_tol": float, "stop_window": int, "solver": str,
             "snapshot_every": int, "init": str}
_GRF_KEYS = {"nu": float, "lx": float, "ly": float, "l": float, "rotation": float,
             "sigma": float, "seed": int}
_RUN_KEYS = {"mesh", "out"}


def parse_config_text(text: str, source: str = "<config>") -> tuple[OptConfig, dict]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Returns the optimization settings and the remaining run keys (``mesh``,
    ``out``). Any GRF key switches the load to ``grf`` unless ``load`` is
    given explicitly.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _OPT_KEYS and key not in _GRF_KEYS and key not in _RUN_KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = (value, lineno)
    return config_from_mapping({k: v for k, (v, _) in raw.items()}, source)


def _convert(key, value, kind, source):
    try:
        if kind == "bool":
            return _BOOL[str(value).lower()]
        if kind is float and str(value).lower() in ("none", ""):
            return None
        return kind(value)
    except (KeyError, ValueError):
        raise ConfigurationError(f"{source}: invalid value {value!r} for {key}") from None


def config_from_mapping(values: dict, source: str = "<config>") -> tuple[OptConfig, dict]:
    opt = {}
    for key, kind in _OPT_KEYS.items():
        if key in values:
            opt[key] = _convert(key, values[key], kind, source)
    grf = {}
    for key, kind in _GRF_KEYS.items():
        if key in values:
            grf[key] = _convert(key, values[key], kind, source)
    if grf:
        opt.setdefault("load", "grf")
        if "l" in grf:
            lengths = [grf.pop("l")]
        else:
            lengths = [v for v in (grf.pop("lx", None), grf.pop("ly", None)) if v is not None]
        if not lengths:
            raise ConfigurationError(f"{source}: GRF load needs l or lx/ly")
        if "nu" not in grf:
            raise ConfigurationError(f"{source}: GRF load needs nu")
        opt["grf"] = GrfConfig(nu=grf.pop("nu"), lengths=lengths, **grf)
    run = {k: values[k] for k in _RUN_KEYS if k in values}
    return OptConfig(**opt), run


def load_config(path) -> tuple[OptConfig, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshIOError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    return parse_config_text(text, str(path))


def config_to_mapping(cfg: OptConfig) -> dict:
    out = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "grf"}
    if cfg.grf is not None:
        out["grf"] = cfg.grf.to_dict()
    return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in out.items()}
