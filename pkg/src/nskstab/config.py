"""Run configuration: bracketed-section key=value files with line-aware errors.

Sections and keys:

    [profile]      kind, params (comma list) or table (comma list of "x rho" pairs)
    [physics]      g, mu, sigma, L
    [mesh]         n_elements, quad_points
    [solver]       fixed_point_tol, eig_tol, k_max ("auto" or number), j_max
    [evolution]    dt ("auto" or number), t_end ("auto" or number)
    [instability]  coefficients, delta, epsilon0, c3, c4, delta0
    [output]       out_dir, mode_samples

A minimal file needs [profile] and [physics]; everything else has defaults.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .profile import DensityProfile, PhysicalParams, ProfileError, make_profile


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"config error{where}: {message}")


_SCHEMA = {
    "profile": {"kind": "str", "params": "float_list", "table": "pair_list"},
    "physics": {"g": "float", "mu": "float", "sigma": "float", "l": "float"},
    "mesh": {"n_elements": "int", "quad_points": "int"},
    "solver": {"fixed_point_tol": "float", "eig_tol": "float",
               "k_max": "float_or_auto", "j_max": "int"},
    "evolution": {"dt": "float_or_auto", "t_end": "float_or_auto"},
    "instability": {"coefficients": "float_list", "delta": "float",
                    "epsilon0": "float", "c3": "float", "c4": "float",
                    "delta0": "float"},
    "output": {"out_dir": "str", "mode_samples": "int"},
}


@dataclass
class RunConfig:
    profile_kind: str
    profile_params: list[float] = field(default_factory=list)
    profile_table: list[tuple[float, float]] | None = None
    g: float = 1.0
    mu: float = 1.0
    sigma: float = 0.0
    L: float = 1.0
    n_elements: int = 128
    quad_points: int = 4
    fixed_point_tol: float = 1e-10
    eig_tol: float = 1e-12
    k_max: float | None = None
    j_max: int = 4
    dt: float | None = None       # None = auto
    t_end: float | None = None    # None = auto
    coefficients: list[float] = field(default_factory=lambda: [1.0])
    delta: float = 0.01
    epsilon0: float = 0.1
    c3: float = 1.0
    c4: float = 1.0
    delta0: float = 0.1
    out_dir: str = "out"
    mode_samples: int = 201
    config_hash: str = "unconfigured"

    def validate(self, lines: dict | None = None) -> None:
        at = (lines or {}).get
        checks = [
            (self.g > 0, "g must be positive", ("physics", "g")),
            (self.mu > 0, "mu must be positive", ("physics", "mu")),
            (self.sigma >= 0, "sigma must be nonnegative", ("physics", "sigma")),
            (self.L > 0, "L must be positive", ("physics", "l")),
            (self.n_elements >= 2, "n_elements must be >= 2", ("mesh", "n_elements")),
            (self.quad_points >= 2, "quad_points must be >= 2", ("mesh", "quad_points")),
            (self.fixed_point_tol > 0, "fixed_point_tol must be positive",
             ("solver", "fixed_point_tol")),
            (self.j_max >= 1, "j_max must be >= 1", ("solver", "j_max")),
            (self.k_max is None or self.k_max > 0, "k_max must be positive",
             ("solver", "k_max")),
            (self.dt is None or self.dt > 0, "dt must be positive", ("evolution", "dt")),
            (0 < self.delta < 1, "delta must lie in (0, 1)", ("instability", "delta")),
            (self.epsilon0 > 0, "epsilon0 must be positive", ("instability", "epsilon0")),
            (self.mode_samples >= 2, "mode_samples must be >= 2",
             ("output", "mode_samples")),
        ]
        for ok, msg, key in checks:
            if not ok:
                raise ConfigError(msg, at(key))

    def make_profile(self) -> DensityProfile:
        try:
            return make_profile(self.profile_kind, self.profile_params or None,
                                self.profile_table)
        except ProfileError as exc:
            raise ConfigError(str(exc)) from exc

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(g=self.g, mu=self.mu, sigma=self.sigma, L=self.L)

    def stamp(self) -> dict:
        """Provenance fields embedded in every output document."""
        from . import __version__
        return {"config_hash": self.config_hash, "version": __version__}


def _parse_value(kind: str, raw: str, line: int):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == "str":
            return raw
        if kind == "float_or_auto":
            return None if raw.lower() == "auto" else float(raw)
        if kind == "float_list":
            return [float(tok) for tok in raw.replace(",", " ").split()]
        if kind == "pair_list":
            pairs = []
            for chunk in raw.split(","):
                toks = chunk.split()
                if len(toks) != 2:
                    raise ValueError
                pairs.append((float(toks[0]), float(toks[1])))
            return pairs
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind}", line) from None
    raise ConfigError(f"unknown value kind {kind}", line)


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    text = path.read_text()

    section = None
    values: dict[tuple[str, str], object] = {}
    lines: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value, got {stripped!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, _, raw_val = stripped.partition("=")
        key = key.strip().lower()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in values:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", lineno)
        values[(section, key)] = _parse_value(_SCHEMA[section][key], raw_val.strip(), lineno)
        lines[(section, key)] = lineno

    if not any(sec == "profile" for sec, _ in values):
        raise ConfigError("missing required section [profile]")
    if ("profile", "kind") not in values:
        raise ConfigError("missing profile.kind")
    if not any(sec == "physics" for sec, _ in values):
        raise ConfigError("missing required section [physics]")

    def get(sec: str, key: str, default):
        return values.get((sec, key), default)

    cfg = RunConfig(
        profile_kind=str(get("profile", "kind", "")),
        profile_params=get("profile", "params", []),
        profile_table=get("profile", "table", None),
        g=get("physics", "g", 1.0),
        mu=get("physics", "mu", 1.0),
        sigma=get("physics", "sigma", 0.0),
        L=get("physics", "l", 1.0),
        n_elements=get("mesh", "n_elements", 128),
        quad_points=get("mesh", "quad_points", 4),
        fixed_point_tol=get("solver", "fixed_point_tol", 1e-10),
        eig_tol=get("solver", "eig_tol", 1e-12),
        k_max=get("solver", "k_max", None),
        j_max=get("solver", "j_max", 4),
        dt=get("evolution", "dt", None),
        t_end=get("evolution", "t_end", None),
        coefficients=get("instability", "coefficients", [1.0]),
        delta=get("instability", "delta", 0.01),
        epsilon0=get("instability", "epsilon0", 0.1),
        c3=get("instability", "c3", 1.0),
        c4=get("instability", "c4", 1.0),
        delta0=get("instability", "delta0", 0.1),
        out_dir=str(get("output", "out_dir", "out")),
        mode_samples=get("output", "mode_samples", 201),
        config_hash=hashlib.sha256(text.encode()).hexdigest()[:16],
    )
    cfg.validate(lines)
    return cfg
