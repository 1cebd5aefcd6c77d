"""Flat ``key = value`` run configuration shared by every CLI subcommand."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .lattice import LatticeConfig
from .levy import LevyParams, format_atoms, parse_atoms
from .quadrature import QuadratureSpec
from .simulator import SimConfig

METHODS = ("quadrature", "momentum")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(kind):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else kind(text)

    return parse


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _method(text: str) -> str:
    t = text.strip()
    if t not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    return t


# key -> (parser, default, section)
KEYS = {
    # lattice
    "d": (_int, 1, "lattice"),
    "delta": (float, 1.0, "lattice"),
    "L": (_int, 32, "lattice"),
    "m": (float, 2.0, "lattice"),
    # noise
    "a": (float, 0.0, "levy"),
    "sigma2": (float, 1.0, "levy"),
    "z": (float, 0.0, "levy"),
    "atoms": (parse_atoms, (), "levy"),
    # simulation
    "dt": (float, 0.05, "sim"),
    "burn_in": (_int, 2000, "sim"),
    "samples": (_int, 10_000_000, "sim"),
    "thinning": (_int, 1, "sim"),
    "seed": (_int, 0, "sim"),
    "lam": (float, 0.1, "sim"),
    "p": (_int, 3, "sim"),
    # quadrature
    "T_max": (_optional(float), None, "quad"),
    "nodes_per_unit": (_int, 16, "quad"),
    "h_min": (float, 1e-3, "quad"),
    "ratio": (float, 1.05, "quad"),
    "richardson": (_bool, True, "quad"),
    "level": (_int, 0, "quad"),
    # enumeration and evaluation
    "order": (_int, 1, "opt"),
    "n": (_int, 2, "opt"),
    "connected": (_bool, False, "opt"),
    "equilibrium": (_bool, False, "opt"),
    "even_only": (_bool, False, "opt"),
    "drop_tadpoles": (_bool, False, "opt"),
    "method": (_method, "quadrature", "opt"),
    "t": (_optional(float), None, "opt"),
    # estimation and fitting
    "max_lag": (_optional(_int), None, "opt"),
    "n_batches": (_int, 20, "opt"),
    "control_variate": (_bool, True, "opt"),
    "kernel_method": (_method, "momentum", "opt"),
    "discrete_kernels": (_bool, True, "opt"),
    "tadpole_fit": (_bool, True, "opt"),
    "k_zero": (float, 0.05, "opt"),
    "k_jump": (float, 1.0, "opt"),
    # files and process
    "input": (_optional(str), None, "opt"),
    "output_dir": (str, ".", "opt"),
    "threads": (_int, 1, "opt"),
    "no_timestamp": (_bool, False, "opt"),
}

BOOL_KEYS = tuple(k for k, (kind, _, _) in KEYS.items() if kind is _bool)


def _format(key: str, value) -> str:
    if value is None:
        return "none"
    if key == "atoms":
        return format_atoms(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    lattice: LatticeConfig = None
    levy: LevyParams = None
    sim: SimConfig = None
    quad: QuadratureSpec = None

    def __getattr__(self, key):
        values = self.__dict__.get("values", {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    @classmethod
    def from_strings(cls, raw: dict[str, str]) -> RunConfig:
        """Parse and validate; every key is checked before anything runs."""
        values = {k: default for k, (_, default, _) in KEYS.items()}
        for key, text in raw.items():
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r}")
            try:
                values[key] = KEYS[key][0](text)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        return cls.from_values(values)

    @classmethod
    def from_values(cls, values: dict) -> RunConfig:
        def section(name, kind):
            names = {f.name for f in fields(kind)}
            return kind(**{k: v for k, v in values.items() if KEYS[k][2] == name and k in names})

        try:
            lattice = section("lattice", LatticeConfig)
            levy = section("levy", LevyParams)
            sim = section("sim", SimConfig)
            quad = section("quad", QuadratureSpec)
            sim.check_stability(lattice)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for key in ("order", "n", "n_batches", "threads"):
            if values[key] < (0 if key == "order" else 1):
                raise ConfigError(f"{key} out of range: {values[key]}")
        if values["t"] is not None and not values["t"] > 0:
            raise ConfigError("t must be positive")
        if values["discrete_kernels"] and values["kernel_method"] != "momentum":
            raise ConfigError("discrete_kernels needs kernel_method = momentum")
        if not 0 <= values["k_zero"] < values["k_jump"] or not math.isfinite(values["k_jump"]):
            raise ConfigError("need 0 <= k_zero < k_jump")
        return cls(values, lattice, levy, sim, quad)

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(k, self.values[k])}\n" for k in KEYS)


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{n}: expected key = value")
            raw[key.strip()] = value.strip()
    return raw
