"""Periodic lattice geometry, heat kernel and causal Green function.

The infinite lattice is replaced by a torus of ``L**d`` sites with spacing
``delta``.  Conventions used throughout the package:

* spatial integral  ``∫ f dx = delta**d * sum_x f(x)``
* lattice transform ``f̂(p) = delta**d * sum_x exp(i p.x) f(x)``
* inverse           ``f(x) = (delta*L)**-d * sum_p exp(-i p.x) f̂(p)``

with ``p`` running over the momentum grid ``2*pi*k/(delta*L)``.  Under these
conventions ``convolve`` is multiplication in momentum space and the heat
kernel has transform ``exp(-t mu²(p))``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class LatticeConfig:
    d: int = 1
    delta: float = 1.0
    L: int = 8
    m: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L!r}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def cell_volume(self) -> float:
        return self.delta**self.d

    @property
    def volume(self) -> float:
        return (self.delta * self.L) ** self.d

    @property
    def mu2_max(self) -> float:
        return 4 * self.d / self.delta**2 + self.m**2

    def momenta(self) -> np.ndarray:
        """Momentum grid as an array of shape ``(d, L, ..., L)``."""
        k = 2 * np.pi * np.arange(self.L) / (self.delta * self.L)
        return np.array(np.meshgrid(*([k] * self.d), indexing="ij"))

    def mu2_grid(self) -> np.ndarray:
        """Dispersion ``mu²(p)`` on the momentum grid, in FFT index order."""
        p = self.momenta()
        return 2 * (self.d - np.cos(self.delta * p).sum(axis=0)) / self.delta**2 + self.m**2

    def sites(self) -> np.ndarray:
        """All integer site coordinates, shape ``(L**d, d)``, C order."""
        return np.array(list(np.ndindex(*self.shape)), dtype=int).reshape(-1, self.d)

    def torus_distance2(self) -> np.ndarray:
        """Squared minimal-image Euclidean distance of every site from the origin."""
        i = np.arange(self.L)
        di = np.minimum(i, self.L - i) * self.delta
        grids = np.meshgrid(*([di**2] * self.d), indexing="ij")
        return np.sum(grids, axis=0)


@dataclass(frozen=True)
class SpatialField:
    values: np.ndarray
    config: LatticeConfig

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.config.shape:
            raise ValueError(f"field shape {v.shape} does not match lattice {self.config.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, site):
        site = tuple(np.mod(np.atleast_1d(site), self.config.L))
        return self.values[site]

    def __add__(self, other: SpatialField) -> SpatialField:
        _check_same(self, other)
        return SpatialField(self.values + other.values, self.config)

    def __sub__(self, other: SpatialField) -> SpatialField:
        _check_same(self, other)
        return SpatialField(self.values - other.values, self.config)

    def __mul__(self, c: float) -> SpatialField:
        return SpatialField(self.values * c, self.config)

    __rmul__ = __mul__

    def integral(self) -> float:
        return float(self.config.cell_volume * self.values.sum())

    def shifted(self, offset) -> SpatialField:
        """Field translated by an integer lattice vector: ``g(x) = f(x - offset)``."""
        return SpatialField(np.roll(self.values, tuple(offset), axis=tuple(range(self.config.d))), self.config)

    @classmethod
    def zeros(cls, cfg: LatticeConfig) -> SpatialField:
        return cls(np.zeros(cfg.shape), cfg)

    @classmethod
    def constant(cls, c: float, cfg: LatticeConfig) -> SpatialField:
        return cls(np.full(cfg.shape, float(c)), cfg)

    @classmethod
    def dirac(cls, cfg: LatticeConfig, site=None) -> SpatialField:
        """Lattice Dirac delta ``delta**-d`` times the Kronecker symbol at ``site``."""
        v = np.zeros(cfg.shape)
        v[tuple(site) if site is not None else (0,) * cfg.d] = cfg.delta ** (-cfg.d)
        return cls(v, cfg)


def _check_same(f: SpatialField, g: SpatialField):
    if f.config != g.config:
        raise ValueError("fields live on different lattices")


def mu_squared(p, cfg: LatticeConfig) -> float:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (cfg.d,):
        raise ValueError(f"momentum has {p.size} components, lattice dimension is {cfg.d}")
    return float(2 * (cfg.d - np.cos(cfg.delta * p).sum()) / cfg.delta**2 + cfg.m**2)


def from_momentum(fhat: np.ndarray, cfg: LatticeConfig) -> np.ndarray:
    """Inverse lattice transform of a real-symmetric momentum array."""
    return np.fft.ifftn(fhat, axes=tuple(range(-cfg.d, 0))).real / cfg.cell_volume


def to_momentum(f: np.ndarray, cfg: LatticeConfig) -> np.ndarray:
    return np.fft.fftn(f, axes=tuple(range(-cfg.d, 0))) * cfg.cell_volume


def heat_kernel_array(t, cfg: LatticeConfig) -> np.ndarray:
    """Heat kernel for one time or a 1-d array of times; time is the leading axis."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("heat kernel requires t >= 0")
    mu2 = cfg.mu2_grid()
    return from_momentum(np.exp(-t[..., None] * mu2.reshape(-1)).reshape(t.shape + cfg.shape), cfg)


def heat_kernel(t: float, cfg: LatticeConfig) -> SpatialField:
    if t < 0:
        raise ValueError(f"heat kernel requires t >= 0, got {t}")
    return SpatialField(heat_kernel_array(t, cfg), cfg)


def green(t: float, cfg: LatticeConfig) -> SpatialField:
    """Causal Green function ``theta(t) * heat_kernel(t)`` with ``theta(0) = 0``."""
    if t <= 0:
        return SpatialField.zeros(cfg)
    return heat_kernel(t, cfg)


def convolve(f: SpatialField, g: SpatialField) -> SpatialField:
    _check_same(f, g)
    cfg = f.config
    return SpatialField(from_momentum(to_momentum(f.values, cfg) * to_momentum(g.values, cfg), cfg), cfg)


def decay_profile(times, cfg: LatticeConfig, N: int) -> np.ndarray:
    """``|G(t,x)| (1+|x|²)^N exp(t m²/2)`` maximised over sites, one value per time."""
    times = np.asarray(times, dtype=float)
    G = heat_kernel_array(times, cfg).reshape(len(times), -1)
    weight = (1 + cfg.torus_distance2().reshape(-1)) ** N
    return np.max(np.abs(G) * weight, axis=1) * np.exp(times * cfg.m**2 / 2)


def write_field_csv(path, field: SpatialField, header_comment: str | None = None):
    cfg = field.config
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(cfg.d)] + ["value"])
        for site in np.ndindex(*cfg.shape):
            w.writerow(list(site) + [f"{field.values[site]:.17g}"])


def read_field_csv(path, cfg: LatticeConfig) -> SpatialField:
    v = np.full(cfg.shape, np.nan)
    with open(Path(path)) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    for r in rows[1:]:
        v[tuple(int(c) for c in r[: cfg.d])] = float(r[cfg.d])
    if np.isnan(v).any():
        raise ValueError(f"{path}: field CSV does not cover every lattice site")
    return SpatialField(v, cfg)


def minimal_image(offset, cfg: LatticeConfig) -> tuple[int, ...]:
    """Representative of a lattice offset in ``(-L/2, L/2]`` per component."""
    out = []
    for c in np.atleast_1d(offset):
        c = int(c) % cfg.L
        out.append(c - cfg.L if c > cfg.L // 2 else c)
    return tuple(out)


def lag_norm(offset, cfg: LatticeConfig) -> float:
    return math.sqrt(sum((c * cfg.delta) ** 2 for c in minimal_image(offset, cfg)))
