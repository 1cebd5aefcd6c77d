"""Lévy noise with finite jump law: cumulants and lattice increments.

The noise is parametrized by a drift ``a``, a Gaussian variance density
``sigma2``, a jump intensity ``z`` per unit space-time volume and a discrete
jump-size law ``r`` (atoms with weights).  Its n-th cumulant density is

    c_n = [n == 1] a + [n == 2] sigma2 + z * sum_i w_i s_i**n

On a lattice cell of volume ``delta**d`` and a time step ``dt`` the integrated
noise divided by the cell volume (the lattice Dirac is ``delta**-d``) has
k-th cumulant ``c_k * dt * delta**(d*(1-k))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeConfig

CHUNK_STEPS = 4096


@dataclass(frozen=True)
class LevyParams:
    a: float = 0.0
    sigma2: float = 0.0
    z: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        atoms = tuple((float(s), float(w)) for s, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        if self.z < 0:
            raise ValueError("z must be >= 0")
        if any(s == 0 for s, _ in atoms):
            raise ValueError("jump law may not have an atom at 0")
        if any(not w > 0 for _, w in atoms):
            raise ValueError("atom weights must be positive")
        if self.z > 0 and not atoms:
            raise ValueError("z > 0 needs a jump law")
        if atoms and abs(sum(w for _, w in atoms) - 1) > 1e-12:
            raise ValueError("atom weights must sum to 1")

    @property
    def is_symmetric(self) -> bool:
        law = {}
        for s, w in self.atoms:
            law[s] = law.get(s, 0.0) + w
        return self.a == 0 and all(abs(law.get(-s, 0.0) - w) <= 1e-12 for s, w in law.items())

    def scaled_jumps(self, c: float) -> LevyParams:
        return LevyParams(self.a, self.sigma2, self.z, tuple((c * s, w) for s, w in self.atoms))

    @classmethod
    def gaussian(cls, sigma2: float = 1.0, a: float = 0.0) -> LevyParams:
        return cls(a=a, sigma2=sigma2)

    @classmethod
    def rademacher(cls, z: float = 1.0, size: float = 1.0) -> LevyParams:
        return cls(z=z, atoms=((size, 0.5), (-size, 0.5)))


def cumulant(n: int, params: LevyParams) -> float:
    if int(n) != n or n < 1:
        raise ValueError(f"cumulant order must be a positive integer, got {n!r}")
    out = params.z * math.fsum(w * s**n for s, w in params.atoms)
    if n == 1:
        out += params.a
    elif n == 2:
        out += params.sigma2
    return out


def cumulants(params: LevyParams, N: int = 6) -> dict[int, float]:
    return {n: cumulant(n, params) for n in range(1, N + 1)}


def kurtosis(params: LevyParams) -> float:
    return cumulant(4, params) / cumulant(2, params) ** 2


def increment_cumulant(k: int, params: LevyParams, cfg: LatticeConfig, dt: float) -> float:
    return cumulant(k, params) * dt * cfg.cell_volume ** (1 - k)


def parse_atoms(text: str) -> tuple[tuple[float, float], ...]:
    """Parse ``"1:0.5, -1:0.5"`` into ((1.0, 0.5), (-1.0, 0.5))."""
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        s, sep, w = item.partition(":")
        if not sep:
            raise ValueError(f"atom {item!r} is not of the form value:weight")
        out.append((float(s), float(w)))
    return tuple(out)


def format_atoms(atoms) -> str:
    return ",".join(f"{s!r}:{w!r}" for s, w in atoms)


class NoiseStream:
    """Deterministic source of per-step lattice increments.

    Steps are generated in fixed chunks of ``CHUNK_STEPS``; chunk ``k`` draws from
    a Philox generator seeded with ``SeedSequence(seed, spawn_key=(k,))``.  The
    output therefore depends only on (seed, step index), not on how many steps
    are requested per call.
    """

    def __init__(self, params: LevyParams, cfg: LatticeConfig, dt: float, seed: int):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        self.params, self.cfg, self.dt, self.seed = params, cfg, float(dt), int(seed)
        self._chunk_index = -1
        self._chunk = None
        self._pos = 0

    def _make_chunk(self, k: int) -> np.ndarray:
        p, cfg, dt = self.params, self.cfg, self.dt
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(k,))))
        shape = (CHUNK_STEPS,) + cfg.shape
        vol = cfg.cell_volume
        out = np.full(shape, p.a * dt)
        if p.sigma2 > 0:
            out += rng.standard_normal(shape) * math.sqrt(p.sigma2 * dt / vol)
        if p.z > 0:
            # total jump count per cell, split over the atoms where it is nonzero
            counts = rng.poisson(p.z * dt * vol, size=shape)
            hit = np.nonzero(counts)
            sizes = np.array([s for s, _ in p.atoms]) / vol
            weights = np.array([w for _, w in p.atoms])
            if len(sizes) == 1:
                out[hit] += counts[hit] * sizes[0]
            elif len(hit[0]):
                out[hit] += rng.multinomial(counts[hit], weights) @ sizes
        return out

    def take(self, steps: int) -> np.ndarray:
        parts = []
        while steps > 0:
            if self._chunk is None or self._pos == CHUNK_STEPS:
                self._chunk_index += 1
                self._chunk = self._make_chunk(self._chunk_index)
                self._pos = 0
            n = min(steps, CHUNK_STEPS - self._pos)
            parts.append(self._chunk[self._pos : self._pos + n])
            self._pos += n
            steps -= n
        if not parts:
            return np.zeros((0,) + self.cfg.shape)
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


def sample_noise_increments(params: LevyParams, cfg: LatticeConfig, dt: float, steps: int, seed: int) -> np.ndarray:
    """Increments ``W`` of shape ``(steps, L, ..., L)``; see :class:`NoiseStream`."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    return NoiseStream(params, cfg, dt, seed).take(steps)

