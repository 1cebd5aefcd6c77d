"""Trees and the perturbative recursion evaluated on one noise realization.

Time runs on a uniform grid ``t_k = k*h``.  The causal convolution
``(G*phi)(t_k) = ∫_0^{t_k} G̃_{t_k-s} ⋆ phi(s) ds`` is the composite trapezoid
rule on that grid, using the right limit ``G̃_0`` at ``s = t_k``.  It is
computed in momentum space by the exact running sum
``A_k = exp(-h mu²) A_{k-1} + phî_k``.  Both the tree sum and the recursion
use the same discrete convolution, so they must agree up to rounding.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeConfig, SpatialField, from_momentum, to_momentum
from .levy import LevyParams, sample_noise_increments
from .trees import INIT, NOISE, RootedTree, vertex_multiplicity


@dataclass(frozen=True)
class NoiseRealization:
    """Noise density values ``eta[k]`` at ``t_k = k*h``, shape ``(K+1, L, ..., L)``."""

    values: np.ndarray
    h: float

    @property
    def horizon(self) -> float:
        return self.h * (len(self.values) - 1)

    @classmethod
    def sample(cls, params: LevyParams, cfg: LatticeConfig, h: float, steps: int, seed: int) -> NoiseRealization:
        W = sample_noise_increments(params, cfg, h, steps + 1, seed)
        return cls(W / h, h)


def _field_array(f, cfg: LatticeConfig) -> np.ndarray:
    if f is None:
        return np.zeros(cfg.shape)
    if isinstance(f, SpatialField):
        return f.values
    return np.asarray(f, dtype=float).reshape(cfg.shape)


def causal_convolution(phi: np.ndarray, h: float, cfg: LatticeConfig) -> np.ndarray:
    K = len(phi)
    mu2 = cfg.mu2_grid()
    decay = np.exp(-h * mu2)
    ph = to_momentum(phi, cfg)
    out = np.zeros(ph.shape, dtype=complex)
    A = ph[0].copy()
    for k in range(1, K):
        A = decay * A + ph[k]
        out[k] = h * (A - 0.5 * np.exp(-k * h * mu2) * ph[0] - 0.5 * ph[k])
    return from_momentum(out, cfg)


def free_evolution(f, K: int, h: float, cfg: LatticeConfig) -> np.ndarray:
    """``G̃_{t_k} ⋆ f`` for ``k = 0..K-1``."""
    fhat = to_momentum(_field_array(f, cfg), cfg)
    t = h * np.arange(K).reshape((-1,) + (1,) * cfg.d)
    return from_momentum(np.exp(-t * cfg.mu2_grid()) * fhat, cfg)


def tree_field(T: RootedTree, noise: NoiseRealization, f, cfg: LatticeConfig) -> np.ndarray:
    """``M(T) * B(T)`` on the whole space-time grid."""
    K, h = len(noise.values), noise.h
    cache: dict[tuple, np.ndarray] = {}

    def walk(node: RootedTree) -> np.ndarray:
        if node.key in cache:
            return cache[node.key]
        if node.kind == NOISE:
            out = causal_convolution(noise.values, h, cfg)
        elif node.kind == INIT:
            out = free_evolution(f, K, h, cfg)
        else:
            prod = np.ones((K,) + cfg.shape)
            for c in node.children:
                prod = prod * walk(c)
            out = vertex_multiplicity(node.children) * causal_convolution(prod, h, cfg)
        cache[node.key] = out
        return out

    return walk(T)


def _time_index(t: float, noise: NoiseRealization) -> int:
    k = int(round(t / noise.h))
    if abs(k * noise.h - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the noise grid (step {noise.h})")
    if k < 0 or k >= len(noise.values):
        raise ValueError(f"time {t} outside the noise horizon [0, {noise.horizon}]")
    return k


def tree_value(T: RootedTree, t: float, x, noise: NoiseRealization, f, cfg: LatticeConfig) -> float:
    k = _time_index(t, noise)
    site = tuple(np.mod(np.atleast_1d(x), cfg.L))
    return float(tree_field(T, noise, f, cfg)[(k,) + site])


def _order_multisets(j: int, p: int):
    # multisets of p orders from {0..j-1} summing to j-1, with multinomial weight
    for combo in itertools.combinations_with_replacement(range(j), p):
        if sum(combo) == j - 1:
            w = math.factorial(p)
            for c in Counter(combo).values():
                w //= math.factorial(c)
            yield combo, w


def perturbative_solution(J: int, noise: NoiseRealization, f, cfg: LatticeConfig, p: int) -> list[np.ndarray]:
    """Coefficient fields ``X_0..X_J`` of ``X = sum_j (-lambda)^j X_j``."""
    if J < 0:
        raise ValueError("order must be >= 0")
    K, h = len(noise.values), noise.h
    X = [causal_convolution(noise.values, h, cfg) + free_evolution(f, K, h, cfg)]
    for j in range(1, J + 1):
        src = np.zeros((K,) + cfg.shape)
        for combo, w in _order_multisets(j, p):
            term = np.full((K,) + cfg.shape, float(w))
            for i in combo:
                term = term * X[i]
            src += term
        X.append(causal_convolution(src, h, cfg))
    return X
