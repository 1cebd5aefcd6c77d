"""Position-space evaluation of simplified graphs by nested time quadrature.

Every internal vertex (inner or empty) carries a time node and a lattice
site.  Times are measured backwards from the roots, ``u = t_root - t``, and
run over a graded grid on ``[0, T]`` with composite trapezoid weights.  An
edge from a later vertex ``a`` to an earlier vertex ``b`` contributes
``theta(u_b - u_a) * G̃_{u_b-u_a}(y_a - y_b)``; on the diagonal ``u_a = u_b``
between two internal vertices the jump of ``theta`` is split in half, which
keeps the rule second order.  Edges leaving a root never see the kink since
the root sits on the boundary ``u = 0``.

Graphs whose internal part is a forest (after merging parallel edges) are
contracted leaf by leaf with FFT convolutions in space; anything else goes
through a dense elimination with a memory guard.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .graphs import EMPTY, INIT, INNER, ROOT, SimplifiedGraph
from .lattice import LatticeConfig, from_momentum, heat_kernel_array, to_momentum
from .momentum import vertex_factor

DENSE_LIMIT = 2**27
ROW_BLOCK = 32


@dataclass(frozen=True)
class QuadratureSpec:
    """Graded time grid: spacing grows geometrically from ``h_min`` to ``1/nodes_per_unit``.

    ``T_max`` defaults to ``10/m²``.  With ``richardson`` the value is
    extrapolated from the grid and its midpoint refinement, ``(4 V_fine - V)/3``.
    """

    T_max: float | None = None
    nodes_per_unit: int = 16
    h_min: float = 1e-3
    ratio: float = 1.05
    richardson: bool = True
    level: int = 0

    def __post_init__(self):
        if self.T_max is not None and not self.T_max > 0:
            raise ValueError("T_max must be positive")
        if self.nodes_per_unit < 1:
            raise ValueError("nodes_per_unit must be >= 1")
        if not 0 < self.h_min <= 1.0 / self.nodes_per_unit:
            raise ValueError("need 0 < h_min <= 1/nodes_per_unit")
        if not self.ratio >= 1:
            raise ValueError("ratio must be >= 1")

    def horizon(self, cfg: LatticeConfig) -> float:
        return self.T_max if self.T_max is not None else 10.0 / cfg.m**2

    def refined(self) -> QuadratureSpec:
        """The same grid with every interval bisected."""
        return replace(self, level=self.level + 1)


def time_grid(spec: QuadratureSpec, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``[0, T]`` (first 0, last exactly T) and trapezoid weights."""
    if not T > 0:
        raise ValueError("grid length must be positive")
    h_max = 1.0 / spec.nodes_per_unit
    nodes = [0.0]
    h = spec.h_min
    while nodes[-1] + h < T * (1 - 1e-12):
        nodes.append(nodes[-1] + h)
        h = min(h * spec.ratio, h_max)
    nodes.append(T)
    u = np.array(nodes)
    for _ in range(spec.level):
        mid = (u[:-1] + u[1:]) / 2
        u = np.insert(u, np.arange(1, len(u)), mid)
    gaps = np.diff(u)
    w = np.zeros_like(u)
    w[:-1] += gaps / 2
    w[1:] += gaps / 2
    return u, w


def _kernel_hat(tau: np.ndarray, power: int, cfg: LatticeConfig, mu2: np.ndarray) -> np.ndarray:
    """Raw DFT over sites of ``G̃_tau(y)**power`` for an array of nonnegative ``tau``."""
    if power == 1:
        return np.exp(-tau[..., None] * mu2) / cfg.cell_volume
    G = heat_kernel_array(tau.ravel(), cfg).reshape(tau.shape + (-1,))
    Gp = (G**power).reshape(tau.shape + cfg.shape)
    return np.fft.fftn(Gp, axes=tuple(range(-cfg.d, 0))).reshape(tau.shape + (-1,))


class _Problem:
    def __init__(self, g: SimplifiedGraph, cfg: LatticeConfig, u, w, positions, t_final, f):
        self.g, self.cfg, self.u, self.w = g, cfg, u, w
        self.n_sites = cfg.n_sites
        roots = sorted(g.vertices(ROOT), key=lambda v: g.data[v])
        self.out_root = roots[-1]
        if positions is None:
            positions = [(0,) * cfg.d] * (len(roots) - 1)
        self.pos = {r: tuple(np.mod(np.atleast_1d(positions[i]), cfg.L)) for i, r in enumerate(roots[:-1])}
        self.internal = [v for v, k in enumerate(g.kinds) if k in (INNER, EMPTY)]
        self.t_final = t_final
        self.f = f
        self.scalar = 1.0
        self.out_unary = np.ones(cfg.shape)
        self.unary = {v: np.ones((len(u),) + cfg.shape) for v in self.internal}
        self.pair: dict[tuple[int, int], int] = {}
        for a, b in g.edges:
            self._add_edge(a, b)

    def _init_evolved(self, times):
        # (G̃_s ⋆ f) for forward times s
        cfg = self.cfg
        fhat = to_momentum(self.f, cfg).reshape(-1)
        mu2 = cfg.mu2_grid().reshape(-1)
        out = from_momentum(np.exp(-np.asarray(times)[:, None] * mu2) * fhat, cfg)
        return out.reshape((len(times),) + cfg.shape)

    def _add_edge(self, a, b):
        g, cfg = self.g, self.cfg
        ka, kb = g.kinds[a], g.kinds[b]
        if kb == INIT:
            if self.f is None:
                raise ValueError("graph has initial-condition leaves but no initial field was given")
            if ka == ROOT:
                field = self._init_evolved([self.t_final])[0]
                if a == self.out_root:
                    self.out_unary = self.out_unary * field
                else:
                    self.scalar *= field[self.pos[a]]
            else:
                self.unary[a] = self.unary[a] * self._init_evolved(self.t_final - self.u)
            return
        if ka == ROOT and a != self.out_root:
            G = heat_kernel_array(self.u, cfg)
            # G̃_u(x_r - y) = G̃_u(y - x_r) by reflection symmetry
            self.unary[b] = self.unary[b] * np.roll(G, self.pos[a], axis=tuple(range(1, cfg.d + 1)))
            return
        key = (a, b)
        self.pair[key] = self.pair.get(key, 0) + 1

    def neighbours(self):
        nb: dict[int, list[int]] = {v: [] for v in self.internal + [self.out_root]}
        for a, b in self.pair:
            nb[a].append(b)
            nb[b].append(a)
        return nb

    def is_forest(self) -> bool:
        nb = self.neighbours()
        seen = set()
        for s in nb:
            if s in seen:
                continue
            stack = [(s, None)]
            while stack:
                v, parent = stack.pop()
                if v in seen:
                    return False
                seen.add(v)
                stack.extend((x, v) for x in nb[v] if x != parent)
        return True

    def edge_between(self, p, v):
        """(power, p_is_later) for the merged edge joining ``p`` and ``v``."""
        if (p, v) in self.pair:
            return self.pair[(p, v)], True
        return self.pair[(v, p)], False


def _message(prob: _Problem, belief_hat: np.ndarray, p: int, v: int) -> np.ndarray:
    """Contract vertex ``v`` (momentum-space belief incl. weights) into ``p``."""
    cfg, u = prob.cfg, prob.u
    power, p_later = prob.edge_between(p, v)
    mu2 = cfg.mu2_grid().reshape(-1)
    if p == prob.out_root:
        rows = np.array([0.0])
        boundary = True
    else:
        rows = u
        boundary = False
    out = np.empty((len(rows), cfg.n_sites), dtype=complex)
    for start in range(0, len(rows), ROW_BLOCK):
        r = rows[start : start + ROW_BLOCK]
        diff = u[None, :] - r[:, None] if p_later else r[:, None] - u[None, :]
        mask = (diff > 0).astype(float)
        if boundary:
            mask[diff == 0] = 1.0
        else:
            ii = np.arange(start, start + len(r))
            mask[np.arange(len(r)), ii] = 0.5
        tau = np.where(diff > 0, diff, 0.0)
        K = _kernel_hat(tau, power, cfg, mu2) * mask[..., None]
        out[start : start + len(r)] = np.einsum("abk,bk->ak", K, belief_hat)
    return np.fft.ifftn(out.reshape((len(rows),) + cfg.shape), axes=tuple(range(-cfg.d, 0))).real


def _eval_forest(prob: _Problem) -> np.ndarray:
    cfg = prob.cfg
    nb = prob.neighbours()
    axes = tuple(range(-cfg.d, 0))
    vol = cfg.cell_volume
    done = set()

    def belief(v, parent):
        done.add(v)
        b = prob.unary[v].copy()
        for c in nb[v]:
            if c != parent:
                b *= collect(c, v)
        return b

    def collect(v, parent):
        b = belief(v, parent) * (prob.w * vol).reshape((-1,) + (1,) * cfg.d)
        bhat = np.fft.fftn(b, axes=axes).reshape(len(prob.u), -1)
        return _message(prob, bhat, parent, v)

    result = prob.out_unary.copy()
    for c in nb[prob.out_root]:
        result = result * collect(c, prob.out_root)[0]
    done.add(prob.out_root)
    scalar = prob.scalar
    for v in prob.internal:
        if v not in done:
            b = belief(v, None)
            scalar *= float(np.sum((prob.w * vol).reshape((-1,) + (1,) * cfg.d) * b))
    return scalar * result


def _pair_matrix(prob: _Problem, a: int, b: int, power: int) -> np.ndarray:
    """Dense kernel between later vertex ``a`` and earlier vertex ``b``."""
    cfg, u = prob.cfg, prob.u
    ua = np.array([0.0]) if a == prob.out_root else u
    diff = u[None, :] - ua[:, None]
    mask = (diff > 0).astype(float)
    if a == prob.out_root:
        mask[diff == 0] = 1.0
    else:
        np.fill_diagonal(mask, 0.5)
    tau = np.where(diff > 0, diff, 0.0)
    G = heat_kernel_array(tau.ravel(), cfg).reshape(tau.shape + cfg.shape) ** power * mask.reshape(mask.shape + (1,) * cfg.d)
    # M[i, ya, j, yb] = G[i, j, ya - yb]
    sites = cfg.sites()
    n = cfg.n_sites
    diff_idx = np.mod(sites[:, None, :] - sites[None, :, :], cfg.L)
    flat = np.ravel_multi_index(tuple(diff_idx[..., s] for s in range(cfg.d)), cfg.shape)
    Gf = G.reshape(len(ua), len(u), n)
    M = Gf[:, :, flat]  # (i, j, ya, yb)
    return M.transpose(0, 2, 1, 3).reshape(len(ua) * n, len(u) * n)


def _eval_dense(prob: _Problem) -> np.ndarray:
    cfg = prob.cfg
    n = cfg.n_sites
    nu = len(prob.u)
    dims = {v: nu * n for v in prob.internal}
    dims[prob.out_root] = n
    weight = np.repeat(prob.w * cfg.cell_volume, n)
    factors = []
    for v in prob.internal:
        factors.append(((v,), prob.unary[v].reshape(-1) * weight))
    factors.append(((prob.out_root,), prob.out_unary.reshape(-1)))
    for (a, b), power in prob.pair.items():
        size = dims[a] * dims[b]
        if size > DENSE_LIMIT:
            raise MemoryError("dense quadrature kernel too large; use the momentum method or a coarser grid")
        factors.append(((a, b), _pair_matrix(prob, a, b, power)))
    letters = {}
    for v in dims:
        letters[v] = chr(ord("a") + len(letters))
    remaining = list(prob.internal)
    while remaining:
        # eliminate the vertex with the smallest resulting factor
        def cost(v):
            scope = set().union(*(set(s) for s, _ in factors if v in s)) - {v}
            return math.prod(dims[x] for x in scope)

        v = min(remaining, key=cost)
        if cost(v) > DENSE_LIMIT:
            raise MemoryError("dense quadrature intermediate too large; use the momentum method or a coarser grid")
        remaining.remove(v)
        involved = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        scope = sorted(set().union(*(set(s) for s, _ in involved)) - {v})
        expr = ",".join("".join(letters[x] for x in s) for s, _ in involved) + "->" + "".join(letters[x] for x in scope)
        factors.append((tuple(scope), np.einsum(expr, *[arr for _, arr in involved], optimize=True)))
    result = np.ones(n)
    scalar = prob.scalar
    for s, arr in factors:
        if s == (prob.out_root,):
            result = result * arr
        elif s == ():
            scalar *= float(arr)
        else:
            raise RuntimeError(f"unexpected residual factor over {s}")
    return scalar * result.reshape(cfg.shape)


def evaluate_quadrature_on_grid(g, cfg, cumulants, u, w, positions=None, t_final=None, f=None, dense=False):
    factor = vertex_factor(g, cumulants)
    if factor == 0.0:
        return np.zeros(cfg.shape)
    prob = _Problem(g, cfg, u, w, positions, t_final, f)
    if not dense and prob.is_forest():
        return factor * _eval_forest(prob)
    return factor * _eval_dense(prob)


def evaluate_quadrature(g: SimplifiedGraph, cfg: LatticeConfig, cumulants, spec: QuadratureSpec, T: float,
                        positions=None, t_final=None, f=None, dense=False) -> np.ndarray:
    """Field over the last root's site; time integrals on ``[0, T]`` backwards from the roots."""

    def once(s):
        u, w = time_grid(s, T)
        return evaluate_quadrature_on_grid(g, cfg, cumulants, u, w, positions, t_final, f, dense)

    coarse = once(spec)
    if not spec.richardson:
        return coarse
    fine = once(spec.refined())
    return (4 * fine - coarse) / 3
