"""Exact equilibrium evaluation of simplified graphs in momentum space.

Every edge carries a lattice momentum; summing the site of each internal
vertex enforces momentum conservation there, so the graph value reduces to a
sum over ``E - V`` free momenta (roots are not summed).  The time integrals
over the vertex order polytope are done exactly: for each linear extension
``v_1, ..., v_n`` of the time order the integral of ``exp(-sum rho_v u_v)``
over ``0 < u_1 < ... < u_n`` is ``prod_j 1 / S_j`` with ``S_j`` the total
``mu²`` of the edges crossing the cut in front of ``v_j``.
"""
from __future__ import annotations

import itertools

import numpy as np

from .graphs import EMPTY, INIT, INNER, ROOT, SimplifiedGraph
from .lattice import LatticeConfig

MAX_TERMS = 2**36
CHUNK = 2**16


def _momentum_basis(n_vert, edges, constrained):
    """Integer coefficients C[e, j] expressing each edge momentum in the free ones.

    Vertices not in ``constrained`` are merged into one unconstrained super
    vertex; chords of a BFS spanning tree carry the free momenta.
    """
    R = -1
    node = [v if v in constrained else R for v in range(n_vert)]
    adj: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(edges):
        adj.setdefault(node[a], []).append(i)
        adj.setdefault(node[b], []).append(i)
    parent_edge = {R: None}
    order = [R]
    for u in order:
        for i in adj.get(u, []):
            a, b = edges[i]
            w = node[b] if node[a] == u else node[a]
            if w not in parent_edge:
                parent_edge[w] = i
                order.append(w)
    missing = set(constrained) - set(parent_edge)
    if missing:
        raise ValueError("every internal vertex must be connected to a root")
    tree_edges = {i for i in parent_edge.values() if i is not None}
    chords = [i for i in range(len(edges)) if i not in tree_edges]
    C = np.zeros((len(edges), len(chords)), dtype=int)
    for j, c in enumerate(chords):
        C[c, j] = 1
    # conservation at v: sum_{a(e)=v} k_e - sum_{b(e)=v} k_e = 0, leaves first
    for v in reversed(order[1:]):
        p = parent_edge[v]
        acc = np.zeros(len(chords), dtype=int)
        for i in adj[v]:
            if i == p:
                continue
            a, b = edges[i]
            acc += C[i] if node[a] == v else -C[i]
        a, b = edges[p]
        C[p] = -acc if node[a] == v else acc
    return C


def _linear_extensions(verts, before):
    """All orderings of ``verts`` compatible with the pairs in ``before``."""
    preds = {v: {a for a, b in before if b == v} for v in verts}

    def rec(placed, remaining):
        if not remaining:
            yield list(placed)
            return
        for v in sorted(remaining):
            if preds[v] <= set(placed):
                placed.append(v)
                remaining.remove(v)
                yield from rec(placed, remaining)
                remaining.add(v)
                placed.pop()

    yield from rec([], set(verts))


def vertex_factor(g: SimplifiedGraph, cumulants) -> float:
    out = 1.0
    for v, k in enumerate(g.kinds):
        if k == INNER:
            out *= g.data[v]
        elif k == EMPTY:
            out *= cumulants.get(g.data[v], 0.0)
    return out


def _weak_orderings(verts, before):
    """Ordered partitions of ``verts`` into blocks, each block free of ``before`` pairs among the remaining."""
    preds = {v: {a for a, b in before if b == v} for v in verts}

    def rec(placed, remaining):
        if not remaining:
            yield []
            return
        avail = sorted(v for v in remaining if preds[v] <= placed)
        for r in range(1, len(avail) + 1):
            for block in itertools.combinations(avail, r):
                for rest in rec(placed | set(block), remaining - set(block)):
                    yield [block] + rest

    yield from rec(set(), set(verts))


def evaluate_momentum(g: SimplifiedGraph, cfg: LatticeConfig, cumulants, positions=None, dt: float | None = None) -> np.ndarray:
    """Equilibrium value as a field over the site of the last root.

    Roots ``0..n-2`` sit at ``positions`` (default: the origin), all at time 0.
    With ``dt`` the time integrals are replaced by the sums of the explicit
    Euler scheme with that step: a vertex ``n >= 1`` steps before its later
    neighbour gets the propagator ``(1 - dt mu²)**(n-1)`` and every internal
    vertex the weight ``dt``.  As ``dt -> 0`` this tends to the continuous value.
    """
    if g.vertices(INIT):
        raise ValueError("equilibrium evaluation needs a graph without initial-condition leaves")
    factor = vertex_factor(g, cumulants)
    if factor == 0.0:
        return np.zeros(cfg.shape)
    if dt is not None and not 0 < dt * cfg.mu2_max < 1:
        raise ValueError("discrete-time evaluation needs 0 < dt * mu2_max < 1")
    roots = sorted(g.vertices(ROOT), key=lambda v: g.data[v])
    out_root = roots[-1]
    if positions is None:
        positions = [(0,) * cfg.d] * (len(roots) - 1)
    pos = {r: np.asarray(positions[i], dtype=int).reshape(cfg.d) for i, r in enumerate(roots[:-1])}
    internal = [v for v, k in enumerate(g.kinds) if k in (INNER, EMPTY)]
    edges = list(g.edges)
    C = _momentum_basis(len(g.kinds), edges, set(internal))
    F = C.shape[1]
    L, d = cfg.L, cfg.d
    n_axes = F * d
    if L**n_axes > MAX_TERMS:
        raise MemoryError(f"momentum sum over {F} free momenta on L={L}, d={d} is too large")
    before = [(a, b) for a, b in edges if a in internal and b in internal]
    if dt is None:
        orderings = [[(v,) for v in ext] for ext in _linear_extensions(internal, before)]
    else:
        orderings = list(_weak_orderings(internal, before))
    out_edge = next(e for e, (a, b) in enumerate(edges) if a == out_root)

    n_inner = n_axes
    while n_inner > 0 and L**n_inner > CHUNK:
        n_inner -= 1
    inner_shape = (L,) * n_inner
    B = np.zeros(L**d, dtype=complex)
    for outer in np.ndindex(*((L,) * (n_axes - n_inner))):
        idx = [np.full((1,) * n_inner, o) for o in outer]
        idx += [np.arange(L).reshape([L if a == k else 1 for a in range(n_inner)]) for k in range(n_inner)]
        rate, eidx = {}, {}
        for e in range(len(edges)):
            ind = []
            for s in range(d):
                acc = np.zeros(inner_shape, dtype=int)
                for j in range(F):
                    if C[e, j]:
                        acc = acc + C[e, j] * idx[j * d + s]
                ind.append(acc % L)
            eidx[e] = ind
            m2 = np.full(inner_shape, cfg.m**2)
            for i in ind:
                m2 = m2 + 2 * (1 - np.cos(2 * np.pi * i / L)) / cfg.delta**2
            rate[e] = m2 if dt is None else -np.log1p(-dt * m2)
        rho = {v: np.zeros(inner_shape) for v in internal}
        for e, (a, b) in enumerate(edges):
            if b in rho:
                rho[b] = rho[b] + rate[e]
            if a in rho:
                rho[a] = rho[a] - rate[e]
        time_int = np.zeros(inner_shape)
        for blocks in orderings:
            term = np.ones(inner_shape)
            S = np.zeros(inner_shape)
            for block in reversed(blocks):
                for v in block:
                    S = S + rho[v]
                term = term / S if dt is None else term / np.expm1(S)
            time_int += term
        if dt is not None:
            time_int *= dt ** len(internal) * np.exp(sum(rate.values()))
        phase = np.zeros(inner_shape)
        for e, (a, b) in enumerate(edges):
            if a in pos:
                k = sum(eidx[e][s] * pos[a][s] for s in range(d))
                phase = phase + 2 * np.pi * k / L
        amp = time_int * np.exp(-1j * phase)
        # bin by the output edge momentum, then transform to the lag of the last root
        flat = np.ravel_multi_index(tuple(np.broadcast_to(i, inner_shape) for i in eidx[out_edge]), (L,) * d).ravel()
        B += np.bincount(flat, weights=amp.real.ravel(), minlength=L**d)
        B += 1j * np.bincount(flat, weights=amp.imag.ravel(), minlength=L**d)
    field = np.fft.fftn(B.reshape((L,) * d)).real
    return factor * field / cfg.volume**F
