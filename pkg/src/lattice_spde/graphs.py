"""Generalized Parisi-Wu graphs.

A graph is stored as the pair it is summed over: a tuple of rooted trees (one
per external point) and a set partition of their noise leaves.  A noise leaf
is addressed as ``(tree_index, k)`` where ``k`` counts noise leaves of that
tree in canonical depth-first order.  Each block of the partition is one empty
vertex.  Adjacency is derived on demand.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .trees import INIT, INNER, NOISE, RootedTree, enumerate_trees, multiplicity, to_nested, vertex_multiplicity

ROOT = "root"
EMPTY = "empty"
NOISE_LEAF_V = "noise_leaf"


@dataclass(frozen=True)
class PWGraph:
    trees: tuple[RootedTree, ...]
    blocks: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "blocks", blocks)
        leaves = [lf for b in blocks for lf in b]
        expected = {(k, i) for k, t in enumerate(self.trees) for i in range(t.count(NOISE))}
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        if len(leaves) != len(set(leaves)) or set(leaves) != expected:
            raise ValueError("blocks must partition the noise leaves exactly once")

    @property
    def n_roots(self) -> int:
        return len(self.trees)

    @property
    def order(self) -> int:
        return sum(t.order for t in self.trees)

    @property
    def key(self) -> tuple:
        return (tuple(t.key for t in self.trees), self.blocks)

    @property
    def multiplicity(self) -> int:
        out = 1
        for t in self.trees:
            out *= multiplicity(t)
        return out

    @property
    def legs(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def has_init_leaves(self) -> bool:
        return any(t.count(INIT) for t in self.trees)

    def to_record(self) -> dict:
        return {
            "order": self.order,
            "trees": [to_nested(t) for t in self.trees],
            "blocks": [[list(lf) for lf in b] for b in self.blocks],
            "legs": list(self.legs),
            "multiplicity": self.multiplicity,
            "connected": is_connected(self),
            "tadpole": has_tadpole(self),
        }


@dataclass
class SimplifiedGraph:
    """Leaf-contracted graph.

    ``kinds[v]`` is one of ``root``, ``inner``, ``empty``, ``init``; ``data[v]`` is
    the root index, the vertex multiplicity or the leg count (None for init
    leaves).  Every edge ``(a, b)`` points from the later vertex ``a`` to the
    earlier vertex ``b`` (roots are latest, empty vertices and initial leaves
    earliest).  Parallel edges are repeated.
    """

    kinds: list[str]
    data: list
    edges: list[tuple[int, int]]
    n_roots: int = 0
    source: PWGraph | None = field(default=None, repr=False, compare=False)

    def vertices(self, kind: str) -> list[int]:
        return [v for v, k in enumerate(self.kinds) if k == kind]

    def degree(self, v: int) -> int:
        return sum((a == v) + (b == v) for a, b in self.edges)

    def root_vertex(self, i: int) -> int:
        return next(v for v, k in enumerate(self.kinds) if k == ROOT and self.data[v] == i)

    @property
    def legs(self) -> tuple[int, ...]:
        return tuple(self.data[v] for v in self.vertices(EMPTY))

    @property
    def multiplicity(self) -> int:
        out = 1
        for v in self.vertices(INNER):
            out *= self.data[v]
        return out

    def components(self) -> list[set[int]]:
        return _components(len(self.kinds), self.edges)


def _components(n: int, edges) -> list[set[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: dict[int, set[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return sorted(groups.values(), key=min)


def full_graph(g: PWGraph):
    """Uncontracted vertex kinds, vertex data and (later, earlier) edges of ``g``.

    Noise leaves appear as their own vertices, each joined to its parent and
    to its empty vertex.
    """
    kinds: list[str] = []
    data: list = []
    edges: list[tuple[int, int]] = []

    def new(kind, d=None):
        kinds.append(kind)
        data.append(d)
        return len(kinds) - 1

    leaf_vertex = {}
    for k, t in enumerate(g.trees):
        r = new(ROOT, k)
        counter = itertools.count()

        def walk(node, parent):
            if node.kind == INNER:
                v = new(INNER, vertex_multiplicity(node.children))
                edges.append((parent, v))
                for c in node.children:
                    walk(c, v)
            elif node.kind == NOISE:
                v = new(NOISE_LEAF_V, (k, next(counter)))
                edges.append((parent, v))
                leaf_vertex[data[v]] = v
            else:
                edges.append((parent, new(INIT)))

        walk(t, r)
    for b in g.blocks:
        q = new(EMPTY, len(b))
        for lf in b:
            edges.append((leaf_vertex[lf], q))
    return kinds, data, edges


def simplify(g: PWGraph) -> SimplifiedGraph:
    """Replace every noise leaf and its two edges by a single edge."""
    kinds, data, edges = full_graph(g)
    incident: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(edges):
        incident.setdefault(a, []).append(i)
        incident.setdefault(b, []).append(i)
    drop = set()
    new_edges = []
    for v, kind in enumerate(kinds):
        if kind != NOISE_LEAF_V:
            continue
        inc = incident.get(v, [])
        if len(inc) != 2:
            raise ValueError(f"noise leaf {data[v]} has degree {len(inc)}, expected 2")
        (a1, b1), (a2, b2) = edges[inc[0]], edges[inc[1]]
        # parent -> leaf and leaf -> empty vertex become parent -> empty vertex
        later = a1 if b1 == v else a2
        earlier = b2 if a2 == v else b1
        new_edges.append((later, earlier))
        drop.update(inc)
    keep = [v for v, k in enumerate(kinds) if k != NOISE_LEAF_V]
    relabel = {v: i for i, v in enumerate(keep)}
    out_edges = [(relabel[a], relabel[b]) for i, (a, b) in enumerate(edges) if i not in drop]
    out_edges += [(relabel[a], relabel[b]) for a, b in new_edges]
    return SimplifiedGraph(
        kinds=[kinds[v] for v in keep],
        data=[data[v] for v in keep],
        edges=sorted(out_edges),
        n_roots=g.n_roots,
        source=g,
    )


def _root_classes(g: PWGraph) -> list[tuple[int, ...]]:
    kinds, data, edges = full_graph(g)
    comps = _components(len(kinds), edges)
    classes = []
    for c in comps:
        roots = sorted(data[v] for v in c if kinds[v] == ROOT)
        if roots:
            classes.append(tuple(roots))
    return sorted(classes)


def is_connected(g: PWGraph | SimplifiedGraph) -> bool:
    if isinstance(g, SimplifiedGraph):
        return len(g.components()) == 1
    kinds, _, edges = full_graph(g)
    return len(_components(len(kinds), edges)) == 1


def has_tadpole(g: PWGraph) -> bool:
    """True if some empty vertex with >= 2 legs has all of them on one inner vertex."""
    kinds, data, edges = full_graph(g)
    parent = {b: a for a, b in edges if kinds[b] == NOISE_LEAF_V}
    leaf_v = {data[v]: v for v, k in enumerate(kinds) if k == NOISE_LEAF_V}
    for b in g.blocks:
        owners = {parent[leaf_v[lf]] for lf in b}
        if len(b) >= 2 and len(owners) == 1 and kinds[owners.pop()] == INNER:
            return True
    return False


def has_odd_vertex(g: PWGraph | SimplifiedGraph) -> bool:
    return any(l % 2 for l in g.legs)


def set_partitions(items):
    """All set partitions of ``items`` (restricted growth order), blocks as tuples."""
    items = list(items)
    if not items:
        yield ()
        return

    def rec(i, blocks):
        if i == len(items):
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(items[i])
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([items[i]])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def _order_tuples(m: int, n: int):
    for cut in itertools.combinations(range(m + n - 1), n - 1):
        bounds = (-1,) + cut + (m + n - 1,)
        yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(n))


def tree_tuples(m: int, n: int, p: int, equilibrium_only: bool = False):
    for orders in sorted(_order_tuples(m, n)):
        pools = []
        for j in orders:
            pool = [t for t, _ in enumerate_trees(j, p)]
            if equilibrium_only:
                pool = [t for t in pool if t.count(INIT) == 0]
            pools.append(pool)
        yield from itertools.product(*pools)


def enumerate_graphs(m: int, n: int, p: int, equilibrium_only: bool = False) -> list[PWGraph]:
    """Every (tree tuple, noise-leaf partition) pair of total order ``m`` with ``n`` roots."""
    if m < 0 or n < 1:
        raise ValueError("need m >= 0 and n >= 1")
    out = []
    for trees in tree_tuples(m, n, p, equilibrium_only):
        leaves = [(k, i) for k, t in enumerate(trees) for i in range(t.count(NOISE))]
        for part in set_partitions(leaves):
            out.append(PWGraph(trees, part))
    return out


def filter_connected(gs):
    return [g for g in gs if is_connected(g)]


def prune_odd(gs):
    return [g for g in gs if not has_odd_vertex(g)]


def drop_tadpoles(gs):
    return [g for g in gs if not has_tadpole(g)]


def decompose_components(g: PWGraph):
    """Root classes of the connectivity relation and the induced connected graphs."""
    classes = _root_classes(g)
    parts = []
    for cls in classes:
        pos = {k: i for i, k in enumerate(cls)}
        blocks = [tuple((pos[k], i) for k, i in b) for b in g.blocks if b[0][0] in pos]
        parts.append(PWGraph(tuple(g.trees[k] for k in cls), tuple(blocks)))
    return tuple(classes), parts


def compose(classes, parts) -> PWGraph:
    """Disjoint union placing the roots of ``parts[i]`` at positions ``classes[i]``."""
    n = sum(len(c) for c in classes)
    trees: list[RootedTree | None] = [None] * n
    blocks = []
    for cls, part in zip(classes, parts):
        if len(cls) != part.n_roots:
            raise ValueError("class size does not match the number of roots")
        for i, k in enumerate(cls):
            trees[k] = part.trees[i]
        blocks.extend(tuple((cls[k], i) for k, i in b) for b in part.blocks)
    if any(t is None for t in trees):
        raise ValueError("classes do not cover all roots")
    return PWGraph(tuple(trees), tuple(blocks))


def dumps_graph(g: PWGraph, gid: str | None = None) -> str:
    rec = g.to_record()
    if gid is not None:
        rec = {"id": gid, **rec}
    return json.dumps(rec, separators=(",", ":"))
