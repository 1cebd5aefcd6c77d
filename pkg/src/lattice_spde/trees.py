"""Rooted trees with two leaf types and inner vertices of fertility p+1.

A tree is stored in canonical form: the children of every inner vertex are
kept as a sorted tuple, ordered by their canonical key (noise leaf < initial
leaf < inner vertices, the latter compared lexicographically).  Two trees are
equal iff their keys are equal, which is what makes sibling subtrees
interchangeable.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

NOISE = "noise"
INIT = "init"
INNER = "inner"

_KIND_RANK = {NOISE: 0, INIT: 1, INNER: 2}


@dataclass(frozen=True, eq=False)
class RootedTree:
    kind: str
    children: tuple[RootedTree, ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_RANK:
            raise ValueError(f"unknown vertex kind {self.kind!r}")
        if self.kind == INNER:
            if not self.children:
                raise ValueError("inner vertex needs at least one child")
            object.__setattr__(self, "children", tuple(sorted(self.children, key=lambda c: c.key)))
        elif self.children:
            raise ValueError("leaves carry no children")
        object.__setattr__(self, "_key", _make_key(self))

    @property
    def key(self) -> tuple:
        return self._key

    def __eq__(self, other):
        return isinstance(other, RootedTree) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other):
        return self._key < other._key

    def __repr__(self):
        return f"RootedTree({to_nested(self)!r})"

    @property
    def is_leaf(self) -> bool:
        return self.kind != INNER

    @property
    def order(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + sum(c.order for c in self.children)

    @property
    def fertility(self) -> int | None:
        """Number of children of the inner vertices (``p``); None for a bare leaf."""
        if self.is_leaf:
            return None
        return len(self.children)

    def leaves(self) -> list[str]:
        """Leaf kinds in canonical depth-first order."""
        if self.is_leaf:
            return [self.kind]
        return [k for c in self.children for k in c.leaves()]

    def count(self, kind: str) -> int:
        return sum(1 for k in self.leaves() if k == kind)


def _make_key(t: RootedTree) -> tuple:
    if t.is_leaf:
        return (_KIND_RANK[t.kind],)
    return (_KIND_RANK[INNER],) + tuple(c.key for c in t.children)


NOISE_LEAF = RootedTree(NOISE)
INIT_LEAF = RootedTree(INIT)


def validate(T: RootedTree, p: int | None = None):
    """Raise ValueError unless every inner vertex of ``T`` has the same number ``p`` of children."""
    seen = set()

    def walk(t):
        if t.is_leaf:
            return
        seen.add(len(t.children))
        for c in t.children:
            walk(c)

    walk(T)
    if p is not None:
        seen.add(p)
    if len(seen) > 1:
        raise ValueError(f"malformed tree: inner vertices with fertilities {sorted(seen)}")


def vertex_multiplicity(children) -> int:
    """Multinomial weight ``p! / prod_c k_c!`` over classes of identical child subtrees.

    For order-0 children the classes are noise/initial leaves, which gives the
    familiar ``p!/(n0'! (n0-n0')! n1! ...)`` whenever the children of each
    positive order are identical.
    """
    counts = Counter(c.key for c in children)
    out = math.factorial(len(children))
    for k in counts.values():
        out //= math.factorial(k)
    return out


def multiplicity(T: RootedTree) -> int:
    validate(T)
    if T.is_leaf:
        return 1
    out = vertex_multiplicity(T.children)
    for c in T.children:
        out *= multiplicity(c)
    return out


def cut(T: RootedTree) -> list[RootedTree]:
    """Subtrees hanging from the inner vertex adjacent to the root."""
    if T.is_leaf:
        raise ValueError("cannot cut a bare leaf")
    return list(T.children)


def attach(children, p: int) -> RootedTree:
    children = list(children)
    if len(children) != p:
        raise ValueError(f"attach needs exactly p={p} subtrees, got {len(children)}")
    for c in children:
        validate(c, p)
    return RootedTree(INNER, tuple(children))


def _compositions(total: int, parts: int):
    # sorted tuples (o_1 <= ... <= o_p) of non-negative ints summing to total,
    # i.e. the index set {n_i}: sum n_i = p, sum i*n_i = total
    def rec(remaining, slots, lo):
        if slots == 0:
            if remaining == 0:
                yield ()
            return
        for o in range(lo, remaining // slots + 1):
            for rest in rec(remaining - o, slots - 1, o):
                yield (o,) + rest

    yield from rec(total, parts, 0)


@lru_cache(maxsize=None)
def _trees_of_order(j: int, p: int) -> tuple[RootedTree, ...]:
    if j == 0:
        return (NOISE_LEAF, INIT_LEAF)
    out = set()
    # choose child orders as a multiset with sum j-1, then a multiset of trees per order
    for orders in _compositions(j - 1, p):
        per_order = Counter(orders)
        choices = [
            itertools.combinations_with_replacement(_trees_of_order(o, p), n)
            for o, n in sorted(per_order.items())
        ]
        for combo in itertools.product(*choices):
            kids = tuple(t for group in combo for t in group)
            out.add(RootedTree(INNER, kids))
    return tuple(sorted(out))


def enumerate_trees(j: int, p: int) -> list[tuple[RootedTree, int]]:
    """All canonical trees with ``j`` inner vertices, each with its multiplicity."""
    if j < 0:
        raise ValueError("order must be >= 0")
    if p < 1:
        raise ValueError("p must be >= 1")
    return [(T, multiplicity(T)) for T in _trees_of_order(j, p)]


def to_nested(T: RootedTree):
    """Nested-list form: ``"L1"`` noise leaf, ``"L2"`` initial leaf, list for an inner vertex."""
    if T.kind == NOISE:
        return "L1"
    if T.kind == INIT:
        return "L2"
    return [to_nested(c) for c in T.children]


def from_nested(obj) -> RootedTree:
    if obj == "L1":
        return NOISE_LEAF
    if obj == "L2":
        return INIT_LEAF
    if isinstance(obj, list) and obj:
        return RootedTree(INNER, tuple(from_nested(c) for c in obj))
    raise ValueError(f"cannot parse tree from {obj!r}")


def dumps_tree(T: RootedTree, mult: int | None = None) -> str:
    rec = {"order": T.order, "multiplicity": multiplicity(T) if mult is None else mult, "tree": to_nested(T)}
    return json.dumps(rec, separators=(",", ":"))
