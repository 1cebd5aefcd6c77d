import itertools
import json

import pytest
import sympy
from hypothesis import given, strategies as st

from lattice_spde.graphs import (
    EMPTY,
    ROOT,
    PWGraph,
    compose,
    decompose_components,
    drop_tadpoles,
    dumps_graph,
    enumerate_graphs,
    filter_connected,
    full_graph,
    has_tadpole,
    is_connected,
    prune_odd,
    set_partitions,
    simplify,
)
from lattice_spde.trees import INIT_LEAF, NOISE_LEAF, attach, enumerate_trees

SMALL = [(m, n, p) for m in range(2) for n in range(1, 4) for p in (1, 2, 3)]


def root_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in root_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]


def test_order_zero_counts():
    assert len(enumerate_graphs(0, 2, 3)) == 5
    eq = enumerate_graphs(0, 2, 3, equilibrium_only=True)
    assert len(eq) == 2
    assert len(filter_connected(eq)) == 1
    assert filter_connected(eq)[0].legs == (2,)
    assert len(enumerate_graphs(0, 1, 3)) == 2


@given(st.lists(st.integers(), max_size=7, unique=True))
def test_set_partitions_bell(items):
    parts = list(set_partitions(items))
    assert len(parts) == sympy.bell(len(items))
    canon = {tuple(sorted(tuple(sorted(b)) for b in p)) for p in parts}
    assert len(canon) == len(parts)
    assert all(sorted(x for b in p for x in b) == sorted(items) for p in parts)


@pytest.mark.parametrize("m,n,p", SMALL)
@pytest.mark.parametrize("eq", [False, True])
def test_count_is_tree_tuples_times_bell(m, n, p, eq):
    expected = 0
    for orders in itertools.product(range(m + 1), repeat=n):
        if sum(orders) != m:
            continue
        for ts in itertools.product(*(enumerate_trees(o, p) for o, in zip(orders))):
            trees = [T for T, _ in ts]
            if eq and any(T.count("init") for T in trees):
                continue
            expected += sympy.bell(sum(T.count("noise") for T in trees))
    gs = enumerate_graphs(m, n, p, equilibrium_only=eq)
    assert len(gs) == expected
    assert len({g.key for g in gs}) == len(gs)


@pytest.mark.parametrize("m,n,p", [(m, n, 3) for m in range(2) for n in range(1, 4)])
def test_decompose_round_trip(m, n, p):
    for g in enumerate_graphs(m, n, p):
        classes, parts = decompose_components(g)
        assert all(is_connected(h) for h in parts)
        assert sorted(r for c in classes for r in c) == list(range(n))
        assert compose(classes, parts) == g


@pytest.mark.parametrize("m,n", [(m, n) for m in range(2) for n in range(1, 4)])
def test_linked_cluster_grouping(m, n):
    p = 3
    connected = {
        (k, o): filter_connected(enumerate_graphs(o, k, p)) for k in range(1, n + 1) for o in range(m + 1)
    }
    built = set()
    for classes in root_partitions(list(range(n))):
        for orders in itertools.product(range(m + 1), repeat=len(classes)):
            if sum(orders) != m:
                continue
            choices = [connected[(len(c), o)] for c, o in zip(classes, orders)]
            for parts in itertools.product(*choices):
                built.add(compose([tuple(c) for c in classes], parts).key)
    assert built == {g.key for g in enumerate_graphs(m, n, p)}


def check_simplified(sg, p):
    for v, kind in enumerate(sg.kinds):
        if kind == "inner":
            assert sg.degree(v) == p + 1
        elif kind == ROOT:
            assert sg.degree(v) == 1
        elif kind == EMPTY:
            assert sg.degree(v) == sg.data[v]


@pytest.mark.parametrize("m,n,p", [(1, 2, 3), (1, 3, 2), (2, 2, 3), (0, 3, 3)])
def test_simplify_invariants(m, n, p):
    for g in enumerate_graphs(m, n, p):
        kinds, _, edges = full_graph(g)
        sg = simplify(g)
        leaves = sum(t.count("noise") for t in g.trees)
        assert len(sg.edges) == len(edges) - leaves
        assert len(sg.kinds) == len(kinds) - leaves
        assert is_connected(sg) == is_connected(g)
        assert sorted(sg.legs) == sorted(g.legs)
        assert sg.multiplicity == g.multiplicity
        check_simplified(sg, p)


def test_two_tree_contraction_counts():
    # two order-1 trees sharing one 2-leg empty vertex; the other noise leaves
    # and the initial leaf are closed in a 4-leg vertex and a 1-leg vertex
    t1 = attach([NOISE_LEAF] * 3, 3)
    t2 = attach([NOISE_LEAF, NOISE_LEAF, INIT_LEAF], 3)
    g = PWGraph((t1, t2), (((0, 0), (1, 0)), ((0, 1), (0, 2), (1, 1))))
    kinds, _, edges = full_graph(g)
    assert len(kinds) == 2 + 2 + 5 + 1 + 2 and len(edges) == 2 + 6 + 5
    sg = simplify(g)
    assert len(sg.kinds) == 2 + 2 + 1 + 2 and len(sg.edges) == 2 + 6
    assert sorted(sg.legs) == [2, 3]
    assert is_connected(sg)


def test_joint_block_graph():
    g = filter_connected(enumerate_graphs(0, 2, 3, equilibrium_only=True))[0]
    sg = simplify(g)
    assert sorted(sg.kinds) == sorted([ROOT, ROOT, EMPTY])
    assert len(sg.edges) == 2 and sg.legs == (2,)


def test_first_order_two_point_graphs():
    gs = drop_tadpoles(prune_odd(filter_connected(enumerate_graphs(1, 2, 3, equilibrium_only=True))))
    all_even = prune_odd(filter_connected(enumerate_graphs(1, 2, 3, equilibrium_only=True)))
    assert len(all_even) == 8
    assert sum(has_tadpole(g) for g in all_even) == 6
    assert {g.legs for g in gs} == {(4,)}
    assert len(gs) == 2


def test_prune_odd_examples():
    t = attach([NOISE_LEAF] * 3, 3)
    odd = PWGraph((t,), (((0, 0), (0, 1), (0, 2)),))
    even = PWGraph((t, NOISE_LEAF), (((0, 0), (0, 1), (0, 2), (1, 0)),))
    assert prune_odd([odd, even]) == [even]


def test_single_root_graphs_are_connected():
    for g in enumerate_graphs(2, 1, 3):
        assert is_connected(g)


def test_pwgraph_validation():
    t = attach([NOISE_LEAF] * 3, 3)
    with pytest.raises(ValueError):
        PWGraph((t,), (((0, 0), (0, 1)),))
    with pytest.raises(ValueError):
        PWGraph((t,), (((0, 0), (0, 1), (0, 2)), ((0, 2),)))
    with pytest.raises(ValueError):
        PWGraph((t,), (((0, 0), (0, 1), (0, 2)), ()))


def test_dump_record():
    g = enumerate_graphs(1, 2, 3)[7]
    rec = json.loads(dumps_graph(g, "m1-7"))
    assert rec["id"] == "m1-7" and rec["order"] == 1 and rec["connected"] == is_connected(g)
