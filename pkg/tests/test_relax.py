import random

import pytest

from pnb.diagram import shortest_path
from pnb.models import (InfeasibleRoot, SopInstance, SopModel,
                        assignment_ordering, completion_bound)
from pnb.oracle import brute_force
from pnb.relax import (FilterContext, build_initial_relaxation, filter_arc,
                       refine, split_node)

from conftest import A, B, C, D, make_random_sop, make_random_tsptw
from dd_utils import encoded_sequences, feasible_paths
from pnb.models import Objective, TsptwModel


def seed(model, cap, upper=None):
    ctx = FilterContext(model, upper)
    return build_initial_relaxation(model, width_cap=cap, ctx=ctx), ctx


def test_initial_layer_shape(tiny_model):
    dd, _ = seed(tiny_model, 8)
    states = [sorted(dd.state[v] for v in dd.live_nodes(i))
              for i in range(1, 5)]
    assert states[0] == [A]
    assert B in states[1] and C in states[1] and D not in states[1]
    assert states[3] == [C, D] or set(states[3]) <= {C, D}


def test_initial_two_element_chain():
    inst = SopInstance(2, ((None, 4), (9, None)), frozenset({(0, 1)}))
    model = SopModel(inst)
    dd, _ = seed(model, 4)
    value, path = shortest_path(dd, model)
    assert value == 4
    assert path == [0, 1]
    assert all(dd.exact[v] for i in range(len(dd.layers))
               for v in dd.live_nodes(i))


def test_infeasible_prefix_rejected(tiny_model):
    with pytest.raises(InfeasibleRoot):
        build_initial_relaxation(tiny_model, root_prefix=[B], width_cap=4)


def test_relaxation_is_sandwich(tiny_model):
    dd, _ = seed(tiny_model, 2)
    value, _ = shortest_path(dd, tiny_model)
    assert value <= 17


def test_refine_reaches_exact_value(tiny_model):
    dd, ctx = seed(tiny_model, 64)
    refine(dd, assignment_ordering(tiny_model), ctx)
    value, path = shortest_path(dd, tiny_model)
    assert value == 17
    assert path == [A, B, D, C]


def test_refine_fixed_point(tiny_model):
    dd, ctx = seed(tiny_model, 64)
    ordering = assignment_ordering(tiny_model)
    refine(dd, ordering, ctx)
    before = encoded_sequences(dd, tiny_model)
    nodes_before = dd.node_count()
    refine(dd, ordering, ctx)
    assert encoded_sequences(dd, tiny_model) == before
    assert dd.node_count() == nodes_before


def test_refine_never_loses_feasible_paths():
    rng = random.Random(7)
    for _ in range(25):
        model = SopModel(make_random_sop(rng, rng.randint(4, 6), 0.25))
        ctx = FilterContext(model)
        dd = build_initial_relaxation(model, width_cap=3, ctx=ctx)
        refine(dd, assignment_ordering(model), ctx)
        assert feasible_paths(model) <= encoded_sequences(dd, model)


def test_refine_respects_width_cap():
    rng = random.Random(11)
    for cap in (2, 3, 5):
        model = SopModel(make_random_sop(rng, 6, 0.15))
        ctx = FilterContext(model)
        dd = build_initial_relaxation(model, width_cap=cap, ctx=ctx)
        seed_width = dd.width()
        refine(dd, assignment_ordering(model), ctx)
        assert dd.width() <= max(cap, seed_width)


def test_split_filters_inherited_repeat_arc():
    # after splitting the second-layer C node on label A, the copy whose
    # history now surely contains A must lose its arc into the third-layer
    # A node, while the other copy keeps it
    inst = SopInstance(
        4,
        tuple(tuple(None if i == j else 1 for j in range(4)) for i in range(4)),
        frozenset(),
    )
    model = SopModel(inst)
    ctx = FilterContext(model)
    dd = build_initial_relaxation(model, width_cap=16, ctx=ctx)
    c2 = next(v for v in dd.live_nodes(2) if dd.state[v] == C)
    assert (dd.some[c2] >> A) & 1 and not (dd.all_[c2] >> A) & 1
    u1, u2 = split_node(dd, c2, A, ctx)
    a_heads_1 = [w for w in dd.outs[u1] if dd.state[w] == A]
    a_heads_2 = [w for w in dd.outs[u2] if dd.state[w] == A]
    assert (dd.all_[u1] >> A) & 1
    assert a_heads_1 == [] and len(a_heads_2) == 1


def test_split_degenerate_single_parent(tiny_model):
    dd, ctx = seed(tiny_model, 64)
    # B on the second decision layer has the lone parent A, whose history
    # contains A: splitting on A leaves the second copy parentless
    layer = dd.live_nodes(2)
    b_node = next(v for v in layer if dd.state[v] == B)
    assert len(dd.ins[b_node]) == 1
    u1, u2 = split_node(dd, b_node, A, ctx)
    assert dd.alive[u1] and dd.ins[u1]
    assert not dd.alive[u2]


def test_filter_removes_missing_predecessor(tiny_model):
    dd, ctx = seed(tiny_model, 8)
    # heads whose required predecessor cannot have occurred were already
    # dropped during construction: no D node keeps a parent without B
    for i in range(1, 5):
        for v in dd.live_nodes(i):
            if dd.state[v] == D:
                for u in dd.ins[v]:
                    assert (dd.some[u] >> B) & 1


def test_filter_removes_repetition(tiny_model):
    dd, ctx = seed(tiny_model, 8)
    for i in range(1, 5):
        for v in dd.live_nodes(i):
            for u in dd.ins[v]:
                assert not (dd.all_[u] >> dd.state[v]) & 1


def test_completion_bound_admissible_at_root(tiny_model):
    # cheapest outgoing moves are A:0, B:5, C:5, D:1; three of the four
    # remaining elements still need an outgoing move
    assert completion_bound(tiny_model, 0, 4) == 0 + 1 + 5
    assert completion_bound(tiny_model, 0, 4) <= 17
    assert completion_bound(tiny_model, 0b1111, 0) == 0


def test_filter_incumbent_bound(tiny_model):
    # value 0 + arc cost 8 + completion bound 1 must strictly exceed the
    # incumbent for the arc to go
    dd, _ = seed(tiny_model, 8)
    a_node = dd.live_nodes(1)[0]
    b_head = next(v for v in sorted(dd.outs[a_node]) if dd.state[v] == B)
    assert filter_arc(dd, a_node, b_head, FilterContext(tiny_model, upper=9))
    assert not filter_arc(dd, a_node, b_head, FilterContext(tiny_model, upper=8))


def test_filters_never_cut_the_optimum():
    rng = random.Random(13)
    for _ in range(20):
        model = SopModel(make_random_sop(rng, 6, 0.2))
        opt = brute_force(model).optimum
        if opt is None:
            continue
        ctx = FilterContext(model, upper=opt)
        dd = build_initial_relaxation(model, width_cap=64, ctx=ctx)
        refine(dd, assignment_ordering(model), ctx)
        value, _ = shortest_path(dd, model)
        assert value == opt


def test_tsptw_window_filtering():
    rng = random.Random(3)
    for _ in range(10):
        model = TsptwModel(make_random_tsptw(rng, 6), Objective.TRAVEL)
        ctx = FilterContext(model)
        dd = build_initial_relaxation(model, width_cap=3, ctx=ctx)
        refine(dd, assignment_ordering(model), ctx)
        opt = brute_force(model).optimum
        assert opt is not None
        value, _ = shortest_path(dd, model)
        assert value <= opt
        assert feasible_paths(model) <= encoded_sequences(dd, model)
