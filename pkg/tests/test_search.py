import random

import pytest

from pnb.diagram import shortest_path
from pnb.models import (Objective, SopModel, TsptwInstance, TsptwModel,
                        assignment_ordering)
from pnb.oracle import brute_force
from pnb.peel import PeelChoice
from pnb.relax import FilterContext, build_initial_relaxation, refine
from pnb.search import (EmptyQueue, Mode, SolveConfig, SolveResult,
                        diversified_search, optimality_gap, select_diagram,
                        solve)

from conftest import A, B, C, D, make_random_sop, make_random_tsptw

import heapq


def test_gap_examples():
    assert optimality_gap(75120, 79417) == 5.41
    assert optimality_gap(17, 17) == 0.0
    assert optimality_gap(9877, 10034) == 1.56
    assert optimality_gap(123, None) == 100.0


def test_select_diagram_min_and_fifo():
    heap = []
    for i, bound in enumerate([12, 9, 15, 9]):
        heapq.heappush(heap, (bound, i, f"d{i}"))
    assert select_diagram(heap)[2] == "d1"
    assert select_diagram(heap)[2] == "d3"  # tie: earliest insertion first
    heapq.heappush(heap, (13, 4, "residual"))
    assert select_diagram(heap)[2] == "d0"
    assert select_diagram(heap)[2] == "residual"
    assert select_diagram(heap)[2] == "d2"
    with pytest.raises(EmptyQueue):
        select_diagram(heap)


def test_solve_tiny_closes(tiny_model):
    result = solve(tiny_model, SolveConfig(width=8, diversify_k=5,
                                           diversify_width=0, time_limit=10))
    assert result.closed
    assert result.lower == result.upper == 17
    assert result.incumbent_path == [A, B, D, C]
    assert result.gap_percent == 0.0


def test_solve_seeded_with_optimum_closes_without_path(tiny_model):
    result = solve(tiny_model, SolveConfig(width=4, seed_value=17,
                                           diversify_k=0, time_limit=10))
    assert result.closed
    assert result.upper == 17 and result.lower == 17
    assert result.incumbent_path is None


def test_mode_equivalence_spot():
    rng = random.Random(71)
    for _ in range(8):
        model = SopModel(make_random_sop(rng, 6, 0.2))
        want = brute_force(model).optimum
        for mode in (Mode.PNB, Mode.BNB):
            r = solve(model, SolveConfig(width=6, mode=mode, diversify_k=2,
                                         diversify_width=0, time_limit=30))
            assert r.closed and r.upper == want


def test_timeline_monotone_and_sound():
    rng = random.Random(73)
    for _ in range(10):
        model = SopModel(make_random_sop(rng, 7, 0.15))
        want = brute_force(model).optimum
        r = solve(model, SolveConfig(width=4, diversify_k=1,
                                     diversify_width=0, time_limit=30))
        assert r.closed and r.upper == want
        last_lb = None
        last_ub = None
        for _, lb, ub, _ in r.timeline:
            if lb is not None and want is not None:
                assert lb <= want
            if ub is not None and want is not None:
                assert ub >= want
            if last_lb is not None:
                assert lb is None or lb >= last_lb
            if ub is not None and last_ub is not None:
                assert ub <= last_ub
            if lb is not None:
                last_lb = lb
            if ub is not None:
                last_ub = ub


def test_time_limit_returns_open_result():
    rng = random.Random(79)
    model = SopModel(make_random_sop(rng, 18, 0.0))
    r = solve(model, SolveConfig(width=4, diversify_k=1, diversify_width=0,
                                 time_limit=0.25))
    assert not r.closed
    assert r.queue_len > 0
    assert 0.0 <= r.gap_percent <= 100.0
    if r.upper is not None and r.lower is not None:
        assert r.lower <= r.upper


def test_single_worker_determinism():
    rng = random.Random(83)
    model = SopModel(make_random_sop(rng, 7, 0.15))
    cfg = SolveConfig(width=4, diversify_k=2, diversify_width=0, time_limit=30)
    a = solve(model, cfg)
    b = solve(model, cfg)
    assert (a.lower, a.upper, a.incumbent_path, a.iterations) == \
        (b.lower, b.upper, b.incumbent_path, b.iterations)
    assert [(lb, ub, q) for _, lb, ub, q in a.timeline] == \
        [(lb, ub, q) for _, lb, ub, q in b.timeline]


def test_workers_agree_on_closed_value():
    rng = random.Random(89)
    for _ in range(5):
        model = SopModel(make_random_sop(rng, 7, 0.1))
        want = brute_force(model).optimum
        r = solve(model, SolveConfig(width=4, workers=4, diversify_k=1,
                                     diversify_width=0, time_limit=30))
        assert r.closed and r.upper == want and r.lower == want


def test_diversified_exact_diagram_matches_shortest_path(tiny_model):
    ctx = FilterContext(tiny_model)
    dd = build_initial_relaxation(tiny_model, (), 0, 64, ctx)
    refine(dd, assignment_ordering(tiny_model), ctx)
    found = diversified_search(dd, 1, tiny_model, ctx)
    assert found[0] == (17, [A, B, D, C])


def test_diversified_values_are_real_and_improve_with_k():
    rng = random.Random(97)
    from dd_utils import feasible_paths, sequence_value
    for _ in range(10):
        model = SopModel(make_random_sop(rng, 6, 0.15))
        ctx = FilterContext(model)
        dd = build_initial_relaxation(model, (), 0, 3, ctx)
        refine(dd, assignment_ordering(model), ctx)
        feasible = feasible_paths(model)
        prev = None
        for k in (1, 2, 5):
            found = diversified_search(dd, k, model, ctx)
            for value, path in found:
                assert tuple(path) in feasible
                assert value == sequence_value(model, tuple(path))
            best = found[0][0] if found else None
            if prev is not None and best is not None:
                assert best <= prev
            if best is not None:
                prev = best


def test_diversified_can_come_up_empty_then_recover_with_k():
    # the cheap prefixes all strand customer 1 behind its deadline; only
    # a larger k retains the costlier prefix that still works
    dist = (
        (0, 10, 1, 1),
        (10, 0, 1, 1),
        (1, 50, 0, 1),
        (1, 50, 1, 0),
    )
    windows = ((0, 1000), (0, 15), (0, 1000), (0, 1000))
    model = TsptwModel(TsptwInstance(4, dist, windows))
    ctx = FilterContext(model)
    dd = build_initial_relaxation(model, (), 0, 8, ctx)
    assert brute_force(model).optimum is not None
    assert diversified_search(dd, 1, model, ctx) == []
    found = diversified_search(dd, 4, model, ctx)
    assert found and found[0][0] == brute_force(model).optimum


def test_tsptw_solve_travel_and_makespan():
    rng = random.Random(101)
    for objective in (Objective.TRAVEL, Objective.MAKESPAN):
        for _ in range(5):
            inst = make_random_tsptw(rng, 7)
            model = TsptwModel(inst, objective)
            want = brute_force(model).optimum
            r = solve(model, SolveConfig(width=8, diversify_k=3,
                                         diversify_width=0, time_limit=30))
            assert r.closed and r.upper == want and r.lower == want


def test_infeasible_instance_closes_empty():
    inst = TsptwInstance(
        3,
        ((0, 500, 500), (500, 0, 500), (500, 500, 0)),
        ((0, 10000), (100, 200), (100, 200)),
    )
    model = TsptwModel(inst)
    r = solve(model, SolveConfig(width=4, diversify_k=2, time_limit=10))
    assert r.closed
    assert r.upper is None and r.incumbent_path is None
