"""End-to-end shapes the module tests don't reach: forbidden moves,
dummy start/end framing as found in the published matrices, and
mixed-mode agreement on them."""

import random

from pnb.models import Objective, SopModel, TsptwModel
from pnb.oracle import brute_force
from pnb.parsing import dump_sop, parse_sop
from pnb.peel import PeelChoice
from pnb.search import Mode, SolveConfig, solve

from conftest import make_random_sop, make_random_tsptw


def with_forbidden(inst, rng, share=0.15):
    cost = [list(row) for row in inst.cost]
    n = inst.n
    for i in range(n):
        for j in range(n):
            if i != j and cost[i][j] is not None and rng.random() < share:
                cost[i][j] = None
    from pnb.models import SopInstance
    return SopInstance(n, tuple(tuple(r) for r in cost), inst.precedence,
                       name=inst.name + "-forbidden")


def framed_with_dummies(rng, tasks):
    """Start element precedes everything, end element follows everything,
    matching how the published precedence matrices frame their tasks."""
    n = tasks + 2
    start, end = 0, n - 1
    cost = [[None] * n for _ in range(n)]
    precedence = set()
    for i in range(n):
        for j in range(n):
            if i != j:
                cost[i][j] = rng.randint(1, 60)
    for j in range(1, n):
        precedence.add((start, j))
    for i in range(0, n - 1):
        precedence.add((i, end))
        cost[i][end] = 0
    for k in range(tasks // 2):
        a, b = rng.sample(range(1, n - 1), 2)
        if (b, a) not in precedence and a != b:
            precedence.add((a, b))
    from pnb.models import SopInstance, CyclicPrecedence
    try:
        return SopInstance(n, tuple(tuple(r) for r in cost),
                           frozenset(precedence), name=f"framed-{tasks}")
    except CyclicPrecedence:
        return None


def test_forbidden_moves_respected():
    rng = random.Random(113)
    solved = 0
    for k in range(25):
        inst = with_forbidden(make_random_sop(rng, rng.randint(5, 7), 0.2),
                              rng, share=0.15 if k % 2 else 0.45)
        model = SopModel(inst)
        want = brute_force(model).optimum
        result = solve(model, SolveConfig(width=8, diversify_k=2,
                                          diversify_width=0, time_limit=30))
        assert result.closed
        if want is None:
            assert result.upper is None
        else:
            solved += 1
            assert result.upper == want and result.lower == want
            for a, b in zip(result.incumbent_path, result.incumbent_path[1:]):
                assert inst.cost[a][b] is not None
    assert solved > 5


def test_unreachable_element_means_infeasible():
    # element 3 requires a predecessor but every move into it is barred
    inst = make_random_sop(random.Random(3), 5, 0.0)
    cost = [list(row) for row in inst.cost]
    for i in range(5):
        cost[i][3] = None
    from pnb.models import SopInstance
    blocked = SopInstance(5, tuple(tuple(r) for r in cost),
                          frozenset({(0, 3)}))
    model = SopModel(blocked)
    assert brute_force(model).optimum is None
    result = solve(model, SolveConfig(width=8, diversify_k=2,
                                      diversify_width=0, time_limit=10))
    assert result.closed and result.upper is None


def test_forbidden_round_trips_through_parser():
    rng = random.Random(127)
    inst = with_forbidden(make_random_sop(rng, 6, 0.1), rng, share=0.3)
    again = parse_sop(dump_sop(inst))
    assert brute_force(SopModel(again)).optimum == \
        brute_force(SopModel(inst)).optimum


def test_dummy_framed_instances_close_in_both_modes():
    rng = random.Random(131)
    done = 0
    while done < 6:
        inst = framed_with_dummies(rng, 6)
        if inst is None:
            continue
        done += 1
        model = SopModel(inst)
        want = brute_force(model).optimum
        assert want is not None
        # the frame forces the start element first and the end element
        # last, so the final decision layer holds a single node
        for mode in (Mode.PNB, Mode.BNB):
            result = solve(model, SolveConfig(width=64, mode=mode,
                                              diversify_k=3,
                                              diversify_width=0,
                                              time_limit=60))
            assert result.closed and result.upper == want
            assert result.incumbent_path is None or (
                result.incumbent_path[0] == 0
                and result.incumbent_path[-1] == inst.n - 1)


def test_total_chain_precedence_forces_single_order():
    rng = random.Random(139)
    n = 6
    order = list(range(n))
    rng.shuffle(order)
    chain = frozenset((order[i], order[i + 1]) for i in range(n - 1))
    from pnb.models import SopInstance
    cost = tuple(tuple(None if i == j else rng.randint(0, 9)
                       for j in range(n)) for i in range(n))
    model = SopModel(SopInstance(n, cost, chain))
    want = brute_force(model).optimum
    result = solve(model, SolveConfig(width=4, diversify_k=1,
                                      diversify_width=0, time_limit=10))
    assert result.closed and result.upper == want
    assert result.incumbent_path == order


def test_tie_heavy_costs_close_cleanly():
    from pnb.models import SopInstance
    cost = tuple(tuple(None if i == j else 7 for j in range(6))
                 for i in range(6))
    model = SopModel(SopInstance(6, cost, frozenset()))
    for mode in (Mode.PNB, Mode.BNB):
        result = solve(model, SolveConfig(width=4, mode=mode, diversify_k=2,
                                          diversify_width=0, time_limit=30))
        assert result.closed and result.upper == 7 * 5


def test_single_customer_tour():
    from pnb.models import TsptwInstance
    inst = TsptwInstance(2, ((0, 300), (700, 0)), ((0, 10**6), (0, 10**6)))
    for objective, want in ((Objective.TRAVEL, 1000), (Objective.MAKESPAN, 1000)):
        model = TsptwModel(inst, objective)
        result = solve(model, SolveConfig(width=4, diversify_k=1,
                                          diversify_width=0, time_limit=10))
        assert result.closed and result.upper == want
        assert result.incumbent_path == [1]


def test_workers_stress_agreement():
    rng = random.Random(137)
    for trial in range(6):
        if trial % 2 == 0:
            model = SopModel(make_random_sop(rng, 9, 0.15))
        else:
            model = TsptwModel(make_random_tsptw(rng, 8),
                               Objective.MAKESPAN if trial == 3 else Objective.TRAVEL)
        want = brute_force(model, n_limit=10).optimum
        for workers in (2, 4):
            result = solve(model, SolveConfig(width=6, workers=workers,
                                              peel_choice=PeelChoice.FRONTIER,
                                              diversify_k=1, diversify_width=0,
                                              time_limit=60))
            assert result.closed
            assert result.upper == want and result.lower == want
