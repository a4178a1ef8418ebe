import random

import pytest

from pnb.models import (Objective, SopInstance, SopModel, TsptwInstance,
                        TsptwModel)

# 4-element instance used across the suite: A must come before everything,
# B before D.  Optimal order is A,B,D,C at cost 17.
TINY_COST = (
    (None, 8, 5, 0),
    (None, None, 5, 8),
    (None, 5, None, 5),
    (None, None, 1, None),
)
TINY_PRECEDENCE = frozenset({(0, 1), (0, 2), (0, 3), (1, 3)})

A, B, C, D = 0, 1, 2, 3


@pytest.fixture
def tiny_sop():
    return SopInstance(4, TINY_COST, TINY_PRECEDENCE, name="tiny")


@pytest.fixture
def tiny_model(tiny_sop):
    return SopModel(tiny_sop)


def make_random_sop(rng: random.Random, n: int, density: float = 0.2) -> SopInstance:
    order = list(range(n))
    rng.shuffle(order)
    precedence = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                precedence.add((order[i], order[j]))
    cost = tuple(
        tuple(None if i == j else rng.randint(0, 100) for j in range(n))
        for i in range(n)
    )
    return SopInstance(n, cost, frozenset(precedence), name=f"rand-sop-{n}")


def make_random_tsptw(rng: random.Random, n: int, width: int = 1500) -> TsptwInstance:
    dist = tuple(
        tuple(0 if i == j else rng.randint(1, 50) * 100 for j in range(n))
        for i in range(n)
    )
    tour = list(range(1, n))
    rng.shuffle(tour)
    windows = [None] * n
    t = 0
    state = 0
    for c in tour:
        t += dist[state][c]
        lo = max(0, t - rng.randint(0, width))
        hi = t + rng.randint(100, width)
        windows[c] = (lo, hi)
        t = max(t, lo)
        state = c
    windows[0] = (0, t + dist[state][0] + 10 * width)
    return TsptwInstance(n, dist, tuple(windows), name=f"rand-tsptw-{n}")


def random_sop_models(seed: int, count: int, sizes=(5, 6, 7, 8)):
    rng = random.Random(seed)
    out = []
    for k in range(count):
        n = sizes[k % len(sizes)]
        out.append(SopModel(make_random_sop(rng, n, density=rng.uniform(0.05, 0.3))))
    return out


def random_tsptw_models(seed: int, count: int, sizes=(5, 6, 7, 8),
                        objective: Objective = Objective.TRAVEL):
    rng = random.Random(seed)
    out = []
    for k in range(count):
        n = sizes[k % len(sizes)]
        out.append(TsptwModel(make_random_tsptw(rng, n), objective))
    return out
