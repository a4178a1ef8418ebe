"""Problem definitions for the three sequencing variants.

Each model wraps an immutable instance and exposes the hooks the diagram
machinery needs: transition values, arrival-time propagation, single-step
feasibility, static arc checks used when seeding a diagram, the cheap
admissible completion bound used for pruning, and the split ordering.

Values are integers throughout: raw costs for precedence-constrained
sequencing instances, fixed-point (two implied decimals, see ``SCALE``)
for timed tours.  Keeping bounds integral avoids any float-comparison
ambiguity when bounds meet.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

Label = int

SCALE = 100

# State sentinel for nodes that do not pin a concrete element (a fresh
# root before any decision, and the terminal sink).
NO_STATE = -1


class Objective(Enum):
    TRAVEL = "travel"
    MAKESPAN = "makespan"


class CyclicPrecedence(ValueError):
    """The precedence relation admits no feasible ordering."""


class InfeasibleRoot(ValueError):
    """A supplied prefix violates the instance constraints."""


@dataclass(frozen=True)
class SopInstance:
    """Cost matrix plus a partial order that the sequence must respect.

    ``cost[i][j]`` is the transition cost of following element ``i`` with
    element ``j``; ``None`` marks a forbidden move.  ``precedence`` holds
    ordered pairs ``(i, j)`` meaning ``i`` must appear before ``j``.
    """

    n: int
    cost: tuple
    precedence: frozenset
    name: str = ""

    def __post_init__(self):
        _check_acyclic(self.n, self.precedence)


@dataclass(frozen=True)
class TsptwInstance:
    """Travel-time matrix and per-node service windows, depot at index 0.

    Distances and window bounds are fixed-point integers (``SCALE``
    units per whole unit).  A tour starts at the depot, visits every
    customer once inside its window (waiting is allowed), and returns.
    """

    n: int
    dist: tuple
    windows: tuple
    name: str = ""

    def __post_init__(self):
        for i, (lo, hi) in enumerate(self.windows):
            if lo > hi:
                raise ValueError(f"window {i} opens after it closes")


def _check_acyclic(n: int, precedence) -> None:
    succs = [[] for _ in range(n)]
    indeg = [0] * n
    for i, j in precedence:
        succs[i].append(j)
        indeg[j] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for v in succs[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if seen != n:
        raise CyclicPrecedence("precedence constraints contain a cycle")


@dataclass(frozen=True)
class SplitOrdering:
    """Static label ordering that drives node splitting, most important first."""

    labels: tuple

    def __post_init__(self):
        if sorted(self.labels) != list(range(len(self.labels))):
            raise ValueError("ordering must be a permutation of all labels")


class SopModel:
    """Precedence-constrained minimum-cost sequencing over ``n`` elements."""

    kind = "sop"
    scale = 1

    def __init__(self, instance: SopInstance):
        self.instance = instance
        n = instance.n
        self.n_labels = n
        self.num_decisions = n
        self.decision_labels = tuple(range(n))
        self.root_state = NO_STATE
        self.start_arrival = 0
        self.start_offset = 0
        self.cost = instance.cost
        self.pred_mask = [0] * n
        self.succ_mask = [0] * n
        for i, j in instance.precedence:
            self.pred_mask[j] |= 1 << i
            self.succ_mask[i] |= 1 << j
        self.pred_count = [m.bit_count() for m in self.pred_mask]
        self.succ_count = [m.bit_count() for m in self.succ_mask]
        self.rrb_rows = _distance_rows(n, instance.cost)
        self._rrb_memo = {}
        self._rrb_cap = max(100_000, 12_000_000 // (n + 1))

    # -- value / time propagation -------------------------------------
    def value_after(self, value: int, s_from: int, s_to: int, base: int) -> int:
        if s_from == NO_STATE:
            return value
        return value + self.cost[s_from][s_to]

    def terminal_value(self, value: int, s_from: int, base: int) -> int:
        return value

    def arrival_after(self, arrival: int, s_from: int, s_to: int) -> int:
        return 0

    def window_ok(self, arrival: int, s_from: int, s_to: int) -> bool:
        return True

    def terminal_ok(self, arrival: int, s_from: int) -> bool:
        return True

    def distance_lb(self, s_from: int, s_to: int) -> int:
        if s_from == NO_STATE:
            return 0
        return self.cost[s_from][s_to]

    def terminal_distance_lb(self, s_from: int) -> int:
        return 0

    # -- feasibility ---------------------------------------------------
    def static_arc_ok(self, a: int, b: int) -> bool:
        if a == b or self.cost[a][b] is None:
            return False
        # placing b right after a contradicts any "b before a" requirement
        return not (self.pred_mask[a] >> b) & 1

    def position_ok(self, label: int, position: int) -> bool:
        return (self.pred_count[label] <= position - 1
                and self.succ_count[label] <= self.num_decisions - position)

    def extension_ok(self, visited: int, arrival: int, s_from: int, to: int) -> bool:
        if (visited >> to) & 1:
            return False
        if self.pred_mask[to] & ~visited:
            return False
        if self.succ_mask[to] & visited:
            return False
        if s_from != NO_STATE and self.cost[s_from][to] is None:
            return False
        return True

    # -- completion bound ----------------------------------------------
    def rrb_target_ok(self, target: int, visited: int) -> bool:
        return not (visited >> target) & 1

    def rrb_keep(self, remaining: int) -> int:
        # the final element of a completion has no outgoing move
        return remaining - 1


class TsptwModel:
    """Timed tours from the depot (label 0) over customers ``1..n-1``."""

    def __init__(self, instance: TsptwInstance, objective: Objective = Objective.TRAVEL):
        self.instance = instance
        self.objective = objective
        self.kind = "makespan" if objective is Objective.MAKESPAN else "tsptw"
        self.scale = SCALE
        n = instance.n
        self.n_labels = n
        self.num_decisions = n - 1
        self.decision_labels = tuple(range(1, n))
        self.root_state = 0
        self.dist = instance.dist
        self.open = [w[0] for w in instance.windows]
        self.close = [w[1] for w in instance.windows]
        self.start_arrival = self.open[0]
        # makespan counts from the departure clock, travel from zero cost
        self.start_offset = self.start_arrival if objective is Objective.MAKESPAN else 0
        self.pred_mask = [0] * n
        self.succ_mask = [0] * n
        self.rrb_rows = _distance_rows(n, instance.dist, skip=(0,))
        self._rrb_memo = {}
        self._rrb_cap = max(100_000, 12_000_000 // (n + 1))

    def value_after(self, value: int, s_from: int, s_to: int, base: int) -> int:
        moved = value + self.dist[s_from][s_to]
        if self.objective is Objective.MAKESPAN:
            # waiting for the window to open counts toward the objective;
            # base is the absolute clock at this diagram's root
            return max(moved, self.open[s_to] - base)
        return moved

    def terminal_value(self, value: int, s_from: int, base: int) -> int:
        return value + self.dist[s_from][0]

    def arrival_after(self, arrival: int, s_from: int, s_to: int) -> int:
        return max(arrival + self.dist[s_from][s_to], self.open[s_to])

    def window_ok(self, arrival: int, s_from: int, s_to: int) -> bool:
        return arrival + self.dist[s_from][s_to] <= self.close[s_to]

    def terminal_ok(self, arrival: int, s_from: int) -> bool:
        return arrival + self.dist[s_from][0] <= self.close[0]

    def distance_lb(self, s_from: int, s_to: int) -> int:
        return self.dist[s_from][s_to]

    def terminal_distance_lb(self, s_from: int) -> int:
        return self.dist[s_from][0]

    def static_arc_ok(self, a: int, b: int) -> bool:
        # departure from a can never precede a's window opening
        return a != b and self.open[a] + self.dist[a][b] <= self.close[b]

    def position_ok(self, label: int, position: int) -> bool:
        return True

    def extension_ok(self, visited: int, arrival: int, s_from: int, to: int) -> bool:
        if (visited >> to) & 1:
            return False
        return self.window_ok(arrival, s_from, to)

    def rrb_target_ok(self, target: int, visited: int) -> bool:
        # the depot is always a legal final destination
        return target == 0 or not (visited >> target) & 1

    def rrb_keep(self, remaining: int) -> int:
        # every remaining customer has an outgoing move (the last one
        # returns to the depot)
        return remaining


ProblemModel = SopModel | TsptwModel


def _distance_rows(n: int, matrix, skip: Sequence[int] = ()) -> list:
    """Per-label lists of (distance, target) pairs, ascending by distance."""
    rows = []
    for u in range(n):
        if u in skip:
            rows.append(())
            continue
        entries = [(matrix[u][j], j) for j in range(n)
                   if j != u and matrix[u][j] is not None]
        entries.sort()
        rows.append(tuple(entries))
    return rows


def completion_bound(model: ProblemModel, visited: int, remaining: int) -> int:
    """Admissible lower bound on the cost of sequencing the rest.

    For every label not yet forced into the sequence, take its cheapest
    outgoing move to another candidate; keep the ``rrb_keep(remaining)``
    smallest of those and sum them.  Any actual completion traverses at
    least that many moves, each at least as expensive, so the sum never
    exceeds the true completion cost.

    Prefix sums are memoized per visited-set as compact arrays; the memo
    resets when it reaches its size cap so hour-long runs stay bounded.
    """
    if remaining <= 0:
        return 0
    memo = model._rrb_memo
    sums = memo.get(visited)
    if sums is None:
        mins = []
        for u in model.decision_labels:
            if (visited >> u) & 1:
                continue
            best = 0
            for d, j in model.rrb_rows[u]:
                if model.rrb_target_ok(j, visited):
                    best = d
                    break
            mins.append(best)
        mins.sort()
        sums = array("q", [0] * (len(mins) + 1))
        acc = 0
        for i, v in enumerate(mins):
            acc += v
            sums[i + 1] = acc
        if len(memo) >= model._rrb_cap:
            memo.clear()
        memo[visited] = sums
    keep = model.rrb_keep(remaining)
    if keep <= 0:
        return 0
    if keep >= len(sums):
        keep = len(sums) - 1
    return sums[keep]


def rough_relaxed_bound(model: ProblemModel, all_down: int, remaining: int) -> int:
    """Completion bound below a node, keyed by its forced-label set and
    the number of undecided positions."""
    return completion_bound(model, all_down, remaining)


def feasible_transition(model: ProblemModel, some_down: int, all_down: int,
                        arrival: int, s_from: int, to: int) -> bool:
    """Can an arc assigning ``to`` leave a node with this downward history?

    Uses the relaxed history sets, so a True answer may still be spurious
    on some paths; a False answer is always safe to act on.
    """
    if (all_down >> to) & 1:
        return False
    if model.pred_mask[to] & ~some_down:
        return False
    if model.succ_mask[to] & all_down:
        return False
    if s_from != NO_STATE and not model.window_ok(arrival, s_from, to):
        return False
    return True


def replay_prefix(model: ProblemModel, prefix: Sequence[int]):
    """Replay a concrete prefix order.

    Returns ``(ok, visited, last_state, value, arrival)`` where ``value``
    and ``arrival`` are exact for this order.  ``ok`` is False as soon as
    a step is infeasible; the remaining fields then describe the replay
    up to the failure.
    """
    visited = 0
    state = model.root_state
    value = 0
    arrival = model.start_arrival
    for to in prefix:
        if not model.extension_ok(visited, arrival, state, to):
            return False, visited, state, value, arrival
        value = model.value_after(value, state, to, model.start_arrival)
        arrival = model.arrival_after(arrival, state, to)
        visited |= 1 << to
        state = to
    return True, visited, state, value, arrival


def assignment_ordering(model: ProblemModel) -> SplitOrdering:
    """Rank labels for splitting: remote elements first, then heavy preceders.

    The primary key is the average finite transition cost to and from the
    element; the secondary key is how many elements it must precede.
    Both sort descending; full ties keep index order.
    """
    if isinstance(model, SopModel):
        matrix = model.instance.cost
    else:
        matrix = model.instance.dist
    n = model.n_labels
    keys = []
    for u in range(n):
        total = 0
        cnt = 0
        for j in range(n):
            if j == u:
                continue
            out = matrix[u][j]
            if out is not None:
                total += out
                cnt += 1
            inc = matrix[j][u]
            if inc is not None:
                total += inc
                cnt += 1
        avg = total / cnt if cnt else 0.0
        keys.append((-avg, -model.succ_count[u] if isinstance(model, SopModel) else 0, u))
    keys.sort()
    return SplitOrdering(tuple(u for _, _, u in keys))
