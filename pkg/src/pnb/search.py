"""Best-bound search drivers.

Two modes share the queue, incumbent and timeline plumbing: the
peel-and-bound loop, which reuses each relaxation by peeling exact
sub-diagrams off it, and a classic branch-and-bound baseline that
recompiles fresh diagrams for every exact-cutset node.

Single-worker runs are fully deterministic.  With several workers the
queue and incumbent are the only shared state; each popped entry is
processed with exclusive ownership, so final bounds on closed instances
are reproducible even though timelines are not.
"""

from __future__ import annotations

import heapq
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from .diagram import (Diagram, DisconnectedDiagram, decode_path,
                      shortest_path)
from .models import ProblemModel, assignment_ordering
from .peel import PeelChoice, peel, select_exact_node
from .relax import FilterContext, build_initial_relaxation, refine, sweep
from .restrict import build_restricted


class Mode(Enum):
    PNB = "pnb"
    BNB = "bnb"


class EmptyQueue(Exception):
    pass


class QueueEntry(NamedTuple):
    """Open subproblem ordered by bound, FIFO among equal bounds."""

    bound: int
    seq: int
    payload: object


@dataclass
class SolveConfig:
    width: int = 2048
    mode: Mode = Mode.PNB
    peel_choice: PeelChoice = PeelChoice.LAST_EXACT
    seed_value: Optional[int] = None
    diversify_k: int = 5
    diversify_width: int = 100
    time_limit: float = 3600.0
    workers: int = 1

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("width must be at least 2")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class SolveResult:
    lower: Optional[int]
    upper: Optional[int]
    incumbent_path: Optional[list]
    gap_percent: float
    closed: bool
    timeline: list
    iterations: int
    wall_time: float
    queue_len: int
    scale: int = 1


def optimality_gap(lower, upper) -> float:
    """Percent gap between the bounds, two-decimal rounding; an absent
    upper bound reports as fully open."""
    if upper is None:
        return 100.0
    if lower is None:
        lower = 0
    return round(100.0 * (upper - lower) / upper, 2)


def select_diagram(queue: list) -> QueueEntry:
    """Pop the queue entry with the best bound (FIFO among ties)."""
    if not queue:
        raise EmptyQueue
    return heapq.heappop(queue)


def diversified_search(diagram: Diagram, k: int, model: ProblemModel,
                       ctx: FilterContext) -> List[Tuple[int, list]]:
    """Map every node to its k best feasible in-paths, extending parents'
    stored paths layer by layer; returns complete feasible solutions
    found at the terminal, best first.

    Stored prefixes can all die against the constraints, in which case
    the result is empty.
    """
    if k < 1:
        raise ValueError("k must be positive")
    base = diagram.root_offset
    paths = {diagram.root: [(0, diagram.root_arrival, diagram.all_[diagram.root],
                             tuple())]}
    finals: List[Tuple[int, list]] = []
    for li in range(1, len(diagram.layers)):
        for v in diagram.layers[li]:
            sv = diagram.state[v]
            is_terminal = v == diagram.terminal
            found = []
            for u in sorted(diagram.ins[v]):
                su = diagram.state[u]
                for value, arrival, visited, labels in paths.get(u, ()):
                    if is_terminal:
                        if model.terminal_ok(arrival, su):
                            found.append((model.terminal_value(value, su, base),
                                          arrival, visited, labels))
                    elif model.extension_ok(visited, arrival, su, sv):
                        found.append((model.value_after(value, su, sv, base),
                                      model.arrival_after(arrival, su, sv),
                                      visited | (1 << sv),
                                      labels + (sv,)))
            found.sort(key=lambda t: (t[0], t[3]))
            if is_terminal:
                finals = found
            else:
                paths[v] = found[:k]
    return [(base + value, diagram.root_prefix + list(labels))
            for value, _, _, labels in finals]


class _Shared:
    """Queue, incumbent and timeline state shared by the workers."""

    def __init__(self, model: ProblemModel, config: SolveConfig):
        self.model = model
        self.config = config
        self.heap: list = []
        self.counter = 0
        self.upper: Optional[int] = config.seed_value
        self.path: Optional[list] = None
        self.timeline: list = []
        self.iterations = 0
        self.inflight: dict = {}
        self.timed_out = False
        self.reported_lb: Optional[int] = None
        self.t0 = time.perf_counter()
        self.last_mark = -1.0
        self.cv = threading.Condition()

    # callers hold the lock for everything below
    def push(self, bound, payload) -> None:
        heapq.heappush(self.heap, QueueEntry(bound, self.counter, payload))
        self.counter += 1

    def structural_lb(self) -> Optional[int]:
        candidates = []
        if self.heap:
            candidates.append(self.heap[0][0])
        candidates.extend(self.inflight.values())
        return min(candidates, default=None)

    def current_lower(self) -> Optional[int]:
        lb = self.structural_lb()
        if lb is None:
            return self.upper
        if self.upper is not None and self.upper < lb:
            return self.upper
        return lb

    def improve(self, value, path) -> bool:
        if value is None:
            return False
        if self.upper is None or value < self.upper:
            self.upper = value
            self.path = path
            return True
        return False

    def mark(self, force: bool = False) -> None:
        now = time.perf_counter() - self.t0
        lower = self.current_lower()
        if not force and self.timeline:
            _, last_lb, last_ub, _ = self.timeline[-1]
            changed = last_lb != lower or last_ub != self.upper
            if not changed and now - self.last_mark < 1.0:
                return
        if self.reported_lb is not None and lower is not None:
            lower = max(lower, self.reported_lb)
        self.reported_lb = lower
        self.timeline.append((now, lower, self.upper, len(self.heap)))
        self.last_mark = now

    def out_of_time(self) -> bool:
        return time.perf_counter() - self.t0 >= self.config.time_limit


def solve(model: ProblemModel, config: SolveConfig) -> SolveResult:
    """Run the configured search to closure or the time limit."""
    ordering = assignment_ordering(model)
    shared = _Shared(model, config)

    if config.mode is Mode.PNB and config.seed_value is None and config.diversify_k > 0:
        _diversified_start(model, config, ordering, shared)

    if config.mode is Mode.PNB:
        _seed_pnb(model, config, ordering, shared)
        step = _PnbStep(model, config, ordering)
    else:
        shared.push(model.start_offset, ((), model.start_offset,
                                         model.start_arrival))
        step = _BnbStep(model, config, ordering)

    shared.mark(force=True)
    if config.workers == 1:
        _worker(shared, step, 0)
    else:
        threads = [threading.Thread(target=_worker, args=(shared, step, i))
                   for i in range(config.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    closed = not shared.timed_out and not shared.heap
    if closed:
        lower = shared.upper
    else:
        lower = shared.current_lower()
    shared.mark(force=True)
    gap = 0.0 if closed else optimality_gap(lower, shared.upper)
    return SolveResult(
        lower=lower,
        upper=shared.upper,
        incumbent_path=shared.path,
        gap_percent=gap,
        closed=closed,
        timeline=shared.timeline,
        iterations=shared.iterations,
        wall_time=time.perf_counter() - shared.t0,
        queue_len=len(shared.heap),
        scale=model.scale,
    )


def _diversified_start(model, config, ordering, shared) -> None:
    ctx = FilterContext(model, None)
    width = config.diversify_width or config.width
    try:
        dd = build_initial_relaxation(model, (), model.start_offset, width, ctx)
        refine(dd, ordering, ctx)
        shortest_path(dd, model)
    except DisconnectedDiagram:
        return
    found = diversified_search(dd, config.diversify_k, model, ctx)
    if found:
        value, path = found[0]
        shared.improve(value, path)


def _seed_pnb(model, config, ordering, shared) -> None:
    ctx = FilterContext(model, shared.upper)
    try:
        dd = build_initial_relaxation(model, (), model.start_offset,
                                      config.width, ctx)
        refine(dd, ordering, ctx)
        bound, _ = shortest_path(dd, model)
    except DisconnectedDiagram:
        return
    if shared.upper is None or bound < shared.upper:
        shared.push(bound, dd)


def _worker(shared: _Shared, step, worker_id: int) -> None:
    cv = shared.cv
    while True:
        with cv:
            while not shared.heap and shared.inflight and not shared.timed_out:
                cv.wait(0.02)
            if not shared.heap or shared.timed_out:
                cv.notify_all()
                return
            if shared.out_of_time():
                shared.timed_out = True
                cv.notify_all()
                return
            bound, _, payload = select_diagram(shared.heap)
            if shared.upper is not None and bound >= shared.upper:
                continue  # stale entry: a better incumbent arrived meanwhile
            shared.inflight[worker_id] = bound
            upper = shared.upper
        try:
            children, incumbent = step.process(payload, upper)
        finally:
            with cv:
                del shared.inflight[worker_id]
        with cv:
            if incumbent is not None:
                shared.improve(*incumbent)
            for child_bound, child in children:
                if shared.upper is None or child_bound < shared.upper:
                    shared.push(child_bound, child)
            shared.iterations += 1
            shared.mark()
            cv.notify_all()


class _PnbStep:
    def __init__(self, model, config, ordering):
        self.model = model
        self.config = config
        self.ordering = ordering

    def process(self, diagram: Diagram, upper):
        model = self.model
        ctx = FilterContext(model, upper)
        children = []
        # arcs that were sound when the diagram was queued can be dead
        # now that earlier peels rewrote its history sets, so the
        # refresh re-filters everything against the recomputed sets
        sweep(diagram, model, ctx)
        try:
            bound, _ = shortest_path(diagram, model, recompute=False)
        except DisconnectedDiagram:
            return children, None
        if upper is not None and bound >= upper:
            return children, None
        if diagram.num_decision_layers == 0:
            # fully pinned sequence: evaluate it exactly and close
            restricted, _ = build_restricted(model, diagram.root_prefix,
                                             None, 1, None, ctx)
            try:
                value, path = shortest_path(restricted, model)
                if upper is None or value < upper:
                    return children, (value, path)
            except DisconnectedDiagram:
                pass
            return children, None
        e = select_exact_node(diagram, model, self.config.peel_choice,
                              recompute=False)
        outcome = peel(diagram, e, ctx)
        if outcome.residual is not None:
            try:
                res_bound, _ = shortest_path(outcome.residual, model)
                if upper is None or res_bound < upper:
                    children.append((res_bound, outcome.residual))
            except DisconnectedDiagram:
                pass
        peeled = outcome.peeled
        restricted, is_exact = build_restricted(
            model, peeled.root_prefix, None, self.config.width,
            companion=peeled, ctx=ctx)
        incumbent = None
        try:
            value, path = shortest_path(restricted, model)
            if upper is None or value < upper:
                incumbent = (value, path)
                upper = value
        except DisconnectedDiagram:
            pass
        if not (is_exact and peeled.root_dominates):
            refine_ctx = FilterContext(model, upper)
            refine(peeled, self.ordering, refine_ctx)
            try:
                peeled_bound, _ = shortest_path(peeled, model)
                if upper is None or peeled_bound < upper:
                    children.append((peeled_bound, peeled))
            except DisconnectedDiagram:
                pass
        return children, incumbent


class _BnbStep:
    def __init__(self, model, config, ordering):
        self.model = model
        self.config = config
        self.ordering = ordering

    def process(self, payload, upper):
        model = self.model
        prefix, offset, arrival = payload
        ctx = FilterContext(model, upper)
        children = []
        restricted, is_exact = build_restricted(
            model, prefix, None, self.config.width, companion=None, ctx=ctx)
        incumbent = None
        try:
            value, path = shortest_path(restricted, model)
            if upper is None or value < upper:
                incumbent = (value, path)
                upper = value
        except DisconnectedDiagram:
            pass
        if is_exact:
            return children, incumbent
        relax_ctx = FilterContext(model, upper)
        try:
            relaxed = build_initial_relaxation(model, prefix, offset,
                                               self.config.width, relax_ctx,
                                               root_arrival=arrival)
            refine(relaxed, self.ordering, relax_ctx)
            bound, bound_path = shortest_path(relaxed, model)
        except DisconnectedDiagram:
            return children, incumbent
        if upper is not None and bound >= upper:
            return children, incumbent
        cut_layer = _deepest_exact_layer(relaxed)
        if cut_layer == relaxed.num_decision_layers:
            # the whole relaxation is exact: its best path is feasible
            if upper is None or bound < upper:
                incumbent = (bound, bound_path)
            return children, incumbent
        down = _completion_values(relaxed, model)
        for u in relaxed.layers[cut_layer]:
            child_prefix = decode_path(relaxed, u)
            child_offset = relaxed.root_offset + relaxed.value[u]
            child_bound = child_offset + down[u]
            if upper is None or child_bound < upper:
                children.append((child_bound,
                                 (child_prefix, child_offset,
                                  relaxed.arrival[u])))
        return children, incumbent


def _deepest_exact_layer(diagram: Diagram) -> int:
    deepest = 0
    for li in range(1, diagram.num_decision_layers + 1):
        nodes = diagram.layers[li]
        if nodes and all(diagram.exact[v] for v in nodes):
            deepest = li
        else:
            break
    return deepest


def _completion_values(diagram: Diagram, model: ProblemModel) -> dict:
    """Additive lower bound on completing from each node to the terminal
    (waiting time is dropped, which can only understate)."""
    down = {diagram.terminal: 0}
    for li in range(len(diagram.layers) - 2, -1, -1):
        for v in diagram.layers[li]:
            sv = diagram.state[v]
            best = None
            for w in diagram.outs[v]:
                if w == diagram.terminal:
                    cand = model.terminal_distance_lb(sv)
                else:
                    cand = model.distance_lb(sv, diagram.state[w]) + down[w]
                if best is None or cand < best:
                    best = cand
            down[v] = best if best is not None else 0
    return down
