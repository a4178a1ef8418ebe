"""Layered decision-diagram storage with implied arcs.

Arcs are never materialized: adjacency is kept as per-node neighbor id
sets, and an arc's label and cost follow from the states of its two
endpoints.  Every piece of mutable per-node data lives in parallel lists
indexed by a dense node id; ids are recycled through a free list because
peeling churns through nodes quickly.  Label-history sets (``some`` =
labels on at least one in-path, ``all_`` = labels on every in-path) are
plain int bitmasks, so set algebra costs one machine word per 64 labels.

A diagram covering ``m`` decisions has ``m + 2`` layers: a single root,
one layer of single-state nodes per decision, and a single stateless
terminal sink.  Keeping the final decision on its own node layer is what
lets every arc cost be determined by its endpoints alone.
"""

from __future__ import annotations

from typing import Callable, Optional

from .models import NO_STATE, ProblemModel

INF = float("inf")


class DisconnectedDiagram(Exception):
    """The terminal is unreachable: the diagram encodes no completion."""


class Diagram:
    __slots__ = (
        "n_labels", "width_cap", "root_prefix", "root_offset", "root_arrival",
        "root_dominates", "layers", "state", "layer", "some", "all_", "value",
        "parent", "arrival", "exact", "alive", "ins", "outs", "_free",
        "root", "terminal",
    )

    def __init__(self, n_labels: int, width_cap: int, root_prefix=(),
                 root_offset: int = 0, root_arrival: int = 0,
                 root_dominates: bool = True):
        self.n_labels = n_labels
        self.width_cap = width_cap
        self.root_prefix = list(root_prefix)
        self.root_offset = root_offset
        self.root_arrival = root_arrival
        # True when the recorded prefix order is simultaneously cheapest
        # and earliest among all orders reaching this root
        self.root_dominates = root_dominates
        self.layers = []
        self.state = []
        self.layer = []
        self.some = []
        self.all_ = []
        self.value = []
        self.parent = []
        self.arrival = []
        self.exact = []
        self.alive = []
        self.ins = []
        self.outs = []
        self._free = []
        self.root = -1
        self.terminal = -1

    # -- structure -------------------------------------------------------
    def add_layers(self, count: int) -> None:
        for _ in range(count):
            self.layers.append([])

    def new_node(self, layer: int, state: int) -> int:
        if self._free:
            nid = self._free.pop()
            self.state[nid] = state
            self.layer[nid] = layer
            self.some[nid] = 0
            self.all_[nid] = 0
            self.value[nid] = 0
            self.parent[nid] = -1
            self.arrival[nid] = 0
            self.exact[nid] = False
            self.alive[nid] = True
            self.ins[nid].clear()
            self.outs[nid].clear()
        else:
            nid = len(self.state)
            self.state.append(state)
            self.layer.append(layer)
            self.some.append(0)
            self.all_.append(0)
            self.value.append(0)
            self.parent.append(-1)
            self.arrival.append(0)
            self.exact.append(False)
            self.alive.append(True)
            self.ins.append(set())
            self.outs.append(set())
        self.layers[layer].append(nid)
        return nid

    def add_arc(self, u: int, v: int) -> None:
        self.outs[u].add(v)
        self.ins[v].add(u)

    def remove_arc(self, u: int, v: int) -> None:
        self.outs[u].discard(v)
        self.ins[v].discard(u)

    def drop_node(self, nid: int) -> None:
        """Unlink a node from all neighbors and recycle its id."""
        for u in self.ins[nid]:
            self.outs[u].discard(nid)
        for w in self.outs[nid]:
            self.ins[w].discard(nid)
        self.ins[nid].clear()
        self.outs[nid].clear()
        self.alive[nid] = False
        self._free.append(nid)

    # -- queries ----------------------------------------------------------
    @property
    def num_decision_layers(self) -> int:
        return len(self.layers) - 2

    def position_of_layer(self, layer: int) -> int:
        """Global 1-based sequence position decided by a node layer."""
        return len(self.root_prefix) + layer

    def width(self) -> int:
        return max((len(l) for l in self.layers), default=0)

    def node_count(self) -> int:
        return sum(self.alive)

    def live_nodes(self, layer: int):
        alive = self.alive
        return [v for v in self.layers[layer] if alive[v]]

    def compact_layer(self, layer: int) -> None:
        alive = self.alive
        self.layers[layer] = [v for v in self.layers[layer] if alive[v]]


ArcFilter = Callable[[Diagram, int, int], bool]


def fold_node(diagram: Diagram, model: ProblemModel, v: int) -> None:
    """Recompute one node's history sets, arrival, value and exactness
    from its in-neighbors, which must already be up to date."""
    state = diagram.state
    value = diagram.value
    arrival = diagram.arrival
    exact = diagram.exact
    sv = state[v]
    is_terminal = v == diagram.terminal
    base = diagram.root_offset
    some = 0
    all_ = -1
    best_val = INF
    best_par = -1
    best_arr = INF
    worst_arr = -1
    all_exact = True
    for u in diagram.ins[v]:
        some |= diagram.some[u]
        all_ &= diagram.all_[u]
        if not exact[u]:
            all_exact = False
        su = state[u]
        if is_terminal:
            val = model.terminal_value(value[u], su, base)
            arr = arrival[u]
        else:
            val = model.value_after(value[u], su, sv, base)
            arr = model.arrival_after(arrival[u], su, sv)
        if val < best_val or (val == best_val and u < best_par):
            best_val = val
            best_par = u
        if arr < best_arr:
            best_arr = arr
        if arr > worst_arr:
            worst_arr = arr
    if not is_terminal:
        bit = 1 << sv
        some |= bit
        all_ |= bit
    diagram.some[v] = some
    diagram.all_[v] = all_ & some
    diagram.value[v] = best_val
    diagram.parent[v] = best_par
    diagram.arrival[v] = best_arr
    # exact means every in-path carries the same label set AND the same
    # arrival time; timed subproblems rooted here are then well defined
    exact[v] = all_exact and some == (all_ & some) and best_arr == worst_arr


def propagate(diagram: Diagram, model: ProblemModel,
              arc_filter: Optional[ArcFilter] = None) -> int:
    """Full top-down recomputation of node data, then a bottom-up sweep
    that deletes nodes left without completions.

    When ``arc_filter`` is given it is applied to every arc, with the
    tail's data already final; returning False must also remove the arc.
    Returns the number of exact nodes.
    """
    alive = diagram.alive
    ins = diagram.ins
    root = diagram.root
    diagram.exact[root] = True
    for li in range(1, len(diagram.layers)):
        kept = []
        for v in diagram.layers[li]:
            if not alive[v]:
                continue
            if arc_filter is not None:
                for u in sorted(ins[v]):
                    arc_filter(diagram, u, v)
            if not ins[v]:
                diagram.drop_node(v)
                continue
            fold_node(diagram, model, v)
            kept.append(v)
        diagram.layers[li] = kept
    # nodes that cannot reach the terminal are dead weight
    outs = diagram.outs
    terminal = diagram.terminal
    for li in range(len(diagram.layers) - 2, -1, -1):
        kept = []
        for v in diagram.layers[li]:
            if not alive[v]:
                continue
            if not outs[v] and v != terminal:
                diagram.drop_node(v)
            else:
                kept.append(v)
        diagram.layers[li] = kept
    return sum(1 for li in range(len(diagram.layers))
               for v in diagram.layers[li] if diagram.exact[v])


def cleanup_dangling(diagram: Diagram) -> None:
    """Drop every non-root node without parents and every non-terminal
    node without children, cascading in one pass each way."""
    alive = diagram.alive
    for li in range(1, len(diagram.layers)):
        kept = []
        for v in diagram.layers[li]:
            if not alive[v]:
                continue
            if not diagram.ins[v]:
                diagram.drop_node(v)
            else:
                kept.append(v)
        diagram.layers[li] = kept
    terminal = diagram.terminal
    for li in range(len(diagram.layers) - 2, -1, -1):
        kept = []
        for v in diagram.layers[li]:
            if not alive[v]:
                continue
            if not diagram.outs[v] and v != terminal:
                diagram.drop_node(v)
            else:
                kept.append(v)
        diagram.layers[li] = kept


def recompute_exactness(diagram: Diagram, model: ProblemModel) -> int:
    """Refresh the exactness flags (and the data they derive from).

    Returns the number of exact nodes.
    """
    return propagate(diagram, model)


def value_pass(diagram: Diagram, model: ProblemModel) -> None:
    """Recompute shortest-path values and best parents only."""
    state = diagram.state
    value = diagram.value
    parent = diagram.parent
    alive = diagram.alive
    base = diagram.root_offset
    terminal = diagram.terminal
    for li in range(1, len(diagram.layers)):
        for v in diagram.layers[li]:
            if not alive[v]:
                continue
            sv = state[v]
            is_terminal = v == terminal
            best_val = INF
            best_par = -1
            for u in diagram.ins[v]:
                uv = value[u]
                if uv == INF:
                    continue
                su = state[u]
                if is_terminal:
                    val = model.terminal_value(uv, su, base)
                else:
                    val = model.value_after(uv, su, sv, base)
                if val < best_val or (val == best_val and u < best_par):
                    best_val = val
                    best_par = u
            value[v] = best_val
            parent[v] = best_par


def decode_path(diagram: Diagram, node: int) -> list:
    """Labels of the best-parent chain from the root down to ``node``,
    appended to the diagram's fixed prefix."""
    labels = []
    v = node
    while v != -1 and v != diagram.root:
        if diagram.state[v] != NO_STATE:
            labels.append(diagram.state[v])
        v = diagram.parent[v]
    labels.reverse()
    return diagram.root_prefix + labels


def shortest_path(diagram: Diagram, model: ProblemModel, recompute: bool = True):
    """Best completion value (including the root offset) and its label path.

    Raises DisconnectedDiagram when the terminal is unreachable, which
    callers treat as "this diagram closed with no feasible completion".
    Pass ``recompute=False`` when node values are already fresh.
    """
    terminal = diagram.terminal
    if terminal == -1 or not diagram.alive[terminal] or not diagram.ins[terminal]:
        raise DisconnectedDiagram
    if recompute:
        value_pass(diagram, model)
    best = diagram.value[terminal]
    if best == INF:
        raise DisconnectedDiagram
    return diagram.root_offset + best, decode_path(diagram, terminal)


def arc_cost(model: ProblemModel, from_state: int, to_state: int,
             position: int = 0, value: int = 0, base: int = 0) -> int:
    """Cost contributed by one arc, given the tail's accumulated value.

    For separable objectives this is just the transition cost; for the
    waiting-time objective it includes the idle time forced at the head.
    """
    return model.value_after(value, from_state, to_state, base) - value
