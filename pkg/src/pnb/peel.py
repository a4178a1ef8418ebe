"""The peel operation and exact-node selection.

Peeling extracts the sub-diagram induced by an exact node into a fresh
diagram that is re-rooted as a prefix subproblem, while the arcs moved
out of the original strengthen what remains.  Both halves are filtered
as the frontier advances, and nodes left without parents or children
are cascade-deleted afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .diagram import Diagram, cleanup_dangling, decode_path, value_pass
from .models import ProblemModel, completion_bound, replay_prefix
from .relax import FilterContext


class PeelChoice(Enum):
    LAST_EXACT = "last-exact"
    FRONTIER = "frontier"
    MAXIMAL = "maximal"


class NoExactCandidate(Exception):
    """No exact node below the root lies on the shortest path."""


@dataclass
class PeelOutcome:
    peeled: Diagram
    residual: Optional[Diagram]  # None when the remainder closed outright
    separations: int


def select_exact_node(diagram: Diagram, model: ProblemModel,
                      choice: PeelChoice, recompute: bool = True) -> int:
    """Pick the exact node on the current shortest path to peel from.

    Exactness flags must be current (run ``recompute_exactness`` or
    ``propagate`` first).  The exact region along a path is always a
    prefix of it, since every parent of an exact node is exact.
    """
    if recompute:
        value_pass(diagram, model)
    chain = []
    v = diagram.terminal
    while v != -1:
        chain.append(v)
        v = diagram.parent[v]
    chain.reverse()
    if not chain or chain[0] != diagram.root:
        raise NoExactCandidate("shortest path is broken")
    decisions = chain[1:-1]
    exact_run = []
    for v in decisions:
        if not diagram.exact[v]:
            break
        exact_run.append(v)
    if not exact_run:
        raise NoExactCandidate("only the root is exact on the shortest path")
    if choice is PeelChoice.MAXIMAL:
        return exact_run[0]
    if choice is PeelChoice.FRONTIER:
        return exact_run[-1]
    for v in exact_run:
        if any(not diagram.exact[w] for w in diagram.outs[v]):
            return v
    return exact_run[-1]


def peel(diagram: Diagram, e: int, ctx: FilterContext) -> PeelOutcome:
    """Split ``diagram`` into the sub-diagram induced by exact node ``e``
    and the strengthened remainder.

    The peeled diagram is re-rooted: its prefix extends the original
    prefix by the label chain leading to ``e`` and its offset absorbs the
    value of that chain.  Layers renumber from zero.  Because a frontier
    copy carries the same history sets, arrival and absolute value as the
    node it shadows, one rule evaluation per touched arc settles both the
    copy's side and the remainder's side.
    """
    model = ctx.model
    assert diagram.exact[e] and e != diagram.root
    e_layer = diagram.layer[e]
    e_value = diagram.value[e]
    prefix = decode_path(diagram, e)
    offset = diagram.root_offset + e_value
    arrival = diagram.arrival[e]
    ok, _, _, _, replay_arrival = replay_prefix(model, prefix)
    dominates = ok and replay_arrival == arrival

    peeled = Diagram(diagram.n_labels, diagram.width_cap, prefix, offset,
                     arrival, dominates)
    peeled.add_layers(len(diagram.layers) - e_layer)
    root = peeled.new_node(0, diagram.state[e])
    peeled.root = root
    peeled.some[root] = diagram.some[e]
    peeled.all_[root] = diagram.all_[e]
    peeled.arrival[root] = arrival
    peeled.exact[root] = True

    # hoisted model data for the inlined arc rules
    upper = ctx.upper
    rrb = upper is not None and ctx.rrb_enabled
    timed = model.kind != "sop"
    makespan = model.kind == "makespan"
    pred = model.pred_mask
    succ = model.succ_mask
    memo = model._rrb_memo
    num_dec = model.num_decisions
    if timed:
        dist = model.dist
        open_ = model.open
        close = model.close
        close0 = close[0]
    else:
        cost = model.cost
    d_state = diagram.state
    d_some = diagram.some
    d_all = diagram.all_
    d_value = diagram.value
    d_arrival = diagram.arrival
    d_base = diagram.root_offset
    p_state = peeled.state
    p_some = peeled.some
    p_all = peeled.all_
    p_value = peeled.value
    p_arrival = peeled.arrival
    terminal_d = diagram.terminal
    prefix_len = len(diagram.root_prefix)

    # arcs from the moved node still end in the original diagram
    cross_in: dict = {}
    for w in diagram.outs[e]:
        cross_in.setdefault(w, set()).add(root)
    diagram.drop_node(e)
    diagram.compact_layer(e_layer)

    separations = 0
    for li in range(e_layer + 1, len(diagram.layers)):
        pl = li - e_layer
        position = prefix_len + li
        remaining = num_dec - position
        keep_n = remaining if timed else remaining - 1
        movers = [m for m in diagram.layers[li] if m in cross_in]
        for m in movers:
            is_terminal = m == terminal_d
            sv = d_state[m]
            copy = peeled.new_node(pl, sv)
            separations += 1
            p_some[copy] = d_some[m]
            p_all[copy] = d_all[m]
            p_arrival[copy] = d_arrival[m]
            p_value[copy] = d_value[m] - e_value
            if is_terminal:
                peeled.terminal = copy
                bit = 0
            else:
                bit = 1 << sv
                pm = pred[sv]
                sm = succ[sv]
                if timed:
                    close_v = close[sv]
            for p in sorted(cross_in.pop(m)):
                # moved in-arc p -> copy, judged with the tail's data
                su = p_state[p]
                if is_terminal:
                    keep = True
                    if timed:
                        ret = dist[su][0]
                        if p_arrival[p] + ret > close0:
                            keep = False
                        elif upper is not None and offset + p_value[p] + ret > upper:
                            keep = False
                    elif upper is not None and offset + p_value[p] > upper:
                        keep = False
                else:
                    au = p_all[p]
                    if au & bit or pm & ~p_some[p] or sm & au:
                        keep = False
                    else:
                        keep = True
                        if timed and p_arrival[p] + dist[su][sv] > close_v:
                            keep = False
                        if keep and rrb:
                            if timed:
                                val = p_value[p] + dist[su][sv]
                                if makespan:
                                    floor = open_[sv] - offset
                                    if floor > val:
                                        val = floor
                            elif su >= 0:
                                val = p_value[p] + cost[su][sv]
                            else:
                                val = p_value[p]
                            if keep_n > 0:
                                key = au | bit
                                sums = memo.get(key)
                                if sums is None:
                                    completion_bound(model, key, remaining)
                                    sums = memo[key]
                                k = keep_n if keep_n < len(sums) else len(sums) - 1
                                val += sums[k]
                            if offset + val > upper:
                                keep = False
                if keep:
                    peeled.add_arc(p, copy)
            alive_copy = bool(peeled.ins[copy])
            if not alive_copy:
                peeled.drop_node(copy)
                peeled.compact_layer(pl)
            if is_terminal:
                continue
            # one rule evaluation per out-arc settles the remainder's arc
            # and whether the copy propagates the frontier across it: the
            # copy shadows m's sets, arrival and absolute value exactly
            su = sv
            some_u = d_some[m]
            au = d_all[m]
            arr_u = d_arrival[m]
            val_u = d_value[m]
            next_pos = position + 1
            next_rem = num_dec - next_pos
            next_keep = next_rem if timed else next_rem - 1
            for w in list(diagram.outs[m]):
                if w == terminal_d:
                    keep = True
                    if timed:
                        ret = dist[su][0]
                        if arr_u + ret > close0:
                            keep = False
                        elif upper is not None and d_base + val_u + ret > upper:
                            keep = False
                    elif upper is not None and d_base + val_u > upper:
                        keep = False
                else:
                    sw = d_state[w]
                    wbit = 1 << sw
                    if au & wbit or pred[sw] & ~some_u or succ[sw] & au:
                        keep = False
                    else:
                        keep = True
                        if timed and arr_u + dist[su][sw] > close[sw]:
                            keep = False
                        if keep and rrb:
                            if timed:
                                val = val_u + dist[su][sw]
                                if makespan:
                                    floor = open_[sw] - d_base
                                    if floor > val:
                                        val = floor
                            elif su >= 0:
                                val = val_u + cost[su][sw]
                            else:
                                val = val_u
                            if next_keep > 0:
                                key = au | wbit
                                sums = memo.get(key)
                                if sums is None:
                                    completion_bound(model, key, next_rem)
                                    sums = memo[key]
                                k = (next_keep if next_keep < len(sums)
                                     else len(sums) - 1)
                                val += sums[k]
                            if d_base + val > upper:
                                keep = False
                if not keep:
                    diagram.remove_arc(m, w)
                elif alive_copy:
                    cross_in.setdefault(w, set()).add(copy)

    cleanup_dangling(peeled)
    cleanup_dangling(diagram)
    residual: Optional[Diagram] = diagram
    if (not diagram.alive[diagram.terminal] or not diagram.ins[diagram.terminal]
            or not diagram.outs[diagram.root]):
        residual = None
    return PeelOutcome(peeled, residual, separations)
