"""Relaxed-diagram compilation by separation.

The seed diagram has one node per still-playable element on every
decision layer and every statically feasible arc between consecutive
layers, so each arc's label and cost are exact from the start.  The
relaxation is then strengthened by splitting nodes on one label at a
time and filtering arcs that can no longer carry an improving feasible
solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .diagram import Diagram, fold_node
from .models import (InfeasibleRoot, NO_STATE, ProblemModel, SplitOrdering,
                     completion_bound, feasible_transition, replay_prefix)


@dataclass
class FilterContext:
    """Snapshot of what arc filtering is allowed to use.

    ``upper`` is the incumbent value (absolute); arcs provably unable to
    beat it are dropped when ``rrb_enabled``.
    """

    model: ProblemModel
    upper: Optional[int] = None
    rrb_enabled: bool = True


def arc_allowed(diagram: Diagram, u: int, head_state: int, head_layer: int,
                head_is_terminal: bool, ctx: FilterContext) -> bool:
    """Filter predicate for an arc leaving node ``u`` of ``diagram``.

    The head is described positionally so the same rules apply to arcs
    whose head still lives in another diagram (as happens mid-peel).
    Checks: repeated element, unsatisfiable predecessor, already-forced
    successor, unreachable service window, and the completion bound
    against the incumbent.
    """
    model = ctx.model
    value_u = diagram.value[u]
    if head_is_terminal:
        if not model.terminal_ok(diagram.arrival[u], diagram.state[u]):
            return False
        if ctx.upper is not None:
            total = diagram.root_offset + model.terminal_value(
                value_u, diagram.state[u], diagram.root_offset)
            if total > ctx.upper:
                return False
        return True
    if not feasible_transition(model, diagram.some[u], diagram.all_[u],
                               diagram.arrival[u], diagram.state[u], head_state):
        return False
    if ctx.upper is not None and ctx.rrb_enabled:
        remaining = model.num_decisions - diagram.position_of_layer(head_layer)
        val = model.value_after(value_u, diagram.state[u], head_state, diagram.root_offset)
        lower = (diagram.root_offset + val
                 + completion_bound(model, diagram.all_[u] | (1 << head_state), remaining))
        if lower > ctx.upper:
            return False
    return True


def filter_arc(diagram: Diagram, u: int, v: int, ctx: FilterContext) -> bool:
    """Drop the arc u -> v if no improving feasible solution can use it.

    Removal happens here; the return value reports whether the arc
    survived.
    """
    keep = arc_allowed(diagram, u, diagram.state[v], diagram.layer[v],
                       v == diagram.terminal, ctx)
    if not keep:
        diagram.remove_arc(u, v)
    return keep


def sweep_layer(diagram: Diagram, model, ctx: FilterContext, li: int) -> None:
    """Filter one layer's in-arcs and refold its nodes, in a single pass.

    Behaviorally identical to running filter_arc on every in-arc and
    fold_node on every node of the layer, with the layers above already
    final, but with the rule checks inlined: this is the hottest loop in
    the solver, so it avoids per-arc function calls entirely.
    """
    state = diagram.state
    some = diagram.some
    all_ = diagram.all_
    value = diagram.value
    parent = diagram.parent
    arrival = diagram.arrival
    exact = diagram.exact
    ins = diagram.ins
    outs = diagram.outs
    alive = diagram.alive
    terminal = diagram.terminal
    base = diagram.root_offset
    upper = ctx.upper
    rrb = upper is not None and ctx.rrb_enabled
    timed = model.kind != "sop"
    makespan = model.kind == "makespan"
    pred = model.pred_mask
    succ = model.succ_mask
    memo = model._rrb_memo
    remaining = model.num_decisions - len(diagram.root_prefix) - li
    keep_n = remaining if timed else remaining - 1
    if timed:
        dist = model.dist
        open_ = model.open
        close = model.close
        close0 = close[0]
    else:
        cost = model.cost
    INF = float("inf")
    kept = []
    for v in diagram.layers[li]:
        if not alive[v]:
            continue
        if v == terminal:
            for u in list(ins[v]):
                su = state[u]
                ok = True
                if timed:
                    ret = dist[su][0]
                    if arrival[u] + ret > close0:
                        ok = False
                    elif upper is not None and base + value[u] + ret > upper:
                        ok = False
                elif upper is not None and base + value[u] > upper:
                    ok = False
                if not ok:
                    outs[u].discard(v)
                    ins[v].discard(u)
            if not ins[v]:
                diagram.drop_node(v)
                continue
            fold_node(diagram, model, v)
            kept.append(v)
            continue
        sv = state[v]
        bit = 1 << sv
        pm = pred[sv]
        sm = succ[sv]
        if timed:
            open_v = open_[sv]
            close_v = close[sv]
        for u in list(ins[v]):
            au = all_[u]
            su = state[u]
            if au & bit or pm & ~some[u] or sm & au:
                keep = False
            else:
                keep = True
                if timed:
                    d = dist[su][sv]
                    if arrival[u] + d > close_v:
                        keep = False
                if keep and rrb:
                    if timed:
                        val = value[u] + d
                        if makespan:
                            floor = open_v - base
                            if floor > val:
                                val = floor
                    elif su >= 0:
                        val = value[u] + cost[su][sv]
                    else:
                        val = value[u]
                    if keep_n > 0:
                        key = au | bit
                        sums = memo.get(key)
                        if sums is None:
                            completion_bound(model, key, remaining)
                            sums = memo[key]
                        k = keep_n if keep_n < len(sums) else len(sums) - 1
                        val += sums[k]
                    if base + val > upper:
                        keep = False
            if not keep:
                outs[u].discard(v)
                ins[v].discard(u)
        if not ins[v]:
            diagram.drop_node(v)
            continue
        s = 0
        a = -1
        bv = INF
        bp = -1
        ba = INF
        wa = -1
        ax = True
        for u in ins[v]:
            s |= some[u]
            a &= all_[u]
            if not exact[u]:
                ax = False
            su = state[u]
            if timed:
                d = dist[su][sv]
                val = value[u] + d
                arr = arrival[u] + d
                if arr < open_v:
                    arr = open_v
                if makespan:
                    floor = open_v - base
                    if floor > val:
                        val = floor
            else:
                val = value[u] + cost[su][sv] if su >= 0 else value[u]
                arr = 0
            if val < bv or (val == bv and u < bp):
                bv = val
                bp = u
            if arr < ba:
                ba = arr
            if arr > wa:
                wa = arr
        s |= bit
        a = (a | bit) & s
        some[v] = s
        all_[v] = a
        value[v] = bv
        parent[v] = bp
        arrival[v] = ba
        exact[v] = ax and s == a and ba == wa
        kept.append(v)
    diagram.layers[li] = kept


def sweep(diagram: Diagram, model, ctx: FilterContext) -> None:
    """Filter and refold the whole diagram top-down, then prune upward."""
    diagram.exact[diagram.root] = True
    for li in range(1, len(diagram.layers)):
        sweep_layer(diagram, model, ctx, li)
    terminal = diagram.terminal
    alive = diagram.alive
    outs = diagram.outs
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


def build_initial_relaxation(model: ProblemModel, root_prefix=(),
                             root_offset: Optional[int] = None,
                             width_cap: int = 2, ctx: Optional[FilterContext] = None,
                             root_arrival: Optional[int] = None) -> Diagram:
    """Width-n seed relaxation below a fixed prefix.

    Each decision layer holds one node per remaining element that can
    still sit at that sequence position, with every statically feasible
    arc between consecutive layers.  When ``root_arrival`` is supplied
    the prefix is treated as a relaxed subproblem root (its order need
    not replay feasibly); otherwise the prefix must be feasible.
    """
    ok, visited, last_state, replay_value, replay_arrival = replay_prefix(model, root_prefix)
    if root_arrival is None:
        if not ok:
            raise InfeasibleRoot(f"prefix {list(root_prefix)} is not feasible")
        root_arrival = replay_arrival
        dominates = True
    else:
        dominates = ok and replay_arrival == root_arrival
    if root_offset is None:
        root_offset = model.start_offset + replay_value
    if ctx is None:
        ctx = FilterContext(model, None)

    m = model.num_decisions - len(root_prefix)
    dd = Diagram(model.n_labels, width_cap, root_prefix, root_offset,
                 root_arrival, dominates)
    dd.add_layers(m + 2)
    root_state = last_state
    root = dd.new_node(0, root_state)
    dd.root = root
    dd.some[root] = visited
    dd.all_[root] = visited
    dd.arrival[root] = root_arrival
    dd.exact[root] = True

    prev_nodes = [root]
    for p in range(1, m + 1):
        position = dd.position_of_layer(p)
        layer_nodes = []
        for b in model.decision_labels:
            if (visited >> b) & 1 or not model.position_ok(b, position):
                continue
            nid = dd.new_node(p, b)
            layer_nodes.append(nid)
            if p == 1:
                if root_state == NO_STATE or model.static_arc_ok(root_state, b):
                    dd.add_arc(root, nid)
            else:
                for u in prev_nodes:
                    if dd.state[u] != b and model.static_arc_ok(dd.state[u], b):
                        dd.add_arc(u, nid)
        prev_nodes = layer_nodes
    terminal = dd.new_node(m + 1, NO_STATE)
    dd.terminal = terminal
    for u in prev_nodes:
        dd.add_arc(u, terminal)
    sweep(dd, model, ctx)
    return dd


def split_node(diagram: Diagram, u: int, phi: int, ctx: FilterContext):
    """Split ``u`` into the paths that are known to carry ``phi`` and the
    rest.  Both copies inherit the out-arcs; every touched arc is
    re-filtered; a copy left without parents or children is deleted.

    Returns the pair of replacement node ids (either may already be dead).
    """
    model = ctx.model
    li = diagram.layer[u]
    parents = sorted(diagram.ins[u])
    children = sorted(diagram.outs[u])
    u1 = diagram.new_node(li, diagram.state[u])
    u2 = diagram.new_node(li, diagram.state[u])
    phi_bit = 1 << phi
    for o in parents:
        diagram.remove_arc(o, u)
        diagram.add_arc(o, u1 if diagram.all_[o] & phi_bit else u2)
    for w in children:
        diagram.add_arc(u1, w)
        diagram.add_arc(u2, w)
    diagram.drop_node(u)
    diagram.compact_layer(li)
    for x in (u1, u2):
        for o in sorted(diagram.ins[x]):
            filter_arc(diagram, o, x, ctx)
        if not diagram.ins[x]:
            diagram.drop_node(x)
            diagram.compact_layer(li)
            continue
        fold_node(diagram, model, x)
        for w in sorted(diagram.outs[x]):
            filter_arc(diagram, x, w, ctx)
        if not diagram.outs[x]:
            diagram.drop_node(x)
            diagram.compact_layer(li)
    return u1, u2


def _split_in_refine(diagram: Diagram, model, ctx: FilterContext,
                     u: int, phi_bit: int) -> None:
    """Split as split_node does, minus work that is redundant mid-refine.

    The redistributed in-arcs need no re-filtering: the rules depend only
    on the tail's data and the head's state, both unchanged from the arc
    that was just filtered by this layer's sweep.  The inherited out-arcs
    do need filtering (the copies' histories are sharper than the
    original's), inlined here for the same reason as in sweep_layer.
    """
    li = diagram.layer[u]
    state = diagram.state
    all_ = diagram.all_
    su = state[u]
    u1 = diagram.new_node(li, su)
    u2 = diagram.new_node(li, su)
    for o in list(diagram.ins[u]):
        diagram.remove_arc(o, u)
        diagram.add_arc(o, u1 if all_[o] & phi_bit else u2)
    children = list(diagram.outs[u])
    diagram.drop_node(u)
    diagram.compact_layer(li)

    upper = ctx.upper
    rrb = upper is not None and ctx.rrb_enabled
    timed = model.kind != "sop"
    makespan = model.kind == "makespan"
    pred = model.pred_mask
    succ = model.succ_mask
    memo = model._rrb_memo
    base = diagram.root_offset
    remaining = model.num_decisions - len(diagram.root_prefix) - (li + 1)
    keep_n = remaining if timed else remaining - 1
    terminal = diagram.terminal
    if timed:
        dist = model.dist
        open_ = model.open
        close = model.close
        close0 = close[0]
    else:
        cost = model.cost
    value = diagram.value
    arrival = diagram.arrival
    for x in (u1, u2):
        if not diagram.ins[x]:
            diagram.drop_node(x)
            diagram.compact_layer(li)
            continue
        fold_node(diagram, model, x)
        au = all_[x]
        some_x = diagram.some[x]
        val_x = value[x]
        arr_x = arrival[x]
        for w in children:
            if w == terminal:
                keep = True
                if timed:
                    ret = dist[su][0]
                    if arr_x + ret > close0:
                        keep = False
                    elif upper is not None and base + val_x + ret > upper:
                        keep = False
                elif upper is not None and base + val_x > upper:
                    keep = False
            else:
                sw = state[w]
                wbit = 1 << sw
                if au & wbit or pred[sw] & ~some_x or succ[sw] & au:
                    keep = False
                else:
                    keep = True
                    if timed and arr_x + dist[su][sw] > close[sw]:
                        keep = False
                    if keep and rrb:
                        if timed:
                            val = val_x + dist[su][sw]
                            if makespan:
                                floor = open_[sw] - base
                                if floor > val:
                                    val = floor
                        else:
                            val = val_x + cost[su][sw] if su >= 0 else val_x
                        if keep_n > 0:
                            key = au | wbit
                            sums = memo.get(key)
                            if sums is None:
                                completion_bound(model, key, remaining)
                                sums = memo[key]
                            k = keep_n if keep_n < len(sums) else len(sums) - 1
                            val += sums[k]
                        if base + val > upper:
                            keep = False
            if keep:
                diagram.add_arc(x, w)
        if not diagram.outs[x]:
            diagram.drop_node(x)
            diagram.compact_layer(li)


def refine(diagram: Diagram, ordering: SplitOrdering, ctx: FilterContext) -> Diagram:
    """Strengthen a relaxation in place by repeated splitting.

    Layers are processed top-down.  Within a layer, labels are taken in
    the static ordering and every node whose history is undecided on the
    label is split, best partial value first, until the layer is exact
    or the width cap is reached.  Seed layers wider than the cap are
    left as they are.
    """
    model = ctx.model
    cap = diagram.width_cap
    some = diagram.some
    all_ = diagram.all_
    for li in range(1, len(diagram.layers) - 1):
        sweep_layer(diagram, model, ctx, li)
        progress = True
        while progress and len(diagram.layers[li]) < cap:
            progress = False
            if all(diagram.exact[v] for v in diagram.layers[li]):
                break
            for phi in ordering.labels:
                if len(diagram.layers[li]) >= cap:
                    break
                phi_bit = 1 << phi
                candidates = [v for v in diagram.layers[li]
                              if (some[v] & phi_bit) and not (all_[v] & phi_bit)]
                candidates.sort(key=lambda v: (diagram.value[v], v))
                for v in candidates:
                    if len(diagram.layers[li]) >= cap:
                        break
                    if not diagram.alive[v]:
                        continue
                    # a split only separates when both sides get parents
                    n_with = 0
                    n_without = 0
                    for o in diagram.ins[v]:
                        if all_[o] & phi_bit:
                            n_with += 1
                        else:
                            n_without += 1
                    if not n_with or not n_without:
                        continue
                    _split_in_refine(diagram, model, ctx, v, phi_bit)
                    progress = True
    sweep_layer(diagram, model, ctx, len(diagram.layers) - 1)
    terminal = diagram.terminal
    for li in range(len(diagram.layers) - 2, -1, -1):
        kept = []
        for v in diagram.layers[li]:
            if not diagram.alive[v]:
                continue
            if not diagram.outs[v] and v != terminal:
                diagram.drop_node(v)
            else:
                kept.append(v)
        diagram.layers[li] = kept
    return diagram
