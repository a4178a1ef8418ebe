"""Top-down restricted compilation.

A restricted diagram is grown one decision layer at a time, keeping at
most ``w_m`` nodes per layer (cheapest partial values win).  No
equivalent-node merging is attempted: each node is one concrete partial
sequence, so every complete path decodes to a feasible solution.

When a companion relaxed diagram is supplied, each node's child domain
is intersected with the outgoing labels of the companion node reached by
the same prefix, so the restricted search never re-explores completions
the relaxation has already ruled out or peeled away.
"""

from __future__ import annotations

from typing import Optional, Tuple

from .diagram import Diagram, propagate
from .models import NO_STATE, ProblemModel, completion_bound, replay_prefix
from .relax import FilterContext


def trim_layer(diagram: Diagram, layer: int, w_m: int) -> list:
    """Keep the ``w_m`` most promising nodes (smallest partial value,
    ties to the lowest id); returns the removed node ids."""
    nodes = diagram.live_nodes(layer)
    if len(nodes) <= w_m:
        return []
    ranked = sorted(nodes, key=lambda v: (diagram.value[v], v))
    removed = ranked[w_m:]
    for v in removed:
        diagram.drop_node(v)
    diagram.compact_layer(layer)
    return removed


def _mirror_children(companion: Diagram, cnode: int) -> dict:
    out = {}
    for w in companion.outs[cnode]:
        s = companion.state[w]
        if s != NO_STATE:
            out[s] = w
    return out


def build_restricted(model: ProblemModel, root_prefix=(),
                     root_offset: Optional[int] = None, w_m: int = 1,
                     companion: Optional[Diagram] = None,
                     ctx: Optional[FilterContext] = None) -> Tuple[Diagram, bool]:
    """Compile a restricted diagram under a fixed prefix order.

    Returns the diagram and an exactness flag: True only if no node was
    dropped for width and no child was clipped by the incumbent bound or
    the companion intersection, in which case the diagram's best path is
    the subproblem optimum (infeasibility included: a disconnected exact
    diagram proves there is no completion).
    """
    if ctx is None:
        ctx = FilterContext(model, None)
    upper = ctx.upper
    ok, visited0, state0, replay_value, arrival0 = replay_prefix(model, root_prefix)
    if root_offset is None:
        root_offset = model.start_offset + replay_value
    m = model.num_decisions - len(root_prefix)
    dd = Diagram(model.n_labels, w_m, root_prefix, root_offset, arrival0, True)
    dd.add_layers(m + 2)
    root = dd.new_node(0, state0)
    dd.root = root
    dd.some[root] = visited0
    dd.all_[root] = visited0
    dd.arrival[root] = arrival0
    dd.exact[root] = True
    terminal = dd.new_node(m + 1, NO_STATE)
    dd.terminal = terminal
    if not ok:
        # the recorded order cannot be replayed; the subproblem stays open
        return dd, False

    is_exact = True
    mirror = {root: companion.root} if companion is not None else None
    visited = {root: visited0}
    for p in range(1, m + 1):
        position = dd.position_of_layer(p)
        remaining = model.num_decisions - position
        for u in dd.live_nodes(p - 1):
            su = dd.state[u]
            vis = visited[u]
            arr = dd.arrival[u]
            val = dd.value[u]
            allowed = None
            if mirror is not None:
                allowed = _mirror_children(companion, mirror[u])
            for b in model.decision_labels:
                if not model.extension_ok(vis, arr, su, b):
                    continue
                if allowed is not None and b not in allowed:
                    is_exact = False
                    continue
                child_val = model.value_after(val, su, b, root_offset)
                child_vis = vis | (1 << b)
                if upper is not None and (root_offset + child_val
                                          + completion_bound(model, child_vis, remaining)) > upper:
                    is_exact = False
                    continue
                c = dd.new_node(p, b)
                dd.add_arc(u, c)
                dd.value[c] = child_val
                dd.parent[c] = u
                dd.arrival[c] = model.arrival_after(arr, su, b)
                dd.some[c] = child_vis
                dd.all_[c] = child_vis
                dd.exact[c] = True
                visited[c] = child_vis
                if mirror is not None:
                    mirror[c] = allowed[b]
        if trim_layer(dd, p, w_m):
            is_exact = False
        if not dd.layers[p]:
            return dd, is_exact
    for u in dd.live_nodes(m):
        if not model.terminal_ok(dd.arrival[u], dd.state[u]):
            continue
        total = root_offset + model.terminal_value(dd.value[u], dd.state[u], root_offset)
        if upper is not None and total > upper:
            is_exact = False
            continue
        dd.add_arc(u, terminal)
    propagate(dd, model)
    return dd, is_exact
