"""Brute-force reference solver for small instances.

Enumerates every feasible ordering directly against the instance
constraints, independent of all diagram machinery, and records the best
completion value of every feasible prefix.  Tests use it as ground truth
for optima, per-prefix completion costs, and feasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .models import ProblemModel


class TooLarge(ValueError):
    """Instance exceeds the enumeration limit."""


@dataclass
class OracleResult:
    optimum: Optional[int]
    best_path: Optional[list]
    per_prefix: Dict[Tuple[int, ...], int] = field(default_factory=dict)


def brute_force(model: ProblemModel, n_limit: int = 10) -> OracleResult:
    m = model.num_decisions
    if m > n_limit:
        raise TooLarge(f"{m} decisions exceeds the enumeration limit of {n_limit}")

    result = OracleResult(None, None)
    per_prefix = result.per_prefix
    base = model.start_offset
    seq: list = []

    def record(total: int) -> None:
        if result.optimum is None or total < result.optimum:
            result.optimum = total
            result.best_path = list(seq)
        for i in range(len(seq) + 1):
            key = tuple(seq[:i])
            old = per_prefix.get(key)
            if old is None or total < old:
                per_prefix[key] = total

    def rec(visited: int, state: int, value: int, arrival: int) -> None:
        if len(seq) == m:
            if model.terminal_ok(arrival, state):
                record(base + model.terminal_value(value, state, base))
            return
        for b in model.decision_labels:
            if not model.extension_ok(visited, arrival, state, b):
                continue
            seq.append(b)
            rec(visited | (1 << b),
                b,
                model.value_after(value, state, b, base),
                model.arrival_after(arrival, state, b))
            seq.pop()

    rec(0, model.root_state, 0, model.start_arrival)
    return result
