"""Benchmark instance parsers and debug dumps.

Two formats are read: TSPLIB-style precedence matrices (full matrix with
``-1`` marking "column element must precede row element" and values of a
million or more marking forbidden moves), and timed-tour files (node
count, full distance matrix, then one ``open close`` window per node).
Timed values parse into fixed-point integers with two implied decimals.
"""

from __future__ import annotations

from typing import List

from .models import SCALE, SopInstance, TsptwInstance

FORBIDDEN = 1_000_000


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class NegativeDistance(ParseError):
    pass


def _tokens_with_lines(text: str):
    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if body.lstrip().startswith("!"):
            continue
        for tok in body.split():
            out.append((tok, ln))
    return out


def parse_sop(data, name: str = "") -> SopInstance:
    """Parse a TSPLIB precedence-matrix file."""
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    dimension = None
    lines = text.splitlines()
    matrix_start = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        upper = stripped.upper()
        if upper.startswith("DIMENSION"):
            try:
                dimension = int(stripped.split(":")[-1].strip())
            except ValueError:
                raise ParseError("bad DIMENSION value", i + 1)
        elif upper.startswith("NAME") and not name:
            name = stripped.split(":")[-1].strip()
        elif upper.startswith("EDGE_WEIGHT_SECTION"):
            matrix_start = i + 1
            break
    if dimension is None:
        raise ParseError("missing DIMENSION header")
    if matrix_start is None:
        raise ParseError("missing EDGE_WEIGHT_SECTION")
    toks = _tokens_with_lines("\n".join(lines[matrix_start:]))
    toks = [(t, ln) for t, ln in toks if t.upper() != "EOF"]
    values: List[int] = []
    for tok, ln in toks:
        try:
            values.append(int(float(tok)))
        except ValueError:
            raise ParseError(f"bad matrix entry {tok!r}", ln + matrix_start)
    n = dimension
    if len(values) == n * n + 1 and values[0] == n:
        values = values[1:]  # some files repeat the dimension first
    if len(values) != n * n:
        raise ParseError(
            f"expected {n * n} matrix entries, found {len(values)}")
    cost = []
    precedence = set()
    for i in range(n):
        row = []
        for j in range(n):
            v = values[i * n + j]
            if i == j:
                row.append(None)
            elif v == -1:
                precedence.add((j, i))
                row.append(None)
            elif v < 0:
                raise ParseError(f"unexpected negative cost {v} at ({i},{j})")
            elif v >= FORBIDDEN:
                row.append(None)
            else:
                row.append(v)
        cost.append(tuple(row))
    return SopInstance(n, tuple(cost), frozenset(precedence), name=name)


def parse_tsptw(data, name: str = "") -> TsptwInstance:
    """Parse a timed-tour file into a fixed-point instance."""
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    toks = _tokens_with_lines(text)
    if not toks:
        raise ParseError("empty file")
    pos = 0

    def next_number(what):
        nonlocal pos
        if pos >= len(toks):
            raise ParseError(f"unexpected end of file reading {what}",
                             toks[-1][1])
        tok, ln = toks[pos]
        pos += 1
        try:
            return float(tok), ln
        except ValueError:
            raise ParseError(f"bad {what} {tok!r}", ln)

    raw_n, ln = next_number("node count")
    n = int(raw_n)
    if n < 2 or n != raw_n:
        raise ParseError(f"bad node count {raw_n}", ln)
    dist = []
    for i in range(n):
        row = []
        for j in range(n):
            v, ln = next_number("distance")
            if v < 0:
                raise NegativeDistance(f"negative distance {v}", ln)
            row.append(round(v * SCALE))
        dist.append(tuple(row))
    windows = []
    for i in range(n):
        lo, ln = next_number("window open")
        hi, ln = next_number("window close")
        if lo > hi:
            raise ParseError(f"window {i} opens after it closes", ln)
        windows.append((round(lo * SCALE), round(hi * SCALE)))
    if pos != len(toks):
        raise ParseError("trailing data after windows", toks[pos][1])
    return TsptwInstance(n, tuple(dist), tuple(windows), name=name)


def dump_sop(instance: SopInstance) -> str:
    """Debug dump that parse_sop reads back to an equal instance."""
    lines = [
        f"NAME: {instance.name or 'instance'}",
        "TYPE: SOP",
        f"DIMENSION: {instance.n}",
        "EDGE_WEIGHT_TYPE: EXPLICIT",
        "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
        "EDGE_WEIGHT_SECTION",
        str(instance.n),
    ]
    preds = instance.precedence
    for i in range(instance.n):
        row = []
        for j in range(instance.n):
            v = instance.cost[i][j]
            if i == j:
                row.append("0")
            elif (j, i) in preds:
                row.append("-1")
            elif v is None:
                row.append(str(FORBIDDEN))
            else:
                row.append(str(v))
        lines.append(" ".join(row))
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def dump_tsptw(instance: TsptwInstance) -> str:
    """Debug dump that parse_tsptw reads back to an equal instance."""
    lines = [str(instance.n)]
    for row in instance.dist:
        lines.append(" ".join(f"{v / SCALE:.2f}" for v in row))
    for lo, hi in instance.windows:
        lines.append(f"{lo / SCALE:.2f} {hi / SCALE:.2f}")
    return "\n".join(lines) + "\n"
