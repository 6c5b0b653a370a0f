"""Resource-aware POWL model types, structural validation and order-relation helpers."""

from __future__ import annotations

import graphlib
import unicodedata
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

SILENT_LABEL = "tau"

# Choice-graph endpoints; child indices are 0-based and non-negative.
SOURCE = -1
SINK = -2


class CycleError(ValueError):
    """Raised when an order relation that must be acyclic contains a cycle."""

    def __init__(self, cycle: list):
        self.cycle = cycle
        super().__init__("cycle in order relation: " + " -> ".join(map(str, cycle)))


@dataclass(frozen=True)
class ResourceContext:
    """A (pool, lane) pair. Lanes are scoped to their pool."""

    pool: str
    lane: str

    def __post_init__(self):
        if not self.pool.strip():
            raise ValueError("pool must be non-empty")
        if not self.lane.strip():
            raise ValueError("lane must be non-empty")

    def __str__(self) -> str:
        return f"{self.pool}/{self.lane}"


@dataclass(frozen=True)
class Transition:
    id: str
    label: str | None = None  # None marks a silent transition

    @property
    def silent(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class PartialOrder:
    id: str
    children: tuple["Node", ...]
    order: frozenset[tuple[int, int]] = frozenset()


@dataclass(frozen=True)
class ChoiceGraph:
    id: str
    children: tuple["Node", ...]
    edges: frozenset[tuple[int, int]] = frozenset()


Node = Union[Transition, PartialOrder, ChoiceGraph]


@dataclass(frozen=True)
class Process:
    """A named model tree plus the assignment of visible transitions to contexts."""

    name: str
    root: Node
    assignment: Mapping[str, ResourceContext] = field(default_factory=dict)

    def transitions(self) -> list[Transition]:
        return [n for n in iter_nodes(self.root) if isinstance(n, Transition)]

    def visible(self) -> list[Transition]:
        return [t for t in self.transitions() if not t.silent]

    def pools(self) -> list[str]:
        return sorted({ctx.pool for ctx in self.assignment.values()})

    def contexts(self) -> list[ResourceContext]:
        return sorted(set(self.assignment.values()), key=lambda c: (c.pool, c.lane))


def iter_nodes(node: Node) -> Iterator[Node]:
    """Pre-order traversal of a model tree."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        if not isinstance(current, Transition):
            stack.extend(reversed(current.children))


def depth(node: Node) -> int:
    """Operator nesting depth; a bare transition has depth 0."""
    if isinstance(node, Transition):
        return 0
    return 1 + max(depth(c) for c in node.children)


# --------------------------------------------------------------------------- #
# order relations


def _adjacency(edges: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = defaultdict(set)
    for u, v in edges:
        adj[u].add(v)
        adj.setdefault(v, set())
    return adj


def find_cycle(edges: Iterable[tuple[int, int]]) -> list | None:
    """Return one cycle as a closed node list, or None if the relation is acyclic."""
    adj = _adjacency(edges)
    sorter = graphlib.TopologicalSorter({v: set() for v in adj})
    for u, succs in adj.items():
        for v in succs:
            sorter.add(v, u)
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        return list(exc.args[1])
    return None


def transitive_closure(edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    edges = set(edges)
    cycle = find_cycle(edges)
    if cycle is not None:
        raise CycleError(cycle)
    adj = _adjacency(edges)
    closure = set()
    for start in adj:
        seen = set()
        queue = deque(adj[start])
        while queue:
            v = queue.popleft()
            if v in seen:
                continue
            seen.add(v)
            closure.add((start, v))
            queue.extend(adj[v])
    return closure


def transitive_reduction(edges: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """Keep x -> y iff x precedes y and nothing lies strictly between them."""
    closure = transitive_closure(edges)
    succ: dict[int, set[int]] = defaultdict(set)
    for u, v in closure:
        succ[u].add(v)
    return {(u, v) for u, v in closure if not any((z, v) in closure for z in succ[u])}


# --------------------------------------------------------------------------- #
# validation


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str = ""

    def __str__(self) -> str:
        text = f"{self.element}: {self.rule}"
        return f"{text} ({self.message})" if self.message else text


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, element: str, rule: str, message: str = "") -> None:
        self.violations.append(Violation(element, rule, message))

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"element": v.element, "rule": v.rule, "message": v.message}
                for v in self.violations
            ],
        }


def has_control_chars(text: str) -> bool:
    return any(unicodedata.category(ch) == "Cc" for ch in text)


def _check_text(report: ValidationReport, element: str, what: str, text: str) -> None:
    if not text.strip():
        report.add(element, f"empty {what}")
    elif has_control_chars(text):
        report.add(element, f"control character in {what}", repr(text))


def _check_choice_paths(report: ValidationReport, node: ChoiceGraph) -> None:
    n = len(node.children)
    fwd: dict[int, set[int]] = defaultdict(set)
    bwd: dict[int, set[int]] = defaultdict(set)
    for u, v in node.edges:
        fwd[u].add(v)
        bwd[v].add(u)

    def reach(start: int, adj: dict[int, set[int]]) -> set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            for v in adj[queue.popleft()]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    from_source = reach(SOURCE, fwd)
    to_sink = reach(SINK, bwd)
    for i in range(n):
        if i not in from_source or i not in to_sink:
            report.add(
                node.children[i].id,
                "node not on source-sink path",
                f"child {node.children[i].id!r} of choice {node.id!r}",
            )


def validate_model(process: Process) -> ValidationReport:
    """Check every structural invariant at every nesting level.

    Violations are returned as data; nothing is raised.
    """
    report = ValidationReport()
    seen_ids: set[str] = set()
    transitions: dict[str, Transition] = {}

    for node in iter_nodes(process.root):
        if not node.id or not node.id.strip():
            report.add(node.id or "<root>", "empty id")
        elif node.id in seen_ids:
            report.add(node.id, "duplicate id")
        seen_ids.add(node.id)

        if isinstance(node, Transition):
            transitions[node.id] = node
            if node.label is not None:
                _check_text(report, node.id, "label", node.label)
                if node.label == SILENT_LABEL:
                    report.add(node.id, "reserved label", "'tau' marks silent transitions")
            continue

        n = len(node.children)
        if n == 0:
            report.add(node.id, "operator without children")
        pairs = node.order if isinstance(node, PartialOrder) else node.edges
        endpoints = {SOURCE, SINK} if isinstance(node, ChoiceGraph) else set()
        bad = [p for p in pairs if any(not (0 <= x < n or x in endpoints) for x in p)]
        for p in sorted(bad):
            report.add(node.id, "index out of range", f"{p}")
        if bad:
            continue

        if isinstance(node, PartialOrder):
            for i, j in sorted(node.order):
                if i == j:
                    report.add(node.id, "self-edge in partial order", f"child {node.children[i].id!r}")
            cycle = find_cycle((i, j) for i, j in node.order if i != j)
            if cycle is not None:
                names = " -> ".join(node.children[k].id for k in cycle)
                report.add(node.id, "cycle in order relation", names)
        else:
            for u, v in sorted(node.edges):
                if v == SOURCE:
                    report.add(node.id, "edge into source")
                if u == SINK:
                    report.add(node.id, "edge out of sink")
            if n:
                _check_choice_paths(report, node)

    for tid, t in sorted(transitions.items()):
        if not t.silent and tid not in process.assignment:
            report.add(tid, "assignment not total", "visible transition without pool/lane")
    for tid in sorted(process.assignment):
        if tid not in transitions:
            report.add(tid, "assignment for unknown transition")
        elif transitions[tid].silent:
            report.add(tid, "assignment on silent transition")
    for tid, ctx in sorted(process.assignment.items()):
        if tid in transitions:
            _check_text(report, tid, "pool", ctx.pool)
            _check_text(report, tid, "lane", ctx.lane)
    return report
