"""Bounded trace semantics for POWL models and a token game for BPMN fragments.

The two sides are computed independently so one can check the other.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

from .model import SINK, SOURCE, Node, PartialOrder, Process, Transition, transitive_closure
from .transform import Fragment, Kind

Trace = tuple[str, ...]


@dataclass(frozen=True)
class Language:
    traces: frozenset[Trace]
    truncated: bool = False

    def __contains__(self, trace) -> bool:
        return tuple(trace) in self.traces

    def __len__(self) -> int:
        return len(self.traces)


class FragmentError(ValueError):
    pass


class _Capped(Exception):
    pass


# --------------------------------------------------------------------------- #
# POWL side


class _PowlSemantics:
    def __init__(self, max_len: int, max_traces: int):
        self.max_len = max_len
        self.max_traces = max_traces
        self.truncated = False

    def _collect(self, out: set[Trace], trace: Trace) -> None:
        if trace in out:
            return
        if len(out) >= self.max_traces:
            self.truncated = True
            raise _Capped
        out.add(trace)

    def language(self, node: Node) -> set[Trace]:
        if isinstance(node, Transition):
            if node.silent:
                return {()}
            return {(node.label,)} if self.max_len >= 1 else set()
        if isinstance(node, PartialOrder):
            return self._interleavings(node)
        return self._paths(node)

    def _interleavings(self, node: PartialOrder) -> set[Trace]:
        langs = [sorted(self.language(c)) for c in node.children]
        n = len(langs)
        closure = transitive_closure(node.order)
        preds = [[j for j in range(n) if (j, i) in closure] for i in range(n)]
        out: set[Trace] = set()
        try:
            for combo in itertools.product(*langs):
                if sum(map(len, combo)) > self.max_len:
                    continue
                self._interleave(combo, preds, out)
        except _Capped:
            pass
        return out

    def _interleave(self, combo, preds, out: set[Trace]) -> None:
        n = len(combo)
        seen = set()
        stack = [((0,) * n, ())]
        while stack:
            pos, trace = stack.pop()
            if (pos, trace) in seen:
                continue
            seen.add((pos, trace))
            if all(pos[i] == len(combo[i]) for i in range(n)):
                self._collect(out, trace)
                continue
            for i in range(n):
                if pos[i] == len(combo[i]):
                    continue
                if any(pos[j] < len(combo[j]) for j in preds[i]):
                    continue
                nxt = pos[:i] + (pos[i] + 1,) + pos[i + 1 :]
                stack.append((nxt, trace + (combo[i][pos[i]],)))

    def _paths(self, node) -> set[Trace]:
        langs = [sorted(self.language(c), key=lambda t: (len(t), t)) for c in node.children]
        succ: dict[int, list[int]] = {}
        for u, v in sorted(node.edges):
            succ.setdefault(u, []).append(v)
        out: set[Trace] = set()
        seen = {(SOURCE, ())}
        stack = [(SOURCE, ())]
        state_cap = self.max_traces * (len(langs) + 2)
        try:
            while stack:
                at, trace = stack.pop()
                for v in succ.get(at, ()):
                    if v == SINK:
                        self._collect(out, trace)
                        continue
                    for t in langs[v]:
                        if len(trace) + len(t) > self.max_len:
                            break
                        state = (v, trace + t)
                        if state not in seen:
                            if len(seen) >= state_cap:
                                self.truncated = True
                                raise _Capped
                            seen.add(state)
                            stack.append(state)
        except _Capped:
            pass
        return out


def powl_language(model: Process | Node, max_len: int, max_traces: int = 10_000) -> Language:
    """Visible traces of length <= max_len, capped at max_traces distinct traces."""
    root = model.root if isinstance(model, Process) else model
    sem = _PowlSemantics(max_len, max_traces)
    traces = sem.language(root)
    return Language(frozenset(traces), sem.truncated)


# --------------------------------------------------------------------------- #
# BPMN side (token game)


def _freeze(marking: Counter) -> tuple:
    return tuple(sorted((f, c) for f, c in marking.items() if c))


def bpmn_language(
    fragment: Fragment, max_len: int, max_traces: int = 10_000, max_states: int = 500_000
) -> Language:
    """Traces of the token game on a fragment with tasks, gateways and events.

    Interior start/end events (present before pruning) pass their token on.
    A trace is complete when the final end event has fired and no token is left.
    """
    for u, v in fragment.flows:
        for x in (u, v):
            if x not in fragment.nodes:
                raise FragmentError(f"flow {u}->{v} references unknown node {x!r}")
    for x in (fragment.start, fragment.end):
        if x not in fragment.nodes:
            raise FragmentError(f"boundary node {x!r} missing")

    incoming: dict[str, list] = {n: [] for n in fragment.nodes}
    outgoing: dict[str, list] = {n: [] for n in fragment.nodes}
    for f in sorted(fragment.flows):
        outgoing[f[0]].append(f)
        incoming[f[1]].append(f)
    token_cap = max(2, len(fragment.flows))
    firing = [n for n in sorted(fragment.nodes) if n != fragment.start]

    initial = Counter({f: 1 for f in outgoing[fragment.start]})
    traces: set[Trace] = set()
    truncated = False
    seen = set()
    stack = [(_freeze(initial), ())]

    while stack:
        frozen, trace = stack.pop()
        if (frozen, trace) in seen:
            continue
        if len(seen) >= max_states:
            truncated = True
            break
        seen.add((frozen, trace))
        marking = Counter(dict(frozen))
        moves = []
        for n in firing:
            node = fragment.nodes[n]
            marked = [f for f in incoming[n] if marking[f]]
            if not marked:
                continue
            if node.kind is Kind.AND and len(marked) < len(incoming[n]):
                continue
            if node.kind is not Kind.TASK:
                # each flow has a single consumer, so firings never disable one
                # another; expanding one silent node at a time loses no trace
                moves = [(n, node, marked)]
                break
            moves.append((n, node, marked))
        for n, node, marked in moves:
            if node.kind is Kind.AND:
                consumptions = [incoming[n]]
            else:
                consumptions = [[f] for f in marked]
            if node.kind is Kind.XOR:
                productions = [[f] for f in outgoing[n]] or [[]]
            else:
                productions = [outgoing[n]]
            step = trace
            if node.kind is Kind.TASK:
                if len(trace) >= max_len:
                    continue
                step = trace + (node.label,)
            for consumed in consumptions:
                for produced in productions:
                    nxt = marking.copy()
                    for f in consumed:
                        nxt[f] -= 1
                    for f in produced:
                        nxt[f] += 1
                    if any(c > token_cap for c in nxt.values()):
                        continue
                    frozen_next = _freeze(nxt)
                    if n == fragment.end and not frozen_next:
                        if step not in traces:
                            if len(traces) >= max_traces:
                                return Language(frozenset(traces), True)
                            traces.add(step)
                        continue
                    stack.append((frozen_next, step))
    return Language(frozenset(traces), truncated)


# --------------------------------------------------------------------------- #
# comparison


@dataclass(frozen=True)
class Equivalence:
    verdict: str  # "equal" | "unequal" | "inconclusive"
    witness: Trace | None
    powl: Language
    bpmn: Language

    @property
    def equal(self) -> bool:
        return self.verdict == "equal"


def _first(traces) -> Trace | None:
    return min(traces, key=lambda t: (len(t), t)) if traces else None


def languages_equal(
    model: Process | Node, fragment: Fragment, max_len: int = 12, max_traces: int = 10_000
) -> Equivalence:
    """Compare bounded languages; a witness is a trace in exactly one of them."""
    left = powl_language(model, max_len, max_traces)
    right = bpmn_language(fragment, max_len, max_traces)
    if not left.truncated and not right.truncated:
        diff = left.traces ^ right.traces
        return Equivalence("unequal" if diff else "equal", _first(diff), left, right)
    if left.truncated and right.truncated:
        return Equivalence("inconclusive", None, left, right)
    full, capped = (left, right) if right.truncated else (right, left)
    extra = capped.traces - full.traces
    if extra:
        return Equivalence("unequal", _first(extra), left, right)
    return Equivalence("inconclusive", None, left, right)
