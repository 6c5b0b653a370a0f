"""POWL -> flat BPMN fragment -> pool-partitioned collaboration skeleton."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .model import (
    SINK,
    SOURCE,
    Node,
    PartialOrder,
    Process,
    ResourceContext,
    Transition,
    transitive_closure,
    transitive_reduction,
)


class Kind(str, enum.Enum):
    TASK = "task"
    START = "startEvent"
    END = "endEvent"
    AND = "andGateway"
    XOR = "xorGateway"
    THROW = "throwMsg"
    CATCH = "catchMsg"

    @property
    def is_gateway(self) -> bool:
        return self in (Kind.AND, Kind.XOR)


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: Kind
    label: str | None = None  # activity label, tasks only
    ref: str | None = None  # originating transition id, tasks only
    name: str | None = None  # display name of message events

    def __post_init__(self):
        if (self.label is not None) != (self.kind is Kind.TASK):
            raise ValueError(f"{self.id}: label must be set exactly for tasks")


@dataclass(frozen=True)
class Fragment:
    nodes: Mapping[str, FlowNode]
    flows: frozenset[tuple[str, str]]
    start: str
    end: str

    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.flows:
            succ[u].add(v)
        return succ

    def predecessors(self) -> dict[str, set[str]]:
        pred: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.flows:
            pred[v].add(u)
        return pred

    def count(self, *kinds: Kind) -> int:
        return sum(1 for n in self.nodes.values() if n.kind in kinds)


class LiftError(ValueError):
    pass


def flow_id(u: str, v: str) -> str:
    return f"{u}->{v}"


def message_flow_id(u: str, v: str) -> str:
    return f"{u}=>{v}"


# --------------------------------------------------------------------------- #
# control-flow translation


class _Builder:
    def __init__(self):
        self.nodes: dict[str, FlowNode] = {}
        self.flows: set[tuple[str, str]] = set()

    def add(self, node_id: str, kind: Kind, **kw) -> str:
        assert node_id not in self.nodes, node_id
        self.nodes[node_id] = FlowNode(node_id, kind, **kw)
        return node_id

    def connect(self, u: str, v: str) -> None:
        self.flows.add((u, v))

    def build(self, node: Node, prefix: str) -> tuple[str, str]:
        s = self.add(f"{prefix}.start", Kind.START)
        e = self.add(f"{prefix}.end", Kind.END)
        if isinstance(node, Transition):
            if node.silent:
                self.connect(s, e)
            else:
                t = self.add(f"{prefix}.task", Kind.TASK, label=node.label, ref=node.id)
                self.connect(s, t)
                self.connect(t, e)
            return s, e

        gate = Kind.AND if isinstance(node, PartialOrder) else Kind.XOR
        split = self.add(f"{prefix}.split", gate)
        join = self.add(f"{prefix}.join", gate)
        self.connect(s, split)
        self.connect(join, e)
        entry, exit_ = [], []
        for i, child in enumerate(node.children, start=1):
            cin = self.add(f"{prefix}.{i}.in", gate)
            cout = self.add(f"{prefix}.{i}.out", gate)
            cs, ce = self.build(child, f"{prefix}.{i}")
            self.connect(cin, cs)
            self.connect(ce, cout)
            entry.append(cin)
            exit_.append(cout)

        if isinstance(node, PartialOrder):
            closure = transitive_closure(node.order)
            for i in range(len(node.children)):
                if not any((j, i) in closure for j in range(len(node.children))):
                    self.connect(split, entry[i])
                if not any((i, j) in closure for j in range(len(node.children))):
                    self.connect(exit_[i], join)
            for i, j in transitive_reduction(node.order):
                self.connect(exit_[i], entry[j])
        else:
            for u, v in node.edges:
                src = split if u == SOURCE else exit_[u]
                dst = join if v == SINK else entry[v]
                self.connect(src, dst)
        return s, e


def translate(process: Process | Node) -> Fragment:
    """Recursive translation into a flat fragment, before any pruning.

    Node ids are paths: the root id followed by 1-based child positions,
    e.g. ``po1.2.task`` is the task of the second child of ``po1``.
    """
    root = process.root if isinstance(process, Process) else process
    b = _Builder()
    s, e = b.build(root, root.id)
    return Fragment(dict(sorted(b.nodes.items())), frozenset(b.flows), s, e)


# --------------------------------------------------------------------------- #
# pruning


def prune(fragment: Fragment) -> Fragment:
    """Contract interior connectors and 1-in/1-out gateways to a fixed point."""
    nodes = dict(fragment.nodes)
    succ = fragment.successors()
    pred = fragment.predecessors()

    def contract(n: str) -> bool:
        if len(pred[n]) != 1 or len(succ[n]) != 1:
            return False
        (a,) = pred[n]
        (b,) = succ[n]
        if a == n or b == n:
            return False
        succ[a].discard(n)
        pred[b].discard(n)
        succ[a].add(b)
        pred[b].add(a)
        del succ[n], pred[n], nodes[n]
        return True

    boundary = {fragment.start, fragment.end}
    changed = True
    while changed:
        changed = False
        for n in sorted(nodes):
            if n not in boundary and nodes[n].kind in (Kind.START, Kind.END):
                changed |= contract(n)
        for n in sorted(nodes):
            if n in nodes and nodes[n].kind.is_gateway:
                changed |= contract(n)

    flows = frozenset((u, v) for u, vs in succ.items() for v in vs)
    return Fragment(nodes, flows, fragment.start, fragment.end)


# --------------------------------------------------------------------------- #
# lifting the resource assignment


def _neighbourhoods(node: FlowNode, succ: set[str], pred: set[str]) -> list[set[str]]:
    if node.kind.is_gateway and len(succ) > 1:
        return [succ]
    if node.kind.is_gateway and len(pred) > 1:
        return [pred]
    if node.kind is Kind.START:
        return [succ]
    if node.kind is Kind.END:
        return [pred]
    return [succ, pred]


def lift_assignment(fragment: Fragment, process: Process) -> dict[str, ResourceContext]:
    """Extend the transition-level assignment to every node of the fragment.

    Propagation runs in synchronous rounds; each unassigned node copies the
    context of its smallest-id assigned neighbour in the direction its type
    dictates (splits look forward, joins backward). If a round makes no
    progress under those rules, the direction restriction is dropped for
    that round.
    """
    ctx_of: dict[str, ResourceContext] = {}
    for n in fragment.nodes.values():
        if n.kind is Kind.TASK:
            ctx_of[n.id] = process.assignment[n.ref]
    if not ctx_of:
        raise LiftError("no assignment seed: the process has no visible activity")

    succ, pred = fragment.successors(), fragment.predecessors()
    pending = sorted(set(fragment.nodes) - set(ctx_of))
    while pending:
        updates = {}
        for n in pending:
            for group in _neighbourhoods(fragment.nodes[n], succ[n], pred[n]):
                known = sorted(m for m in group if m in ctx_of)
                if known:
                    updates[n] = ctx_of[known[0]]
                    break
        if not updates:
            for n in pending:
                known = sorted(m for m in succ[n] | pred[n] if m in ctx_of)
                if known:
                    updates[n] = ctx_of[known[0]]
        if not updates:
            raise LiftError(f"nodes unreachable from any task: {', '.join(pending)}")
        ctx_of.update(updates)
        pending = [n for n in pending if n not in ctx_of]
    return dict(sorted(ctx_of.items()))


# --------------------------------------------------------------------------- #
# message events


@dataclass(frozen=True)
class Skeleton:
    """Pool-partitioned nodes and flows plus message flows between pools."""

    pools: tuple[str, ...]
    lanes: Mapping[str, tuple[str, ...]]
    nodes: Mapping[str, Mapping[str, FlowNode]]
    flows: Mapping[str, frozenset[tuple[str, str]]]
    message_flows: frozenset[tuple[str, str]]
    assignment: Mapping[str, ResourceContext]
    cross_pool: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def all_nodes(self) -> dict[str, FlowNode]:
        return {nid: n for pool in self.pools for nid, n in self.nodes[pool].items()}

    def all_flows(self) -> list[tuple[str, str]]:
        return sorted(f for pool in self.pools for f in self.flows[pool])

    def pool_of(self, node_id: str) -> str:
        return self.assignment[node_id].pool

    def stats(self) -> dict[str, int]:
        nodes = self.all_nodes().values()
        return {
            "activities": sum(n.kind is Kind.TASK for n in nodes),
            "gateways": sum(n.kind.is_gateway for n in nodes),
            "pools": len(self.pools),
            "lanes": sum(len(self.lanes[p]) for p in self.pools),
            "messageFlows": len(self.message_flows),
        }


def insert_messages(fragment: Fragment, assignment: Mapping[str, ResourceContext]) -> Skeleton:
    pool = {n: ctx.pool for n, ctx in assignment.items()}
    cross = sorted((u, v) for u, v in fragment.flows if pool[u] != pool[v])

    nodes = dict(fragment.nodes)
    ctx = dict(assignment)
    seq = set(fragment.flows) - set(cross)
    messages = set()
    for k, (u, v) in enumerate(cross, start=1):
        src, dst = fragment.nodes[u], fragment.nodes[v]
        throw = FlowNode(
            f"msg{k}.throw", Kind.THROW, name=f"from {src.label}" if src.kind is Kind.TASK else None
        )
        catch = FlowNode(
            f"msg{k}.catch", Kind.CATCH, name=f"to {dst.label}" if dst.kind is Kind.TASK else None
        )
        nodes[throw.id], nodes[catch.id] = throw, catch
        ctx[throw.id], ctx[catch.id] = assignment[u], assignment[v]
        seq.add((u, throw.id))
        seq.add((catch.id, v))
        messages.add((throw.id, catch.id))

    pools = tuple(sorted({c.pool for c in ctx.values()}))
    lanes = {p: tuple(sorted({c.lane for c in ctx.values() if c.pool == p})) for p in pools}
    by_pool: dict[str, dict[str, FlowNode]] = defaultdict(dict)
    for nid in sorted(nodes):
        by_pool[ctx[nid].pool][nid] = nodes[nid]
    flows = {
        p: frozenset((u, v) for u, v in seq if ctx[u].pool == p and ctx[v].pool == p) for p in pools
    }
    return Skeleton(
        pools=pools,
        lanes=lanes,
        nodes={p: by_pool[p] for p in pools},
        flows=flows,
        message_flows=frozenset(messages),
        assignment=dict(sorted(ctx.items())),
        cross_pool=frozenset(cross),
    )


def build_skeleton(process: Process) -> tuple[Fragment, Skeleton]:
    """Translate, prune, lift and insert message events in one go."""
    fragment = prune(translate(process))
    ctx_of = lift_assignment(fragment, process)
    return fragment, insert_messages(fragment, ctx_of)
