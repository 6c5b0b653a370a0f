"""Seeded random POWL models for property tests and oracle sweeps."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import (
    SINK,
    SOURCE,
    ChoiceGraph,
    Node,
    PartialOrder,
    Process,
    ResourceContext,
    Transition,
    iter_nodes,
)

LABELS = ("a", "b", "c", "d", "e", "f", "Check", "Pay Invoice", "Größe prüfen")


@dataclass
class GenConfig:
    max_depth: int = 3
    max_visible: int = 6
    max_children: int = 4
    silent_prob: float = 0.15
    cyclic: bool = False
    skip_prob: float = 0.15
    pools: int = 1  # pools are named P1..Pn
    lanes_per_pool: int = 2
    require_visible: bool = False
    labels: tuple[str, ...] = LABELS


class _Gen:
    def __init__(self, rng: random.Random, cfg: GenConfig):
        self.rng = rng
        self.cfg = cfg
        self.visible = 0
        self.counter = 0

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def leaf(self) -> Transition:
        rng = self.rng
        if self.visible >= self.cfg.max_visible or rng.random() < self.cfg.silent_prob:
            return Transition(self.fresh("t"), None)
        self.visible += 1
        return Transition(self.fresh("a"), rng.choice(self.cfg.labels))

    def node(self, depth: int) -> Node:
        rng = self.rng
        budget_left = self.visible < self.cfg.max_visible
        if depth >= self.cfg.max_depth or not budget_left or rng.random() < 0.35 * (depth > 0):
            return self.leaf()
        n = rng.randint(1, self.cfg.max_children)
        if rng.random() < 0.5:
            node_id = self.fresh("po")
            children = tuple(self.node(depth + 1) for _ in range(n))
            return PartialOrder(node_id, children, frozenset(self.random_dag(n)))
        node_id = self.fresh("x")
        children = tuple(self.node(depth + 1) for _ in range(n))
        return ChoiceGraph(node_id, children, frozenset(self.choice_edges(n)))

    def random_dag(self, n: int) -> set[tuple[int, int]]:
        perm = list(range(n))
        self.rng.shuffle(perm)
        p = self.rng.choice((0.0, 0.3, 0.6, 1.0))
        return {
            (perm[i], perm[j]) for i in range(n) for j in range(i + 1, n) if self.rng.random() < p
        }

    def choice_edges(self, n: int) -> set[tuple[int, int]]:
        """Every child gets a way in (source or earlier child) and a way out."""
        rng = self.rng
        order = list(range(n))
        rng.shuffle(order)
        edges = set()
        for pos, i in enumerate(order):
            earlier = order[:pos]
            if not earlier or rng.random() < 0.5:
                edges.add((SOURCE, i))
            else:
                edges.add((rng.choice(earlier), i))
            later = order[pos + 1 :]
            if not later or rng.random() < 0.5:
                edges.add((i, SINK))
            else:
                edges.add((i, rng.choice(later)))
        for pos, i in enumerate(order):
            for j in order[pos + 1 :]:
                if rng.random() < 0.15:
                    edges.add((i, j))
        if rng.random() < self.cfg.skip_prob:
            edges.add((SOURCE, SINK))
        if self.cfg.cyclic:
            for pos, i in enumerate(order):
                for j in order[: pos + 1]:
                    if rng.random() < 0.2:
                        edges.add((i, j))
        return edges


def random_process(rng: random.Random, cfg: GenConfig | None = None, name: str = "random") -> Process:
    cfg = cfg or GenConfig()
    for _ in range(1000):
        gen = _Gen(rng, cfg)
        root = gen.node(0)
        if cfg.require_visible and gen.visible == 0:
            continue
        break
    contexts = [
        ResourceContext(f"P{p}", f"L{l}")
        for p in range(1, cfg.pools + 1)
        for l in range(1, cfg.lanes_per_pool + 1)
    ]
    assignment = {
        n.id: rng.choice(contexts)
        for n in iter_nodes(root)
        if isinstance(n, Transition) and not n.silent
    }
    return Process(name, root, assignment)
