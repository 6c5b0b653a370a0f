"""Collaboration layout: flat layered placement, pool/lane banding, orthogonal routing.

Coordinates are integer diagram units with the origin at the top left.
"""

from __future__ import annotations

import bisect
import heapq
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping

from .transform import Kind, Skeleton, flow_id, message_flow_id

SIZES = {
    Kind.TASK: (100, 80),
    Kind.AND: (50, 50),
    Kind.XOR: (50, 50),
    Kind.START: (36, 36),
    Kind.END: (36, 36),
    Kind.THROW: (36, 36),
    Kind.CATCH: (36, 36),
}
ROW_HEIGHT = 80
LANE_PAD = 20
LAYER_GAP = 60
ROW_GAP = 30
POOL_HEADER = 30
POOL_GAP = 30
GRID = 10  # clearance kept between routed segments and shapes
BEND_COST = 40


@dataclass(frozen=True)
class Shape:
    element_id: str
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"{self.element_id}: non-positive size")

    @property
    def right(self) -> int:
        return self.x + self.width

    @property
    def bottom(self) -> int:
        return self.y + self.height

    @property
    def cx(self) -> int:
        return self.x + self.width // 2

    @property
    def cy(self) -> int:
        return self.y + self.height // 2

    def contains(self, other: "Shape") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def overlaps(self, other: "Shape") -> bool:
        return (
            self.x < other.right
            and other.x < self.right
            and self.y < other.bottom
            and other.y < self.bottom
        )

    def on_border(self, point: tuple[int, int]) -> bool:
        x, y = point
        inside = self.x <= x <= self.right and self.y <= y <= self.bottom
        return inside and (x in (self.x, self.right) or y in (self.y, self.bottom))

    def cuts_interior(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        """Whether the axis-parallel segment a-b passes through the open interior."""
        (x1, y1), (x2, y2) = a, b
        if y1 == y2:
            return self.y < y1 < self.bottom and max(x1, x2) > self.x and min(x1, x2) < self.right
        return self.x < x1 < self.right and max(y1, y2) > self.y and min(y1, y2) < self.bottom


@dataclass(frozen=True)
class EdgePath:
    element_id: str
    waypoints: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError(f"{self.element_id}: fewer than two waypoints")

    def is_orthogonal(self) -> bool:
        return all(
            (a[0] == b[0]) != (a[1] == b[1]) for a, b in zip(self.waypoints, self.waypoints[1:])
        )

    def segments(self):
        return zip(self.waypoints, self.waypoints[1:])


@dataclass(frozen=True)
class Diagram:
    pools: Mapping[str, Shape]  # in top-to-bottom order
    lanes: Mapping[str, Mapping[str, Shape]]  # pool -> lane -> shape, top-to-bottom
    nodes: Mapping[str, Shape]
    edges: Mapping[str, EdgePath] = field(default_factory=dict)
    fallback_routes: tuple[str, ...] = ()


def pool_element_id(pool: str) -> str:
    return f"pool:{pool}"


def lane_element_id(pool: str, lane: str) -> str:
    return f"lane:{pool}/{lane}"


# --------------------------------------------------------------------------- #
# flat layered layout


def _break_cycles(nodes: list[str], succ: dict[str, list[str]], pred: dict[str, list[str]]):
    """DFS from the sources; edges closing a cycle are reported as back edges."""
    state: dict[str, int] = {}
    back = set()
    order = []
    roots = [n for n in nodes if not pred[n]] + nodes
    for root in roots:
        if root in state:
            continue
        state[root] = 1
        order.append(root)
        stack = [(root, iter(succ[root]))]
        while stack:
            n, it = stack[-1]
            for m in it:
                if state.get(m) == 1:
                    back.add((n, m))
                elif m not in state:
                    state[m] = 1
                    order.append(m)
                    stack.append((m, iter(succ[m])))
                    break
            else:
                state[n] = 2
                stack.pop()
    return back, order


def initial_layout(skeleton: Skeleton) -> dict[str, Shape]:
    """Left-to-right layered placement of all flow nodes, ignoring pools and lanes.

    Message flows count as ordinary edges here, so catch events land right of
    their throw events.
    """
    kinds = {nid: n.kind for nid, n in skeleton.all_nodes().items()}
    nodes = sorted(kinds)
    edges = sorted(set(skeleton.all_flows()) | set(skeleton.message_flows))
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    pred: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        succ[u].append(v)
        pred[v].append(u)

    back, discovery = _break_cycles(nodes, succ, pred)
    dag_pred = {n: [u for u in pred[n] if (u, n) not in back] for n in nodes}
    dag_succ = {n: [v for v in succ[n] if (n, v) not in back] for n in nodes}

    # longest-path layering via Kahn's algorithm with deterministic ties
    rank = {n: 0 for n in nodes}
    indeg = {n: len(dag_pred[n]) for n in nodes}
    ready = sorted(n for n in nodes if indeg[n] == 0)
    while ready:
        n = ready.pop(0)
        for m in dag_succ[n]:
            rank[m] = max(rank[m], rank[n] + 1)
            indeg[m] -= 1
            if indeg[m] == 0:
                bisect.insort(ready, m)

    first_seen = {n: i for i, n in enumerate(discovery)}
    layers: dict[int, list[str]] = defaultdict(list)
    for n in sorted(nodes, key=first_seen.__getitem__):
        layers[rank[n]].append(n)

    # one top-down median sweep
    position: dict[str, float] = {}
    for k in sorted(layers):
        layer = layers[k]
        for i, n in enumerate(layer):
            position[n] = i

        def median(n: str, i: int) -> float:
            ps = sorted(position[u] for u in dag_pred[n] if u in position and rank[u] < k)
            if not ps:
                return float(i)
            mid = len(ps) // 2
            return ps[mid] if len(ps) % 2 else (ps[mid - 1] + ps[mid]) / 2

        keyed = sorted((median(n, i), i, n) for i, n in enumerate(layer))
        layers[k] = [n for _, _, n in keyed]
        for i, n in enumerate(layers[k]):
            position[n] = i

    shapes: dict[str, Shape] = {}
    x = POOL_HEADER + LANE_PAD
    for k in sorted(layers):
        col_w = max(SIZES[kinds[n]][0] for n in layers[k])
        for i, n in enumerate(layers[k]):
            w, h = SIZES[kinds[n]]
            y = i * (ROW_HEIGHT + ROW_GAP) + (ROW_HEIGHT - h) // 2
            shapes[n] = Shape(n, x + (col_w - w) // 2, y, w, h)
        x += col_w + LAYER_GAP
    return dict(sorted(shapes.items()))


# --------------------------------------------------------------------------- #
# pool and lane order


def order_pools(skeleton: Skeleton, flat: Mapping[str, Shape]) -> list[str]:
    leftmost = {p: min(flat[n].x for n in skeleton.nodes[p]) for p in skeleton.pools}
    return sorted(skeleton.pools, key=lambda p: (leftmost[p], p))


def order_lanes(skeleton: Skeleton, pool: str, flat: Mapping[str, Shape]) -> list[str]:
    leftmost: dict[str, int] = {}
    for n in skeleton.nodes[pool]:
        lane = skeleton.assignment[n].lane
        leftmost[lane] = min(leftmost.get(lane, flat[n].x), flat[n].x)
    return sorted(skeleton.lanes[pool], key=lambda l: (leftmost[l], l))


# --------------------------------------------------------------------------- #
# node placement


def _assign_rows(members: list[Shape]) -> dict[str, int]:
    """Greedy interval packing: first row without horizontal overlap."""
    rows: list[list[Shape]] = []
    result = {}
    for s in members:
        for r, row in enumerate(rows):
            if all(s.x >= o.right + GRID or o.x >= s.right + GRID for o in row):
                row.append(s)
                result[s.element_id] = r
                break
        else:
            rows.append([s])
            result[s.element_id] = len(rows) - 1
    return result


def place_nodes(
    skeleton: Skeleton,
    flat: Mapping[str, Shape],
    pool_order: list[str],
    lane_orders: Mapping[str, list[str]],
) -> Diagram:
    """Keep each node's x from the flat layout and move it into its lane band."""
    right = max(s.right for s in flat.values()) + LANE_PAD
    pools: dict[str, Shape] = {}
    lanes: dict[str, dict[str, Shape]] = {}
    nodes: dict[str, Shape] = {}
    y = 0
    for pool in pool_order:
        pool_top = y
        lanes[pool] = {}
        for lane in lane_orders[pool]:
            members = sorted(
                (flat[n] for n in skeleton.nodes[pool] if skeleton.assignment[n].lane == lane),
                key=lambda s: (s.y, s.x, s.element_id),
            )
            rows = _assign_rows(members)
            n_rows = max(rows.values()) + 1
            height = 2 * LANE_PAD + n_rows * ROW_HEIGHT + (n_rows - 1) * ROW_GAP
            for s in members:
                top = y + LANE_PAD + rows[s.element_id] * (ROW_HEIGHT + ROW_GAP)
                nodes[s.element_id] = replace(s, y=top + (ROW_HEIGHT - s.height) // 2)
            lanes[pool][lane] = Shape(
                lane_element_id(pool, lane), POOL_HEADER, y, right - POOL_HEADER, height
            )
            y += height
        pools[pool] = Shape(pool_element_id(pool), 0, pool_top, right, y - pool_top)
        y += POOL_GAP
    return Diagram(pools, lanes, dict(sorted(nodes.items())))


# --------------------------------------------------------------------------- #
# orthogonal routing


_SIDES = {
    "right": (1, 0),
    "left": (-1, 0),
    "top": (0, -1),
    "bottom": (0, 1),
}


def _port(s: Shape, side: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """Border midpoint of a side and the stub point GRID units outside it."""
    dx, dy = _SIDES[side]
    point = {
        "right": (s.right, s.cy),
        "left": (s.x, s.cy),
        "top": (s.cx, s.y),
        "bottom": (s.cx, s.bottom),
    }[side]
    return point, (point[0] + dx * GRID, point[1] + dy * GRID)


class _Router:
    """A* over the sparse grid spanned by shape clearance lines and port axes."""

    def __init__(self, shapes: list[Shape], bounds: tuple[int, int, int, int] | None):
        self.bounds = bounds
        xs, ys = set(), set()
        for s in shapes:
            xs.update((s.x - GRID, s.right + GRID, s.cx))
            ys.update((s.y - GRID, s.bottom + GRID, s.cy))
        if bounds is not None:
            x0, y0, x1, y1 = bounds
            xs.update((x0, x1))
            ys.update((y0, y1))
            xs = {x for x in xs if x0 <= x <= x1}
            ys = {y for y in ys if y0 <= y <= y1}
        self.xs = sorted(xs)
        self.ys = sorted(ys)
        self.xi = {x: i for i, x in enumerate(self.xs)}
        self.yi = {y: i for i, y in enumerate(self.ys)}
        # blocked[j][i]: segment xs[i]..xs[i+1] on line ys[j] enters a shape
        self.hblocked = [[False] * max(len(self.xs) - 1, 0) for _ in self.ys]
        self.vblocked = [[False] * max(len(self.ys) - 1, 0) for _ in self.xs]
        for s in shapes:
            for j in range(bisect.bisect_right(self.ys, s.y), bisect.bisect_left(self.ys, s.bottom)):
                lo = max(bisect.bisect_left(self.xs, s.x) - 1, 0)
                for i in range(lo, len(self.xs) - 1):
                    if self.xs[i] >= s.right:
                        break
                    if self.xs[i + 1] > s.x:
                        self.hblocked[j][i] = True
            for i in range(bisect.bisect_right(self.xs, s.x), bisect.bisect_left(self.xs, s.right)):
                lo = max(bisect.bisect_left(self.ys, s.y) - 1, 0)
                for j in range(lo, len(self.ys) - 1):
                    if self.ys[j] >= s.bottom:
                        break
                    if self.ys[j + 1] > s.y:
                        self.vblocked[i][j] = True

    def route(self, starts, goals):
        """starts/goals: lists of (port, stub, penalty). Returns waypoint list or None."""
        goal_at = {}
        for port, stub, pen in goals:
            if stub in self.points():
                goal_at.setdefault((self.xi[stub[0]], self.yi[stub[1]]), (port, pen))
        if not goal_at:
            return None
        goal_pts = [(self.xs[i], self.ys[j]) for i, j in goal_at]

        def h(i, j):
            x, y = self.xs[i], self.ys[j]
            return min(abs(x - gx) + abs(y - gy) for gx, gy in goal_pts)

        heap, best, parent = [], {}, {}
        tie = 0
        for port, stub, pen in starts:
            if stub not in self.points():
                continue
            i, j = self.xi[stub[0]], self.yi[stub[1]]
            d = 1 if port[1] == stub[1] else 2  # initial heading
            state = (i, j, d)
            g = pen + GRID
            if g < best.get(state, float("inf")):
                best[state] = g
                parent[state] = ("start", port)
                heapq.heappush(heap, (g + h(i, j), g, tie, state))
                tie += 1

        while heap:
            _, g, _, state = heapq.heappop(heap)
            if g > best.get(state, float("inf")):
                continue
            i, j, d = state
            if (i, j) in goal_at:
                return self._unwind(parent, state, goal_at[(i, j)][0])
            for ni, nj, nd, blocked in (
                (i + 1, j, 1, lambda: self.hblocked[j][i]),
                (i - 1, j, 1, lambda: self.hblocked[j][i - 1]),
                (i, j + 1, 2, lambda: self.vblocked[i][j]),
                (i, j - 1, 2, lambda: self.vblocked[i][j - 1]),
            ):
                if not (0 <= ni < len(self.xs) and 0 <= nj < len(self.ys)) or blocked():
                    continue
                step = abs(self.xs[ni] - self.xs[i]) + abs(self.ys[nj] - self.ys[j])
                cost = g + step + (BEND_COST if nd != d else 0)
                if (ni, nj) in goal_at:
                    port, pen = goal_at[(ni, nj)]
                    # a turn at the stub onto the final leg counts as a bend
                    last_leg_horizontal = port[1] == self.ys[nj]
                    cost += pen + (BEND_COST if (nd == 1) != last_leg_horizontal else 0)
                nxt = (ni, nj, nd)
                if cost < best.get(nxt, float("inf")):
                    best[nxt] = cost
                    parent[nxt] = state
                    heapq.heappush(heap, (cost + h(ni, nj), cost, tie, nxt))
                    tie += 1
        return None

    def points(self):
        return _PointSet(self.xi, self.yi)

    def _unwind(self, parent, state, end_port):
        pts = [end_port]
        while True:
            i, j, _ = state
            pts.append((self.xs[i], self.ys[j]))
            prev = parent[state]
            if prev[0] == "start":
                pts.append(prev[1])
                break
            state = prev
        pts.reverse()
        return pts


class _PointSet:
    def __init__(self, xi, yi):
        self.xi, self.yi = xi, yi

    def __contains__(self, p) -> bool:
        return p[0] in self.xi and p[1] in self.yi


def _simplify(points) -> tuple[tuple[int, int], ...]:
    pts = []
    for p in points:
        if not pts or pts[-1] != p:
            pts.append(p)
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        a, b, c = out[-1], pts[k], pts[k + 1]
        if (a[0] == b[0] == c[0]) or (a[1] == b[1] == c[1]):
            continue
        out.append(b)
    if len(pts) > 1:
        out.append(pts[-1])
    return tuple(out)


def _z_route(src: Shape, dst: Shape):
    (sx, sy), (tx, ty) = (src.right, src.cy), (dst.x, dst.cy)
    mid = (sx + tx) // 2
    return _simplify([(sx, sy), (mid, sy), (mid, ty), (tx, ty)])


SEQ_SOURCE_PORTS = (("right", 0), ("bottom", 30), ("top", 30), ("left", 120))
SEQ_TARGET_PORTS = (("left", 0), ("top", 30), ("bottom", 30), ("right", 120))


def route_edges(diagram: Diagram, skeleton: Skeleton) -> Diagram:
    """Orthogonal, obstacle-avoiding waypoints for every sequence and message flow.

    Sequence flows are routed inside their pool's lane area; message flows
    leave the throw event vertically towards the catching pool. Flows the
    router cannot connect get a Z-shaped fallback and are listed in
    ``fallback_routes``.
    """
    nodes = diagram.nodes
    edges: dict[str, EdgePath] = {}
    fallback = []

    for pool in diagram.pools:
        box = diagram.pools[pool]
        members = [nodes[n] for n in skeleton.nodes[pool]]
        router = _Router(members, (box.x + POOL_HEADER, box.y, box.right, box.bottom))
        for u, v in sorted(skeleton.flows[pool]):
            src, dst = nodes[u], nodes[v]
            starts = [(*_port(src, side), pen) for side, pen in SEQ_SOURCE_PORTS]
            goals = [(*_port(dst, side), pen) for side, pen in SEQ_TARGET_PORTS]
            path = router.route(starts, goals)
            if path is None:
                fallback.append(flow_id(u, v))
                points = _z_route(src, dst)
            else:
                points = _simplify(path)
            edges[flow_id(u, v)] = EdgePath(flow_id(u, v), points)

    x0 = min(p.x for p in diagram.pools.values()) - 2 * GRID
    y0 = min(p.y for p in diagram.pools.values()) - 2 * GRID
    x1 = max(p.right for p in diagram.pools.values()) + 2 * GRID
    y1 = max(p.bottom for p in diagram.pools.values()) + 2 * GRID
    global_router = _Router(list(nodes.values()), (x0, y0, x1, y1))
    pool_rank = {p: k for k, p in enumerate(diagram.pools)}
    for u, v in sorted(skeleton.message_flows):
        src, dst = nodes[u], nodes[v]
        down = pool_rank[skeleton.pool_of(u)] < pool_rank[skeleton.pool_of(v)]
        starts = [(*_port(src, "bottom" if down else "top"), 0)]
        goals = [(*_port(dst, "top" if down else "bottom"), 0)]
        path = global_router.route(starts, goals)
        fid = message_flow_id(u, v)
        if path is None:
            fallback.append(fid)
            points = _z_route(src, dst)
        else:
            points = _simplify(path)
        edges[fid] = EdgePath(fid, points)

    return replace(diagram, edges=dict(sorted(edges.items())), fallback_routes=tuple(fallback))


def layout(skeleton: Skeleton) -> Diagram:
    flat = initial_layout(skeleton)
    pool_order = order_pools(skeleton, flat)
    lane_orders = {p: order_lanes(skeleton, p, flat) for p in pool_order}
    diagram = place_nodes(skeleton, flat, pool_order, lane_orders)
    return route_edges(diagram, skeleton)


# --------------------------------------------------------------------------- #
# geometric checks


def check_diagram(diagram: Diagram, skeleton: Skeleton) -> list[str]:
    """Return human-readable descriptions of every violated layout invariant."""
    problems = []
    pools = list(diagram.pools.items())
    for a in range(len(pools)):
        for b in range(a + 1, len(pools)):
            if pools[a][1].overlaps(pools[b][1]):
                problems.append(f"pools {pools[a][0]!r} and {pools[b][0]!r} overlap")

    for pool, box in pools:
        lanes = sorted(diagram.lanes[pool].items(), key=lambda kv: kv[1].y)
        if not lanes:
            problems.append(f"pool {pool!r} has no lanes")
            continue
        cursor = box.y
        for lane, shape in lanes:
            if not box.contains(shape):
                problems.append(f"lane {pool}/{lane} not inside its pool")
            if shape.y != cursor:
                problems.append(f"lane {pool}/{lane} leaves a gap or overlaps at y={cursor}")
            if shape.x != box.x + POOL_HEADER or shape.right != box.right:
                problems.append(f"lane {pool}/{lane} does not span the pool interior")
            cursor = shape.bottom
        if cursor != box.bottom:
            problems.append(f"lanes of {pool!r} do not fill the pool")

    for nid, ctx in skeleton.assignment.items():
        shape = diagram.nodes.get(nid)
        if shape is None:
            problems.append(f"node {nid} has no shape")
            continue
        lane = diagram.lanes.get(ctx.pool, {}).get(ctx.lane)
        if lane is None or not lane.contains(shape):
            problems.append(f"node {nid} not inside lane {ctx}")

    shapes = list(diagram.nodes.values())
    for a in range(len(shapes)):
        for b in range(a + 1, len(shapes)):
            if shapes[a].overlaps(shapes[b]):
                problems.append(f"nodes {shapes[a].element_id} and {shapes[b].element_id} overlap")

    expected = {flow_id(u, v): (u, v, True) for u, v in skeleton.all_flows()}
    expected.update({message_flow_id(u, v): (u, v, False) for u, v in skeleton.message_flows})
    for fid, (u, v, sequence) in expected.items():
        path = diagram.edges.get(fid)
        if path is None:
            problems.append(f"flow {fid} has no path")
            continue
        if not path.is_orthogonal():
            problems.append(f"flow {fid} is not orthogonal")
        if not diagram.nodes[u].on_border(path.waypoints[0]):
            problems.append(f"flow {fid} does not start on its source border")
        if not diagram.nodes[v].on_border(path.waypoints[-1]):
            problems.append(f"flow {fid} does not end on its target border")
        for a, b in path.segments():
            for s in shapes:
                if s.cuts_interior(a, b):
                    problems.append(f"flow {fid} crosses node {s.element_id}")
            if sequence:
                box = diagram.pools[skeleton.pool_of(u)]
                for x, y in (a, b):
                    if not (box.x <= x <= box.right and box.y <= y <= box.bottom):
                        problems.append(f"sequence flow {fid} leaves pool {skeleton.pool_of(u)!r}")
    return problems
