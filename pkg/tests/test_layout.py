import random

from hypothesis import given, settings

from powl2bpmn.layout import (
    LANE_PAD,
    SIZES,
    Diagram,
    EdgePath,
    Shape,
    _Router,
    check_diagram,
    initial_layout,
    layout,
    order_lanes,
    order_pools,
    place_nodes,
)
from powl2bpmn.model import PartialOrder, Process, ResourceContext, Transition
from powl2bpmn.randgen import GenConfig, random_process
from powl2bpmn.transform import build_skeleton, flow_id

from conftest import load, processes


def skeleton_of(root, assignment):
    return build_skeleton(Process("p", root, assignment))[1]


def seq(*names, contexts=None):
    kids = tuple(Transition(n, n) for n in names)
    order = frozenset((i, i + 1) for i in range(len(kids) - 1))
    contexts = contexts or [ResourceContext("P", "L")] * len(names)
    return skeleton_of(PartialOrder("po", kids, order), dict(zip(names, contexts)))


def test_chain_moves_right():
    flat = initial_layout(seq("a", "b", "c"))
    xs = [flat[f"po.{i}.task"].x for i in (1, 2, 3)]
    assert xs == sorted(xs) and len(set(xs)) == 3


def test_parallel_branches_share_a_layer():
    ctx = ResourceContext("P", "L")
    sk = skeleton_of(PartialOrder("po", (Transition("a", "a"), Transition("b", "b"))), {"a": ctx, "b": ctx})
    flat = initial_layout(sk)
    a, b = flat["po.1.task"], flat["po.2.task"]
    assert a.x == b.x and a.y != b.y


def test_flat_layout_is_deterministic_and_disjoint():
    sk = build_skeleton(load("p7"))[1]
    first, second = initial_layout(sk), initial_layout(sk)
    assert first == second
    shapes = list(first.values())
    assert not any(s.overlaps(t) for i, s in enumerate(shapes) for t in shapes[i + 1 :])


def test_shape_sizes():
    sk = build_skeleton(load("p1"))[1]
    for nid, shape in initial_layout(sk).items():
        assert (shape.width, shape.height) == SIZES[sk.all_nodes()[nid].kind]


def _flat_stub(xs: dict):
    return {n: Shape(n, x, 0, 10, 10) for n, x in xs.items()}


def test_pool_order_by_leftmost_node():
    a, b = ResourceContext("A", "L"), ResourceContext("B", "L")
    sk = seq("x", "y", contexts=[b, a])
    flat = initial_layout(sk)
    assert order_pools(sk, flat) == ["B", "A"]  # B holds the first task
    tied = {n: Shape(n, 10, 0, 10, 10) for n in sk.assignment}
    assert order_pools(sk, tied) == ["A", "B"]


def test_single_pool_order():
    sk = seq("x")
    assert order_pools(sk, initial_layout(sk)) == ["P"]


def test_lane_order_by_leftmost_node():
    l1, l2 = ResourceContext("P", "L1"), ResourceContext("P", "L2")
    sk = seq("x", "y", contexts=[l2, l1])
    assert order_lanes(sk, "P", initial_layout(sk)) == ["L2", "L1"]
    tied = {n: Shape(n, 5, 0, 10, 10) for n in sk.assignment}
    assert order_lanes(sk, "P", tied) == ["L1", "L2"]


def test_placement_keeps_x_and_fits_lanes():
    sk = build_skeleton(load("p13"))[1]
    flat = initial_layout(sk)
    pools = order_pools(sk, flat)
    diagram = place_nodes(sk, flat, pools, {p: order_lanes(sk, p, flat) for p in pools})
    for nid, shape in diagram.nodes.items():
        assert shape.x == flat[nid].x
        ctx = sk.assignment[nid]
        assert diagram.lanes[ctx.pool][ctx.lane].contains(shape)
        assert diagram.pools[ctx.pool].contains(shape)


def test_single_node_box():
    sk = seq("a")
    d = layout(sk)
    (lane,) = d.lanes["P"].values()
    task = d.nodes["po.1.task"]
    assert lane.y + LANE_PAD <= task.y and task.bottom <= lane.bottom - LANE_PAD
    assert not check_diagram(d, sk)


def test_straight_edge_between_neighbours():
    sk = seq("a", "b")
    d = layout(sk)
    path = d.edges[flow_id("po.1.task", "po.2.task")]
    assert len(path.waypoints) == 2
    assert path.waypoints[0][1] == path.waypoints[1][1]


def test_bent_edge_between_rows():
    ctx = ResourceContext("P", "L")
    sk = skeleton_of(PartialOrder("po", (Transition("a", "a"), Transition("b", "b"))), {"a": ctx, "b": ctx})
    d = layout(sk)
    bent = [p for p in d.edges.values() if p.waypoints[0][1] != p.waypoints[-1][1]]
    assert bent
    for path in bent:
        assert len(path.waypoints) >= 3 and path.is_orthogonal()


def test_router_avoids_a_blocking_shape():
    src, wall, dst = Shape("s", 0, 100, 40, 40), Shape("w", 100, 60, 100, 120), Shape("d", 300, 100, 40, 40)
    router = _Router([src, wall, dst], (-50, 0, 400, 300))
    path = router.route([((40, 120), (50, 120), 0)], [((300, 120), (290, 120), 0)])
    assert path is not None
    edge = EdgePath("e", tuple(path))
    assert edge.is_orthogonal()
    assert not any(wall.cuts_interior(a, b) for a, b in edge.segments())


def test_message_flows_leave_vertically():
    d = layout(build_skeleton(load("p13"))[1])
    sk = build_skeleton(load("p13"))[1]
    for u, v in sk.message_flows:
        first, last = d.edges[f"{u}=>{v}"].waypoints[0], d.edges[f"{u}=>{v}"].waypoints[-1]
        assert first[1] in (d.nodes[u].y, d.nodes[u].bottom)
        assert last[1] in (d.nodes[v].y, d.nodes[v].bottom)


def test_corpus_diagrams_are_sound(corpus_file):
    from powl2bpmn.dsl import parse

    sk = build_skeleton(parse(corpus_file.read_text(encoding="utf-8")))[1]
    d = layout(sk)
    assert check_diagram(d, sk) == []
    assert d.fallback_routes == ()


def test_checker_catches_broken_diagrams():
    sk = seq("a", "b")
    d = layout(sk)
    a, b = d.nodes["po.1.task"], d.nodes["po.2.task"]
    moved = dict(d.nodes, **{"po.2.task": Shape(b.element_id, a.x + 10, a.y, b.width, b.height)})
    problems = check_diagram(Diagram(d.pools, d.lanes, moved, d.edges), sk)
    assert any("overlap" in p for p in problems)
    diag = EdgePath("x", ((a.right, a.cy), (b.x, b.cy + 7)))
    edges = dict(d.edges, **{flow_id("po.1.task", "po.2.task"): diag})
    assert any("not orthogonal" in p for p in check_diagram(Diagram(d.pools, d.lanes, d.nodes, edges), sk))


def test_layout_is_deterministic():
    sk = build_skeleton(load("p18"))[1]
    assert layout(sk) == layout(sk)


@settings(max_examples=40)
@given(processes(GenConfig(pools=2, max_visible=8, require_visible=True)))
def test_random_two_pool_layouts(process):
    sk = build_skeleton(process)[1]
    d = layout(sk)
    assert check_diagram(d, sk) == []
    pools = list(d.pools.values())
    assert all(not p.overlaps(q) for i, p in enumerate(pools) for q in pools[i + 1 :])


def test_many_lanes_and_pools():
    cfg = GenConfig(pools=3, lanes_per_pool=3, max_visible=10, max_depth=4, require_visible=True)
    rng = random.Random(7)
    for _ in range(10):
        sk = build_skeleton(random_process(rng, cfg))[1]
        assert check_diagram(layout(sk), sk) == []
