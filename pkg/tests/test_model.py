import itertools

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powl2bpmn.model import (
    SINK,
    SOURCE,
    ChoiceGraph,
    CycleError,
    PartialOrder,
    Process,
    ResourceContext,
    Transition,
    depth,
    find_cycle,
    iter_nodes,
    transitive_closure,
    transitive_reduction,
    validate_model,
)

from conftest import processes

P = ResourceContext("P", "L")


def act(tid, label=None):
    return Transition(tid, label or tid)


def rules(process):
    return validate_model(process).rules()


def dags(max_nodes=7):
    """Random DAG edge sets over 0..n-1 (edges only go from lower to higher index)."""

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_nodes))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        chosen = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
        perm = draw(st.permutations(range(n)))
        return n, {(perm[i], perm[j]) for i, j in chosen}

    return build()


# --- resource contexts ------------------------------------------------------


def test_context_rejects_blank_fields():
    with pytest.raises(ValueError):
        ResourceContext("  ", "L")
    with pytest.raises(ValueError):
        ResourceContext("P", "")


def test_lane_identity_is_scoped_to_pool():
    assert ResourceContext("A", "Clerk") != ResourceContext("B", "Clerk")
    assert ResourceContext("A", "Clerk") == ResourceContext("A", "Clerk")


# --- validation -------------------------------------------------------------


def test_single_visible_transition_is_valid():
    assert validate_model(Process("p", act("a"), {"a": P})).ok


def test_order_cycle_is_reported():
    po = PartialOrder("po", (act("a"), act("b")), frozenset({(0, 1), (1, 0)}))
    report = validate_model(Process("p", po, {"a": P, "b": P}))
    assert "cycle in order relation" in report.rules()
    assert all(v.element for v in report.violations)


def test_missing_assignment_is_reported():
    po = PartialOrder("po", (act("a"), act("b")))
    report = validate_model(Process("p", po, {"a": P}))
    assert [(v.element, v.rule) for v in report.violations] == [("b", "assignment not total")]


def test_silent_transitions_stay_unassigned():
    po = PartialOrder("po", (act("a"), Transition("t")))
    assert validate_model(Process("p", po, {"a": P})).ok
    assert "assignment on silent transition" in rules(Process("p", po, {"a": P, "t": P}))


@pytest.mark.parametrize(
    "root, assignment, rule",
    [
        (PartialOrder("po", (act("a"), act("a"))), {"a": P}, "duplicate id"),
        (Transition("", "x"), {"": P}, "empty id"),
        (Transition("a", "tau"), {"a": P}, "reserved label"),
        (Transition("a", "bad\x07"), {"a": P}, "control character in label"),
        (Transition("a", "  "), {"a": P}, "empty label"),
        (PartialOrder("po", ()), {}, "operator without children"),
        (PartialOrder("po", (act("a"),), frozenset({(0, 3)})), {"a": P}, "index out of range"),
        (PartialOrder("po", (act("a"),), frozenset({(0, 0)})), {"a": P}, "self-edge in partial order"),
        (ChoiceGraph("x", (act("a"),), frozenset({(SOURCE, 0), (0, SINK), (0, SOURCE)})), {"a": P}, "edge into source"),
        (ChoiceGraph("x", (act("a"),), frozenset({(SOURCE, 0), (0, SINK), (SINK, 0)})), {"a": P}, "edge out of sink"),
        (ChoiceGraph("x", (act("a"), act("b")), frozenset({(SOURCE, 0), (0, SINK)})), {"a": P, "b": P}, "node not on source-sink path"),
        (act("a"), {"a": P, "zz": P}, "assignment for unknown transition"),
    ],
)
def test_each_rule_fires(root, assignment, rule):
    assert rule in rules(Process("p", root, assignment))


def test_skip_edge_is_allowed():
    x = ChoiceGraph("x", (act("a"),), frozenset({(SOURCE, 0), (0, SINK), (SOURCE, SINK)}))
    assert validate_model(Process("p", x, {"a": P})).ok


def test_cycles_in_choice_graphs_are_allowed():
    x = ChoiceGraph("x", (act("a"), act("b")), frozenset({(SOURCE, 0), (0, 1), (1, 0), (0, SINK)}))
    assert validate_model(Process("p", x, {"a": P, "b": P})).ok


def test_violations_are_found_at_any_depth():
    inner = PartialOrder("inner", (act("b"), act("c")), frozenset({(0, 1), (1, 0)}))
    outer = ChoiceGraph("x", (act("a"), inner), frozenset({(SOURCE, 0), (0, 1), (1, SINK)}))
    assert "cycle in order relation" in rules(Process("p", outer, {"a": P, "b": P, "c": P}))


def test_report_json_shape():
    report = validate_model(Process("p", act("a"), {}))
    data = report.to_json()
    assert data["ok"] is False
    assert data["violations"][0]["rule"] == "assignment not total"


@given(processes())
def test_generated_models_are_valid(process):
    assert validate_model(process).ok
    assert depth(process.root) <= 3
    assert len(process.visible()) <= 6


def test_iter_nodes_is_preorder():
    po = PartialOrder("po", (act("a"), ChoiceGraph("x", (act("b"),), frozenset({(SOURCE, 0), (0, SINK)}))))
    assert [n.id for n in iter_nodes(po)] == ["po", "a", "x", "b"]


# --- order relations --------------------------------------------------------


def test_reduction_examples():
    assert transitive_reduction({(1, 2), (2, 3), (1, 3)}) == {(1, 2), (2, 3)}
    assert transitive_reduction(set()) == set()


def test_closure_examples():
    assert transitive_closure({(1, 2), (2, 3)}) == {(1, 2), (2, 3), (1, 3)}
    assert transitive_closure(set()) == set()


def test_cycle_is_named():
    with pytest.raises(CycleError) as info:
        transitive_reduction({(0, 1), (1, 2), (2, 0), (2, 3)})
    cycle = info.value.cycle
    assert cycle[0] == cycle[-1]
    for u, v in zip(cycle, cycle[1:]):
        assert (u, v) in {(0, 1), (1, 2), (2, 0)}


def test_find_cycle_none_on_dag():
    assert find_cycle({(0, 1), (1, 2), (0, 2)}) is None


@given(dags())
def test_reduction_matches_networkx(dag):
    n, edges = dag
    g = nx.DiGraph(edges)
    g.add_nodes_from(range(n))
    assert transitive_reduction(edges) == set(nx.transitive_reduction(g).edges)


@given(dags())
def test_reduction_matches_definition(dag):
    n, edges = dag
    closure = transitive_closure(edges)
    expected = {
        (x, y)
        for x, y in closure
        if not any((x, z) in closure and (z, y) in closure for z in range(n))
    }
    assert transitive_reduction(edges) == expected


@given(dags())
def test_closure_is_reachability(dag):
    n, edges = dag
    g = nx.DiGraph(edges)
    g.add_nodes_from(range(n))
    expected = {(x, y) for x, y in itertools.permutations(range(n), 2) if nx.has_path(g, x, y)}
    assert transitive_closure(edges) == expected


@given(dags())
def test_closure_of_reduction_is_closure(dag):
    _, edges = dag
    assert transitive_closure(transitive_reduction(edges)) == transitive_closure(edges)
