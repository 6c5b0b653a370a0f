"""BPMN 2.0 XML (model + diagram interchange) writer and structural checker."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from collections import Counter, defaultdict

from .layout import Diagram
from .model import ValidationReport
from .transform import Kind, Skeleton, flow_id, message_flow_id

BPMN = "http://www.omg.org/spec/BPMN/20100524/MODEL"
BPMNDI = "http://www.omg.org/spec/BPMN/20100524/DI"
DC = "http://www.omg.org/spec/DD/20100524/DC"
DI = "http://www.omg.org/spec/DD/20100524/DI"

for _prefix, _uri in (("bpmn", BPMN), ("bpmndi", BPMNDI), ("dc", DC), ("di", DI)):
    ET.register_namespace(_prefix, _uri)

TAGS = {
    Kind.TASK: "task",
    Kind.START: "startEvent",
    Kind.END: "endEvent",
    Kind.AND: "parallelGateway",
    Kind.XOR: "exclusiveGateway",
    Kind.THROW: "intermediateThrowEvent",
    Kind.CATCH: "intermediateCatchEvent",
}


class SerializationError(ValueError):
    pass


class XmlStructureError(ValueError):
    """Malformed XML; ``position`` is the (line, column) reported by the parser."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        self.position = position
        super().__init__(message)


def _q(ns: str, tag: str) -> str:
    return f"{{{ns}}}{tag}"


class IdMap:
    """Maps internal ids to unique XML NCNames (``po1.2.task`` -> ``po1_2_task``)."""

    def __init__(self):
        self._out: dict[str, str] = {}
        self._used: set[str] = set()

    def __call__(self, raw: str) -> str:
        if raw in self._out:
            return self._out[raw]
        base = re.sub(r"[^\w-]", "_", raw.replace("->", "__").replace("=>", "__"))
        if not base or not (base[0].isalpha() or base[0] == "_"):
            base = "_" + base
        candidate, k = base, 1
        while candidate in self._used:
            k += 1
            candidate = f"{base}_{k}"
        self._used.add(candidate)
        self._out[raw] = candidate
        return candidate


def _num(v) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.2f}"


def _check_ids(skeleton: Skeleton, diagram: Diagram) -> None:
    nodes = skeleton.all_nodes()
    for nid in nodes:
        if nid not in diagram.nodes:
            raise SerializationError(f"node {nid!r} has no shape in the diagram")
    for nid in diagram.nodes:
        if nid not in nodes:
            raise SerializationError(f"diagram shape {nid!r} has no node in the skeleton")
    flows = {flow_id(u, v) for u, v in skeleton.all_flows()}
    flows |= {message_flow_id(u, v) for u, v in skeleton.message_flows}
    for fid in sorted(flows):
        if fid not in diagram.edges:
            raise SerializationError(f"flow {fid!r} has no edge in the diagram")
    for fid in diagram.edges:
        if fid not in flows:
            raise SerializationError(f"diagram edge {fid!r} has no flow in the skeleton")
    if set(diagram.pools) != set(skeleton.pools):
        raise SerializationError(f"pool mismatch: {sorted(set(diagram.pools) ^ set(skeleton.pools))}")
    for pool in skeleton.pools:
        missing = set(skeleton.lanes[pool]) ^ set(diagram.lanes.get(pool, {}))
        if missing:
            raise SerializationError(f"lane mismatch in pool {pool!r}: {sorted(missing)}")


def serialize(skeleton: Skeleton, diagram: Diagram) -> str:
    """Render one collaboration with a process per pool, plus its diagram."""
    _check_ids(skeleton, diagram)
    ids = IdMap()
    for fixed in ("Definitions", "Collaboration", "BPMNDiagram", "BPMNPlane"):
        ids(fixed)
    nodes = skeleton.all_nodes()
    seq_flows = {p: sorted(skeleton.flows[p]) for p in skeleton.pools}
    messages = sorted(skeleton.message_flows)

    root = ET.Element(
        _q(BPMN, "definitions"),
        {"id": "Definitions", "targetNamespace": "urn:powl2bpmn", "exporter": "powl2bpmn"},
    )
    message_ids = {}
    for k, (u, v) in enumerate(messages, start=1):
        names = [n for n in (nodes[u].name, nodes[v].name) if n]
        attrs = {"id": ids(f"Message_{k}")}
        if names:
            attrs["name"] = " ".join(names)
        ET.SubElement(root, _q(BPMN, "message"), attrs)
        message_ids[(u, v)] = attrs["id"]
    throws = {u: message_ids[(u, v)] for u, v in messages}
    catches = {v: message_ids[(u, v)] for u, v in messages}

    collab = ET.SubElement(root, _q(BPMN, "collaboration"), {"id": "Collaboration"})
    pool_order = list(diagram.pools)
    participant, process_id = {}, {}
    for k, pool in enumerate(pool_order, start=1):
        participant[pool] = ids(f"Participant_{k}")
        process_id[pool] = ids(f"Process_{k}")
        ET.SubElement(
            collab,
            _q(BPMN, "participant"),
            {"id": participant[pool], "name": pool, "processRef": process_id[pool]},
        )
    for u, v in messages:
        ET.SubElement(
            collab,
            _q(BPMN, "messageFlow"),
            {
                "id": ids(message_flow_id(u, v)),
                "sourceRef": ids(u),
                "targetRef": ids(v),
                "messageRef": message_ids[(u, v)],
            },
        )

    incoming, outgoing = defaultdict(list), defaultdict(list)
    for pool in pool_order:
        for u, v in seq_flows[pool]:
            outgoing[u].append(ids(flow_id(u, v)))
            incoming[v].append(ids(flow_id(u, v)))

    lane_ids: dict[tuple[str, str], str] = {}
    for k, pool in enumerate(pool_order, start=1):
        proc = ET.SubElement(
            root, _q(BPMN, "process"), {"id": process_id[pool], "isExecutable": "false"}
        )
        lane_set = ET.SubElement(proc, _q(BPMN, "laneSet"), {"id": ids(f"LaneSet_{k}")})
        for j, lane in enumerate(diagram.lanes[pool], start=1):
            lane_ids[(pool, lane)] = ids(f"Lane_{k}_{j}")
            el = ET.SubElement(lane_set, _q(BPMN, "lane"), {"id": lane_ids[(pool, lane)], "name": lane})
            for nid in sorted(skeleton.nodes[pool]):
                if skeleton.assignment[nid].lane == lane:
                    ET.SubElement(el, _q(BPMN, "flowNodeRef")).text = ids(nid)
        for nid in sorted(skeleton.nodes[pool]):
            node = nodes[nid]
            attrs = {"id": ids(nid)}
            label = node.label if node.kind is Kind.TASK else node.name
            if label:
                attrs["name"] = label
            el = ET.SubElement(proc, _q(BPMN, TAGS[node.kind]), attrs)
            for ref in incoming[nid]:
                ET.SubElement(el, _q(BPMN, "incoming")).text = ref
            for ref in outgoing[nid]:
                ET.SubElement(el, _q(BPMN, "outgoing")).text = ref
            if node.kind is Kind.THROW:
                ET.SubElement(
                    el,
                    _q(BPMN, "messageEventDefinition"),
                    {"id": ids(f"{nid}.def"), "messageRef": throws[nid]},
                )
            elif node.kind is Kind.CATCH:
                ET.SubElement(
                    el,
                    _q(BPMN, "messageEventDefinition"),
                    {"id": ids(f"{nid}.def"), "messageRef": catches[nid]},
                )
        for u, v in seq_flows[pool]:
            ET.SubElement(
                proc,
                _q(BPMN, "sequenceFlow"),
                {"id": ids(flow_id(u, v)), "sourceRef": ids(u), "targetRef": ids(v)},
            )

    bpmn_diagram = ET.SubElement(root, _q(BPMNDI, "BPMNDiagram"), {"id": "BPMNDiagram"})
    plane = ET.SubElement(
        bpmn_diagram, _q(BPMNDI, "BPMNPlane"), {"id": "BPMNPlane", "bpmnElement": "Collaboration"}
    )

    def shape(element: str, box, horizontal=False, marker=False):
        attrs = {"id": ids(f"{element}_di"), "bpmnElement": element}
        if horizontal:
            attrs["isHorizontal"] = "true"
        if marker:
            attrs["isMarkerVisible"] = "true"
        el = ET.SubElement(plane, _q(BPMNDI, "BPMNShape"), attrs)
        ET.SubElement(
            el,
            _q(DC, "Bounds"),
            {"x": _num(box.x), "y": _num(box.y), "width": _num(box.width), "height": _num(box.height)},
        )

    def edge(element: str, path):
        el = ET.SubElement(
            plane, _q(BPMNDI, "BPMNEdge"), {"id": ids(f"{element}_di"), "bpmnElement": element}
        )
        for x, y in path.waypoints:
            ET.SubElement(el, _q(DI, "waypoint"), {"x": _num(x), "y": _num(y)})

    for pool in pool_order:
        shape(participant[pool], diagram.pools[pool], horizontal=True)
        for lane, box in diagram.lanes[pool].items():
            shape(lane_ids[(pool, lane)], box, horizontal=True)
        for nid in sorted(skeleton.nodes[pool]):
            shape(ids(nid), diagram.nodes[nid], marker=nodes[nid].kind is Kind.XOR)
    for pool in pool_order:
        for u, v in seq_flows[pool]:
            edge(ids(flow_id(u, v)), diagram.edges[flow_id(u, v)])
    for u, v in messages:
        edge(ids(message_flow_id(u, v)), diagram.edges[message_flow_id(u, v)])

    ET.indent(root, "  ")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


# --------------------------------------------------------------------------- #
# structural checks

_NON_NODE_TAGS = {"sequenceFlow", "laneSet", "lane", "flowNodeRef", "incoming", "outgoing"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _is_flow_node(tag: str) -> bool:
    name = _local(tag)
    if name in _NON_NODE_TAGS:
        return False
    return name.endswith(("Task", "Event", "Gateway")) or name in ("task", "subProcess", "callActivity")


def check_structure(text: str) -> ValidationReport:
    """Check pool/lane/DI discipline of a BPMN document.

    Raises :class:`XmlStructureError` if the text is not well-formed XML.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlStructureError(f"malformed XML: {exc}", getattr(exc, "position", None)) from exc

    report = ValidationReport()
    if root.tag != _q(BPMN, "definitions"):
        report.add(_local(root.tag), "not a BPMN definitions document")
        return report

    node_process: dict[str, str] = {}
    elements: set[str] = set()  # everything that needs a DI counterpart
    for proc in root.iter(_q(BPMN, "process")):
        pid = proc.get("id", "")
        for child in proc:
            if _is_flow_node(child.tag):
                node_process[child.get("id", "")] = pid
                elements.add(child.get("id", ""))

    participants = {}
    for part in root.iter(_q(BPMN, "participant")):
        participants[part.get("id", "")] = part.get("processRef")
        elements.add(part.get("id", ""))
    participant_of_process = {proc: part for part, proc in participants.items() if proc}

    for proc in root.iter(_q(BPMN, "process")):
        pid = proc.get("id", "")
        for flow in proc.iter(_q(BPMN, "sequenceFlow")):
            fid = flow.get("id", "")
            elements.add(fid)
            ends = [flow.get("sourceRef"), flow.get("targetRef")]
            if any(e not in node_process for e in ends):
                report.add(fid, "dangling sequence flow reference", f"{ends}")
                continue
            if {node_process[e] for e in ends} != {pid}:
                report.add(fid, "cross-pool sequence flow", f"{ends[0]} -> {ends[1]}")

        lane_refs: Counter = Counter()
        for lane in proc.iter(_q(BPMN, "lane")):
            elements.add(lane.get("id", ""))
            for ref in lane.findall(_q(BPMN, "flowNodeRef")):
                target = (ref.text or "").strip()
                if node_process.get(target) != pid:
                    report.add(lane.get("id", ""), "dangling lane reference", target)
                else:
                    lane_refs[target] += 1
        for nid, owner in sorted(node_process.items()):
            if owner != pid:
                continue
            if lane_refs[nid] == 0:
                report.add(nid, "unassigned flow node", "not referenced by any lane")
            elif lane_refs[nid] > 1:
                report.add(nid, "flow node in several lanes")

    for flow in root.iter(_q(BPMN, "messageFlow")):
        fid = flow.get("id", "")
        elements.add(fid)
        owners = []
        for ref in (flow.get("sourceRef"), flow.get("targetRef")):
            if ref in participants:
                owners.append(ref)
            elif ref in node_process:
                owners.append(participant_of_process.get(node_process[ref]))
            else:
                owners.append(None)
        if None in owners:
            report.add(fid, "dangling message flow reference")
        elif owners[0] == owners[1]:
            report.add(fid, "message flow within one pool")

    drawn: Counter = Counter()
    for tag in ("BPMNShape", "BPMNEdge"):
        for el in root.iter(_q(BPMNDI, tag)):
            ref = el.get("bpmnElement", "")
            drawn[ref] += 1
            if ref not in elements:
                report.add(el.get("id", ""), "dangling DI shape", f"bpmnElement {ref!r} does not exist")
    for el in sorted(elements):
        if drawn[el] == 0:
            report.add(el, "missing DI", "element has no shape or edge")
        elif drawn[el] > 1:
            report.add(el, "duplicate DI")
    return report
