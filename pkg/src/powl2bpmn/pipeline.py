"""End-to-end compilation: model -> skeleton -> diagram -> BPMN XML."""

from __future__ import annotations

from dataclasses import dataclass

from .bpmn_xml import serialize
from .dsl import parse
from .layout import Diagram, layout
from .model import Process
from .transform import Fragment, Skeleton, build_skeleton


@dataclass(frozen=True)
class Compiled:
    process: Process
    fragment: Fragment  # pruned, before message insertion
    skeleton: Skeleton
    diagram: Diagram
    xml: str

    def stats(self) -> dict[str, int]:
        return self.skeleton.stats()


def compile_process(process: Process) -> Compiled:
    fragment, skeleton = build_skeleton(process)
    diagram = layout(skeleton)
    return Compiled(process, fragment, skeleton, diagram, serialize(skeleton, diagram))


def compile_text(text: str) -> Compiled:
    """Parse `.powl` source and compile it; raises DslError or LiftError."""
    return compile_process(parse(text))
