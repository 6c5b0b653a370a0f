"""Compile POWL process models with resource assignments into BPMN collaborations."""

from .dsl import DslError, parse, print_model
from .model import ChoiceGraph, PartialOrder, Process, ResourceContext, Transition, validate_model
from .pipeline import Compiled, compile_process, compile_text

__all__ = [
    "ChoiceGraph",
    "Compiled",
    "DslError",
    "PartialOrder",
    "Process",
    "ResourceContext",
    "Transition",
    "compile_process",
    "compile_text",
    "parse",
    "print_model",
    "validate_model",
]
