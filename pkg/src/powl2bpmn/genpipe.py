"""Text-to-model generation with a parse/validate/repair feedback loop.

A provider turns a prompt into text. The loop extracts the first fenced
code block, parses and compiles it, and on failure feeds the errors back
into the next prompt until the iteration cap is reached.
"""

from __future__ import annotations

import json
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

from .dsl import DslError, parse
from .model import Process
from .transform import LiftError, build_skeleton

TRANSPORT_RETRIES = 2

GRAMMAR = """\
model   := "process" STRING "{" node "}"
node    := act | tau | po | choice
act     := "act" [ID] STRING "@" STRING "/" STRING      # label @ pool / lane
tau     := "tau" [ID]                                  # silent step
po      := "po" ID "{" node+ ["order" "{" (ID "->" ID)* "}"] "}"
choice  := "choice" ID "{" node+ "edges" "{" edge+ "}" "}"
edge    := (ID | "start") "->" (ID | "end")"""

FEW_SHOT = (
    (
        "A clerk in the back office of a library checks a returned book. "
        "If it is damaged it is sent to repair, otherwise it goes back on the shelf.",
        """\
process "Book Return" {
  po main {
    act check "Check book" @ "Library" / "Back Office"
    choice route {
      act repair "Send to repair" @ "Library" / "Back Office"
      act shelve "Put back on shelf" @ "Library" / "Front Desk"
      edges {
        start -> repair
        start -> shelve
        repair -> end
        shelve -> end
      }
    }
    order {
      check -> route
    }
  }
}""",
    ),
    (
        "A customer places an order with a shop. The shop's sales team confirms the order "
        "while the warehouse packs it; afterwards the warehouse ships it and the customer "
        "receives the parcel.",
        """\
process "Order Handling" {
  po main {
    act place "Place order" @ "Customer" / "Buyer"
    act confirm "Confirm order" @ "Shop" / "Sales"
    act pack "Pack goods" @ "Shop" / "Warehouse"
    act ship "Ship parcel" @ "Shop" / "Warehouse"
    act receive "Receive parcel" @ "Customer" / "Buyer"
    order {
      place -> confirm
      place -> pack
      confirm -> ship
      pack -> ship
      ship -> receive
    }
  }
}""",
    ),
)


class ConfigurationError(ValueError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass
class ProviderConfig:
    endpoint_url: str
    model_name: str
    api_key_ref: str
    timeout: float = 60.0
    max_iterations: int = 5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if self.timeout <= 0:
            raise ConfigurationError("timeout must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "ProviderConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read provider config {path}: {exc}") from exc
        keys = {
            "endpointUrl": "endpoint_url",
            "modelName": "model_name",
            "apiKeyRef": "api_key_ref",
            "maxIterations": "max_iterations",
        }
        kwargs = {keys.get(k, k): v for k, v in data.items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigurationError(f"bad provider config {path}: {exc}") from exc


class Provider(Protocol):
    def complete(self, prompt: str) -> str: ...


class MockProvider:
    """Replays canned responses in order; the last one repeats when exhausted."""

    def __init__(self, responses: list[str]):
        if not responses:
            raise ConfigurationError("mock transcript has no responses")
        self.responses = list(responses)
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "MockProvider":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read transcript {path}: {exc}") from exc
        if isinstance(data, dict):
            data = data.get("responses")
        if not isinstance(data, list) or not all(isinstance(r, str) for r in data):
            raise ConfigurationError(f"transcript {path} must be a list of strings")
        return cls(data)

    def complete(self, prompt: str) -> str:
        response = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        return response


class HttpProvider:
    """OpenAI-style chat completion endpoint with a bearer token."""

    def __init__(self, config: ProviderConfig):
        key = os.environ.get(config.api_key_ref)
        if not key:
            raise ConfigurationError(
                f"credential missing: environment variable {config.api_key_ref!r} is not set"
            )
        self.config = config
        self._key = key

    def complete(self, prompt: str) -> str:
        body = json.dumps(
            {"model": self.config.model_name, "messages": [{"role": "user", "content": prompt}]}
        ).encode()
        request = urllib.request.Request(
            self.config.endpoint_url,
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self._key}"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
            raise TransportError(str(exc)) from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc


def build_prompt(
    description: str, prior_errors: list[str] | None = None, prior_output: str | None = None
) -> str:
    if not description.strip():
        raise ValueError("description must not be empty")
    parts = [
        "Translate the process description into a model written in the language below.",
        "Answer with exactly one fenced code block containing the model.",
        "",
        "Grammar:",
        "```",
        GRAMMAR,
        "```",
        "",
        "Every activity must carry a pool and a lane: act \"Label\" @ \"Pool\" / \"Lane\".",
        "Use one pool per organisation and one lane per role inside it.",
        "Use po for steps that may run concurrently (order lists the precedences) and "
        "choice for exclusive paths and loops.",
        "",
    ]
    for k, (text, program) in enumerate(FEW_SHOT, start=1):
        parts += [f"Example {k}.", f"Description: {text}", "```", program, "```", ""]
    if prior_errors:
        parts += ["Your previous answer was:", "```", prior_output or "", "```", ""]
        parts.append("It was rejected with these errors:")
        parts += [f"- {e}" for e in prior_errors]
        parts += ["", "Fix every error and return the complete corrected model.", ""]
    parts += ["Description:", description.strip()]
    return "\n".join(parts) + "\n"


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code(response: str) -> str | None:
    m = _FENCE.search(response)
    return m.group(1) if m else None


def check_program(code: str) -> tuple[Process | None, list[str]]:
    """Parse, validate and compile; return the model or the error list."""
    try:
        process = parse(code)
    except DslError as exc:
        return None, [str(e) for e in exc.errors]
    try:
        build_skeleton(process)
    except LiftError as exc:
        return None, [f"compile error: {exc}"]
    return process, []


@dataclass
class IterationRecord:
    prompt: str
    response: str | None
    errors: list[str]
    elapsed: float
    transport_errors: list[str] = field(default_factory=list)


@dataclass
class GenerationLog:
    description: str
    records: list[IterationRecord] = field(default_factory=list)
    success: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self) -> dict:
        return {
            "description": self.description,
            "success": self.success,
            "iterations": len(self.records),
            "records": [asdict(r) for r in self.records],
        }


class GenerationFailed(Exception):
    def __init__(self, log: GenerationLog):
        self.log = log
        last = log.records[-1].errors if log.records else []
        super().__init__(f"no valid model after {len(log)} iterations; last errors: {last}")


def generate(
    description: str, provider: Provider, max_iterations: int = 5, clock=time.perf_counter
) -> tuple[Process, GenerationLog]:
    if max_iterations < 1:
        raise ConfigurationError("max_iterations must be at least 1")
    log = GenerationLog(description)
    errors: list[str] | None = None
    previous: str | None = None
    for _ in range(max_iterations):
        prompt = build_prompt(description, errors, previous)
        started = clock()
        response, transport = None, []
        for _attempt in range(1 + TRANSPORT_RETRIES):
            try:
                response = provider.complete(prompt)
                break
            except TransportError as exc:
                transport.append(str(exc))
        if response is None:
            errors = [f"transport error: {transport[-1]}"]
            previous = None
        else:
            code = extract_code(response)
            if code is None:
                process, errors = None, ["no fenced code block found in the response"]
                previous = response
            else:
                process, errors = check_program(code)
                previous = code
            if process is not None:
                log.records.append(IterationRecord(prompt, response, [], clock() - started, transport))
                log.success = True
                return process, log
        log.records.append(IterationRecord(prompt, response, list(errors), clock() - started, transport))
    raise GenerationFailed(log)
