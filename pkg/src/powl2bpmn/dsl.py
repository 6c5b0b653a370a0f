"""Parser and printer for the `.powl` text format.

Grammar (whitespace-insensitive, `#` starts a line comment)::

    model   := "process" STRING "{" node "}"
    node    := act | tau | po | choice
    act     := "act" [ID] STRING "@" STRING "/" STRING
    tau     := "tau" [ID]
    po      := "po" ID "{" node+ ["order" "{" (ID "->" ID)* "}"] "}"
    choice  := "choice" ID "{" node+ "edges" "{" edge+ "}" "}"
    edge    := (ID | "start") "->" (ID | "end")

Transition ids may be omitted; they are then derived from the label
(``register_claim_1``) or numbered (``tau_1``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    SINK,
    SOURCE,
    ChoiceGraph,
    Node,
    PartialOrder,
    Process,
    ResourceContext,
    Transition,
    has_control_chars,
    iter_nodes,
    validate_model,
)

KEYWORDS = frozenset({"process", "act", "tau", "po", "choice", "order", "edges", "start", "end"})
NODE_KEYWORDS = ("act", "tau", "po", "choice")
_SYNC = frozenset({*NODE_KEYWORDS, "order", "edges", "}"})
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


@dataclass(frozen=True, order=True)
class SourceSpan:
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        text = f"{self.span}: {self.message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        return text


class DslError(Exception):
    """Raised by :func:`parse`; carries every collected :class:`ParseError`."""

    def __init__(self, errors: list[ParseError]):
        self.errors = sorted(set(errors), key=lambda e: (e.span, e.message))
        super().__init__("\n".join(str(e) for e in self.errors))


# --------------------------------------------------------------------------- #
# lexer


@dataclass(frozen=True)
class Token:
    kind: str  # STRING, IDENT, KEYWORD, "{", "}", "@", "/", "->", EOF
    value: str
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return f"string {quote(self.value)}"
        return repr(self.value)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>")
  | (?P<arrow>->)
  | (?P<punct>[{}@/])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)


def _lex_string(text: str, pos: int, line: int, col: int, errors: list[ParseError]):
    """Scan a string literal starting at the opening quote. Returns (value, end_pos)."""
    out = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            return "".join(out), i + 1
        if ch == "\n":
            break
        if ch == "\\":
            nxt = text[i + 1] if i + 1 < len(text) else ""
            if nxt in ('"', "\\"):
                out.append(nxt)
                i += 2
                continue
            span = SourceSpan(line, col + i - pos, line, col + i - pos + 1)
            errors.append(ParseError(span, f"invalid escape sequence '\\{nxt}'", ('\\"', "\\\\")))
            i += 2
            continue
        if has_control_chars(ch):
            span = SourceSpan(line, col + i - pos, line, col + i - pos)
            errors.append(ParseError(span, "control character in string"))
        else:
            out.append(ch)
        i += 1
    span = SourceSpan(line, col, line, col + i - pos)
    errors.append(ParseError(span, "unterminated string", ('"',)))
    return "".join(out), i


def tokenize(text: str, errors: list[ParseError]) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        col = pos - line_start + 1
        if text[pos] == '"':
            value, end = _lex_string(text, pos, line, col, errors)
            tokens.append(Token("STRING", value, SourceSpan(line, col, line, col + end - pos - 1)))
            pos = end
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(line, col, line, col)
            errors.append(ParseError(span, f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        value = m.group()
        kind = m.lastgroup
        span = SourceSpan(line, col, line, col + len(value) - 1)
        if kind == "arrow":
            tokens.append(Token("->", value, span))
        elif kind == "punct":
            tokens.append(Token(value, value, span))
        elif kind == "ident":
            tokens.append(Token("KEYWORD" if value in KEYWORDS else "IDENT", value, span))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    col = pos - line_start + 1
    tokens.append(Token("EOF", "", SourceSpan(line, col, line, col)))
    return tokens


# --------------------------------------------------------------------------- #
# parser (concrete syntax -> raw tree)


@dataclass
class _Raw:
    kind: str  # act | tau | po | choice
    id: str | None
    span: SourceSpan
    label: str | None = None
    pool: str | None = None
    lane: str | None = None
    children: list["_Raw"] = field(default_factory=list)
    pairs: list[tuple[Token, Token]] = field(default_factory=list)


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token], errors: list[ParseError]):
        self.tokens = tokens
        self.pos = 0
        self.errors = errors

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, *values: str) -> bool:
        tok = self.tok
        return tok.value in values and tok.kind in ("KEYWORD", "{", "}", "@", "/", "->")

    def fail(self, expected: tuple[str, ...], message: str | None = None):
        tok = self.tok
        msg = message or f"unexpected {tok.describe()}"
        self.errors.append(ParseError(tok.span, msg, expected))
        raise _Abort

    def expect(self, value: str, message: str | None = None) -> Token:
        if not self.at(value):
            self.fail((repr(value),), message)
        return self.advance()

    def expect_kind(self, kind: str, what: str, message: str | None = None) -> Token:
        if self.tok.kind != kind:
            if message is None and self.tok.kind == "KEYWORD" and kind == "IDENT":
                message = f"keyword {self.tok.value!r} cannot be used as an identifier"
            self.fail((what,), message)
        return self.advance()

    def parse_program(self) -> tuple[str | None, _Raw | None]:
        name = root = None
        try:
            self.expect("process")
            name = self.expect_kind("STRING", "process name string").value
            self.expect("{")
        except _Abort:
            return None, None
        if self.at("}"):
            self.fail_soft(("node",), "process body is empty")
        else:
            root = self.parse_node_recovering()
            while not self.at("}") and self.tok.kind != "EOF":
                if self.tok.value in NODE_KEYWORDS:
                    self.fail_soft(("'}'",), "process body must contain exactly one root node")
                    self.parse_node_recovering()
                else:
                    self.fail_soft(("'}'",))
                    self.advance()
        try:
            self.expect("}")
            if self.tok.kind != "EOF":
                self.fail(("end of input",))
        except _Abort:
            pass
        return name, root

    def fail_soft(self, expected: tuple[str, ...], message: str | None = None) -> None:
        try:
            self.fail(expected, message)
        except _Abort:
            pass

    def parse_node_recovering(self) -> _Raw | None:
        start, start_line = self.pos, self.tok.span.start_line
        try:
            return self.parse_node()
        except _Abort:
            self._recover(start, start_line)
            return None

    def _recover(self, start: int, start_line: int) -> None:
        depth = sum(
            (t.kind == "{") - (t.kind == "}") for t in self.tokens[start : self.pos]
        )
        while self.tok.kind != "EOF":
            tok = self.tok
            if depth <= 0 and tok.value in _SYNC and tok.kind != "STRING" and tok.span.start_line > start_line:
                return
            if tok.kind == "{":
                depth += 1
            elif tok.kind == "}":
                if depth <= 0:
                    return
                depth -= 1
            self.advance()

    def parse_node(self) -> _Raw:
        tok = self.tok
        if not self.at(*NODE_KEYWORDS):
            self.fail(tuple(repr(k) for k in NODE_KEYWORDS))
        kw = self.advance()
        if kw.value == "act":
            node_id = self.advance().value if self.tok.kind == "IDENT" else None
            label = self.expect_kind("STRING", "activity label string").value
            self.expect("@", "missing pool/lane: every activity needs '@ \"pool\" / \"lane\"'")
            pool = self.expect_kind("STRING", "pool name string")
            self.expect("/", "missing lane: expected '/' followed by the lane name")
            lane = self.expect_kind("STRING", "lane name string")
            span = SourceSpan(tok.span.start_line, tok.span.start_col, lane.span.end_line, lane.span.end_col)
            return _Raw("act", node_id, span, label=label, pool=pool.value, lane=lane.value)
        if kw.value == "tau":
            node_id = None
            end = kw.span
            if self.tok.kind == "IDENT":
                ident = self.advance()
                node_id, end = ident.value, ident.span
            span = SourceSpan(tok.span.start_line, tok.span.start_col, end.end_line, end.end_col)
            return _Raw("tau", node_id, span)

        node_id = self.expect_kind("IDENT", "identifier").value
        self.expect("{")
        raw = _Raw(kw.value, node_id, tok.span)
        pair_kw = "order" if kw.value == "po" else "edges"
        while not self.at("}", pair_kw) and self.tok.kind != "EOF":
            child = self.parse_node_recovering()
            if child is not None:
                raw.children.append(child)
        if not raw.children:
            self.fail_soft(tuple(repr(k) for k in NODE_KEYWORDS), f"{kw.value} {node_id!r} has no children")
        if self.at(pair_kw):
            self.advance()
            self.expect("{")
            while not self.at("}") and self.tok.kind != "EOF":
                try:
                    raw.pairs.append(self.parse_pair(kw.value))
                except _Abort:
                    line = self.tok.span.start_line
                    while self.tok.kind not in ("}", "EOF") and self.tok.span.start_line == line:
                        self.advance()
            self.expect("}")
        elif kw.value == "choice":
            self.fail(("'edges'",), f"choice {node_id!r} is missing its edges block")
        close = self.expect("}")
        raw.span = SourceSpan(tok.span.start_line, tok.span.start_col, close.span.end_line, close.span.end_col)
        return raw

    def parse_pair(self, kind: str) -> tuple[Token, Token]:
        if kind == "choice" and self.at("start"):
            src = self.advance()
        else:
            expected = "identifier or 'start'" if kind == "choice" else "identifier"
            src = self.expect_kind("IDENT", expected)
        self.expect("->")
        if kind == "choice" and self.at("end"):
            dst = self.advance()
        else:
            expected = "identifier or 'end'" if kind == "choice" else "identifier"
            dst = self.expect_kind("IDENT", expected)
        return src, dst


# --------------------------------------------------------------------------- #
# resolution (raw tree -> model)


def _slug(label: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")
    if not slug or not slug[0].isalpha():
        slug = "t_" + slug if slug else "t"
    return slug


def _walk(raw: _Raw):
    yield raw
    for child in raw.children:
        yield from _walk(child)


def _assign_ids(root: _Raw) -> None:
    taken = {r.id for r in _walk(root) if r.id is not None}
    counters: dict[str, int] = {}
    for r in _walk(root):
        if r.id is not None:
            continue
        base = "tau" if r.kind == "tau" else _slug(r.label or "")
        n = counters.get(base, 0)
        while True:
            n += 1
            candidate = f"{base}_{n}"
            if candidate not in taken:
                break
        counters[base] = n
        taken.add(candidate)
        r.id = candidate


class _Resolver:
    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        self.spans: dict[str, SourceSpan] = {}
        self.assignment: dict[str, ResourceContext] = {}
        self.bad_context: set[str] = set()

    def error(self, span: SourceSpan, message: str) -> None:
        self.errors.append(ParseError(span, message))

    def build(self, raw: _Raw) -> Node:
        if raw.id in self.spans:
            self.error(raw.span, f"duplicate id {raw.id!r} (first defined at {self.spans[raw.id]})")
        else:
            self.spans[raw.id] = raw.span
        if raw.kind == "tau":
            return Transition(raw.id, None)
        if raw.kind == "act":
            for what, value in (("pool", raw.pool), ("lane", raw.lane)):
                if not value.strip():
                    self.error(raw.span, f"missing {what} for activity {raw.id!r}")
                    self.bad_context.add(raw.id)
            if raw.id not in self.bad_context:
                self.assignment[raw.id] = ResourceContext(raw.pool, raw.lane)
            return Transition(raw.id, raw.label)

        children = tuple(self.build(c) for c in raw.children)
        index: dict[str, int] = {}
        for i, c in enumerate(raw.children):
            index.setdefault(c.id, i)
        pairs = set()
        for src, dst in raw.pairs:
            ends = []
            for tok in (src, dst):
                if tok.value == "start":
                    ends.append(SOURCE)
                elif tok.value == "end":
                    ends.append(SINK)
                elif tok.value in index:
                    ends.append(index[tok.value])
                else:
                    self.error(tok.span, self._unknown_ref(tok.value, raw))
            if len(ends) != 2:
                continue
            if raw.kind == "po" and ends[0] == ends[1]:
                self.error(src.span, f"self-edge in partial order: {src.value} -> {dst.value}")
                continue
            pairs.add(tuple(ends))
        if raw.kind == "po":
            return PartialOrder(raw.id, children, frozenset(pairs))
        return ChoiceGraph(raw.id, children, frozenset(pairs))

    @staticmethod
    def _unknown_ref(name: str, raw: _Raw) -> str:
        block = "order" if raw.kind == "po" else "edges"
        nested = any(r.id == name for c in raw.children for r in _walk(c))
        if nested:
            return f"{name!r} is not a direct child of {raw.id!r} in {block} block"
        return f"unknown child reference {name!r} in {block} block of {raw.id!r}"


def parse(text: str) -> Process:
    """Parse `.powl` source into a validated :class:`Process`.

    Raises :class:`DslError` listing every lexical, syntactic and semantic
    problem found; parsing continues past errors where it can.
    """
    errors: list[ParseError] = []
    tokens = tokenize(text, errors)
    name, root = _Parser(tokens, errors).parse_program()
    if root is None:
        raise DslError(errors or [ParseError(tokens[-1].span, "no model found")])
    _assign_ids(root)
    resolver = _Resolver(errors)
    tree = resolver.build(root)
    process = Process(name or "", tree, resolver.assignment)
    if errors:
        raise DslError(errors)
    for v in validate_model(process).violations:
        if v.rule == "assignment not total" and v.element in resolver.bad_context:
            continue
        span = resolver.spans.get(v.element, tokens[0].span)
        msg = f"{v.rule}: {v.message}" if v.message else v.rule
        errors.append(ParseError(span, f"{msg} [{v.element}]"))
    if errors:
        raise DslError(errors)
    return process


# --------------------------------------------------------------------------- #
# printer


def quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _pair_key(pair: tuple[int, int]) -> tuple[int, int]:
    # start first, end last, children in declaration order
    rank = lambda x: -1 if x == SOURCE else (10**9 if x == SINK else x)  # noqa: E731
    return rank(pair[0]), rank(pair[1])


def _emit(node: Node, process: Process, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(node, Transition):
        if node.silent:
            out.append(f"{pad}tau {node.id}")
        else:
            ctx = process.assignment[node.id]
            out.append(f"{pad}act {node.id} {quote(node.label)} @ {quote(ctx.pool)} / {quote(ctx.lane)}")
        return
    kw = "po" if isinstance(node, PartialOrder) else "choice"
    out.append(f"{pad}{kw} {node.id} {{")
    for child in node.children:
        _emit(child, process, indent + 1, out)
    pairs = node.order if isinstance(node, PartialOrder) else node.edges
    if pairs or kw == "choice":
        out.append(f"{pad}  {'order' if kw == 'po' else 'edges'} {{")
        for a, b in sorted(pairs, key=_pair_key):
            left = "start" if a == SOURCE else node.children[a].id
            right = "end" if b == SINK else node.children[b].id
            out.append(f"{pad}    {left} -> {right}")
        out.append(f"{pad}  }}")
    out.append(f"{pad}}}")


def print_model(process: Process) -> str:
    """Render a model as canonical `.powl` text; parse(print_model(m)) == m."""
    out = [f"process {quote(process.name)} {{"]
    _emit(process.root, process, 1, out)
    out.append("}")
    return "\n".join(out) + "\n"


def is_identifier(text: str) -> bool:
    return bool(IDENT_RE.fullmatch(text)) and text not in KEYWORDS


def all_ids(process: Process) -> list[str]:
    return [n.id for n in iter_nodes(process.root)]
