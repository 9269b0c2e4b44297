"""Reader and canonical writer for the ``.dartwin`` text format.

Example::

    dartwin "Thermal Comfort" {
      goal WarmComfort {
        title "Warm Comfort"
        poi room_temp : celsius
        constraint "always(room_temp >= 18 and room_temp <= 25)"
      }
      system Thermostat "Thermostat" {
        in room_temp : celsius [monitoring]
        out heater : on_off [control]
        dt ThermostatLogic "Thermostat Logic" {
          in room_temp : celsius [monitoring]
          out heater : on_off [control]
          behavior "thermostat"
          satisfies WarmComfort
        }
        flow boundary.room_temp -> ThermostatLogic.room_temp
        flow ThermostatLogic.heater -> boundary.heater
      }
    }

Keywords are contextual, so ``out`` or ``title`` may still be used as names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from . import model as m
from .constraints import ConstraintError, check_units, parse_constraint

BOUNDARY = "boundary"
ROLES = tuple(r.value for r in m.Role)
RELKINDS = tuple(k.value for k in m.EdgeKind)
COMBINATORS = tuple(c.value for c in m.Combinator)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" or "warning"
    message: str
    span: SourceSpan
    code: str = "SYNTAX"

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


class ParseError(Exception):
    """Raised by :func:`load_model` when the text does not yield a Model."""

    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


# -- lexer -------------------------------------------------------------------

_LEX = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r'|(?P<string>"(?:[^"\\\n]|\\.)*")'
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<arrow>->)|(?P<punct>[{}:\[\].])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # word, string, punct, eof
    text: str
    line: int
    column: int
    value: str = ""

    @property
    def length(self) -> int:
        return max(1, len(self.text))


def _unescape(raw: str) -> str:
    return re.sub(r"\\(.)", lambda mt: {"n": "\n", "t": "\t"}.get(mt.group(1), mt.group(1)), raw[1:-1])


def _escape(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def tokenize(text: str, file: str = "<string>") -> list[Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        mt = _LEX.match(text, pos)
        if mt is None:
            raise _SyntaxAt(SourceSpan(file, line, col, 1), f"unexpected character {text[pos]!r}")
        kind = mt.lastgroup
        chunk = mt.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind in ("word", "string", "punct", "arrow"):
                value = _unescape(chunk) if kind == "string" else chunk
                tokens.append(Token("punct" if kind == "arrow" else kind, chunk, line, col, value))
            col += len(chunk)
        pos = mt.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _SyntaxAt(Exception):
    def __init__(self, span: SourceSpan, message: str):
        super().__init__(message)
        self.span = span
        self.message = message


# -- parser ------------------------------------------------------------------


@dataclass
class _Spans:
    by_key: dict[str, SourceSpan] = field(default_factory=dict)

    def put(self, key: str, span: SourceSpan) -> None:
        self.by_key.setdefault(key, span)


@dataclass
class Fragment:
    """A partial model: new goals and one system body whose references may
    point into another model. Transformations consume these."""

    name: str
    goals: list[m.Goal]
    goal_edges: list[m.GoalEdge]
    root: m.TwinSystem
    links: list[m.DtGoalLink]


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0
        self.diags: list[ParseDiagnostic] = []
        self.spans = _Spans()
        self.declared: dict[str, SourceSpan] = {}
        self.constraint_text: dict[str, tuple[str, Token]] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.column, tok.length)

    def fail(self, tok: Token, message: str):
        raise _SyntaxAt(self.span(tok), message)

    def at_word(self, *words: str) -> bool:
        return self.tok.kind == "word" and self.tok.text in words

    def word(self, *allowed: str) -> Token:
        tok = self.tok
        if tok.kind != "word" or (allowed and tok.text not in allowed):
            want = " or ".join(repr(w) for w in allowed) if allowed else "an identifier"
            self.fail(tok, f"expected {want}, found {_describe(tok)}")
        self.i += 1
        return tok

    def string(self) -> Token:
        tok = self.tok
        if tok.kind != "string":
            self.fail(tok, f"expected a string, found {_describe(tok)}")
        self.i += 1
        return tok

    def punct(self, text: str) -> Token:
        tok = self.tok
        if tok.kind != "punct" or tok.text != text:
            self.fail(tok, f"expected {text!r}, found {_describe(tok)}")
        self.i += 1
        return tok

    def error(self, tok_or_span, message: str, code: str) -> None:
        span = tok_or_span if isinstance(tok_or_span, SourceSpan) else self.span(tok_or_span)
        self.diags.append(ParseDiagnostic("error", message, span, code))

    def declare(self, element_id: str, tok: Token) -> None:
        if element_id in self.declared:
            self.error(tok, f"duplicate identifier {element_id!r}", "DUP-ID")
        else:
            self.declared[element_id] = self.span(tok)
        self.spans.put(element_id, self.span(tok))

    # grammar
    def model(self):
        self.word("dartwin")
        name = self.string().value
        extends = None
        if self.at_word("extends"):
            self.i += 1
            extends = self.string().value
        self.punct("{")
        goals, edges = [], []
        while self.at_word("goal", "relation"):
            if self.at_word("goal"):
                goals.append(self.goal())
            else:
                edges.append(self.relation())
        if not self.at_word("system", "at"):
            self.fail(self.tok, f"expected 'goal', 'relation' or 'system', found {_describe(self.tok)}")
        links: list[tuple[m.DtGoalLink, Token]] = []
        root = self.system(links, root=True)
        self.punct("}")
        if self.tok.kind != "eof":
            self.fail(self.tok, f"expected end of file, found {_describe(self.tok)}")
        return name, extends, goals, edges, root, links

    def goal(self) -> m.Goal:
        self.word("goal")
        gid_tok = self.word()
        gid = gid_tok.text
        self.declare(gid, gid_tok)
        self.punct("{")
        title = gid
        pois = []
        constraint = None
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            if self.at_word("title"):
                self.i += 1
                title = self.string().value
            elif self.at_word("poi"):
                self.i += 1
                name_tok = self.word()
                self.punct(":")
                unit_tok = self.word()
                poi = m.Poi(name_tok.text, unit_tok.text, gid)
                self.declare(poi.id, name_tok)
                self.spans.put(f"{poi.id}#unit", self.span(unit_tok))
                pois.append(poi)
            elif self.at_word("constraint"):
                self.i += 1
                ctok = self.string()
                try:
                    constraint = parse_constraint(ctok.value)
                    self.constraint_text[gid] = (ctok.value, ctok)
                except ConstraintError as exc:
                    self.error(_inner_span(self.file, ctok, exc.offset, exc.length), exc.message, "CONSTRAINT-SYNTAX")
            else:
                self.fail(self.tok, f"expected 'title', 'poi', 'constraint' or '}}', found {_describe(self.tok)}")
        self.punct("}")
        return m.Goal(gid, title, tuple(pois), constraint)

    def relation(self) -> m.GoalEdge:
        self.word("relation")
        rid_tok = self.word()
        self.declare(rid_tok.text, rid_tok)
        src = self.word()
        kind = self.word(*RELKINDS)
        dst = self.word()
        self.spans.put(f"{rid_tok.text}#source", self.span(src))
        self.spans.put(f"{rid_tok.text}#target", self.span(dst))
        label = combinator = None
        while self.at_word("label", "combinator"):
            if self.word().text == "label":
                label = self.string().value
            else:
                combinator = m.Combinator(self.word(*COMBINATORS).text)
        return m.GoalEdge(rid_tok.text, m.EdgeKind(kind.text), src.text, dst.text, label, combinator)

    def port(self) -> tuple[m.Port, Token]:
        direction = self.word("in", "out")
        name_tok = self.word()
        self.punct(":")
        unit_tok = self.word()
        self.punct("[")
        role = self.word(*ROLES)
        self.punct("]")
        port = m.Port(name_tok.text, m.Direction(direction.text), m.Role(role.text), unit_tok.text)
        return port, name_tok

    def dt(self, links) -> m.Dt:
        self.word("dt")
        id_tok = self.word()
        did = id_tok.text
        self.declare(did, id_tok)
        name = self.string().value if self.tok.kind == "string" else did
        self.punct("{")
        ports = []
        behavior = None
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            if self.at_word("in", "out"):
                port, tok = self.port()
                self.declare(f"{did}.{port.name}", tok)
                ports.append(port)
            elif self.at_word("behavior"):
                self.i += 1
                behavior = self.string().value
            elif self.at_word("satisfies"):
                self.i += 1
                goal_tok = self.word()
                link = m.DtGoalLink(did, goal_tok.text)
                if any(l.id == link.id for l, _ in links):
                    self.error(goal_tok, f"duplicate satisfies {goal_tok.text!r}", "DUP-ID")
                self.spans.put(link.id, self.span(goal_tok))
                links.append((link, goal_tok))
            else:
                self.fail(self.tok, f"expected a port, 'behavior', 'satisfies' or '}}', found {_describe(self.tok)}")
        self.punct("}")
        return m.Dt(did, name, tuple(ports), behavior)

    def system(self, links, root: bool = False) -> m.TwinSystem:
        kind_tok = self.word("system", "at")
        id_tok = self.word()
        sid = id_tok.text
        self.declare(sid, id_tok)
        name = self.string().value if self.tok.kind == "string" else sid
        self.punct("{")
        ports, dts, subs, flows = [], [], [], []
        flow_ids: set[str] = set()
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            if self.at_word("in", "out"):
                port, tok = self.port()
                self.declare(f"{sid}.{port.name}", tok)
                ports.append(port)
            elif self.at_word("dt"):
                dts.append(self.dt(links))
            elif self.at_word("system", "at"):
                subs.append(self.system(links))
            elif self.at_word("flow"):
                flow_tok = self.word()
                src, src_tok = self.pathref(sid)
                self.punct("->")
                dst, dst_tok = self.pathref(sid)
                flow = m.Flow(src, dst)
                if flow.id in flow_ids:
                    self.error(flow_tok, f"duplicate flow {flow.id}", "DUP-ID")
                flow_ids.add(flow.id)
                self.spans.put(flow.id, self.span(flow_tok))
                self.spans.put(f"{flow.id}#source", self.span(src_tok))
                self.spans.put(f"{flow.id}#target", self.span(dst_tok))
                flows.append(flow)
            else:
                self.fail(self.tok, f"expected a port, 'dt', 'system', 'flow' or '}}', found {_describe(self.tok)}")
        self.punct("}")
        return m.TwinSystem(sid, name, m.SystemKind(kind_tok.text), tuple(ports), tuple(dts), tuple(subs), tuple(flows))

    def pathref(self, system_id: str) -> tuple[m.PortRef, Token]:
        owner = self.word()
        self.punct(".")
        port = self.word()
        owner_id = system_id if owner.text == BOUNDARY else owner.text
        return m.PortRef(owner_id, port.text), owner


def _inner_span(file: str, tok: Token, offset: int, length: int) -> SourceSpan:
    # +1 skips the opening quote; escapes inside constraints are not expected.
    inner = max(0, min(offset, len(tok.text) - 2))
    return SourceSpan(file, tok.line, tok.column + 1 + inner, max(1, min(length, len(tok.text) - 2 - inner)))


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of file"
    return repr(tok.text)


def parse_model(text: str, file: str = "<string>") -> Union[m.Model, list[ParseDiagnostic]]:
    """Parse ``.dartwin`` text into a Model, or return the error diagnostics.

    A Model is only returned when there are no errors.
    """
    try:
        p = _Parser(text.replace("\r\n", "\n"), file)
    except _SyntaxAt as exc:
        return [ParseDiagnostic("error", exc.message, exc.span, "SYNTAX")]
    try:
        name, extends, goals, edges, root, link_toks = p.model()
    except _SyntaxAt as exc:
        return p.diags + [ParseDiagnostic("error", exc.message, exc.span, "SYNTAX")]
    model = m.Model(
        name,
        root,
        tuple(goals),
        tuple(edges),
        tuple(l for l, _ in link_toks),
        extends,
    )
    diags = list(p.diags)
    for issue in m.check_model(model):
        if issue.code in ("DUP-ID", "CONSTRAINT-TYPE"):
            continue  # reported with better spans below / above
        diags.append(ParseDiagnostic("error", issue.message, _issue_span(p, issue), issue.code))
    for g in model.goals:
        if g.constraint is None or g.id not in p.constraint_text:
            continue
        text_, tok = p.constraint_text[g.id]
        try:
            check_units(g.constraint, m.visible_pois(model, g.id), text_)
        except ConstraintError as exc:
            diags.append(
                ParseDiagnostic("error", exc.message, _inner_span(file, tok, exc.offset, exc.length), "CONSTRAINT-TYPE")
            )
    if diags:
        return sorted(diags, key=lambda d: (d.span.line, d.span.column, d.message))
    return model


def _issue_span(p: _Parser, issue: m.Issue) -> SourceSpan:
    keys = []
    if issue.anchor:
        keys.append(issue.anchor)
    if issue.code == "UNIT-UNKNOWN":
        keys.append(f"{issue.elements[0]}#unit")
    if issue.code == "EDGE-DANGLING":
        end = issue.message.rsplit(" ", 1)[-1].strip("'")
        keys += [f"{issue.elements[0]}#source", f"{issue.elements[0]}#target"]
        for k in list(keys):
            span = p.spans.by_key.get(k)
            if span is not None and _span_text(p, span) == end:
                return span
    keys.extend(issue.elements)
    for key in keys:
        span = p.spans.by_key.get(key)
        if span is not None:
            return span
    return SourceSpan(p.file, 1, 1, 1)


def _span_text(p: _Parser, span: SourceSpan) -> Optional[str]:
    for tok in p.toks:
        if tok.line == span.line and tok.column == span.column:
            return tok.text
    return None


def load_model(text: str, file: str = "<string>") -> m.Model:
    """Like :func:`parse_model` but raises :class:`ParseError` on failure."""
    result = parse_model(text, file)
    if isinstance(result, list):
        raise ParseError(result)
    return result


def parse_fragment(text: str, file: str = "<fragment>") -> Fragment:
    """Parse a model-shaped fragment without resolving cross references.

    In a fragment, ``boundary.x`` refers to the root boundary of the model the
    fragment is applied to; its owner is recorded as ``"boundary"``.
    """
    try:
        p = _Parser(text.replace("\r\n", "\n"), file)
        name, _, goals, edges, root, link_toks = p.model()
    except _SyntaxAt as exc:
        raise ParseError([ParseDiagnostic("error", exc.message, exc.span, "SYNTAX")])
    if p.diags:
        raise ParseError(p.diags)
    flows = tuple(
        m.Flow(_as_boundary(f.src, root.id), _as_boundary(f.dst, root.id)) for f in root.flows
    )
    root = m.TwinSystem(root.id, root.name, root.kind, root.ports, root.dts, root.subsystems, flows)
    return Fragment(name, goals, edges, root, [l for l, _ in link_toks])


def _as_boundary(ref: m.PortRef, root_id: str) -> m.PortRef:
    return m.PortRef(BOUNDARY, ref.port) if ref.owner == root_id else ref


# -- writer ------------------------------------------------------------------


def serialize_model(model: m.Model) -> str:
    """Canonical text: categories in grammar order, each sorted by id."""
    out: list[str] = []
    head = f"dartwin {_escape(model.name)}"
    if model.extends_name:
        head += f" extends {_escape(model.extends_name)}"
    out.append(head + " {")
    for g in model.goals:
        out.append(f"  goal {g.id} {{")
        out.append(f"    title {_escape(g.title)}")
        for p in g.pois:
            out.append(f"    poi {p.name} : {p.unit}")
        if g.constraint is not None:
            out.append(f"    constraint {_escape(g.constraint.to_text())}")
        out.append("  }")
    for e in model.goal_edges:
        line = f"  relation {e.id} {e.source} {e.kind.value} {e.target}"
        if e.label is not None:
            line += f" label {_escape(e.label)}"
        if e.combinator is not None:
            line += f" combinator {e.combinator.value}"
        out.append(line)
    links: dict[str, list[str]] = {}
    for link in model.links:
        links.setdefault(link.dt, []).append(link.goal)
    _write_system(model.root, links, out, 1)
    out.append("}")
    return "\n".join(out) + "\n"


def _write_port(p: m.Port, pad: str) -> str:
    return f"{pad}{p.direction.value} {p.name} : {p.unit} [{p.role.value}]"


def _write_system(system: m.TwinSystem, links: dict[str, list[str]], out: list[str], depth: int) -> None:
    pad = "  " * depth
    out.append(f"{pad}{system.kind.value} {system.id} {_escape(system.name)} {{")
    inner = pad + "  "
    for p in system.ports:
        out.append(_write_port(p, inner))
    for d in system.dts:
        out.append(f"{inner}dt {d.id} {_escape(d.name)} {{")
        for p in d.ports:
            out.append(_write_port(p, inner + "  "))
        if d.behavior_key is not None:
            out.append(f"{inner}  behavior {_escape(d.behavior_key)}")
        for goal in sorted(links.get(d.id, [])):
            out.append(f"{inner}  satisfies {goal}")
        out.append(f"{inner}}}")
    for sub in system.subsystems:
        _write_system(sub, links, out, depth + 1)
    for f in system.flows:
        out.append(f"{inner}flow {_ref_text(f.src, system.id)} -> {_ref_text(f.dst, system.id)}")
    out.append(f"{pad}}}")


def _ref_text(ref: m.PortRef, system_id: str) -> str:
    owner = BOUNDARY if ref.owner == system_id else ref.owner
    return f"{owner}.{ref.port}"


def serialize_fragment(frag: Fragment) -> str:
    root = m.TwinSystem(
        frag.root.id,
        frag.root.name,
        frag.root.kind,
        frag.root.ports,
        frag.root.dts,
        frag.root.subsystems,
        tuple(
            m.Flow(
                m.PortRef(frag.root.id, f.src.port) if f.src.owner == BOUNDARY else f.src,
                m.PortRef(frag.root.id, f.dst.port) if f.dst.owner == BOUNDARY else f.dst,
            )
            for f in frag.root.flows
        ),
    )
    return serialize_model(
        m.Model(frag.name, root, tuple(frag.goals), tuple(frag.goal_edges), tuple(frag.links))
    )
