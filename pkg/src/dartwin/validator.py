"""Static checks over a Model: well-formedness, goal coverage and actuation
conflicts, plus advice on which transformation resolves a conflict.

Diagnostic codes
----------------
=================  ========  ==================================================
code               severity  meaning
=================  ========  ==================================================
DUP-ID             error     an identifier is declared twice
GOAL-NO-POI        error     a goal declares no PoI
UNIT-UNKNOWN       error     a PoI or port uses an unregistered unit
POI-DUP            error     a PoI name repeats within a goal
CONSTRAINT-TYPE    error     a constraint names an unknown PoI or mixes units
EDGE-DANGLING      error     a goal relation names an unknown goal
EDGE-SELF          error     a goal relation connects a goal to itself
GEN-CYCLE          error     generalization relations form a cycle
LINK-DANGLING      error     a ``satisfies`` link names an unknown Dt or goal
AT-NOT-EMPTY       error     an actual twin contains Dts or systems
PORT-DUP           error     a port name repeats on one owner
FLOW-LOCALITY      error     a flow endpoint is not within one nesting level
FLOW-DANGLING      error     a flow endpoint names no port
FLOW-DIRECTION     error     a flow runs against port directions
FLOW-UNIT          error     a flow joins ports of different units
DT-NO-GOAL         warning   a Dt satisfies no goal (arbiters are exempt)
GOAL-UNSATISFIED   warning   a goal has no Dt and is not a generalization parent
PORT-DANGLING      warning   a system boundary port is touched by no flow
ACT-CONFLICT       info      several Dts drive one actuator unconsolidated
GOAL-CONFLICT      info      conflicting goals are served by competing Dts
=================  ========  ==================================================
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from . import model as m

SEVERITIES = ("error", "warning", "info")

CODES = {
    "DUP-ID": "error",
    "GOAL-NO-POI": "error",
    "UNIT-UNKNOWN": "error",
    "POI-DUP": "error",
    "CONSTRAINT-TYPE": "error",
    "EDGE-DANGLING": "error",
    "EDGE-SELF": "error",
    "GEN-CYCLE": "error",
    "LINK-DANGLING": "error",
    "AT-NOT-EMPTY": "error",
    "PORT-DUP": "error",
    "FLOW-LOCALITY": "error",
    "FLOW-DANGLING": "error",
    "FLOW-DIRECTION": "error",
    "FLOW-UNIT": "error",
    "DT-NO-GOAL": "warning",
    "GOAL-UNSATISFIED": "warning",
    "PORT-DANGLING": "warning",
    "ACT-CONFLICT": "info",
    "GOAL-CONFLICT": "info",
}


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    elements: tuple[str, ...] = ()

    def to_text(self) -> str:
        where = f" [{', '.join(self.elements)}]" if self.elements else ""
        return f"{self.severity} {self.code}: {self.message}{where}"

    def to_record(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "elements": list(self.elements),
        }


@dataclass(frozen=True)
class ActuationConflict:
    actuator: m.PortRef
    writers: tuple[str, ...]


@dataclass(frozen=True)
class Advice:
    transformation: str  # new_output, chaining or arbitration
    summary: str


class StaleConflictError(ValueError):
    """The conflict no longer matches the model it is advised against."""


def _diag(code: str, message: str, elements: Iterable[str]) -> Diagnostic:
    return Diagnostic(CODES[code], code, message, tuple(elements))


def is_arbiter(dt: m.Dt) -> bool:
    return dt.behavior_key in m.ARBITRATION_RULES


def validate(model: m.Model) -> list[Diagnostic]:
    """All diagnostics for ``model``, sorted by severity, code and elements."""
    out = [_diag(i.code, i.message, i.elements) for i in m.check_model(model)]

    linked_dts = {l.dt for l in model.links}
    for dt in model.dts():
        if dt.id not in linked_dts and not is_arbiter(dt):
            out.append(_diag("DT-NO-GOAL", f"dt {dt.id} satisfies no goal", (dt.id,)))

    linked_goals = {l.goal for l in model.links}
    parents = {e.source for e in model.goal_edges if e.kind == m.EdgeKind.GENERALIZATION}
    for g in model.goals:
        if g.id not in linked_goals and g.id not in parents:
            out.append(_diag("GOAL-UNSATISFIED", f"goal {g.id} is not satisfied by any dt", (g.id,)))

    touched = {ref for f in model.flows() for ref in (f.src, f.dst)}
    for system in model.systems():
        for p in system.ports:
            if p.ref not in touched:
                out.append(_diag("PORT-DANGLING", f"port {p.id} is not connected by any flow", (p.id,)))

    conflicts = detect_actuation_conflicts(model) if not any(d.severity == "error" for d in out) else []
    for c in conflicts:
        out.append(
            _diag(
                "ACT-CONFLICT",
                f"{' and '.join(c.writers)} drive {c.actuator.id}; consider new_output, chaining or arbitration",
                (c.actuator.id, *c.writers),
            )
        )
    out.extend(_goal_conflicts(model, conflicts))
    return sorted(out, key=lambda d: (SEVERITIES.index(d.severity), d.code, d.elements, d.message))


def _goal_closure(model: m.Model, dt_id: str) -> set[str]:
    """Goals a Dt serves, including generalization ancestors."""
    up: dict[str, list[str]] = {}
    for e in model.goal_edges:
        if e.kind == m.EdgeKind.GENERALIZATION:
            up.setdefault(e.target, []).append(e.source)
    todo = list(model.links_of(dt_id))
    seen: set[str] = set()
    while todo:
        g = todo.pop()
        if g not in seen:
            seen.add(g)
            todo.extend(up.get(g, []))
    return seen


def _goal_conflicts(model: m.Model, conflicts: list[ActuationConflict]) -> list[Diagnostic]:
    out = []
    for e in model.goal_edges:
        if e.kind != m.EdgeKind.CONFLICT:
            continue
        for c in conflicts:
            served = [_goal_closure(model, w) for w in c.writers]
            a = [w for w, goals in zip(c.writers, served) if e.source in goals]
            b = [w for w, goals in zip(c.writers, served) if e.target in goals]
            if a and b and set(a) | set(b) != set(a) & set(b):
                out.append(
                    _diag(
                        "GOAL-CONFLICT",
                        f"conflicting goals {e.source} and {e.target} meet unarbitrated at {c.actuator.id}",
                        (e.id, c.actuator.id),
                    )
                )
    return out


def _contested_ports(model: m.Model) -> list[m.Port]:
    """Ports at which competing writers may meet.

    Control-role outputs of any system, plus user-role inputs of Dts and of
    nested systems (a setpoint driven by two Dts is contested as well).
    """
    ports = []
    for system in model.systems():
        for p in system.ports:
            if p.direction == m.Direction.OUTPUT and p.role == m.Role.CONTROL:
                ports.append(p)
            elif system is not model.root and p.direction == m.Direction.INPUT and p.role == m.Role.USER:
                ports.append(p)
        for dt in system.dts:
            ports.extend(p for p in dt.ports if p.direction == m.Direction.INPUT and p.role == m.Role.USER)
    return ports


def detect_actuation_conflicts(model: m.Model) -> list[ActuationConflict]:
    """One conflict per contested port where two or more Dt paths merge.

    A port that merely forwards an already merged signal (one incoming flow)
    is not reported again.
    """
    conflicts = []
    for p in _contested_ports(model):
        if len(model.flows_into(p.ref)) < 2:
            continue
        writers = m.dt_writers(model, p.ref)
        if len(writers) >= 2:
            conflicts.append(ActuationConflict(p.ref, tuple(writers)))
    return sorted(conflicts, key=lambda c: c.actuator)


def reaches(model: m.Model, start_dt: str, goal_dt: str) -> bool:
    """True if a signal leaving ``start_dt`` can arrive at an input of ``goal_dt``.

    Walks port to port: flows, plus every Dt input feeding all its outputs.
    """
    succ: dict[m.PortRef, list[m.PortRef]] = {}
    for f in model.flows():
        succ.setdefault(f.src, []).append(f.dst)
    for dt in model.dts():
        outs = [p.ref for p in dt.ports if p.direction == m.Direction.OUTPUT]
        for p in dt.ports:
            if p.direction == m.Direction.INPUT:
                succ.setdefault(p.ref, []).extend(outs)
    start = model.dt(start_dt)
    todo = [p.ref for p in start.ports if p.direction == m.Direction.OUTPUT]
    seen = set(todo)
    while todo:
        cur = todo.pop()
        for nxt in succ.get(cur, ()):
            if nxt.owner == goal_dt:
                return True
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return False


def writer_units(model: m.Model, conflict: ActuationConflict) -> dict[str, set[str]]:
    """Units each writer emits along its paths into the contested port."""
    incoming: dict[m.PortRef, list[m.PortRef]] = {}
    for f in model.flows():
        incoming.setdefault(f.dst, []).append(f.src)
    units: dict[str, set[str]] = {w: set() for w in conflict.writers}
    todo, seen = [conflict.actuator], {conflict.actuator}
    while todo:
        cur = todo.pop()
        for src in incoming.get(cur, []):
            if src in seen:
                continue
            seen.add(src)
            if src.owner in units:
                port = model.port(src)
                if port is not None:
                    units[src.owner].add(port.unit)
            elif model.dt(src.owner) is None:
                todo.append(src)
    return units


def advise(model: m.Model, conflict: ActuationConflict) -> list[Advice]:
    """Applicable resolutions, in the order new_output, chaining, arbitration."""
    port = model.port(conflict.actuator)
    missing = [w for w in conflict.writers if model.dt(w) is None]
    if port is None or missing:
        gone = ([] if port is not None else [conflict.actuator.id]) + missing
        raise StaleConflictError(f"conflict refers to missing elements: {', '.join(gone)}")
    current = set(m.dt_writers(model, conflict.actuator))
    if not set(conflict.writers) <= current:
        raise StaleConflictError(f"{', '.join(sorted(set(conflict.writers) - current))} no longer drive {port.id}")

    writers = list(conflict.writers)
    advice = [
        Advice(
            "new_output",
            f"give one of {', '.join(writers)} its own {port.unit} output instead of {port.id}",
        )
    ]
    orders = [(a, b) for a in writers for b in writers if a != b and not reaches(model, b, a)]
    if orders:
        up, down = orders[0]
        advice.append(Advice("chaining", f"route {up} through {down} so {down} has the last word on {port.id}"))
    units = writer_units(model, conflict)
    if len(set().union(*units.values())) == 1:
        advice.append(Advice("arbitration", f"insert an arbiter combining the {port.unit} suggestions for {port.id}"))
    return advice


def report_text(diagnostics: Iterable[Diagnostic]) -> str:
    return "".join(d.to_text() + "\n" for d in diagnostics)


def report_records(diagnostics: Iterable[Diagnostic]) -> str:
    """One JSON object per line."""
    return "".join(json.dumps(d.to_record(), sort_keys=True) + "\n" for d in diagnostics)
