"""Typed in-memory representation of a DarTwin model.

All element types are frozen dataclasses. Child collections are stored as
tuples sorted by identifier, so two models built from differently ordered
declarations compare equal with ``==``.

Identifiers:

* goals, goal edges, systems and Dts carry explicit identifiers;
* a PoI is ``<goal>.<poi name>`` and a port is ``<owner>.<port name>``;
* a flow is ``<source port id>-><target port id>``;
* a Dt-to-goal link is ``<dt>=><goal>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Optional, Union

from .constraints import Constraint, ConstraintError, check_units

UNITS = frozenset(
    {
        "celsius",
        "on_off",
        "boolean",
        "currency_per_kwh",
        "joules",
        "seconds",
        "rad",
        "rad_per_s",
        "meters",
        "meters_per_s",
        "meters_per_s2",
        "image",
        "position_constraints",
        "kinetic_limits",
        "trajectory",
        "validation_metrics",
        "ratio",
    }
)


# Behavior keys that mark a Dt as an arbiter. Their semantics live in the
# simulator; structurally only the key is stored.
ARBITRATION_RULES = ("min", "strictest")


def register_unit(name: str) -> None:
    """Add a unit to the registry (module-global)."""
    global UNITS
    UNITS = UNITS | {name}


class Direction(str, enum.Enum):
    INPUT = "in"
    OUTPUT = "out"


class Role(str, enum.Enum):
    MONITORING = "monitoring"
    CONTROL = "control"
    USER = "user"
    INTER_DT = "inter_dt"


class EdgeKind(str, enum.Enum):
    GENERALIZATION = "generalizes"
    POSITIVE = "supports"
    CONFLICT = "conflicts"


class Combinator(str, enum.Enum):
    UNION = "union"
    STRICTEST = "strictest"


class SystemKind(str, enum.Enum):
    TWIN_SYSTEM = "system"
    ACTUAL_TWIN = "at"


@dataclass(frozen=True)
class Poi:
    name: str
    unit: str
    goal: str = ""

    @property
    def id(self) -> str:
        return f"{self.goal}.{self.name}"


@dataclass(frozen=True)
class Goal:
    id: str
    title: str
    pois: tuple[Poi, ...] = ()
    constraint: Optional[Constraint] = None

    def __post_init__(self):
        pois = tuple(sorted((replace(p, goal=self.id) for p in self.pois), key=lambda p: p.name))
        object.__setattr__(self, "pois", pois)

    def poi(self, name: str) -> Optional[Poi]:
        return next((p for p in self.pois if p.name == name), None)


@dataclass(frozen=True)
class GoalEdge:
    id: str
    kind: EdgeKind
    source: str
    target: str
    label: Optional[str] = None
    combinator: Optional[Combinator] = None


@dataclass(frozen=True)
class Port:
    name: str
    direction: Direction
    role: Role
    unit: str
    owner: str = ""

    @property
    def id(self) -> str:
        return f"{self.owner}.{self.name}"

    @property
    def ref(self) -> "PortRef":
        return PortRef(self.owner, self.name)


@dataclass(frozen=True, order=True)
class PortRef:
    owner: str
    port: str

    @property
    def id(self) -> str:
        return f"{self.owner}.{self.port}"

    def __str__(self) -> str:
        return self.id

    @classmethod
    def parse(cls, text: str) -> "PortRef":
        owner, sep, port = text.partition(".")
        if not sep or not owner or not port:
            raise ValueError(f"port reference must look like owner.port, got {text!r}")
        return cls(owner, port)


@dataclass(frozen=True)
class Flow:
    src: PortRef
    dst: PortRef

    @property
    def id(self) -> str:
        return f"{self.src.id}->{self.dst.id}"


def _own_ports(owner: str, ports) -> tuple[Port, ...]:
    return tuple(sorted((replace(p, owner=owner) for p in ports), key=lambda p: p.name))


@dataclass(frozen=True)
class Dt:
    id: str
    name: str = ""
    ports: tuple[Port, ...] = ()
    behavior_key: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "ports", _own_ports(self.id, self.ports))
        if not self.name:
            object.__setattr__(self, "name", self.id)

    def port(self, name: str) -> Optional[Port]:
        return next((p for p in self.ports if p.name == name), None)


@dataclass(frozen=True)
class TwinSystem:
    id: str
    name: str = ""
    kind: SystemKind = SystemKind.TWIN_SYSTEM
    ports: tuple[Port, ...] = ()
    dts: tuple[Dt, ...] = ()
    subsystems: tuple["TwinSystem", ...] = ()
    flows: tuple[Flow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ports", _own_ports(self.id, self.ports))
        object.__setattr__(self, "dts", tuple(sorted(self.dts, key=lambda d: d.id)))
        object.__setattr__(self, "subsystems", tuple(sorted(self.subsystems, key=lambda s: s.id)))
        object.__setattr__(self, "flows", tuple(sorted(set(self.flows), key=lambda f: f.id)))
        if not self.name:
            object.__setattr__(self, "name", self.id)

    def port(self, name: str) -> Optional[Port]:
        return next((p for p in self.ports if p.name == name), None)

    def child(self, child_id: str) -> Union[Dt, "TwinSystem", None]:
        for d in self.dts:
            if d.id == child_id:
                return d
        for s in self.subsystems:
            if s.id == child_id:
                return s
        return None

    def walk(self) -> Iterator["TwinSystem"]:
        yield self
        for sub in self.subsystems:
            yield from sub.walk()


@dataclass(frozen=True)
class DtGoalLink:
    dt: str
    goal: str

    @property
    def id(self) -> str:
        return f"{self.dt}=>{self.goal}"


Element = Union[Goal, Poi, GoalEdge, TwinSystem, Dt, Port, Flow, DtGoalLink]


@dataclass(frozen=True)
class Model:
    name: str
    root: TwinSystem
    goals: tuple[Goal, ...] = ()
    goal_edges: tuple[GoalEdge, ...] = ()
    links: tuple[DtGoalLink, ...] = ()
    extends_name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "goals", tuple(sorted(self.goals, key=lambda g: g.id)))
        object.__setattr__(self, "goal_edges", tuple(sorted(self.goal_edges, key=lambda e: e.id)))
        object.__setattr__(self, "links", tuple(sorted(set(self.links), key=lambda l: l.id)))

    # -- element tables ------------------------------------------------------

    def iter_elements(self) -> Iterator[tuple[str, Element, Optional[str]]]:
        """Yield ``(id, element, container id)`` for every element."""
        for g in self.goals:
            yield g.id, g, None
            for p in g.pois:
                yield p.id, p, g.id
        for e in self.goal_edges:
            yield e.id, e, None
        for link in self.links:
            yield link.id, link, None
        stack: list[tuple[TwinSystem, Optional[str]]] = [(self.root, None)]
        while stack:
            system, parent = stack.pop()
            yield system.id, system, parent
            for p in system.ports:
                yield p.id, p, system.id
            for d in system.dts:
                yield d.id, d, system.id
                for p in d.ports:
                    yield p.id, p, d.id
            for f in system.flows:
                yield f.id, f, system.id
            for sub in reversed(system.subsystems):
                stack.append((sub, system.id))

    @cached_property
    def _tables(self):
        index: dict[str, Element] = {}
        parent: dict[str, Optional[str]] = {}
        dups: list[str] = []
        for eid, el, container in self.iter_elements():
            if eid in index:
                dups.append(eid)
                continue
            index[eid] = el
            parent[eid] = container
        return index, parent, dups

    @property
    def index(self) -> dict[str, Element]:
        return self._tables[0]

    def parent_of(self, element_id: str) -> Optional[str]:
        return self._tables[1].get(element_id)

    def ids(self) -> list[str]:
        return [eid for eid, _, _ in self.iter_elements()]

    def systems(self) -> list[TwinSystem]:
        return list(self.root.walk())

    def dts(self) -> list[Dt]:
        return [d for s in self.root.walk() for d in s.dts]

    def flows(self) -> list[Flow]:
        return [f for s in self.root.walk() for f in s.flows]

    def goal(self, goal_id: str) -> Optional[Goal]:
        el = self.index.get(goal_id)
        return el if isinstance(el, Goal) else None

    def dt(self, dt_id: str) -> Optional[Dt]:
        el = self.index.get(dt_id)
        return el if isinstance(el, Dt) else None

    def system(self, system_id: str) -> Optional[TwinSystem]:
        el = self.index.get(system_id)
        return el if isinstance(el, TwinSystem) else None

    def port(self, ref: Union[PortRef, str]) -> Optional[Port]:
        key = ref.id if isinstance(ref, PortRef) else ref
        el = self.index.get(key)
        return el if isinstance(el, Port) else None

    def flows_into(self, ref: PortRef) -> list[Flow]:
        return [f for f in self.flows() if f.dst == ref]

    def flows_from(self, ref: PortRef) -> list[Flow]:
        return [f for f in self.flows() if f.src == ref]

    def links_of(self, dt_id: str) -> list[str]:
        return [l.goal for l in self.links if l.dt == dt_id]


def find_element(model: Model, element_id: str) -> Optional[Element]:
    return model.index.get(element_id)


# -- invariants --------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    """One violated model invariant."""

    code: str
    message: str
    elements: tuple[str, ...] = ()
    # Offset of the problem inside a goal's constraint text, when relevant.
    detail_offset: Optional[int] = field(default=None, compare=False)
    detail_length: int = field(default=1, compare=False)
    # Span lookup key for the parser, e.g. "<flow id>#source".
    anchor: Optional[str] = field(default=None, compare=False)


class ModelError(Exception):
    def __init__(self, issues: list[Issue]):
        self.issues = issues
        super().__init__("; ".join(i.message for i in issues))


def endpoint_kind(system: TwinSystem, ref: PortRef) -> Optional[str]:
    """Classify a flow endpoint seen from inside ``system``.

    Returns ``"boundary"`` or ``"child"``, or None when the owner is not within
    one nesting level of the system.
    """
    if ref.owner == system.id:
        return "boundary"
    if system.child(ref.owner) is not None:
        return "child"
    return None


def _resolve(system: TwinSystem, ref: PortRef) -> Optional[Port]:
    owner = system if ref.owner == system.id else system.child(ref.owner)
    if owner is None:
        return None
    return owner.port(ref.port)


def flow_issues(system: TwinSystem, flow: Flow) -> list[Issue]:
    issues = []
    ends = []
    for side, ref in (("source", flow.src), ("target", flow.dst)):
        where = endpoint_kind(system, ref)
        if where is None:
            issues.append(
                Issue(
                    "FLOW-LOCALITY",
                    f"flow {side} {ref.id} is not the boundary or a direct child of system {system.id}",
                    (flow.id,),
                    anchor=f"{flow.id}#{side}",
                )
            )
            continue
        port = _resolve(system, ref)
        if port is None:
            issues.append(
                Issue("FLOW-DANGLING", f"flow {side} {ref.id} names no port", (flow.id,), anchor=f"{flow.id}#{side}")
            )
            continue
        ends.append((side, where, port))
    if len(ends) != 2:
        return issues
    (_, src_where, src), (_, dst_where, dst) = ends
    # Boundary inputs act as sources inside the system, boundary outputs as sinks.
    src_ok = src.direction == (Direction.INPUT if src_where == "boundary" else Direction.OUTPUT)
    dst_ok = dst.direction == (Direction.OUTPUT if dst_where == "boundary" else Direction.INPUT)
    if not src_ok:
        issues.append(
            Issue(
                "FLOW-DIRECTION",
                f"flow source {src.id} cannot emit inside {system.id}",
                (flow.id,),
                anchor=f"{flow.id}#source",
            )
        )
    if not dst_ok:
        issues.append(
            Issue(
                "FLOW-DIRECTION",
                f"flow target {dst.id} cannot receive inside {system.id}",
                (flow.id,),
                anchor=f"{flow.id}#target",
            )
        )
    if src.unit != dst.unit:
        issues.append(
            Issue("FLOW-UNIT", f"flow {flow.id} joins {src.unit} to {dst.unit}", (flow.id,))
        )
    return issues


def check_model(model: Model) -> list[Issue]:
    """Every violated model-core invariant, in a deterministic order."""
    issues: list[Issue] = []
    for dup in sorted(set(model._tables[2])):
        issues.append(Issue("DUP-ID", f"duplicate identifier {dup!r}", (dup,)))

    goal_ids = {g.id for g in model.goals}
    for g in model.goals:
        if not g.pois:
            issues.append(Issue("GOAL-NO-POI", "goal must declare at least one poi", (g.id,)))
        names = [p.name for p in g.pois]
        for p in g.pois:
            if p.unit not in UNITS:
                issues.append(Issue("UNIT-UNKNOWN", f"unknown unit {p.unit!r}", (p.id,)))
            if names.count(p.name) > 1:
                issues.append(Issue("POI-DUP", f"poi {p.name!r} declared twice", (p.id,)))
        if g.constraint is not None:
            try:
                check_units(g.constraint, _visible_pois(model, g.id))
            except ConstraintError as exc:
                issues.append(Issue("CONSTRAINT-TYPE", exc.message, (g.id,)))

    for e in model.goal_edges:
        for end in (e.source, e.target):
            if end not in goal_ids:
                issues.append(Issue("EDGE-DANGLING", f"relation {e.id} names unknown goal {end!r}", (e.id,)))
        if e.source == e.target:
            issues.append(Issue("EDGE-SELF", f"relation {e.id} relates {e.source} to itself", (e.id,)))
    cycle = generalization_cycle(model)
    if cycle:
        issues.append(
            Issue("GEN-CYCLE", "generalization cycle: " + " -> ".join(cycle), tuple(cycle))
        )

    dt_ids = {d.id for d in model.dts()}
    for link in model.links:
        if link.dt not in dt_ids:
            issues.append(Issue("LINK-DANGLING", f"link names unknown dt {link.dt!r}", (link.id,)))
        if link.goal not in goal_ids:
            issues.append(Issue("LINK-DANGLING", f"link names unknown goal {link.goal!r}", (link.id,)))

    for system in model.systems():
        if system.kind == SystemKind.ACTUAL_TWIN and (system.dts or system.subsystems):
            issues.append(
                Issue("AT-NOT-EMPTY", f"actual twin {system.id} may not contain dts or systems", (system.id,))
            )
        owners = [(system.id, system.ports)] + [(d.id, d.ports) for d in system.dts]
        for owner, ports in owners:
            seen = set()
            for p in ports:
                if p.name in seen:
                    issues.append(Issue("PORT-DUP", f"port {p.name!r} declared twice on {owner}", (p.id,)))
                seen.add(p.name)
                if p.unit not in UNITS:
                    issues.append(Issue("UNIT-UNKNOWN", f"unknown unit {p.unit!r}", (p.id,)))
        for f in system.flows:
            issues.extend(flow_issues(system, f))
    return issues


def ensure_valid(model: Model) -> Model:
    issues = check_model(model)
    if issues:
        raise ModelError(issues)
    return model


def _visible_pois(model: Model, goal_id: str) -> dict[str, str]:
    """PoI name to unit for a goal and its generalization ancestors."""
    units: dict[str, str] = {}
    parents: dict[str, list[str]] = {}
    for e in model.goal_edges:
        if e.kind == EdgeKind.GENERALIZATION:
            parents.setdefault(e.target, []).append(e.source)
    seen = set()
    todo = [goal_id]
    while todo:
        gid = todo.pop()
        if gid in seen:
            continue
        seen.add(gid)
        goal = model.goal(gid)
        if goal is None:
            continue
        for p in goal.pois:
            units.setdefault(p.name, p.unit)
        todo.extend(parents.get(gid, []))
    return units


def visible_pois(model: Model, goal_id: str) -> dict[str, str]:
    return _visible_pois(model, goal_id)


def generalization_cycle(model: Model) -> list[str]:
    """A cycle of generalization edges as a goal-id path, or []."""
    succ: dict[str, list[str]] = {}
    for e in model.goal_edges:
        if e.kind == EdgeKind.GENERALIZATION:
            succ.setdefault(e.source, []).append(e.target)
    state: dict[str, int] = {}
    path: list[str] = []

    def dfs(node: str) -> list[str]:
        state[node] = 1
        path.append(node)
        for nxt in sorted(succ.get(node, [])):
            if state.get(nxt) == 1:
                return path[path.index(nxt):] + [nxt]
            if nxt not in state:
                found = dfs(nxt)
                if found:
                    return found
        state[node] = 2
        path.pop()
        return []

    for start in sorted(succ):
        if start not in state:
            found = dfs(start)
            if found:
                return found
    return []


# -- structural queries ------------------------------------------------------


def actuator_writers(model: Model, actuator: Union[PortRef, str]) -> list[str]:
    """Dts whose output reaches ``actuator`` without passing through another Dt.

    The search walks flows backwards and only continues through system
    boundary ports, which forward signals; the first Dt met on each path is a
    writer.
    """
    ref = actuator if isinstance(actuator, PortRef) else PortRef.parse(actuator)
    port = model.port(ref)
    if port is None:
        raise KeyError(f"unknown port {ref.id!r}")
    return _writers(model, ref)


def _writers(model: Model, ref: PortRef) -> list[str]:
    incoming: dict[PortRef, list[PortRef]] = {}
    for f in model.flows():
        incoming.setdefault(f.dst, []).append(f.src)
    writers: set[str] = set()
    seen = {ref}
    todo = [ref]
    while todo:
        cur = todo.pop()
        for src in incoming.get(cur, []):
            if src in seen:
                continue
            seen.add(src)
            if isinstance(model.index.get(src.owner), Dt):
                writers.add(src.owner)
            else:
                todo.append(src)
    return sorted(writers)


def dt_writers(model: Model, ref: PortRef) -> list[str]:
    """Like :func:`actuator_writers` but without the port-existence check."""
    return _writers(model, ref)
