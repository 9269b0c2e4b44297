"""The DarTwin architectural transformations as checked model rewrites.

Each rewrite takes a source Model, checks its preconditions, edits a
:class:`Draft` and returns a :class:`TransformResult` holding the new Model,
the ChangeSet recorded while editing, and any warnings. Precondition
failures raise :class:`TransformError`.

New elements are described by an :class:`Addition`, usually parsed from a
model-shaped fragment::

    dartwin "Orthogonal Freeze Protection" {
      goal NoFreezing { poi room_temp : celsius  constraint "always(room_temp > 8)" }
      system _ {
        dt FreezeProtection { ... satisfies NoFreezing }
        flow boundary.room_temp -> FreezeProtection.room_temp
      }
    }

``boundary.x`` names a port on the source model's root. A ``dt`` block whose
id already exists adds ports to that Dt instead of creating a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .. import model as m
from ..parser import BOUNDARY, Fragment, parse_fragment
from ..validator import Diagnostic, detect_actuation_conflicts, reaches
from .changeset import ChangeSet
from .draft import Draft

KINDS = ("basic", "hierarchical", "augmented", "orthogonal", "new_output", "chaining", "arbitration", "flatten")


class TransformError(Exception):
    """A transformation precondition does not hold."""


class TransformResult(NamedTuple):
    model: m.Model
    changes: ChangeSet
    warnings: tuple[Diagnostic, ...] = ()


@dataclass(frozen=True)
class Addition:
    """New goals, Dts, boundary ports and flows to merge into a model."""

    name: Optional[str] = None
    system_id: str = "System"
    system_name: str = ""
    goals: tuple[m.Goal, ...] = ()
    goal_edges: tuple[m.GoalEdge, ...] = ()
    links: tuple[m.DtGoalLink, ...] = ()
    dts: tuple[m.Dt, ...] = ()
    ports: tuple[m.Port, ...] = ()
    flows: tuple[m.Flow, ...] = field(default=())

    @classmethod
    def from_fragment(cls, frag: Fragment) -> "Addition":
        if frag.root.subsystems:
            raise TransformError("an addition may not declare nested systems")
        return cls(
            frag.name or None,
            frag.root.id,
            frag.root.name,
            tuple(frag.goals),
            tuple(frag.goal_edges),
            tuple(frag.links),
            frag.root.dts,
            frag.root.ports,
            frag.root.flows,
        )

    @classmethod
    def parse(cls, text: str, file: str = "<addition>") -> "Addition":
        return cls.from_fragment(parse_fragment(text, file))


# -- shared helpers ------------------------------------------------------------


def _resolve(ref: m.PortRef, system_id: str) -> m.PortRef:
    return m.PortRef(system_id, ref.port) if ref.owner == BOUNDARY else ref


def _new_dts(draft: Draft, add: Addition) -> list[m.Dt]:
    return [d for d in add.dts if d.id not in draft.dts]


def _merge(draft: Draft, add: Addition, system_id: str, *, extend_dts: bool) -> list[str]:
    """Merge an addition into ``system_id``; return the ids of new Dts."""
    taken = draft.ids()
    for g in add.goals:
        if g.id in taken:
            raise TransformError(f"goal id {g.id!r} already exists")
        draft.add_goal(g)
    for e in add.goal_edges:
        if e.id in taken:
            raise TransformError(f"relation id {e.id!r} already exists")
        draft.add_edge(e)
    created = []
    for d in add.dts:
        if d.id in draft.dts:
            if not extend_dts:
                raise TransformError(f"dt {d.id!r} already exists; this transformation only adds new dts")
            if draft.parent_of(d.id) != system_id:
                raise TransformError(f"dt {d.id!r} is not a direct child of {system_id}")
            for p in d.ports:
                if p.name in draft.dts[d.id].ports:
                    raise TransformError(f"dt {d.id!r} already has a port {p.name!r}")
                draft.add_port(d.id, p)
        elif d.id in taken:
            raise TransformError(f"id {d.id!r} already names another element")
        else:
            draft.add_dt(d, system_id)
            created.append(d.id)
    for p in add.ports:
        if p.name in draft.systems[system_id].ports:
            raise TransformError(f"{system_id} already has a port {p.name!r}")
        draft.add_port(system_id, p)
    for f in add.flows:
        draft.add_flow(system_id, m.Flow(_resolve(f.src, system_id), _resolve(f.dst, system_id)))
    for link in add.links:
        if link.id in draft.links:
            raise TransformError(f"link {link.id!r} already exists")
        draft.add_link(link)
    return created


def _rename(draft: Draft, source: m.Model, name: Optional[str]) -> None:
    if name:
        draft.rename(name, source.name)


def _finish(draft: Draft, warnings=()) -> TransformResult:
    result = draft.build()
    issues = m.check_model(result)
    if issues:
        raise TransformError("result is not a valid model: " + "; ".join(i.message for i in issues))
    return TransformResult(result, draft.changes(), tuple(warnings))


def _require_dt(draft: Draft, dt_id: str) -> None:
    if dt_id not in draft.dts:
        raise TransformError(f"unknown dt {dt_id!r}")


def _single_new_dt(draft: Draft, add: Addition, kind: str) -> m.Dt:
    new = _new_dts(draft, add)
    if len(new) != 1:
        raise TransformError(f"{kind} adds exactly one new dt, the addition declares {len(new)}")
    return new[0]


# -- basic ---------------------------------------------------------------------


def apply_basic(addition: Addition, *, name: Optional[str] = None) -> m.Model:
    """Build a fresh single-system model from goals, Dts, ports and flows."""
    if not addition.goals:
        raise TransformError("a basic DarTwin needs at least one goal")
    if not addition.dts:
        raise TransformError("a basic DarTwin needs at least one dt")
    sid = addition.system_id
    root = m.TwinSystem(
        sid,
        addition.system_name or sid,
        m.SystemKind.TWIN_SYSTEM,
        addition.ports,
        addition.dts,
        (),
        tuple(m.Flow(_resolve(f.src, sid), _resolve(f.dst, sid)) for f in addition.flows),
    )
    model = m.Model(name or addition.name or sid, root, addition.goals, addition.goal_edges, addition.links)
    issues = m.check_model(model)
    if issues:
        raise TransformError("; ".join(i.message for i in issues))
    return model


# -- hierarchical and flatten -------------------------------------------------------


def apply_hierarchical(model: m.Model, addition: Addition, *, name: Optional[str] = None) -> TransformResult:
    """Wrap the old root, as a black box, in a new root holding the new Dt.

    The addition's system block names the new root. Its flows may feed the
    old root's user-role inputs (``<old root>.<port>``); the old root's other
    boundary ports are mirrored on the new root and forwarded.
    """
    draft = Draft(model)
    old = model.root
    new_root = addition.system_id
    if new_root in draft.ids():
        raise TransformError(f"new root id {new_root!r} already exists")
    for d in addition.dts:
        if d.id in draft.dts:
            raise TransformError(f"dt {d.id!r} is inside the old root, which stays unmodified")
    inside = {eid for eid in model.ids() if eid != old.id}
    bound: set[m.PortRef] = set()
    for f in addition.flows:
        for side, ref in (("source", f.src), ("target", f.dst)):
            if ref.owner in inside:
                raise TransformError(f"binding {side} {ref.id} is a port inside the old root {old.id}")
        if f.dst.owner == old.id:
            port = old.port(f.dst.port)
            if port is None:
                raise TransformError(f"binding target {f.dst.id} does not exist")
            if port.direction != m.Direction.INPUT or port.role != m.Role.USER:
                raise TransformError(
                    f"binding target {f.dst.id} is a {port.role.value} {port.direction.value} port, not a user input"
                )
            bound.add(f.dst)
        if f.src.owner == old.id:
            bound.add(f.src)
    if not any(f.dst.owner == old.id for f in addition.flows):
        raise TransformError(f"no binding feeds a user input of {old.id}")

    draft.add_system(new_root, addition.system_name or new_root, None)
    draft.move_system(old.id, new_root)
    draft.set_root(new_root)
    _merge(draft, addition, new_root, extend_dts=False)
    for p in old.ports:
        if p.ref in bound:
            continue
        outer = draft.systems[new_root].ports.get(p.name)
        if outer is None:
            outer = draft.add_port(new_root, m.Port(p.name, p.direction, p.role, p.unit))
        elif outer.direction != p.direction or outer.unit != p.unit:
            raise TransformError(f"new root port {outer.id} clashes with {p.id}")
        flow = m.Flow(outer.ref, p.ref) if p.direction == m.Direction.INPUT else m.Flow(p.ref, outer.ref)
        draft.add_flow(new_root, flow)
    _rename(draft, model, name or addition.name)
    return _finish(draft)


def flatten(model: m.Model, inner_system: str, *, name: Optional[str] = None) -> TransformResult:
    """Hoist a nested system's Dts into the root and join flows end to end."""
    draft = Draft(model)
    root = draft.root
    inner = model.system(inner_system)
    if inner is None:
        raise TransformError(f"unknown system {inner_system!r}")
    if draft.parent_of(inner_system) != root:
        raise TransformError(f"{inner_system} is not a direct child of the root {root}")
    if inner.kind == m.SystemKind.ACTUAL_TWIN:
        raise TransformError(f"{inner_system} is an actual twin; there is nothing to flatten")
    if not inner.dts:
        raise TransformError(f"{inner_system} contains no dts")

    old_root_flows = set(model.root.flows)
    old_inner_flows = set(inner.flows)
    edges = {(f.src, f.dst) for f in old_root_flows | old_inner_flows}
    for p in inner.ports:
        ins = {e for e in edges if e[1] == p.ref}
        outs = {e for e in edges if e[0] == p.ref}
        edges -= ins | outs
        edges |= {(a, b) for a, _ in ins for _, b in outs if a != b}
    final = {m.Flow(a, b) for a, b in edges}

    for f in sorted(old_root_flows - final, key=lambda f: f.id):
        draft.remove_flow(root, f)
    for f in sorted(old_inner_flows, key=lambda f: f.id):
        if f in final:
            draft.move_flow(f, inner_system, root)
        else:
            draft.remove_flow(inner_system, f)
    for f in sorted(final - old_root_flows - old_inner_flows, key=lambda f: f.id):
        draft.add_flow(root, f)
    for d in inner.dts:
        draft.move_dt(d.id, root)
    for s in inner.subsystems:
        draft.move_system(s.id, root)
    for p in inner.ports:
        draft.remove_port(p.ref)
    draft.remove_system(inner_system)
    _rename(draft, model, name)
    return _finish(draft)


# -- parallel additions --------------------------------------------------------


def _check_root_scope(draft: Draft, add: Addition, root: str) -> None:
    for f in add.flows:
        for ref in (f.src, f.dst):
            owner = _resolve(ref, root).owner
            if owner == root or owner in {d.id for d in add.dts}:
                continue
            if draft.parent_of(owner) != root:
                raise TransformError(f"flow endpoint {ref.id} is not in the root system {root}")


def apply_augmented(model: m.Model, addition: Addition, *, name: Optional[str] = None) -> TransformResult:
    """Add one Dt beside the existing ones, optionally wired to them.

    Existing Dts may gain ports. Writing a control port that another Dt
    already drives is refused: augmented Dts keep their actuation separate.
    """
    draft = Draft(model)
    root = draft.root
    new = _single_new_dt(draft, addition, "augmented")
    _check_root_scope(draft, addition, root)
    for f in addition.flows:
        dst = _resolve(f.dst, root)
        port = model.port(dst)
        if dst.owner == root and port is not None and port.role == m.Role.CONTROL:
            writers = m.dt_writers(model, dst)
            if writers:
                raise TransformError(
                    f"{new.id} would also drive {dst.id}, already driven by {', '.join(writers)}; "
                    "use orthogonal followed by new_output, chaining or arbitration"
                )
    _merge(draft, addition, root, extend_dts=True)
    _rename(draft, model, name or addition.name)
    return _finish(draft)


def apply_orthogonal(model: m.Model, addition: Addition, *, name: Optional[str] = None) -> TransformResult:
    """Add one Dt that shares only existing boundary sensors and actuators.

    A resulting actuation conflict is reported as a warning, not an error.
    """
    draft = Draft(model)
    root = draft.root
    new = _single_new_dt(draft, addition, "orthogonal")
    if len(addition.dts) != 1:
        raise TransformError("orthogonal may not modify existing dts")
    if addition.ports:
        raise TransformError("orthogonal binds existing boundary ports only; it declares no new ones")
    for f in addition.flows:
        for ref in (f.src, f.dst):
            owner = _resolve(ref, root).owner
            if owner not in (root, new.id):
                raise TransformError(
                    f"flow {f.id} binds {ref.id}; connecting to another dt is an augmented transformation"
                )
    before = set(detect_actuation_conflicts(model))
    _merge(draft, addition, root, extend_dts=False)
    _rename(draft, model, name or addition.name)
    result = draft.build()
    warnings = [
        Diagnostic(
            "warning",
            "ACT-CONFLICT",
            f"{' and '.join(c.writers)} now drive {c.actuator.id}",
            (c.actuator.id, *c.writers),
        )
        for c in detect_actuation_conflicts(result)
        if c not in before
    ]
    return _finish(draft, warnings)


# -- conflict resolutions ------------------------------------------------------


def apply_new_output(
    model: m.Model,
    dt_id: str,
    new_port: m.Port,
    addition: Optional[Addition] = None,
    *,
    name: Optional[str] = None,
) -> TransformResult:
    """Give ``dt_id`` its own boundary output.

    An existing Dt has its flow onto a shared control port rerouted to the new
    port. A Dt created by ``addition`` has its unconnected output of the new
    port's unit connected to it instead.
    """
    draft = Draft(model)
    root = draft.root
    if new_port.direction != m.Direction.OUTPUT:
        raise TransformError(f"new port {new_port.name!r} must be an output")
    if new_port.name in draft.systems[root].ports:
        raise TransformError(f"{root} already has a port {new_port.name!r}")
    created: list[str] = []
    if addition is not None:
        _check_root_scope(draft, addition, root)
        created = _merge(draft, addition, root, extend_dts=False)
    _require_dt(draft, dt_id)
    if draft.parent_of(dt_id) != root:
        raise TransformError(f"dt {dt_id} is not a direct child of the root {root}")
    port = draft.add_port(root, new_port)

    if dt_id in created:
        outs = [
            p
            for p in draft.dts[dt_id].ports.values()
            if p.direction == m.Direction.OUTPUT and p.unit == port.unit and not draft.flows_from(p.ref)
        ]
        if len(outs) != 1:
            raise TransformError(f"new dt {dt_id} needs exactly one unconnected {port.unit} output, found {len(outs)}")
        draft.add_flow(root, m.Flow(outs[0].ref, port.ref))
    else:
        current = draft.build()
        shared = [
            f
            for sid, f in draft.flows()
            if sid == root
            and f.src.owner == dt_id
            and f.dst.owner == root
            and current.port(f.dst).role == m.Role.CONTROL
            and current.port(f.dst).unit == port.unit
            and len(m.dt_writers(current, f.dst)) >= 2
        ]
        if not shared:
            raise TransformError(f"dt {dt_id} has no flow onto a shared {port.unit} control port to reroute")
        if len(shared) > 1:
            raise TransformError(f"dt {dt_id} drives several shared ports: {', '.join(f.dst.id for f in shared)}")
        draft.remove_flow(root, shared[0])
        draft.add_flow(root, m.Flow(shared[0].src, port.ref))
    _rename(draft, model, name or (addition.name if addition else None))
    return _finish(draft)


def apply_chaining(
    model: m.Model, upstream: str, downstream: str, signal_unit: str, *, name: Optional[str] = None
) -> TransformResult:
    """Route ``upstream``'s actuation through ``downstream``, which gains an
    input for it and becomes the actuator's only writer."""
    if upstream == downstream:
        raise TransformError("a dt cannot be chained to itself")
    draft = Draft(model)
    _require_dt(draft, upstream)
    _require_dt(draft, downstream)
    scope = draft.parent_of(upstream)
    if draft.parent_of(downstream) != scope:
        raise TransformError(f"{downstream} is not in the same system as {upstream} ({scope})")
    if reaches(model, downstream, upstream):
        raise TransformError(f"{downstream} already feeds {upstream}; chaining would close a cycle")

    def control_flows(dt_id: str) -> list[m.Flow]:
        out = []
        for sid, f in draft.flows_from_owner(dt_id):
            port = draft.port(f.dst)
            if sid == scope and f.dst.owner == scope and port.role == m.Role.CONTROL and port.unit == signal_unit:
                out.append(f)
        return out

    ups = control_flows(upstream)
    if not ups:
        raise TransformError(f"{upstream} drives no {signal_unit} control port of {scope}")
    if len(ups) > 1:
        raise TransformError(f"{upstream} drives several {signal_unit} control ports: {', '.join(f.dst.id for f in ups)}")
    up_flow = ups[0]
    actuator = up_flow.dst
    if not any(f.dst == actuator for f in control_flows(downstream)):
        spare = [
            p
            for p in draft.dts[downstream].ports.values()
            if p.direction == m.Direction.OUTPUT and p.unit == signal_unit and not draft.flows_from(p.ref)
        ]
        if len(spare) != 1:
            raise TransformError(f"{downstream} has no free {signal_unit} output to take over {actuator.id}")
        draft.add_flow(scope, m.Flow(spare[0].ref, actuator))

    base = f"{up_flow.src.port}_in"
    port_name = base
    n = 1
    while port_name in draft.dts[downstream].ports:
        port_name = f"{base}_{n}"
        n += 1
    new_in = draft.add_port(downstream, m.Port(port_name, m.Direction.INPUT, m.Role.INTER_DT, signal_unit))
    draft.remove_flow(scope, up_flow)
    draft.add_flow(scope, m.Flow(up_flow.src, new_in.ref))
    _rename(draft, model, name)
    return _finish(draft)


def apply_arbitration(
    model: m.Model,
    writer_a: str,
    writer_b: str,
    target: m.PortRef,
    rule_key: str,
    *,
    arbiter_id: Optional[str] = None,
    name: Optional[str] = None,
) -> TransformResult:
    """Insert an arbiter Dt combining two writers' suggestions for ``target``.

    A writer already connected to ``target`` is rerouted; a writer that is
    not yet connected contributes its single output of the target's unit.
    """
    if rule_key not in m.ARBITRATION_RULES:
        raise TransformError(f"unknown arbitration rule {rule_key!r}; known: {', '.join(m.ARBITRATION_RULES)}")
    if writer_a == writer_b:
        raise TransformError("arbitration needs two distinct writers")
    draft = Draft(model)
    _require_dt(draft, writer_a)
    _require_dt(draft, writer_b)
    scope = draft.parent_of(writer_a)
    if draft.parent_of(writer_b) != scope:
        raise TransformError(f"{writer_a} and {writer_b} are not in the same system")
    port = draft.port(target)
    if port is None:
        raise TransformError(f"unknown target port {target.id}")
    if target.owner == scope:
        ok = port.direction == m.Direction.OUTPUT
    else:
        ok = draft.parent_of(target.owner) == scope and port.direction == m.Direction.INPUT
    if not ok:
        raise TransformError(f"{target.id} cannot receive a flow inside {scope}")

    def source_of(writer: str) -> tuple[Optional[m.PortRef], list[m.Flow], set[str]]:
        direct = [f for _, f in draft.flows_into(target) if f.src.owner == writer]
        outs = [p for p in draft.dts[writer].ports.values() if p.direction == m.Direction.OUTPUT]
        if direct:
            return direct[0].src, direct, {draft.port(direct[0].src).unit}
        fitting = [p for p in outs if p.unit == port.unit]
        if len(fitting) > 1:
            raise TransformError(f"{writer} has several {port.unit} outputs; connect the intended one first")
        return (fitting[0].ref if fitting else None), [], {p.unit for p in outs}

    src_a, flows_a, units_a = source_of(writer_a)
    src_b, flows_b, units_b = source_of(writer_b)
    if src_a is None or src_b is None:
        raise TransformError(
            f"unit mismatch between writers: {writer_a} emits {'/'.join(sorted(units_a)) or 'nothing'}, "
            f"{writer_b} emits {'/'.join(sorted(units_b)) or 'nothing'}, {target.id} takes {port.unit}"
        )
    if len(flows_a) > 1 or len(flows_b) > 1:
        raise TransformError(f"a writer reaches {target.id} through several outputs")

    arb = arbiter_id or draft.fresh_id("Arbiter")
    if arb in draft.ids():
        raise TransformError(f"id {arb!r} already exists")
    unit = port.unit
    draft.add_dt(
        m.Dt(
            arb,
            "Arbiter",
            (
                m.Port("in_a", m.Direction.INPUT, m.Role.INTER_DT, unit),
                m.Port("in_b", m.Direction.INPUT, m.Role.INTER_DT, unit),
                m.Port("result", m.Direction.OUTPUT, m.Role.INTER_DT, unit),
            ),
            rule_key,
        ),
        scope,
    )
    for f in flows_a + flows_b:
        draft.remove_flow(scope, f)
    draft.add_flow(scope, m.Flow(src_a, m.PortRef(arb, "in_a")))
    draft.add_flow(scope, m.Flow(src_b, m.PortRef(arb, "in_b")))
    draft.add_flow(scope, m.Flow(m.PortRef(arb, "result"), target))
    _rename(draft, model, name)
    return _finish(draft)
