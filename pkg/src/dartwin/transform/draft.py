"""Mutable editing copy of a Model that records what each edit touches.

Transformations edit a Draft and read the change set from the edit log. The
rules mirror what an element owns: a system owns its port, Dt, subsystem and
flow lists; a Dt owns its ports and is touched by flows on them; a port is
touched by flows on it; a flow owns its containing system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .. import model as m
from .changeset import ChangeSet


@dataclass
class _Sys:
    id: str
    name: str
    kind: m.SystemKind
    parent: Optional[str]
    ports: dict[str, m.Port] = field(default_factory=dict)
    dts: list[str] = field(default_factory=list)
    subs: list[str] = field(default_factory=list)
    flows: dict[str, m.Flow] = field(default_factory=dict)


@dataclass
class _Dt:
    id: str
    name: str
    behavior: Optional[str]
    parent: str
    ports: dict[str, m.Port] = field(default_factory=dict)


class Draft:
    def __init__(self, model: m.Model):
        self.name = model.name
        self.extends = model.extends_name
        self.goals = {g.id: g for g in model.goals}
        self.edges = {e.id: e for e in model.goal_edges}
        self.links = {l.id: l for l in model.links}
        self.systems: dict[str, _Sys] = {}
        self.dts: dict[str, _Dt] = {}
        self.root = model.root.id
        self._load(model.root, None)
        self._original = set(model.ids())
        self._added: set[str] = set()
        self._removed: set[str] = set()
        self._touched: set[str] = set()

    def _load(self, s: m.TwinSystem, parent: Optional[str]) -> None:
        rec = _Sys(s.id, s.name, s.kind, parent, {p.name: p for p in s.ports})
        self.systems[s.id] = rec
        for d in s.dts:
            self.dts[d.id] = _Dt(d.id, d.name, d.behavior_key, s.id, {p.name: p for p in d.ports})
            rec.dts.append(d.id)
        for sub in s.subsystems:
            self._load(sub, s.id)
            rec.subs.append(sub.id)
        rec.flows = {f.id: f for f in s.flows}

    # -- lookups -------------------------------------------------------------

    def ids(self) -> set[str]:
        out = set(self.goals) | set(self.edges) | set(self.links)
        out |= {p.id for g in self.goals.values() for p in g.pois}
        for s in self.systems.values():
            out.add(s.id)
            out |= {p.id for p in s.ports.values()}
            out |= set(s.flows)
        for d in self.dts.values():
            out.add(d.id)
            out |= {p.id for p in d.ports.values()}
        return out

    def fresh_id(self, base: str) -> str:
        """``<base>_<n>`` with the smallest free n."""
        taken = self.ids()
        n = 1
        while f"{base}_{n}" in taken:
            n += 1
        return f"{base}_{n}"

    def owner_ports(self, owner: str) -> dict[str, m.Port]:
        if owner in self.dts:
            return self.dts[owner].ports
        return self.systems[owner].ports

    def port(self, ref: m.PortRef) -> Optional[m.Port]:
        if ref.owner in self.dts:
            return self.dts[ref.owner].ports.get(ref.port)
        if ref.owner in self.systems:
            return self.systems[ref.owner].ports.get(ref.port)
        return None

    def parent_of(self, element: str) -> Optional[str]:
        if element in self.dts:
            return self.dts[element].parent
        if element in self.systems:
            return self.systems[element].parent
        return None

    def flows(self) -> list[tuple[str, m.Flow]]:
        """``(system id, flow)`` for every flow, sorted by flow id."""
        return sorted(((s.id, f) for s in self.systems.values() for f in s.flows.values()), key=lambda x: x[1].id)

    def flows_into(self, ref: m.PortRef) -> list[tuple[str, m.Flow]]:
        return [(s, f) for s, f in self.flows() if f.dst == ref]

    def flows_from_owner(self, owner: str) -> list[tuple[str, m.Flow]]:
        return [(s, f) for s, f in self.flows() if f.src.owner == owner]

    def flows_from(self, ref: m.PortRef) -> list[tuple[str, m.Flow]]:
        return [(s, f) for s, f in self.flows() if f.src == ref]

    # -- edit log ------------------------------------------------------------

    def _add(self, eid: str) -> None:
        if eid in self._original:
            self._touched.add(eid)
        self._added.add(eid)
        self._removed.discard(eid)

    def _remove(self, eid: str) -> None:
        self._removed.add(eid)
        self._added.discard(eid)

    def _touch(self, *eids: Optional[str]) -> None:
        self._touched.update(e for e in eids if e)

    def _touch_endpoint(self, ref: m.PortRef) -> None:
        self._touch(ref.id)
        if ref.owner in self.dts:
            self._touch(ref.owner)

    # -- edits ---------------------------------------------------------------

    def rename(self, name: str, extends: Optional[str]) -> None:
        self.name, self.extends = name, extends

    def add_goal(self, goal: m.Goal) -> None:
        self.goals[goal.id] = goal
        self._add(goal.id)
        for p in goal.pois:
            self._add(p.id)

    def add_edge(self, edge: m.GoalEdge) -> None:
        self.edges[edge.id] = edge
        self._add(edge.id)

    def add_link(self, link: m.DtGoalLink) -> None:
        self.links[link.id] = link
        self._add(link.id)

    def add_system(self, system_id: str, name: str, parent: Optional[str], kind=m.SystemKind.TWIN_SYSTEM) -> None:
        self.systems[system_id] = _Sys(system_id, name, kind, parent)
        self._add(system_id)
        if parent is not None:
            self.systems[parent].subs.append(system_id)
            self._touch(parent)

    def remove_system(self, system_id: str) -> None:
        rec = self.systems.pop(system_id)
        assert not rec.dts and not rec.subs and not rec.flows and not rec.ports
        self._remove(system_id)
        if rec.parent is not None:
            self.systems[rec.parent].subs.remove(system_id)
            self._touch(rec.parent)

    def move_system(self, system_id: str, parent: str) -> None:
        rec = self.systems[system_id]
        if rec.parent is not None:
            self.systems[rec.parent].subs.remove(system_id)
            self._touch(rec.parent)
        rec.parent = parent
        self.systems[parent].subs.append(system_id)
        self._touch(parent, system_id)

    def set_root(self, system_id: str) -> None:
        self.root = system_id

    def add_dt(self, dt: m.Dt, system_id: str) -> None:
        self.dts[dt.id] = _Dt(dt.id, dt.name, dt.behavior_key, system_id, {p.name: p for p in dt.ports})
        self.systems[system_id].dts.append(dt.id)
        self._add(dt.id)
        for p in dt.ports:
            self._add(p.id)
        self._touch(system_id)

    def move_dt(self, dt_id: str, system_id: str) -> None:
        rec = self.dts[dt_id]
        self.systems[rec.parent].dts.remove(dt_id)
        self._touch(rec.parent)
        rec.parent = system_id
        self.systems[system_id].dts.append(dt_id)
        self._touch(system_id, dt_id)

    def add_port(self, owner: str, port: m.Port) -> m.Port:
        port = m.Port(port.name, port.direction, port.role, port.unit, owner)
        self.owner_ports(owner)[port.name] = port
        self._add(port.id)
        self._touch(owner)
        return port

    def remove_port(self, ref: m.PortRef) -> None:
        del self.owner_ports(ref.owner)[ref.port]
        self._remove(ref.id)
        self._touch(ref.owner)

    def add_flow(self, system_id: str, flow: m.Flow) -> None:
        self.systems[system_id].flows[flow.id] = flow
        self._add(flow.id)
        self._touch(system_id)
        self._touch_endpoint(flow.src)
        self._touch_endpoint(flow.dst)

    def remove_flow(self, system_id: str, flow: m.Flow) -> None:
        del self.systems[system_id].flows[flow.id]
        self._remove(flow.id)
        self._touch(system_id)
        self._touch_endpoint(flow.src)
        self._touch_endpoint(flow.dst)

    def move_flow(self, flow: m.Flow, src_system: str, dst_system: str) -> None:
        del self.systems[src_system].flows[flow.id]
        self.systems[dst_system].flows[flow.id] = flow
        self._touch(src_system, dst_system, flow.id)

    # -- results -------------------------------------------------------------

    def _build_system(self, system_id: str) -> m.TwinSystem:
        s = self.systems[system_id]
        dts = tuple(
            m.Dt(d, self.dts[d].name, tuple(self.dts[d].ports.values()), self.dts[d].behavior) for d in s.dts
        )
        subs = tuple(self._build_system(x) for x in s.subs)
        return m.TwinSystem(s.id, s.name, s.kind, tuple(s.ports.values()), dts, subs, tuple(s.flows.values()))

    def build(self) -> m.Model:
        return m.Model(
            self.name,
            self._build_system(self.root),
            tuple(self.goals.values()),
            tuple(self.edges.values()),
            tuple(self.links.values()),
            self.extends,
        )

    def changes(self) -> ChangeSet:
        final = self.ids()
        added = {i for i in self._added if i in final and i not in self._original}
        removed = {i for i in self._removed if i not in final and i in self._original}
        modified = {i for i in self._touched if i in final and i in self._original}
        return ChangeSet(tuple(added), tuple(removed), tuple(modified))
