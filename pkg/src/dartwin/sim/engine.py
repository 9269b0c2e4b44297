"""Discrete-time execution of a model against a thermal plant.

Binding resolves every Dt to a registered behavior and fixes the evaluation
order. Each step then reads the plant and scenario inputs, runs the Dts in
order, copies every port value into the trace and advances the plant by one
explicit Euler step::

    T' = T + step * (P * heaters_on - k * (T - outdoor)) / C

Root boundary inputs carrying a monitored temperature read the room
temperature. Root boundary control outputs of unit ``on_off`` drive heaters.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

from .. import model as m
from .behaviors import BUILTIN_REGISTRY, Behavior, StepContext, check_price_table, match_slots
from .scenario import Scenario, ScenarioError

FIXED_CHANNELS = ("time", "room_temp", "outdoor_temp", "energy_used", "heater_on_time")


class BindingError(ValueError):
    """The model cannot be executed with the given behavior registry."""


# A resolved signal source: ("root", port name) or ("dt", dt id, port name).
Source = tuple


@dataclass(frozen=True)
class BoundDt:
    dt: m.Dt
    behavior: Behavior
    slots: Mapping[str, Optional[Source]]
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class ExecutablePlan:
    model: m.Model
    order: tuple[str, ...]
    bound: Mapping[str, BoundDt]
    sources: Mapping[str, Optional[Source]]  # port id -> terminal source
    plant_inputs: tuple[str, ...]
    heaters: tuple[str, ...]


def _drivers(model: m.Model) -> dict[m.PortRef, m.PortRef]:
    into: dict[m.PortRef, list[m.PortRef]] = {}
    for f in model.flows():
        into.setdefault(f.dst, []).append(f.src)
    out = {}
    for dst, srcs in into.items():
        if len(srcs) > 1:
            names = ", ".join(sorted(s.id for s in srcs))
            raise BindingError(f"{dst.id} is written by more than one source ({names}); resolve the conflict first")
        out[dst] = srcs[0]
    return out


def _terminal(model: m.Model, ref: m.PortRef, drivers: dict) -> Optional[Source]:
    root = model.root.id
    seen = set()
    while True:
        if ref.owner == root and model.port(ref).direction == m.Direction.INPUT:
            return ("root", ref.port)
        if ref.owner in {d.id for d in model.dts()} and model.port(ref).direction == m.Direction.OUTPUT:
            return ("dt", ref.owner, ref.port)
        if ref in seen or ref not in drivers:
            return None
        seen.add(ref)
        ref = drivers[ref]


def bind_behaviors(model: m.Model, registry: Mapping[str, Behavior] = BUILTIN_REGISTRY) -> ExecutablePlan:
    drivers = _drivers(model)
    sources: dict[str, Optional[Source]] = {}
    for s in model.systems():
        for p in s.ports:
            sources[p.id] = _terminal(model, p.ref, drivers)
    for d in model.dts():
        for p in d.ports:
            sources[p.id] = _terminal(model, p.ref, drivers)

    bound: dict[str, BoundDt] = {}
    for d in model.dts():
        if d.behavior_key is None:
            raise BindingError(f"Dt {d.id} has no behavior")
        beh = registry.get(d.behavior_key)
        if beh is None:
            raise BindingError(f"Dt {d.id}: no behavior registered for {d.behavior_key!r}")
        ins = [(p.name, p.unit, p.role.value) for p in d.ports if p.direction == m.Direction.INPUT]
        try:
            slots = match_slots(beh, ins)
        except ValueError as e:
            raise BindingError(f"Dt {d.id}: {e}") from None
        resolved = {}
        for slot, pname in slots.items():
            src = sources[f"{d.id}.{pname}"] if pname else None
            required = next(s.required for s in beh.inputs if s.name == slot)
            if src is None and required:
                raise BindingError(f"Dt {d.id}: input {pname or slot} is not connected")
            resolved[slot] = src
        outs = [p for p in d.ports if p.direction == m.Direction.OUTPUT]
        wrong = [p.name for p in outs if p.unit != beh.output_unit]
        if wrong:
            raise BindingError(f"Dt {d.id}: output(s) {', '.join(wrong)} do not carry {beh.output_unit}")
        bound[d.id] = BoundDt(d, beh, resolved, tuple(p.name for p in outs))

    # Dependency order, ties broken by id.
    deps = {i: {s[1] for s in b.slots.values() if s and s[0] == "dt"} for i, b in bound.items()}
    users: dict[str, set[str]] = {i: set() for i in bound}
    for i, ds in deps.items():
        for d in ds:
            users[d].add(i)
    pending = {i: len(ds) for i, ds in deps.items()}
    heap = [i for i, n in pending.items() if n == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for u in users[i]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(heap, u)
    if len(order) != len(bound):
        cyc = sorted(set(bound) - set(order))
        raise BindingError(f"cyclic flows between Dts: {', '.join(cyc)}")

    root = model.root
    plant_inputs = tuple(
        p.name
        for p in root.ports
        if p.direction == m.Direction.INPUT and p.unit == "celsius" and p.role == m.Role.MONITORING
    )
    heaters = tuple(
        p.id
        for p in root.ports
        if p.direction == m.Direction.OUTPUT and p.unit == "on_off" and p.role == m.Role.CONTROL
    )
    return ExecutablePlan(model, tuple(order), bound, sources, plant_inputs, heaters)


@dataclass(frozen=True)
class Trace:
    """Sampled channels; every array has ``steps + 1`` entries."""

    step: float
    channels: Mapping[str, np.ndarray]

    @property
    def time(self) -> np.ndarray:
        return self.channels["time"]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.channels

    def names(self) -> list[str]:
        fixed = [c for c in FIXED_CHANNELS if c in self.channels]
        return fixed + sorted(c for c in self.channels if c not in FIXED_CHANNELS)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.names()
        w.writerow(names)
        for k in range(len(self.time)):
            w.writerow([repr(float(self.channels[n][k])) for n in names])
        return buf.getvalue()


def _params(plan: ExecutablePlan, scenario: Scenario) -> dict[str, dict[str, Any]]:
    used = {b.behavior.key for b in plan.bound.values()}
    out = {}
    for key, given in scenario.params.items():
        if key not in BUILTIN_REGISTRY and key not in used:
            raise ScenarioError(f"param for unknown behavior {key!r}")
    for i, b in plan.bound.items():
        given = scenario.params.get(b.behavior.key, {})
        try:
            b.behavior.check_params(given)
        except ValueError as e:
            raise ScenarioError(str(e)) from None
        p = {**b.behavior.defaults, **given}
        if "table" in p:
            try:
                check_price_table(p["table"])
            except ValueError as e:
                raise ScenarioError(str(e)) from None
        out[i] = p
    return out


def _scalar(v: Any) -> float:
    if v is None:
        return math.nan
    if isinstance(v, (bool, int, float, np.floating)):
        return float(v)
    return math.nan


def run(plan: ExecutablePlan, scenario: Scenario) -> Trace:
    model = plan.model
    root = model.root
    params = _params(plan, scenario)
    needed = [
        p.name
        for p in root.ports
        if p.direction == m.Direction.INPUT
        and p.name not in plan.plant_inputs
        and any(src == ("root", p.name) for src in plan.sources.values())
    ]
    missing = [n for n in needed if n not in scenario.inputs]
    if missing:
        raise ScenarioError(f"no input timeline for {', '.join(missing)}")

    n = scenario.steps
    step = scenario.step
    pl = scenario.plant
    port_ids = sorted(plan.sources)
    ch = {c: np.empty(n + 1) for c in (*FIXED_CHANNELS, *port_ids)}
    state = {i: plan.bound[i].behavior.initial_state() for i in plan.order}

    temp, energy, on_time = pl.initial_temp, 0.0, 0.0
    for k in range(n + 1):
        t = k * step
        outdoor = pl.outdoor_temp.at(t)
        signals = {name: tl.at(t) for name, tl in scenario.inputs.items()}
        roots = {name: signals.get(name) for name in (p.name for p in root.ports)}
        roots.update({name: temp for name in plan.plant_inputs})
        produced: dict[tuple[str, str], Any] = {}

        def value(src: Optional[Source]) -> Any:
            if src is None:
                return None
            return roots.get(src[1]) if src[0] == "root" else produced.get((src[1], src[2]))

        ctx = StepContext(t, step, signals)
        for i in plan.order:
            b = plan.bound[i]
            inputs = {slot: value(src) for slot, src in b.slots.items()}
            out, state[i] = b.behavior.step(inputs, params[i], state[i], ctx)
            for name in b.outputs:
                produced[(i, name)] = out

        for pid in port_ids:
            ch[pid][k] = _scalar(value(plan.sources[pid]))
        ch["time"][k] = t
        ch["room_temp"][k] = temp
        ch["outdoor_temp"][k] = outdoor
        ch["energy_used"][k] = energy
        ch["heater_on_time"][k] = on_time

        if k < n:
            on = sum(1 for h in plan.heaters if ch[h][k] > 0.5)
            power = pl.heater_power * on
            energy += power * step
            on_time += step if on else 0.0
            temp = temp + step * (power - pl.loss_coefficient * (temp - outdoor)) / pl.thermal_mass
    return Trace(step, ch)


def simulate(model: m.Model, scenario: Scenario, registry: Mapping[str, Behavior] = BUILTIN_REGISTRY) -> Trace:
    return run(bind_behaviors(model, registry), scenario)
