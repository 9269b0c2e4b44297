"""Built-in Dt behaviors.

Each behavior is a pure per-step function of its inputs, parameters and a
private state. The registry entries describe which Dt ports feed which
argument: a slot matches an input port by unit and role, with the port name
used only to break ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, NamedTuple, Optional, Sequence

ANY_ROLE = ("monitoring", "control", "user", "inter_dt")


class KineticLimits(NamedTuple):
    max_velocity: float
    max_acceleration: float


# -- pure rules ----------------------------------------------------------------


def thermostat_command(room_temp: float, comfort_temp: float, deviation: float, previous: bool) -> bool:
    """Hysteresis: on below the band, off above it, otherwise hold."""
    if room_temp < comfort_temp - deviation:
        return True
    if room_temp > comfort_temp + deviation:
        return False
    return previous


def energy_saving_setpoint(
    user_comfort_temp: float, present: bool, is_day: bool, absent_day_delta: float, absent_night_delta: float
) -> float:
    if present:
        return user_comfort_temp
    return user_comfort_temp + (absent_day_delta if is_day else absent_night_delta)


def freeze_protection_command(room_temp: float, upstream: bool, threshold: float) -> bool:
    return True if room_temp <= threshold else upstream


def check_price_table(table: Sequence[tuple[float, float]]) -> None:
    thresholds = [t for t, _ in table]
    deltas = [d for _, d in table]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("malformed table: thresholds must be strictly increasing")
    if any(b > a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("malformed table: deltas must not increase with price")
    if any(d > 0 for d in deltas):
        raise ValueError("malformed table: deltas must be <= 0")


def cost_saving_setpoint(price: float, user_comfort_temp: float, table: Sequence[tuple[float, float]]) -> float:
    """Add the delta of the highest threshold not above ``price``."""
    check_price_table(table)
    delta = 0.0
    for threshold, d in table:
        if threshold <= price:
            delta = d
    return user_comfort_temp + delta


def arbiter_min(a: float, b: float) -> float:
    return a if a <= b else b


def arbiter_strictest(a: Any, b: Any) -> Any:
    """Componentwise minimum of two limit records (plain numbers work too)."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return type(a)(*(min(x, y) for x, y in zip(a, b)))
    return min(a, b)


@dataclass
class FireProtectionState:
    on_time: float = 0.0
    cooling: float = 0.0


def fire_protection_step(
    upstream: bool, state: FireProtectionState, step: float, max_on: float, cooloff: float
) -> tuple[bool, FireProtectionState]:
    """Forward ``upstream`` but never let one on-run exceed ``max_on``.

    When another step would exceed it, the heater is held off for
    ``cooloff`` seconds before forwarding resumes.
    """
    if state.cooling > 0:
        return False, FireProtectionState(0.0, max(0.0, state.cooling - step))
    if not upstream:
        return False, FireProtectionState(0.0, 0.0)
    if state.on_time + step <= max_on:
        return True, FireProtectionState(state.on_time + step, 0.0)
    return False, FireProtectionState(0.0, max(0.0, cooloff - step))


# -- registry ------------------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    name: str
    unit: str
    roles: tuple[str, ...] = ANY_ROLE
    required: bool = True


@dataclass(frozen=True)
class StepContext:
    time: float
    step: float
    signals: Mapping[str, float]


@dataclass(frozen=True)
class Behavior:
    """``step(inputs, params, state, ctx) -> (output, new_state)``."""

    key: str
    inputs: tuple[Slot, ...]
    output_unit: str
    step: Callable[[dict, dict, Any, StepContext], tuple[Any, Any]]
    defaults: Mapping[str, Any] = field(default_factory=dict)
    initial_state: Callable[[], Any] = lambda: None

    def check_params(self, params: Mapping[str, Any]) -> None:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValueError(f"behavior {self.key!r} has no parameter(s) {', '.join(sorted(unknown))}")


def _thermostat(i, p, prev, ctx):
    on = thermostat_command(i["room_temp"], i["comfort_temp"], p["deviation"], bool(prev))
    return on, on


def _is_day(ctx: StepContext, p) -> bool:
    if "is_day" in ctx.signals:
        return bool(ctx.signals["is_day"])
    hour = (ctx.time / 3600.0) % 24.0
    return p["day_start"] <= hour < p["day_end"]


def _energy_saving(i, p, state, ctx):
    present = bool(i["presence"])
    out = energy_saving_setpoint(
        i["comfort_temp"], present, _is_day(ctx, p), p["absent_day_delta"], p["absent_night_delta"]
    )
    return out, state


def _freeze(i, p, state, ctx):
    upstream = i.get("upstream")
    return freeze_protection_command(i["room_temp"], bool(upstream) if upstream is not None else False, p["threshold"]), state


def _fire(i, p, state, ctx):
    return fire_protection_step(bool(i["upstream"]), state, ctx.step, p["max_on"], p["cooloff"])


def _cost(i, p, state, ctx):
    return cost_saving_setpoint(i["price"], i["comfort_temp"], p["table"]), state


def _min(i, p, state, ctx):
    return arbiter_min(i["in_a"], i["in_b"]), state


def _strictest(i, p, state, ctx):
    return arbiter_strictest(i["in_a"], i["in_b"]), state


BUILTIN_REGISTRY: dict[str, Behavior] = {
    b.key: b
    for b in (
        Behavior(
            "thermostat",
            (Slot("room_temp", "celsius", ("monitoring",)), Slot("comfort_temp", "celsius", ("user", "inter_dt"))),
            "on_off",
            _thermostat,
            {"deviation": 0.5},
            lambda: False,
        ),
        Behavior(
            "energy_saving",
            (Slot("comfort_temp", "celsius", ("user", "inter_dt")), Slot("presence", "boolean", ("monitoring",))),
            "celsius",
            _energy_saving,
            {"absent_day_delta": -2.0, "absent_night_delta": -4.0, "day_start": 6.0, "day_end": 22.0},
        ),
        Behavior(
            "freeze_protection",
            (Slot("room_temp", "celsius", ("monitoring",)), Slot("upstream", "on_off", required=False)),
            "on_off",
            _freeze,
            {"threshold": 8.0},
        ),
        Behavior(
            "fire_protection",
            (Slot("upstream", "on_off"),),
            "on_off",
            _fire,
            {"max_on": 3600.0, "cooloff": 600.0},
            FireProtectionState,
        ),
        Behavior(
            "cost_saving",
            (Slot("price", "currency_per_kwh", ("monitoring",)), Slot("comfort_temp", "celsius", ("user", "inter_dt"))),
            "celsius",
            _cost,
            {"table": ((0.25, -1.0), (0.40, -2.0))},
        ),
        Behavior("min", (Slot("in_a", "celsius"), Slot("in_b", "celsius")), "celsius", _min),
        Behavior(
            "strictest",
            (Slot("in_a", "kinetic_limits"), Slot("in_b", "kinetic_limits")),
            "kinetic_limits",
            _strictest,
        ),
    )
}


def match_slots(behavior: Behavior, ports: Sequence[tuple[str, str, str]]) -> dict[str, Optional[str]]:
    """Assign input ports ``(name, unit, role)`` to the behavior's slots.

    Returns slot name to port name (None for an absent optional slot).
    Raises ValueError when a required slot finds no port or a port is left
    without a slot.
    """
    free = sorted(ports)
    out: dict[str, Optional[str]] = {}
    for slot in behavior.inputs:
        fits = [p for p in free if p[1] == slot.unit and p[2] in slot.roles]
        named = [p for p in fits if p[0] == slot.name]
        pick = (named or fits or [None])[0]
        if pick is None:
            if slot.required:
                raise ValueError(f"no {slot.unit} input for {slot.name!r}")
            out[slot.name] = None
            continue
        free.remove(pick)
        out[slot.name] = pick[0]
    if free:
        raise ValueError(f"input(s) {', '.join(p[0] for p in free)} have no meaning for behavior {behavior.key!r}")
    return out


def finite(value: Any) -> bool:
    return not isinstance(value, float) or math.isfinite(value)
