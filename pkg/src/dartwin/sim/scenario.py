"""Scenario files: inputs, plant settings and behavior parameters.

Line-oriented; ``#`` starts a comment::

    duration 86400
    step 60
    input comfort_temp: 0=21
    input presence: 0=true, 43200=false
    plant outdoor_temp: 0=5
    plant thermal_mass 2.0e6
    param freeze_protection.threshold 8.05
    param cost_saving.table 0.25:-1, 0.40:-2
    bind NoFreezing.room_temp = room_temp

A timeline is piecewise constant: the value at ``t`` is the one attached to
the latest breakpoint not after ``t``. The first breakpoint must be 0.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class Timeline:
    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.times or self.times[0] != 0:
            raise ScenarioError("timeline must start at t=0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ScenarioError("timeline breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "Timeline":
        return cls((0.0,), (float(value),))

    def at(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.times, t) - 1]


@dataclass(frozen=True)
class PlantParams:
    outdoor_temp: Timeline = Timeline.constant(5.0)
    thermal_mass: float = 2.0e6  # J/K
    loss_coefficient: float = 50.0  # W/K
    heater_power: float = 2000.0  # W per heater
    initial_temp: float = 20.0

    def check(self) -> None:
        for name in ("thermal_mass", "loss_coefficient"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"plant {name} must be positive")
        if self.heater_power < 0:
            raise ScenarioError("plant heater_power must be non-negative")


@dataclass(frozen=True)
class Scenario:
    duration: float
    step: float
    inputs: dict[str, Timeline] = field(default_factory=dict)
    plant: PlantParams = PlantParams()
    params: dict[str, dict[str, Any]] = field(default_factory=dict)
    bindings: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.step <= 0:
            raise ScenarioError("step must be positive")
        if self.duration < 0:
            raise ScenarioError("duration must be non-negative")
        n = self.duration / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ScenarioError("duration must be a whole number of steps")
        self.plant.check()

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.step))


_PLANT_SCALARS = ("thermal_mass", "loss_coefficient", "heater_power", "initial_temp")


def _value(text: str, line: int) -> float:
    low = text.strip().lower()
    if low in ("true", "on"):
        return 1.0
    if low in ("false", "off"):
        return 0.0
    try:
        return float(low)
    except ValueError:
        raise ScenarioError(f"not a number: {text.strip()!r}", line) from None


def _timeline(text: str, line: int) -> Timeline:
    pts = []
    for item in text.split(","):
        if "=" not in item:
            raise ScenarioError(f"expected time=value, got {item.strip()!r}", line)
        t, v = item.split("=", 1)
        pts.append((_value(t, line), _value(v, line)))
    try:
        return Timeline(tuple(p[0] for p in pts), tuple(p[1] for p in pts))
    except ScenarioError as e:
        raise ScenarioError(str(e), line) from None


def _param_value(text: str, line: int) -> Union[float, tuple]:
    if ":" in text:
        rows = []
        for item in text.split(","):
            a, _, b = item.partition(":")
            rows.append((_value(a, line), _value(b, line)))
        return tuple(rows)
    return _value(text, line)


def parse_scenario(text: str) -> Scenario:
    duration = step = None
    inputs: dict[str, Timeline] = {}
    plant: dict[str, Any] = {}
    params: dict[str, dict[str, Any]] = {}
    bindings: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if word in ("duration", "step"):
            v = _value(rest, no)
            if word == "duration":
                duration = v
            else:
                step = v
        elif word == "input":
            name, sep, tl = rest.partition(":")
            if not sep:
                raise ScenarioError("expected 'input name: t=v, ...'", no)
            inputs[name.strip()] = _timeline(tl, no)
        elif word == "plant":
            if rest.startswith("outdoor_temp"):
                _, sep, tl = rest.partition(":")
                if not sep:
                    raise ScenarioError("expected 'plant outdoor_temp: t=v, ...'", no)
                plant["outdoor_temp"] = _timeline(tl, no)
            else:
                key, _, v = rest.partition(" ")
                if key not in _PLANT_SCALARS:
                    raise ScenarioError(f"unknown plant setting {key!r}", no)
                plant[key] = _value(v, no)
        elif word == "param":
            key, _, v = rest.partition(" ")
            behavior, dot, pname = key.partition(".")
            if not dot or not pname or not v.strip():
                raise ScenarioError("expected 'param behavior.name value'", no)
            params.setdefault(behavior, {})[pname] = _param_value(v, no)
        elif word == "bind":
            poi, sep, channel = rest.partition("=")
            if not sep or not poi.strip() or not channel.strip():
                raise ScenarioError("expected 'bind Goal.poi = channel'", no)
            bindings[poi.strip()] = channel.strip()
        else:
            raise ScenarioError(f"unknown directive {word!r}", no)
    if duration is None or step is None:
        raise ScenarioError("scenario needs both 'duration' and 'step'")
    return Scenario(duration, step, inputs, PlantParams(**plant), params, bindings)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))
