"""The evolution steps between corpus fixtures, shared by several test modules."""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional

from dartwin import corpus
from dartwin import model as m
from dartwin.transform import (
    Addition,
    TransformResult,
    apply_arbitration,
    apply_augmented,
    apply_chaining,
    apply_hierarchical,
    apply_new_output,
    apply_orthogonal,
    flatten,
)


def addition(name: str) -> Addition:
    return Addition.parse(corpus.text(f"additions/{name}"), f"{name}.dartwin")


class Step(NamedTuple):
    label: str
    source: str  # fixture name of the input model
    target: Optional[str]  # fixture the result must be isomorphic to
    apply: Callable[[m.Model], TransformResult]
    prepare: Optional[Callable[[m.Model], m.Model]] = None

    def input(self) -> m.Model:
        model = corpus.load(self.source)
        return self.prepare(model) if self.prepare else model


def with_container_spec(g1: m.Model) -> m.Model:
    """gantry_evolution1 plus the container specification Dt, before arbitration."""
    return apply_augmented(g1, addition("container_specification")).model


STEPS = (
    Step("hierarchical", "thermal_comfort", "green_comfort", lambda s: apply_hierarchical(s, addition("energy_saving"))),
    Step("flatten", "green_comfort", "flat_green_comfort", lambda s: flatten(s, "Thermostat")),
    Step("orthogonal", "flat_green_comfort", "orthogonal_freeze", lambda s: apply_orthogonal(s, addition("freeze_protection"))),
    Step(
        "new_output",
        "orthogonal_freeze",
        "additional_heater",
        lambda s: apply_new_output(s, "FreezeProtection", m.Port("heater2", m.Direction.OUTPUT, m.Role.CONTROL, "on_off")),
    ),
    Step("chaining", "orthogonal_freeze", "chained_freeze", lambda s: apply_chaining(s, "ThermostatLogic", "FreezeProtection", "on_off")),
    Step("augmented_cost", "chained_freeze", "compromise_base", lambda s: apply_augmented(s, addition("cost_saving"))),
    Step(
        "arbitration",
        "compromise_base",
        "compromise_saving",
        lambda s: apply_arbitration(s, "EnergySaving", "CostSaving", m.PortRef("ThermostatLogic", "comfort_temp"), "min"),
    ),
    Step("augmented_gantry", "gantry_initial", "gantry_evolution1", lambda s: apply_augmented(s, addition("objects_in_area"))),
    Step(
        "new_output_gantry",
        "gantry_evolution1",
        "gantry_evolution2",
        lambda s: apply_new_output(
            s, "Validation", m.Port("metrics", m.Direction.OUTPUT, m.Role.USER, "validation_metrics"), addition("validation")
        ),
    ),
    Step(
        "augmented_container",
        "gantry_evolution1",
        None,
        lambda s: apply_augmented(s, addition("container_specification")),
    ),
    Step(
        "arbitration_gantry",
        "gantry_evolution1",
        "gantry_evolution3",
        lambda s: apply_arbitration(s, "Trajectory", "ContainerSpecification", m.PortRef("Trajectory", "limits"), "strictest"),
        with_container_spec,
    ),
)
