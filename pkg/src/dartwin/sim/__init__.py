"""Simulation of thermostat models against a lumped thermal plant."""

from .behaviors import (
    BUILTIN_REGISTRY,
    Behavior,
    FireProtectionState,
    KineticLimits,
    Slot,
    StepContext,
    arbiter_min,
    arbiter_strictest,
    check_price_table,
    cost_saving_setpoint,
    energy_saving_setpoint,
    fire_protection_step,
    freeze_protection_command,
    thermostat_command,
)
from .engine import FIXED_CHANNELS, BindingError, ExecutablePlan, Trace, bind_behaviors, run, simulate
from .goals import GoalEvaluationError, GoalReport, GoalResult, evaluate_goals, false_runs
from .scenario import PlantParams, Scenario, ScenarioError, Timeline, load_scenario, parse_scenario

__all__ = [
    "BUILTIN_REGISTRY", "Behavior", "BindingError", "ExecutablePlan", "FIXED_CHANNELS", "FireProtectionState",
    "GoalEvaluationError", "GoalReport", "GoalResult", "KineticLimits", "PlantParams", "Scenario",
    "ScenarioError", "Slot", "StepContext", "Timeline", "Trace", "arbiter_min", "arbiter_strictest",
    "bind_behaviors", "check_price_table", "cost_saving_setpoint", "energy_saving_setpoint",
    "evaluate_goals", "false_runs", "fire_protection_step", "freeze_protection_command", "load_scenario",
    "parse_scenario", "run", "simulate", "thermostat_command",
]
