"""Bundled fixture models and simulation scenarios."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..model import Model
from ..parser import load_model

# The eleven reference models. ``compromise_base`` is the pre-arbiter state
# used as a transformation source and is listed separately.
FIXTURES = (
    "thermal_comfort",
    "green_comfort",
    "flat_green_comfort",
    "orthogonal_freeze",
    "additional_heater",
    "chained_freeze",
    "compromise_saving",
    "gantry_initial",
    "gantry_evolution1",
    "gantry_evolution2",
    "gantry_evolution3",
)
EXTRA = ("compromise_base",)


def path(name: str) -> Path:
    """Filesystem path of a fixture (``.dartwin``) or scenario (``.scn``)."""
    root = resources.files(__name__)
    if name.endswith(".scn"):
        return Path(str(root / "scenarios" / name))
    return Path(str(root / f"{name}.dartwin"))


def text(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def load(name: str) -> Model:
    return load_model(text(name), f"{name}.dartwin")


def scenarios() -> list[str]:
    return sorted(p.name for p in Path(str(resources.files(__name__) / "scenarios")).glob("*.scn"))
